"""Basin-of-attraction metrics for scalar walk series.

A walk's loss sequence is normalised to [0, 1], smoothed with an
exponentially weighted moving average, and scanned for stagnant regions:
maximal runs where the moving standard deviation stays below a threshold.
The window size is optimised per series by maximising the mean stagnant
region length, and per-walk results aggregate into the n_stag / l_stag
pair (mean number of stagnant regions, mean region length in steps).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DataFormatError, UsageError

DEFAULT_WINDOWS = (6, 8, 10, 12, 14, 16, 18, 20)


def alpha_for_window(w: int) -> float:
    """EWMA decay coefficient paired with a window of size ``w``."""
    return 2.0 / (w + 1)


@dataclass(frozen=True)
class StagnationParams:
    """Window candidates for the per-series window optimisation."""

    window_candidates: tuple = DEFAULT_WINDOWS

    def __post_init__(self):
        ws = tuple(int(w) for w in self.window_candidates)
        if not ws:
            raise UsageError("window_candidates must be non-empty")
        if any(w < 2 or w % 2 for w in ws):
            raise UsageError("window candidates must be even and >= 2")
        if any(b <= a for a, b in zip(ws, ws[1:])):
            raise UsageError("window candidates must be strictly ascending")
        object.__setattr__(self, "window_candidates", ws)


class WalkStagnation(NamedTuple):
    """Stagnation summary of one walk at its optimal window."""

    n: int
    length: float
    window: int


@dataclass(frozen=True)
class BasinEstimate:
    """n_stag / l_stag aggregated over a batch of walks."""

    n_stag: float
    n_stag_std: float
    l_stag: float
    l_stag_std: float
    chosen_w: int
    per_walk: tuple = field(repr=False, default=())


def _as_series(values) -> np.ndarray:
    series = np.asarray(values, dtype=np.float64)
    if series.ndim != 1 or series.size == 0:
        raise UsageError("series must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(series)):
        raise UsageError("series contains non-finite values")
    return series


def ewma(series, alpha: float) -> np.ndarray:
    """Exponentially weighted moving average.

    ``out[0] = series[0]`` and
    ``out[i] = alpha * series[i] + (1 - alpha) * out[i - 1]``.
    """
    series = _as_series(series)
    if not 0.0 <= alpha <= 1.0:
        raise UsageError(f"alpha must lie in [0, 1], got {alpha!r}")
    out = np.empty_like(series)
    acc = series[0]
    out[0] = acc
    one_minus = 1.0 - alpha
    for i in range(1, len(series)):
        acc = alpha * series[i] + one_minus * acc
        out[i] = acc
    return out


def normalise_series(series) -> np.ndarray:
    """Affine map of a series onto [0, 1]; a constant series maps to zeros."""
    series = _as_series(series)
    lo = series.min()
    span = series.max() - lo
    if span == 0.0:
        return np.zeros_like(series)
    return (series - lo) / span


def moving_stdev(series, w: int) -> np.ndarray:
    """Population standard deviation over a sliding window of width ``w``.

    Output has length ``len(series) - w + 1`` (stride 1).
    """
    series = _as_series(series)
    if w < 2:
        raise UsageError(f"window must be >= 2, got {w}")
    if len(series) < w:
        raise UsageError(f"series of length {len(series)} is shorter than window {w}")
    return sliding_window_view(series, w).std(axis=1)


def detect_stagnant_regions(stdev_series, epsilon: float) -> list:
    """Lengths of maximal runs where the moving stdev stays below ``epsilon``.

    A region opens at the first value below the threshold, grows while
    values stay below it, closes at the first value at or above it, and a
    region still open at the end of the series is emitted as well.
    """
    lengths = []
    run = 0
    stuck = False
    for value in np.asarray(stdev_series, dtype=np.float64):
        if stuck:
            if value < epsilon:
                run += 1
            else:
                stuck = False
                lengths.append(run)
                run = 0
        elif value < epsilon:
            run = 1
            stuck = True
    if run > 0:
        lengths.append(run)
    return lengths


def analyse_walk(series, params: StagnationParams = StagnationParams()) -> WalkStagnation:
    """Stagnation count and mean region length at the best window size.

    For every candidate window ``w`` the normalised series is smoothed with
    ``alpha = 2 / (w + 1)``, the moving standard deviations are computed
    with window ``w``, and regions below a threshold are collected.  The
    threshold is the population standard deviation of the moving-stdev
    sequence itself: a threshold taken from the smoothed series is dominated
    by the spread between loss plateaus and classifies essentially every
    gradient-walk series as one long stagnant region, which defeats the
    metric.  The window with the largest mean region length wins; ties go to
    the smallest window, and a series with no regions at any window reports
    (0, 0.0, smallest candidate).
    """
    series = _as_series(series)
    candidates = params.window_candidates
    if len(series) < candidates[-1]:
        raise UsageError(
            f"series of length {len(series)} is shorter than the largest window "
            f"candidate {candidates[-1]}"
        )
    norm = normalise_series(series)
    best = WalkStagnation(0, 0.0, candidates[0])
    for w in candidates:
        smoothed = ewma(norm, alpha_for_window(w))
        stdevs = moving_stdev(smoothed, w)
        epsilon = float(stdevs.std())
        regions = detect_stagnant_regions(stdevs, epsilon)
        if regions:
            mean_len = float(np.mean(regions))
            if mean_len > best.length:
                best = WalkStagnation(len(regions), mean_len, w)
    return best


def aggregate(per_walk) -> BasinEstimate:
    """Mean and population stdev of n and l across walks."""
    per_walk = tuple(
        w if isinstance(w, WalkStagnation) else WalkStagnation(*w) for w in per_walk
    )
    if not per_walk:
        raise UsageError("cannot aggregate an empty list of walks")
    ns = np.array([w.n for w in per_walk], dtype=np.float64)
    ls = np.array([w.length for w in per_walk], dtype=np.float64)
    counts = Counter(w.window for w in per_walk)
    top = max(counts.values())
    chosen = min(w for w, c in counts.items() if c == top)
    return BasinEstimate(
        n_stag=float(ns.mean()),
        n_stag_std=float(ns.std()),
        l_stag=float(ls.mean()),
        l_stag_std=float(ls.std()),
        chosen_w=int(chosen),
        per_walk=per_walk,
    )


def load_series(path) -> np.ndarray:
    """Read a scalar series from a text file with one value per line.

    Blank lines and lines starting with ``#`` are skipped.
    """
    values = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                try:
                    values.append(float(text))
                except ValueError:
                    raise DataFormatError(
                        f"{path}: line {lineno}: not a number: {text!r}"
                    ) from None
    except OSError as exc:
        raise DataFormatError(f"cannot read series file {path}: {exc}") from exc
    if not values:
        raise DataFormatError(f"{path}: no values found")
    series = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(series)):
        raise DataFormatError(f"{path}: series contains non-finite values")
    return series
