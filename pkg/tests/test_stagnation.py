import numpy as np
import pytest

from losswalk import (
    DataFormatError,
    StagnationParams,
    UsageError,
    WalkStagnation,
    aggregate,
    analyse_walk,
    detect_stagnant_regions,
    ewma,
    load_series,
    moving_stdev,
    normalise_series,
)


def oscillating_three_plateau_series():
    """Three quiet plateaus separated by bursts of high loss, the shape a
    gradient walk produces when it hops between basins: close plateau levels,
    strong within-plateau oscillation, and spiky transitions."""
    rng = np.random.default_rng(0)
    parts = []
    for i, level in enumerate((0.55, 0.50, 0.45)):
        parts.append(level + rng.uniform(-0.25, 0.25, size=80))
        if i < 2:
            parts.append(1.5 + rng.uniform(-0.25, 0.25, size=8))
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# ewma


def test_ewma_constant_is_fixed_point():
    out = ewma(np.full(50, 3.25), alpha=0.3)
    assert np.all(out == 3.25)


def test_ewma_two_points():
    assert ewma([1.0, 2.0], alpha=0.5) == pytest.approx([1.0, 1.5])


def test_ewma_alpha_one_is_identity(rng):
    series = rng.normal(size=100)
    assert np.array_equal(ewma(series, alpha=1.0), series)


def test_ewma_alpha_out_of_range():
    with pytest.raises(UsageError):
        ewma([1.0, 2.0], alpha=1.5)
    with pytest.raises(UsageError):
        ewma([1.0, 2.0], alpha=-0.1)


def test_ewma_recurrence_identity(rng):
    series = rng.normal(size=200)
    alpha = 0.37
    out = ewma(series, alpha)
    assert out[0] == series[0]
    recon = alpha * series[1:] + (1 - alpha) * out[:-1]
    assert np.array_equal(out[1:], recon) or np.allclose(out[1:], recon, rtol=0, atol=0)


def test_ewma_affine_equivariance(rng):
    series = rng.normal(size=150)
    a, b = 2.5, -1.75
    lhs = ewma(a * series + b, alpha=0.2)
    rhs = a * ewma(series, alpha=0.2) + b
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_ewma_rejects_empty():
    with pytest.raises(UsageError):
        ewma([], alpha=0.5)


# ---------------------------------------------------------------------------
# normalisation


def test_normalise_affine_map():
    assert normalise_series([2.0, 4.0, 6.0]) == pytest.approx([0.0, 0.5, 1.0])


def test_normalise_constant_series_to_zeros():
    assert np.all(normalise_series([5.0, 5.0, 5.0]) == 0.0)


def test_normalise_idempotent_on_full_range(rng):
    series = rng.uniform(size=100)
    series[0], series[1] = 0.0, 1.0
    assert np.array_equal(normalise_series(series), series)


# ---------------------------------------------------------------------------
# moving stdev


def test_moving_stdev_constant_is_zero():
    assert np.all(moving_stdev(np.full(30, 2.0), 4) == 0.0)


def test_moving_stdev_two_point_windows():
    assert moving_stdev([0.0, 0.0, 1.0, 1.0], 2) == pytest.approx([0.0, 0.5, 0.0])


def test_moving_stdev_matches_bruteforce(rng):
    series = rng.normal(size=60)
    w = 4
    out = moving_stdev(series, w)
    assert len(out) == len(series) - w + 1
    for i in range(len(out)):
        assert out[i] == pytest.approx(np.std(series[i:i + w]), abs=1e-14)


def test_moving_stdev_usage_errors():
    with pytest.raises(UsageError):
        moving_stdev([1.0, 2.0, 3.0], 5)
    with pytest.raises(UsageError):
        moving_stdev([1.0, 2.0, 3.0], 1)


# ---------------------------------------------------------------------------
# region detection


def test_regions_none_below_threshold():
    assert detect_stagnant_regions([0.9, 0.8, 0.7], 0.5) == []


def test_regions_hand_trace():
    assert detect_stagnant_regions([0.1, 0.1, 0.9, 0.1], 0.5) == [2, 1]


def test_regions_trailing_open_region():
    assert detect_stagnant_regions([0.1] * 7, 0.5) == [7]


def test_regions_threshold_is_strict():
    # values equal to the threshold do not extend a region
    assert detect_stagnant_regions([0.5, 0.4, 0.5], 0.5) == [1]


def test_regions_structural_properties(rng):
    for _ in range(200):
        series = rng.uniform(size=rng.integers(1, 40))
        eps = float(rng.uniform(0.2, 0.8))
        regions = detect_stagnant_regions(series, eps)
        assert sum(regions) == int(np.sum(series < eps))
        assert sum(regions) <= len(series)
        # only the below-threshold predicate matters, not the magnitudes
        squashed = np.where(series < eps, 0.0, 1.0)
        assert detect_stagnant_regions(squashed, 0.5) == regions


# ---------------------------------------------------------------------------
# analyse_walk


def test_analyse_linear_ramp_has_at_most_one_region():
    result = analyse_walk(np.linspace(0.0, 1.0, 1000))
    assert result.n <= 1


def test_analyse_constant_series_degenerates_to_zero():
    result = analyse_walk(np.full(100, 7.0))
    assert result == WalkStagnation(0, 0.0, 6)


def test_analyse_rejects_short_series():
    with pytest.raises(UsageError):
        analyse_walk(np.arange(10.0))


def test_analyse_three_plateaus_with_oscillatory_transitions():
    series = oscillating_three_plateau_series()
    result = analyse_walk(series)
    assert result.n == 3


def test_window_optimisation_is_unimodal_on_oscillatory_plateaus():
    # mean region length must rise to an interior window and fall again:
    # under-smoothing fragments the plateaus, over-smoothing erodes them
    series = oscillating_three_plateau_series()
    lengths = []
    for w in StagnationParams().window_candidates:
        one = analyse_walk(series, StagnationParams(window_candidates=(w,)))
        lengths.append(one.length)
    best = int(np.argmax(lengths))
    assert 0 < best < len(lengths) - 1
    assert lengths[best] > lengths[0] and lengths[best] > lengths[-1]


def test_analyse_picks_window_with_longest_regions():
    series = oscillating_three_plateau_series()
    per_window = {
        w: analyse_walk(series, StagnationParams(window_candidates=(w,)))
        for w in StagnationParams().window_candidates
    }
    combined = analyse_walk(series)
    best_len = max(r.length for r in per_window.values())
    assert combined.length == best_len
    # ties break toward the smallest window
    winners = [w for w, r in per_window.items() if r.length == best_len]
    assert combined.window == min(winners)


def test_stagnation_params_validation():
    with pytest.raises(UsageError):
        StagnationParams(window_candidates=(5, 8))
    with pytest.raises(UsageError):
        StagnationParams(window_candidates=(8, 6))
    with pytest.raises(UsageError):
        StagnationParams(window_candidates=())


# ---------------------------------------------------------------------------
# aggregation


def test_aggregate_single_walk():
    est = aggregate([WalkStagnation(2, 50.0, 8)])
    assert (est.n_stag, est.l_stag, est.chosen_w) == (2.0, 50.0, 8)
    assert est.n_stag_std == 0.0 and est.l_stag_std == 0.0


def test_aggregate_two_walks():
    est = aggregate([(1, 100.0, 6), (3, 200.0, 8)])
    assert est.n_stag == 2.0
    assert est.l_stag == 150.0


def test_aggregate_stdev_matches_bruteforce(rng):
    walks = [
        WalkStagnation(int(n), float(l), int(w))
        for n, l, w in zip(
            rng.integers(0, 5, size=40),
            rng.uniform(0, 500, size=40),
            rng.choice([6, 8, 10], size=40),
        )
    ]
    est = aggregate(walks)
    ns = np.array([w.n for w in walks], dtype=float)
    ls = np.array([w.length for w in walks], dtype=float)
    assert est.n_stag == pytest.approx(ns.mean(), abs=1e-15)
    assert est.n_stag_std == pytest.approx(np.sqrt(np.mean((ns - ns.mean()) ** 2)), abs=1e-12)
    assert est.l_stag_std == pytest.approx(np.sqrt(np.mean((ls - ls.mean()) ** 2)), abs=1e-12)


def test_aggregate_rejects_empty():
    with pytest.raises(UsageError):
        aggregate([])


# ---------------------------------------------------------------------------
# series files


def test_load_series_roundtrip(tmp_path):
    path = tmp_path / "series.txt"
    path.write_text("# a comment\n1.5\n2.5\n\n-3.25\n")
    assert load_series(path) == pytest.approx([1.5, 2.5, -3.25])


def test_load_series_reports_bad_line(tmp_path):
    path = tmp_path / "series.txt"
    path.write_text("1.0\nnot-a-number\n")
    with pytest.raises(DataFormatError, match="line 2"):
        load_series(path)


def test_load_series_missing_file(tmp_path):
    with pytest.raises(DataFormatError):
        load_series(tmp_path / "absent.txt")
