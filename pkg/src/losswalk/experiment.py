"""Experiment orchestration: run a walk batch over a benchmark problem,
persist every artefact of the run, and summarise it in the table style used
throughout the study (mean with the standard deviation in parentheses,
five decimal places).

Run directory layout:

    config.txt          resolved configuration, one key=value per line
    walks/walk_#####.csv  per-walk trace (seed and final params in comments)
    lg_cloud.csv        all step records: walk,step,e_t,e_g,grad_mag,curvature
    basin_per_walk.csv  per-walk stagnation results for each loss series
    basin_estimates.csv aggregated n_stag / l_stag per loss series
    classification.csv  per-walk final-step classification accuracy
    summary.txt         formatted tables (what `summarise` prints)
    failures.csv        failed walks, only present when there are any

Floats in CSV artefacts are written with `repr`, which round-trips float64
exactly; identical configuration and master seed therefore reproduce every
artefact byte for byte.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .data import prepare_problem, resolve_benchmark
from .exceptions import AllWalksFailedError, DataFormatError, UsageError
from .network import (
    DEFAULT_HESSIAN_CAP,
    LossKind,
    NetworkSpec,
    PatternSet,
    forward_many,
)
from .stagnation import StagnationParams, aggregate, analyse_walk
from .walks import (
    BatchResult,
    Granularity,
    WalkConfig,
    WalkTrace,
    derive_seeds,
    eval_split_for_walk,
    run_walk_batch,
)

HESSIAN_MODES = ("auto", "on", "off")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one run."""

    problem: str
    loss: LossKind = LossKind.SSE
    granularity: Granularity = Granularity.MICRO
    init_range: float = 1.0
    walks: int | None = None          # None: 10 x param_dim
    seed: int = 0
    hessian: str = "auto"             # on | off | auto (on iff dim <= cap)
    out: str | None = None
    data: str | None = None
    threads: int = 1
    steps: int | None = None          # None: granularity default
    batch_size: int | None = None     # None: problem default
    batch_per_step: bool = False
    split_fraction: float = 0.8
    zero_tol_rel: float = 1e-6
    hessian_cap: int = DEFAULT_HESSIAN_CAP

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        object.__setattr__(self, "granularity", Granularity(self.granularity))
        if self.hessian not in HESSIAN_MODES:
            raise UsageError(f"hessian must be one of {HESSIAN_MODES}")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")

    def walk_config(self) -> WalkConfig:
        return WalkConfig(
            loss=self.loss,
            granularity=self.granularity,
            init_range=self.init_range,
            seed=self.seed,
            steps=self.steps,
        )


_CONFIG_PARSERS = {
    "problem": str,
    "loss": str,
    "granularity": str,
    "init_range": float,
    "walks": int,
    "seed": int,
    "hessian": str,
    "out": str,
    "data": str,
    "threads": int,
    "steps": int,
    "batch_size": int,
    "batch_per_step": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "split_fraction": float,
    "zero_tol_rel": float,
    "hessian_cap": int,
}


def read_config_file(path) -> dict:
    """Parse a key=value configuration file (same keys as the CLI flags)."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise UsageError(f"{path}: line {lineno}: expected key=value")
        key, _, raw = text.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_PARSERS:
            raise UsageError(f"{path}: line {lineno}: unknown key {key!r}")
        if not raw.strip():
            continue  # empty value means unset; keeps run snapshots reusable
        try:
            values[key] = _CONFIG_PARSERS[key](raw.strip())
        except ValueError:
            raise UsageError(
                f"{path}: line {lineno}: bad value {raw.strip()!r} for {key}"
            ) from None
    return values


def config_from(values: dict) -> ExperimentConfig:
    if "problem" not in values or values["problem"] is None:
        raise UsageError("a problem name is required (flag --problem or config file)")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**values)


def resolve_hessian_mode(config: ExperimentConfig, spec: NetworkSpec) -> bool:
    if config.hessian == "off":
        return False
    if config.hessian == "on":
        if spec.param_dim > config.hessian_cap:
            raise UsageError(
                f"hessian=on but param_dim {spec.param_dim} exceeds the cap "
                f"{config.hessian_cap}; use hessian=off or raise hessian_cap"
            )
        return True
    return spec.param_dim <= config.hessian_cap


# ---------------------------------------------------------------------------
# classification accuracy


def predicted_classes(outputs: np.ndarray) -> np.ndarray:
    """Class decisions from raw outputs: argmax for multi-output networks,
    a 0.5 threshold for single-output ones (ties go to class 0)."""
    outputs = np.asarray(outputs)
    if outputs.shape[1] == 1:
        return (outputs[:, 0] > 0.5).astype(np.int64)
    return np.argmax(outputs, axis=1).astype(np.int64)


def target_classes(targets: np.ndarray) -> np.ndarray:
    targets = np.asarray(targets)
    if targets.shape[1] == 1:
        return (targets[:, 0] > 0.5).astype(np.int64)
    return np.argmax(targets, axis=1).astype(np.int64)


def classification_accuracy(spec: NetworkSpec, params, patterns: PatternSet) -> float:
    """Fraction of patterns whose predicted class matches the target class."""
    if len(patterns) == 0:
        raise UsageError("empty pattern list")
    outputs = forward_many(spec, np.asarray(params, dtype=np.float64)[None, :],
                           patterns.features)[0]
    return float(np.mean(predicted_classes(outputs) == target_classes(patterns.targets)))


# ---------------------------------------------------------------------------
# the loss-gradient cloud


@dataclass(frozen=True)
class LGCloudRecord:
    """One sampled point of the loss-gradient cloud."""

    walk: int
    step: int
    e_t: float
    e_g: float | None
    grad_mag: float
    curvature: str  # curvature class name or "none"


def records_from_traces(traces) -> list:
    """Flatten traces into cloud records ordered by (walk, step)."""
    records = []
    for walk_id, trace in enumerate(traces):
        for r in trace.records:
            curvature = r.curvature.value if r.curvature is not None else "none"
            records.append(
                LGCloudRecord(walk_id, r.step, r.train_loss, r.test_loss,
                              r.grad_mag, curvature)
            )
    return records


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def emit_lg_cloud(records, path) -> Path:
    """Write cloud records as CSV; values round-trip float64 exactly."""
    records = list(records)
    if not records:
        raise UsageError("no cloud records to emit")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("walk,step,e_t,e_g,grad_mag,curvature\n")
        for r in records:
            fh.write(
                f"{r.walk},{r.step},{_fmt(r.e_t)},{_fmt(r.e_g)},"
                f"{_fmt(r.grad_mag)},{r.curvature}\n"
            )
    return path


def read_lg_cloud(path) -> list:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"cloud file not found: {path}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "walk,step,e_t,e_g,grad_mag,curvature":
            raise DataFormatError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 6:
                raise DataFormatError(f"{path}: line {lineno}: expected 6 fields")
            walk, step, e_t, e_g, grad_mag, curvature = parts
            records.append(
                LGCloudRecord(
                    walk=int(walk),
                    step=int(step),
                    e_t=float(e_t),
                    e_g=float(e_g) if e_g else None,
                    grad_mag=float(grad_mag),
                    curvature=curvature,
                )
            )
    return records


# ---------------------------------------------------------------------------
# running and persisting experiments


@dataclass
class RunResult:
    run_dir: Path
    config: ExperimentConfig
    batch: BatchResult
    basin: dict            # series name ("e_t" / "e_g") -> BasinEstimate
    accuracy: dict         # "c_t" / "c_g" -> per-walk accuracy array
    summary: str


def _mean_std(values) -> str:
    values = np.asarray(values, dtype=np.float64)
    return f"{values.mean():.5f} ({values.std():.5f})"


def _walk_file(run_dir: Path, walk_id: int) -> Path:
    return run_dir / "walks" / f"walk_{walk_id:05d}.csv"


def _write_walk_trace(path: Path, walk_id: int, trace: WalkTrace):
    cfg = trace.config
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"# walk={walk_id} seed={cfg.seed} loss={cfg.loss.value} "
            f"granularity={cfg.granularity.value} init_range={repr(cfg.init_range)} "
            f"steps={cfg.steps} max_step={repr(cfg.max_step)}\n"
        )
        fh.write(
            "# final_params=" + " ".join(repr(float(v)) for v in trace.final_params) + "\n"
        )
        fh.write("step,e_t,e_g,grad_mag,curvature\n")
        for r in trace.records:
            curvature = r.curvature.value if r.curvature is not None else "none"
            fh.write(
                f"{r.step},{_fmt(r.train_loss)},{_fmt(r.test_loss)},"
                f"{_fmt(r.grad_mag)},{curvature}\n"
            )


def _config_lines(config: ExperimentConfig, n_walks: int, hessian_enabled: bool,
                  walk_cfg: WalkConfig) -> str:
    values = {
        "problem": config.problem,
        "loss": config.loss.value,
        "granularity": config.granularity.value,
        "init_range": repr(config.init_range),
        "walks": n_walks,
        "seed": config.seed,
        "hessian": "on" if hessian_enabled else "off",
        "data": config.data if config.data is not None else "",
        "threads": config.threads,
        "steps": walk_cfg.steps,
        "batch_size": config.batch_size if config.batch_size is not None else "",
        "batch_per_step": str(config.batch_per_step).lower(),
        "split_fraction": repr(config.split_fraction),
        "zero_tol_rel": repr(config.zero_tol_rel),
        "hessian_cap": config.hessian_cap,
    }
    return "".join(f"{k}={v}\n" for k, v in values.items())


def _render_summary(problem, loss, granularity, init_range, n_walks, n_failed,
                    steps, seed, basin, accuracy) -> str:
    out = io.StringIO()
    out.write(
        f"run: problem={problem} loss={loss} granularity={granularity} "
        f"init_range={init_range:g}\n"
    )
    out.write(f"walks: {n_walks} (failed: {n_failed})  steps: {steps}  seed: {seed}\n")
    out.write("\n")
    out.write("basin estimates, mean (stdev) over walks:\n")
    out.write(f"  {'series':8s} {'n_stag':>22s} {'l_stag':>24s} {'w':>4s}\n")
    for series in ("e_t", "e_g"):
        est = basin.get(series)
        if est is None:
            continue
        n_col = f"{est.n_stag:.5f} ({est.n_stag_std:.5f})"
        l_col = f"{est.l_stag:.5f} ({est.l_stag_std:.5f})"
        out.write(f"  {series:8s} {n_col:>22s} {l_col:>24s} {est.chosen_w:>4d}\n")
    out.write("\n")
    out.write("classification accuracy at the final step, mean (stdev):\n")
    for name in ("c_t", "c_g"):
        values = accuracy.get(name)
        if values is None:
            out.write(f"  {name}: (no test set)\n")
        else:
            out.write(f"  {name}: {_mean_std(values)}\n")
    return out.getvalue()


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Run the configured walk batch and write every artefact of the run.

    Dataset problems are resolved and loaded before any walk starts; a
    failure there aborts the run.  Individual walks that fail numerically
    are recorded in failures.csv and excluded from the summaries; a run in
    which every walk fails raises AllWalksFailedError.
    """
    bench = resolve_benchmark(config.problem)
    if config.out is None:
        raise UsageError("an output directory is required")
    batch_size = config.batch_size
    if batch_size is None:
        batch_size = bench.batch_size

    split_seed, _ = derive_seeds(config.seed, 1)
    spec, split = prepare_problem(
        config.problem, config.data, split_seed, config.split_fraction
    )
    hessian_enabled = resolve_hessian_mode(config, spec)
    walk_cfg = config.walk_config()
    n_walks = config.walks if config.walks is not None else 10 * spec.param_dim

    batch = run_walk_batch(
        spec, split, walk_cfg, n_walks,
        master_seed=config.seed,
        hessian_enabled=hessian_enabled,
        workers=config.threads,
        zero_tol_rel=config.zero_tol_rel,
        hessian_cap=config.hessian_cap,
        batch_size=batch_size,
        batch_per_step=config.batch_per_step,
    )
    if not batch.traces:
        raise AllWalksFailedError(
            f"all {n_walks} walks failed numerically; first failure: "
            f"{batch.failures[0].message if batch.failures else 'unknown'}"
        )

    # stagnation analysis needs at least one full window; very short runs
    # still emit clouds and accuracies, just no basin estimates
    basin = {}
    if walk_cfg.steps >= max(StagnationParams().window_candidates):
        basin["e_t"] = aggregate([analyse_walk(t.train_losses) for t in batch.traces])
        if batch.traces[0].test_losses is not None:
            basin["e_g"] = aggregate([analyse_walk(t.test_losses) for t in batch.traces])

    accuracy = {"c_t": [], "c_g": None if split.test is None else []}
    for trace in batch.traces:
        eval_split = eval_split_for_walk(
            split, trace.config, batch_size, config.batch_per_step
        )
        accuracy["c_t"].append(
            classification_accuracy(spec, trace.final_params, eval_split.train)
        )
        if eval_split.test is not None:
            accuracy["c_g"].append(
                classification_accuracy(spec, trace.final_params, eval_split.test)
            )
    accuracy = {k: (np.array(v) if v is not None else None) for k, v in accuracy.items()}

    summary = _render_summary(
        bench.name, config.loss.value, config.granularity.value, config.init_range,
        len(batch.traces), len(batch.failures), walk_cfg.steps, config.seed,
        basin, accuracy,
    )

    run_dir = Path(config.out)
    (run_dir / "walks").mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(
        _config_lines(config, n_walks, hessian_enabled, walk_cfg), encoding="utf-8"
    )
    for walk_id, trace in enumerate(batch.traces):
        _write_walk_trace(_walk_file(run_dir, walk_id), walk_id, trace)
    emit_lg_cloud(records_from_traces(batch.traces), run_dir / "lg_cloud.csv")

    with open(run_dir / "basin_per_walk.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("series,walk,n,l,w\n")
        for series in ("e_t", "e_g"):
            est = basin.get(series)
            if est is None:
                continue
            for walk_id, w in enumerate(est.per_walk):
                fh.write(f"{series},{walk_id},{w.n},{repr(w.length)},{w.window}\n")
    with open(run_dir / "basin_estimates.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("series,n_stag_mean,n_stag_std,l_stag_mean,l_stag_std,chosen_w\n")
        for series in ("e_t", "e_g"):
            est = basin.get(series)
            if est is None:
                continue
            fh.write(
                f"{series},{repr(est.n_stag)},{repr(est.n_stag_std)},"
                f"{repr(est.l_stag)},{repr(est.l_stag_std)},{est.chosen_w}\n"
            )
    with open(run_dir / "classification.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("walk,c_t,c_g\n")
        c_g = accuracy["c_g"]
        for walk_id, c_t in enumerate(accuracy["c_t"]):
            g = "" if c_g is None else repr(float(c_g[walk_id]))
            fh.write(f"{walk_id},{repr(float(c_t))},{g}\n")
    if batch.failures:
        with open(run_dir / "failures.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("walk,seed,step,message\n")
            for f in batch.failures:
                step = "" if f.step is None else f.step
                fh.write(f'{f.index},{f.seed},{step},"{f.message}"\n')
    (run_dir / "summary.txt").write_text(summary, encoding="utf-8")

    return RunResult(
        run_dir=run_dir, config=config, batch=batch,
        basin=basin, accuracy=accuracy, summary=summary,
    )


REQUIRED_ARTEFACTS = (
    "config.txt", "lg_cloud.csv", "basin_estimates.csv",
    "basin_per_walk.csv", "classification.csv",
)


def summarise_run(run_dir) -> str:
    """Rebuild the printed summary tables from a persisted run directory."""
    run_dir = Path(run_dir)
    missing = [name for name in REQUIRED_ARTEFACTS if not (run_dir / name).exists()]
    if missing:
        raise DataFormatError(
            f"{run_dir}: incomplete run, missing artefacts: {', '.join(missing)}"
        )
    cfg = {}
    for line in (run_dir / "config.txt").read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("=")
        cfg[key] = value

    basin = {}
    per_walk = {"e_t": [], "e_g": []}
    with open(run_dir / "basin_per_walk.csv", "r", encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            series, _, n, l, w = line.rstrip("\n").split(",")
            per_walk[series].append((int(n), float(l), int(w)))
    for series, rows in per_walk.items():
        if rows:
            basin[series] = aggregate(rows)

    accuracy = {"c_t": [], "c_g": []}
    with open(run_dir / "classification.csv", "r", encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            _, c_t, c_g = line.rstrip("\n").split(",")
            accuracy["c_t"].append(float(c_t))
            if c_g:
                accuracy["c_g"].append(float(c_g))
    n_walks = len(accuracy["c_t"])
    if n_walks == 0:
        raise DataFormatError(f"{run_dir}: run contains no walks")
    acc = {
        "c_t": np.array(accuracy["c_t"]),
        "c_g": np.array(accuracy["c_g"]) if accuracy["c_g"] else None,
    }
    failures = 0
    failures_file = run_dir / "failures.csv"
    if failures_file.exists():
        failures = max(0, len(failures_file.read_text(encoding="utf-8").splitlines()) - 1)
    return _render_summary(
        cfg.get("problem", "?"), cfg.get("loss", "?"), cfg.get("granularity", "?"),
        float(cfg.get("init_range", "nan")), n_walks, failures,
        int(cfg.get("steps", "0")), int(cfg.get("seed", "0")), basin, acc,
    )
