"""Progressive gradient walks: stochastic, gradient-directed, unbounded
trajectories over a network loss landscape.

Each step moves every parameter against the sign of its gradient component
by an independent Uniform[0, max_step] amount; components with an exactly
zero gradient do not move.  Walks are never clamped to any bounds.

Determinism: a walk is a pure function of (seed, config, dataset).  The RNG
is PCG64 seeded directly with the walk's 64-bit seed; batch seeds for
subsampled problems derive from the walk seed through fixed spawn keys, and
a batch's seeds derive from the master seed the same way.  One uniform
vector is drawn per step regardless of the gradient, so the random streams
of walks with shared seeds stay aligned across loss functions.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .data import BatchSampler, DatasetSplit
from .exceptions import NumericError, UsageError
from .network import (
    DEFAULT_HESSIAN_CAP,
    CurvatureClass,
    LossKind,
    NetworkSpec,
    curvature_at,
    gradient_magnitude,
    loss_and_gradient,
    loss_many,
)

INIT_RANGES = (1.0, 10.0)

# spawn keys for seeds derived from a master or walk seed
_SPLIT_KEY = 0
_WALK_KEY = 1
_TRAIN_BATCH_KEY = 2
_TEST_BATCH_KEY = 3


class Granularity(str, Enum):
    """Walk resolution: maximum step as a fraction of the init-range width."""

    MICRO = "micro"  # 1% of the width, 1000 steps
    MACRO = "macro"  # 10% of the width, 100 steps


_DEFAULT_STEPS = {Granularity.MICRO: 1000, Granularity.MACRO: 100}
_STEP_FRACTION = {Granularity.MICRO: 0.01, Granularity.MACRO: 0.10}


@dataclass(frozen=True)
class WalkConfig:
    """Sampling parameters of one walk.

    ``steps`` and ``max_step`` default from the granularity: micro walks
    take 1000 steps of at most 1% of the initialisation-range width, macro
    walks 100 steps of at most 10%.
    """

    loss: LossKind = LossKind.SSE
    granularity: Granularity = Granularity.MICRO
    init_range: float = 1.0
    seed: int = 0
    steps: int | None = None
    max_step: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        object.__setattr__(self, "granularity", Granularity(self.granularity))
        if float(self.init_range) not in INIT_RANGES:
            raise UsageError(
                f"init_range must be one of {INIT_RANGES}, got {self.init_range!r}"
            )
        object.__setattr__(self, "init_range", float(self.init_range))
        if self.steps is None:
            object.__setattr__(self, "steps", _DEFAULT_STEPS[self.granularity])
        if int(self.steps) < 1:
            raise UsageError("steps must be >= 1")
        object.__setattr__(self, "steps", int(self.steps))
        if self.max_step is None:
            width = 2.0 * self.init_range
            object.__setattr__(
                self, "max_step", _STEP_FRACTION[self.granularity] * width
            )
        if float(self.max_step) <= 0.0:
            raise UsageError("max_step must be positive")
        object.__setattr__(self, "max_step", float(self.max_step))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class StepRecord:
    """One sampled point: losses, gradient magnitude and optional curvature."""

    step: int
    train_loss: float
    test_loss: float | None
    grad_mag: float
    curvature: CurvatureClass | None


@dataclass
class WalkTrace:
    """Ordered step records of one walk plus the parameters of its last record."""

    config: WalkConfig
    records: list
    final_params: np.ndarray

    @property
    def train_losses(self) -> np.ndarray:
        return np.array([r.train_loss for r in self.records])

    @property
    def test_losses(self) -> np.ndarray | None:
        if self.records and self.records[0].test_loss is None:
            return None
        return np.array([r.test_loss for r in self.records])

    @property
    def grad_mags(self) -> np.ndarray:
        return np.array([r.grad_mag for r in self.records])


@dataclass(frozen=True)
class WalkFailure:
    """A walk that raised a numeric error; the batch carries on without it."""

    index: int
    seed: int
    step: int | None
    message: str


@dataclass
class BatchResult:
    traces: list
    failures: list = field(default_factory=list)


def derive_seeds(master_seed: int, n_walks: int):
    """Split seed and per-walk 64-bit seeds derived from one master seed."""
    split_ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(_SPLIT_KEY,))
    walk_ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(_WALK_KEY,))
    split_seed = int(split_ss.generate_state(1, dtype=np.uint64)[0])
    walk_seeds = [int(s) for s in walk_ss.generate_state(n_walks, dtype=np.uint64)]
    return split_seed, walk_seeds


def _derived_seed(seed: int, key: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(key,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def walk_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def init_point(spec: NetworkSpec, init_range: float, rng) -> np.ndarray:
    """Uniform starting point with each component i.i.d. on [-r, r]."""
    r = float(init_range)
    return rng.uniform(-r, r, size=spec.param_dim)


def walk_step(params, grad, max_step: float, rng) -> np.ndarray:
    """One progressive step against the per-dimension gradient signs."""
    if max_step <= 0.0:
        raise UsageError("max_step must be positive")
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise NumericError("gradient contains non-finite components")
    u = rng.uniform(0.0, max_step, size=grad.shape)
    return params - np.sign(grad) * u


def batch_samplers_for_walk(split: DatasetSplit, seed: int, batch_size: int):
    """Train/test batch samplers owned by the walk with this seed."""
    train = BatchSampler(split.train, batch_size, _derived_seed(seed, _TRAIN_BATCH_KEY))
    test = None
    if split.test is not None:
        test = BatchSampler(split.test, batch_size, _derived_seed(seed, _TEST_BATCH_KEY))
    return train, test


def eval_split_for_walk(
    split: DatasetSplit, config: WalkConfig, batch_size: int | None,
    batch_per_step: bool = False,
) -> DatasetSplit:
    """The patterns a given walk evaluates losses on.

    Full split when the problem is not batched; the walk's fixed batch
    otherwise.  In per-step mode this is the batch of the final step, which
    is also where end-of-walk statistics are taken.
    """
    if batch_size is None:
        return split
    train, test = batch_samplers_for_walk(split, config.seed, batch_size)
    index = config.steps - 1 if batch_per_step else 0
    return DatasetSplit(
        train=train.batch(index),
        test=test.batch(index) if test is not None else None,
        standardisation=split.standardisation,
    )


def run_walk(
    spec: NetworkSpec,
    split: DatasetSplit,
    config: WalkConfig,
    hessian_enabled: bool = False,
    *,
    zero_tol_rel: float = 1e-6,
    hessian_cap: int = DEFAULT_HESSIAN_CAP,
    batch_size: int | None = None,
    batch_per_step: bool = False,
) -> WalkTrace:
    """Sample one progressive gradient walk.

    Records the initial point and every subsequent point, ``config.steps``
    records in total; ``final_params`` is the parameter vector of the last
    record.  Train loss, gradient and magnitude come from the training
    patterns; test loss from the test patterns when present; curvature from
    the Hessian eigenvalues when enabled.
    """
    rng = walk_rng(config.seed)
    params = init_point(spec, config.init_range, rng)

    per_step = None
    train, test = split.train, split.test
    if batch_size is not None:
        train_sampler, test_sampler = batch_samplers_for_walk(
            split, config.seed, batch_size
        )
        if batch_per_step:
            per_step = (train_sampler, test_sampler)
        else:
            train = train_sampler.batch(0)
            test = test_sampler.batch(0) if test_sampler is not None else None

    records = []
    try:
        for i in range(config.steps):
            try:
                if per_step is not None:
                    train = per_step[0].batch(i)
                    test = per_step[1].batch(i) if per_step[1] is not None else None
                e_t, grad = loss_and_gradient(config.loss, spec, params, train)
                if not np.isfinite(e_t):
                    raise NumericError("non-finite training loss")
                e_g = None
                if test is not None:
                    e_g = float(loss_many(config.loss, spec, params[None, :], test)[0])
                    if not np.isfinite(e_g):
                        raise NumericError("non-finite test loss")
                curvature = None
                if hessian_enabled:
                    curvature = curvature_at(
                        config.loss, spec, params, train,
                        zero_tol_rel=zero_tol_rel, dim_cap=hessian_cap,
                    )
                records.append(
                    StepRecord(i, e_t, e_g, gradient_magnitude(grad), curvature)
                )
                if i < config.steps - 1:
                    params = walk_step(params, grad, config.max_step, rng)
            except NumericError as exc:
                if exc.step is None:
                    exc.step = i
                raise
    except NumericError as exc:
        exc.seed = config.seed
        raise
    return WalkTrace(config=config, records=records, final_params=params)


def _walk_task(args):
    index, spec, split, config, hessian_enabled, kwargs = args
    try:
        return index, run_walk(spec, split, config, hessian_enabled, **kwargs), None
    except NumericError as exc:
        failure = WalkFailure(
            index=index, seed=config.seed, step=exc.step, message=str(exc)
        )
        return index, None, failure


def run_walk_batch(
    spec: NetworkSpec,
    split: DatasetSplit,
    base_config: WalkConfig,
    n_walks: int | None = None,
    *,
    master_seed: int | None = None,
    hessian_enabled: bool = False,
    workers: int = 1,
    zero_tol_rel: float = 1e-6,
    hessian_cap: int = DEFAULT_HESSIAN_CAP,
    batch_size: int | None = None,
    batch_per_step: bool = False,
) -> BatchResult:
    """Run many independent walks with seeds derived from one master seed.

    Defaults to ten walks per parameter dimension.  Walks that raise
    numeric errors are reported as failures without aborting the rest, and
    results are ordered by walk index no matter how workers schedule them.
    """
    if n_walks is None:
        n_walks = 10 * spec.param_dim
    if n_walks < 1:
        raise UsageError("n_walks must be >= 1")
    master = base_config.seed if master_seed is None else master_seed
    _, walk_seeds = derive_seeds(master, n_walks)
    kwargs = dict(
        zero_tol_rel=zero_tol_rel,
        hessian_cap=hessian_cap,
        batch_size=batch_size,
        batch_per_step=batch_per_step,
    )
    tasks = [
        (k, spec, split, replace(base_config, seed=seed), hessian_enabled, kwargs)
        for k, seed in enumerate(walk_seeds)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_walk_task, tasks, chunksize=1))
    else:
        outcomes = [_walk_task(t) for t in tasks]
    outcomes.sort(key=lambda item: item[0])
    traces = [trace for _, trace, _ in outcomes if trace is not None]
    failures = [failure for _, _, failure in outcomes if failure is not None]
    return BatchResult(traces=traces, failures=failures)
