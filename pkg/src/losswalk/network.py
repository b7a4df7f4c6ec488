"""Single-hidden-layer sigmoid network: forward pass, SSE/CE losses, analytic
gradients, finite-difference Hessians and eigenvalue curvature classification.

All operations are pure functions of their inputs and safe to call from
concurrent workers.

Parameter vectors are flat float64 arrays in a fixed layout, so that traces
are reproducible across runs and implementations:

    [hidden weights, row-major (hidden x inputs)]
    [hidden biases   (hidden)]
    [output weights, row-major (outputs x hidden)]
    [output biases   (outputs)]

Most numeric kernels are written against a batch of parameter vectors
(shape ``(m, dim)``); the single-vector operations are the ``m == 1`` case.
That keeps the finite-difference Hessian cheap: all ``2 * dim`` perturbed
gradients are evaluated in one vectorised pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .exceptions import CapabilityError, DimensionError, NumericError, UsageError

# Outputs are clamped to [CE_CLAMP, 1 - CE_CLAMP] inside the cross-entropy
# logs; keeps losses and gradients finite when hidden units saturate.
CE_CLAMP = 1e-12

# Central-difference step for the Hessian, relative to the parameter scale.
HESSIAN_REL_STEP = 1e-5

# Hessians larger than this are refused unless the caller raises the cap.
DEFAULT_HESSIAN_CAP = 1000


class LossKind(str, Enum):
    SSE = "sse"
    CE = "ce"


class CurvatureClass(str, Enum):
    CONVEX = "convex"        # all eigenvalues positive: local minimum
    CONCAVE = "concave"      # all eigenvalues negative: local maximum
    SADDLE = "saddle"        # mixed signs
    SINGULAR = "singular"    # an eigenvalue within tolerance of zero


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of a single-hidden-layer network with bias units."""

    inputs: int
    hidden: int
    outputs: int

    def __post_init__(self):
        for name in ("inputs", "hidden", "outputs"):
            if int(getattr(self, name)) < 1:
                raise UsageError(f"NetworkSpec.{name} must be >= 1")

    @property
    def param_dim(self) -> int:
        return (self.inputs + 1) * self.hidden + (self.hidden + 1) * self.outputs


@dataclass(frozen=True)
class Pattern:
    """One training example: feature vector plus target vector in [0, 1]."""

    inputs: np.ndarray
    targets: np.ndarray


class PatternSet:
    """A fixed collection of patterns stored as dense arrays.

    ``features`` has shape ``(n, n_inputs)`` and ``targets`` shape
    ``(n, n_outputs)``; targets must lie in [0, 1].
    """

    def __init__(self, features, targets):
        x = np.asarray(features, dtype=np.float64)
        t = np.asarray(targets, dtype=np.float64)
        if x.ndim != 2 or t.ndim != 2:
            raise DimensionError("features and targets must be 2-d arrays")
        if len(x) != len(t):
            raise DimensionError(
                f"{len(x)} feature rows but {len(t)} target rows"
            )
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(t)):
            raise NumericError("patterns contain non-finite values")
        if t.size and (t.min() < 0.0 or t.max() > 1.0):
            raise UsageError("targets must lie in [0, 1]")
        self.features = x
        self.targets = t

    @classmethod
    def from_patterns(cls, patterns) -> "PatternSet":
        patterns = list(patterns)
        if not patterns:
            raise UsageError("empty pattern list")
        return cls(
            np.stack([p.inputs for p in patterns]),
            np.stack([p.targets for p in patterns]),
        )

    def subset(self, indices) -> "PatternSet":
        return PatternSet(self.features[indices], self.targets[indices])

    def __len__(self) -> int:
        return len(self.features)

    def __getitem__(self, i) -> Pattern:
        return Pattern(self.features[i], self.targets[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


# ---------------------------------------------------------------------------
# parameter layout


def unflatten(spec: NetworkSpec, thetas: np.ndarray):
    """Split a batch of flat parameter vectors ``(m, dim)`` into layer views.

    Returns ``(w1, b1, w2, b2)`` with shapes ``(m, hidden, inputs)``,
    ``(m, hidden)``, ``(m, outputs, hidden)`` and ``(m, outputs)``.
    """
    ni, nh, no = spec.inputs, spec.hidden, spec.outputs
    m = thetas.shape[0]
    a = nh * ni
    b = a + nh
    c = b + no * nh
    w1 = thetas[:, :a].reshape(m, nh, ni)
    b1 = thetas[:, a:b]
    w2 = thetas[:, b:c].reshape(m, no, nh)
    b2 = thetas[:, c:]
    return w1, b1, w2, b2


def flatten(spec: NetworkSpec, w1, b1, w2, b2) -> np.ndarray:
    m = w1.shape[0]
    return np.concatenate(
        [w1.reshape(m, -1), b1, w2.reshape(m, -1), b2], axis=1
    )


def _check_params(spec: NetworkSpec, params) -> np.ndarray:
    theta = np.asarray(params, dtype=np.float64)
    if theta.ndim != 1 or theta.shape[0] != spec.param_dim:
        raise DimensionError(
            f"parameter vector has length {theta.shape}, expected ({spec.param_dim},)"
        )
    if not np.all(np.isfinite(theta)):
        raise NumericError("parameter vector contains non-finite values")
    return theta


def _check_patterns(spec: NetworkSpec, patterns: PatternSet) -> PatternSet:
    if len(patterns) == 0:
        raise UsageError("empty pattern list")
    if patterns.features.shape[1] != spec.inputs:
        raise DimensionError(
            f"patterns have {patterns.features.shape[1]} features, spec expects {spec.inputs}"
        )
    if patterns.targets.shape[1] != spec.outputs:
        raise DimensionError(
            f"patterns have {patterns.targets.shape[1]} targets, spec expects {spec.outputs}"
        )
    return patterns


# ---------------------------------------------------------------------------
# forward pass


def _forward_parts(spec, thetas, x):
    """Hidden and output activations for a batch of parameter vectors.

    ``thetas`` is ``(m, dim)``, ``x`` is ``(p, inputs)``; returns hidden
    activations ``(m, p, hidden)`` and outputs ``(m, p, outputs)``.
    """
    w1, b1, w2, b2 = unflatten(spec, thetas)
    h = expit(np.einsum("mhi,pi->mph", w1, x) + b1[:, None, :])
    o = expit(np.einsum("moh,mph->mpo", w2, h) + b2[:, None, :])
    return h, o


def forward_many(spec: NetworkSpec, thetas, x) -> np.ndarray:
    """Network outputs ``(m, p, outputs)`` for ``m`` parameter vectors."""
    return _forward_parts(spec, thetas, np.asarray(x, dtype=np.float64))[1]


def forward(spec: NetworkSpec, params, inputs) -> np.ndarray:
    """Outputs of the network at one point for one input vector.

    Every component is a sigmoid activation and so lies in (0, 1); in
    float64 arithmetic deeply saturated units round to exactly 0.0 or 1.0.
    """
    theta = _check_params(spec, params)
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != spec.inputs:
        raise DimensionError(
            f"input vector has shape {x.shape}, expected ({spec.inputs},)"
        )
    return forward_many(spec, theta[None, :], x[None, :])[0, 0]


# ---------------------------------------------------------------------------
# losses and gradients


def loss_many(kind: LossKind, spec: NetworkSpec, thetas, patterns: PatternSet):
    """Per-pattern-mean loss for each of ``m`` parameter vectors."""
    kind = LossKind(kind)
    _, o = _forward_parts(spec, thetas, patterns.features)
    t = patterns.targets
    p = len(patterns)
    if kind is LossKind.SSE:
        return ((t - o) ** 2).sum(axis=(1, 2)) / p
    oc = np.clip(o, CE_CLAMP, 1.0 - CE_CLAMP)
    return -(t * np.log(oc) + (1.0 - t) * np.log1p(-oc)).sum(axis=(1, 2)) / p


def loss(kind: LossKind, spec: NetworkSpec, params, patterns: PatternSet) -> float:
    """Mean-over-patterns loss at one point.

    SSE: mean over patterns of the summed squared output errors.
    CE: mean over patterns of the summed binary cross-entropy terms, with
    outputs clamped away from 0 and 1 so the result is always finite.
    """
    theta = _check_params(spec, params)
    _check_patterns(spec, patterns)
    return float(loss_many(kind, spec, theta[None, :], patterns)[0])


def _loss_grad_many(kind, spec, thetas, patterns):
    """Losses ``(m,)`` and gradients ``(m, dim)`` sharing one forward pass."""
    kind = LossKind(kind)
    x, t = patterns.features, patterns.targets
    p = len(patterns)
    w1, b1, w2, b2 = unflatten(spec, thetas)
    h = expit(np.einsum("mhi,pi->mph", w1, x) + b1[:, None, :])
    o = expit(np.einsum("moh,mph->mpo", w2, h) + b2[:, None, :])
    if kind is LossKind.SSE:
        losses = ((t - o) ** 2).sum(axis=(1, 2)) / p
        d_out = -2.0 * (t - o) * o * (1.0 - o) / p
    else:
        oc = np.clip(o, CE_CLAMP, 1.0 - CE_CLAMP)
        losses = -(t * np.log(oc) + (1.0 - t) * np.log1p(-oc)).sum(axis=(1, 2)) / p
        # The implemented loss is the clamped one, so its gradient is zero
        # wherever the clamp is active; keeps the analytic gradient equal to
        # finite differences of `loss` even in saturated regions.
        d_out = np.where((o > CE_CLAMP) & (o < 1.0 - CE_CLAMP), (o - t) / p, 0.0)
    g_w2 = np.einsum("mpo,mph->moh", d_out, h)
    g_b2 = d_out.sum(axis=1)
    d_hid = np.einsum("mpo,moh->mph", d_out, w2) * h * (1.0 - h)
    g_w1 = np.einsum("mph,pi->mhi", d_hid, x)
    g_b1 = d_hid.sum(axis=1)
    return losses, flatten(spec, g_w1, g_b1, g_w2, g_b2)


def gradient_many(kind, spec, thetas, patterns) -> np.ndarray:
    return _loss_grad_many(kind, spec, thetas, patterns)[1]


def gradient(kind: LossKind, spec: NetworkSpec, params, patterns: PatternSet) -> np.ndarray:
    """Backpropagated gradient of `loss` with respect to the parameters."""
    theta = _check_params(spec, params)
    _check_patterns(spec, patterns)
    return gradient_many(kind, spec, theta[None, :], patterns)[0]


def loss_and_gradient(kind, spec, params, patterns):
    """Loss and gradient at one point, sharing a single forward pass."""
    theta = _check_params(spec, params)
    _check_patterns(spec, patterns)
    losses, grads = _loss_grad_many(kind, spec, theta[None, :], patterns)
    return float(losses[0]), grads[0]


def gradient_magnitude(g) -> float:
    """Euclidean norm of a gradient vector."""
    return float(np.linalg.norm(np.asarray(g, dtype=np.float64)))


# ---------------------------------------------------------------------------
# Hessian and curvature


def fd_hessian(grad_fn, params, rel_step: float = HESSIAN_REL_STEP) -> np.ndarray:
    """Symmetrised central-difference Hessian of a gradient function.

    ``grad_fn`` maps a batch of parameter vectors ``(m, dim)`` to gradients
    ``(m, dim)``.  Row ``i`` holds d(grad)/d(param_i) with step
    ``rel_step * max(1, |param_i|)``; the result is symmetrised as
    ``(h + h.T) / 2``.
    """
    theta = np.asarray(params, dtype=np.float64)
    dim = theta.shape[0]
    steps = rel_step * np.maximum(1.0, np.abs(theta))
    perturbed = np.tile(theta, (2 * dim, 1))
    idx = np.arange(dim)
    perturbed[idx, idx] += steps
    perturbed[dim + idx, idx] -= steps
    grads = np.asarray(grad_fn(perturbed))
    hess = (grads[:dim] - grads[dim:]) / (2.0 * steps[:, None])
    return (hess + hess.T) / 2.0


def hessian(
    kind: LossKind,
    spec: NetworkSpec,
    params,
    patterns: PatternSet,
    dim_cap: int = DEFAULT_HESSIAN_CAP,
) -> np.ndarray:
    """Finite-difference Hessian of `loss` through the analytic gradient.

    Refuses to materialise matrices above ``dim_cap`` parameters; raise the
    cap explicitly for large architectures at your own memory cost.
    """
    theta = _check_params(spec, params)
    _check_patterns(spec, patterns)
    if spec.param_dim > dim_cap:
        raise CapabilityError(
            f"param_dim {spec.param_dim} exceeds the Hessian cap {dim_cap}"
        )
    hess = fd_hessian(
        lambda thetas: gradient_many(kind, spec, thetas, patterns), theta
    )
    if not np.all(np.isfinite(hess)):
        raise NumericError("Hessian contains non-finite entries")
    return hess


def hessian_eigenvalues(hess) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending."""
    return np.linalg.eigvalsh(hess)


def classify_curvature(eigenvalues, zero_tol_rel: float = 1e-6) -> CurvatureClass:
    """Curvature class from Hessian eigenvalues.

    An eigenvalue counts as zero when its magnitude is at most
    ``zero_tol_rel * max(|eigenvalue|)`` (or ``zero_tol_rel`` itself for an
    all-zero spectrum), making the class invariant under positive scaling.
    Any zero eigenvalue makes the test inconclusive (singular); otherwise
    all-positive spectra are convex (minimum), all-negative concave
    (maximum), and mixed signs a saddle.
    """
    eig = np.asarray(eigenvalues, dtype=np.float64)
    if eig.ndim != 1 or eig.size == 0:
        raise UsageError("eigenvalue vector must be non-empty and 1-d")
    largest = float(np.max(np.abs(eig)))
    tol = zero_tol_rel * largest if largest > 0.0 else zero_tol_rel
    if np.any(np.abs(eig) <= tol):
        return CurvatureClass.SINGULAR
    if np.all(eig > 0.0):
        return CurvatureClass.CONVEX
    if np.all(eig < 0.0):
        return CurvatureClass.CONCAVE
    return CurvatureClass.SADDLE


def curvature_at(
    kind, spec, params, patterns, zero_tol_rel=1e-6, dim_cap=DEFAULT_HESSIAN_CAP
) -> CurvatureClass:
    """Convenience: Hessian, eigenvalues and classification in one call."""
    eig = hessian_eigenvalues(hessian(kind, spec, params, patterns, dim_cap=dim_cap))
    return classify_curvature(eig, zero_tol_rel)
