"""Convex functionals with value, prox, and closed-form conjugate oracles.

The solvers interact with a functional only through its prox (and,
via the Moreau identity, the resolvent of its conjugate's subgradient);
subgradient sets are never materialized.  Values may be ``+inf`` exactly
for indicator-type functionals: energy traces must distinguish
infeasible points from merely expensive ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .linops import as_vector

__all__ = [
    "ProxFunctional",
    "ErrorSchedule",
    "prox_l1",
    "prox_weighted_l21",
    "prox_quadratic",
    "prox_indicator_point",
    "zero_functional",
    "dual_resolvent",
    "functional_from_label",
    "geometric_schedule",
    "harmonic_schedule",
    "zero_schedule",
]

# Feasibility tolerance for indicator-type conjugate values: a point this
# close to the domain counts as inside.  Converged dual iterates sit on the
# boundary up to roundoff; anything clearly outside still evaluates to +inf.
CONJUGATE_FEAS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ProxFunctional:
    """Proper convex lsc functional with prox oracle.

    ``prox(x, t)`` returns ``argmin_z value(z) + ||z - x||^2 / (2 t)``.
    ``conjugate_value`` evaluates the Fenchel conjugate in closed form
    when available (None otherwise).  ``params`` carries the defining
    data (weights, target, anchor, ...) for consumers that need more
    than the oracles, e.g. the quadratic/indicator direct solvers.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    label: str
    conjugate_value: Optional[Callable[[np.ndarray], float]] = None
    params: dict = field(default_factory=dict)


def prox_l1(weights, dim: Optional[int] = None) -> ProxFunctional:
    """Weighted l1 norm; prox is componentwise soft thresholding."""
    if np.iterable(weights):
        w = as_vector(weights)
        if dim is not None and dim != w.shape[0]:
            raise ValueError("dim does not match the number of weights")
        dim = w.shape[0]
    else:
        if dim is None:
            raise ValueError("dim is required with a scalar weight")
        w = np.full(int(dim), float(weights))
    if np.any(w < 0):
        raise ValueError("l1 weights must be nonnegative")
    slack = CONJUGATE_FEAS_TOL * (1.0 + w)

    def value(x):
        return float(np.sum(w * np.abs(x)))

    def prox(x, t):
        return kernels.soft_threshold(np.ascontiguousarray(x, dtype=float), t * w)

    def conjugate_value(y):
        # indicator of the weighted sup-norm box
        return 0.0 if np.all(np.abs(y) <= w + slack) else np.inf

    return ProxFunctional(dim=dim, value=value, prox=prox, label="l1",
                          conjugate_value=conjugate_value, params={"weights": w})


def prox_weighted_l21(weights, block_size: int) -> ProxFunctional:
    """Sum of weighted per-block Euclidean norms; prox is block shrinkage."""
    w = as_vector(weights)
    if np.any(w < 0):
        raise ValueError("block weights must be nonnegative")
    block_size = int(block_size)
    if block_size < 1:
        raise ValueError("block_size must be positive")
    dim = w.shape[0] * block_size
    slack = CONJUGATE_FEAS_TOL * (1.0 + w)

    def value(x):
        nrm = np.linalg.norm(np.asarray(x, dtype=float).reshape(-1, block_size), axis=1)
        return float(np.sum(w * nrm))

    def prox(x, t):
        return kernels.block_shrink(np.ascontiguousarray(x, dtype=float), t * w, block_size)

    def conjugate_value(y):
        # indicator of the product of per-block Euclidean balls
        nrm = np.linalg.norm(np.asarray(y, dtype=float).reshape(-1, block_size), axis=1)
        return 0.0 if np.all(nrm <= w + slack) else np.inf

    return ProxFunctional(dim=dim, value=value, prox=prox, label="weighted_l21",
                          conjugate_value=conjugate_value,
                          params={"weights": w, "block_size": block_size})


def prox_quadratic(target, scale: float = 1.0) -> ProxFunctional:
    """``(scale/2) ||x - target||^2`` with its closed-form prox."""
    z = as_vector(target)
    scale = float(scale)
    if scale <= 0:
        raise ValueError("scale must be positive")

    def value(x):
        d = np.asarray(x, dtype=float) - z
        return 0.5 * scale * float(np.dot(d, d))

    def prox(x, t):
        return (np.asarray(x, dtype=float) + (t * scale) * z) / (1.0 + t * scale)

    def conjugate_value(y):
        y = np.asarray(y, dtype=float)
        return float(np.dot(y, z)) + float(np.dot(y, y)) / (2.0 * scale)

    return ProxFunctional(dim=z.shape[0], value=value, prox=prox, label="quadratic",
                          conjugate_value=conjugate_value,
                          params={"target": z, "scale": scale})


def prox_indicator_point(anchor, mask=None) -> ProxFunctional:
    """Indicator of ``{x : x[mask] == anchor[mask]}``; prox is the projection.

    With ``mask=None`` every coordinate is constrained.  The value is 0
    only at bitwise equality on the constrained coordinates: the prox
    overwrites them with the anchor values, so feasibility of solver
    iterates holds exactly, not approximately.
    """
    a = as_vector(anchor)
    if mask is None:
        m = np.ones(a.shape[0], dtype=bool)
    else:
        m = np.asarray(mask, dtype=bool)
        if m.shape != a.shape:
            raise ValueError("mask must match the anchor shape")
    anchored = a[m]

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.0 if np.array_equal(x[m], anchored) else np.inf

    def prox(x, t):
        out = np.array(x, dtype=float, copy=True)
        out[m] = anchored
        return out

    def conjugate_value(y):
        # support function of the affine set: finite only when the free
        # coordinates of y vanish (within the feasibility tolerance)
        y = np.asarray(y, dtype=float)
        free = y[~m]
        if free.size and np.max(np.abs(free)) > CONJUGATE_FEAS_TOL * (1.0 + np.max(np.abs(y))):
            return np.inf
        return float(np.dot(y[m], anchored))

    return ProxFunctional(dim=a.shape[0], value=value, prox=prox, label="indicator_point",
                          conjugate_value=conjugate_value,
                          params={"anchor": a, "mask": m})


def dual_resolvent(F: ProxFunctional, x: np.ndarray, lam: float) -> np.ndarray:
    """Resolvent of ``lam * dF*`` at x, via the Moreau identity.

    Equals ``(Id + lam dF*)^(-1)(x) = x - lam * F.prox(x / lam, 1 / lam)``,
    so the conjugate's prox never has to be implemented separately.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    x = np.asarray(x, dtype=float)
    return x - lam * F.prox(x / lam, 1.0 / lam)


def zero_functional(dim: int) -> ProxFunctional:
    """The zero functional: value 0 everywhere, prox = identity.

    Its conjugate is the indicator of the origin, so a dual point is
    admissible only when the paired adjoint image vanishes.
    """
    dim = int(dim)

    def conjugate_value(y):
        y = np.asarray(y, dtype=float)
        return 0.0 if np.max(np.abs(y), initial=0.0) <= CONJUGATE_FEAS_TOL else np.inf

    return ProxFunctional(
        dim=dim,
        value=lambda x: 0.0,
        prox=lambda x, t: np.array(x, dtype=float, copy=True),
        label="zero",
        conjugate_value=conjugate_value,
    )


_LABELS = {"l1", "weighted_l21", "quadratic", "indicator_point", "zero"}


def functional_from_label(label: str, dim: int, params: dict) -> ProxFunctional:
    """Build a catalogue functional from its label and parameter map."""
    if label == "zero":
        return zero_functional(dim)
    if label == "l1":
        return prox_l1(params.get("weight", 1.0), dim=dim)
    if label == "weighted_l21":
        block_size = int(params["block_size"])
        weights = params.get("weights")
        if weights is None:
            weights = np.full(dim // block_size, float(params.get("weight", 1.0)))
        return prox_weighted_l21(weights, block_size)
    if label == "quadratic":
        target = params.get("target", np.zeros(dim))
        return prox_quadratic(as_vector(target, dim=dim), float(params.get("scale", 1.0)))
    if label == "indicator_point":
        anchor = as_vector(params["anchor"], dim=dim)
        mask = params.get("mask")
        return prox_indicator_point(anchor, None if mask is None else np.asarray(mask, dtype=bool))
    raise ValueError(f"unknown functional label {label!r}; expected one of {sorted(_LABELS)}")


@dataclass(frozen=True)
class ErrorSchedule:
    """Per-iteration perturbation magnitudes for the approximate solvers.

    ``alpha(k)`` bounds the image-space error of the first subproblem and
    ``beta(k)`` the error of the second, for k >= 1.  A schedule declared
    summable is sanity-checked at construction: its partial sums out to
    k = 1e5 must have a negligible tail, which rejects e.g. the harmonic
    sequence.
    """

    alpha: Callable[[int], float]
    beta: Callable[[int], float]
    summable: bool = field(default=True)

    def __post_init__(self):
        if self.summable:
            ks = np.arange(1, 100_001)
            terms = np.fromiter((self.alpha(int(k)) + self.beta(int(k)) for k in ks),
                                dtype=float, count=ks.shape[0])
            if np.any(terms < 0) or not np.all(np.isfinite(terms)):
                raise ValueError("schedule terms must be finite and nonnegative")
            total = float(terms.sum())
            tail = float(terms[90_000:].sum())
            if tail > 1e-3 * max(1.0, total):
                raise ValueError(
                    "schedule declared summable but its partial sums still grow "
                    f"at k=1e5 (tail {tail:.3e} of total {total:.3e})"
                )


def geometric_schedule(ratio: float, scale: float = 1.0) -> ErrorSchedule:
    ratio = float(ratio)
    scale = float(scale)
    if not 0.0 <= ratio < 1.0:
        raise ValueError("geometric ratio must lie in [0, 1)")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    return ErrorSchedule(alpha=lambda k: scale * ratio**k,
                         beta=lambda k: scale * ratio**k,
                         summable=True)


def harmonic_schedule(scale: float = 1.0) -> ErrorSchedule:
    """1/k magnitudes: not summable, shipped only as a negative control."""
    scale = float(scale)
    return ErrorSchedule(alpha=lambda k: scale / k,
                         beta=lambda k: scale / k,
                         summable=False)


def zero_schedule() -> ErrorSchedule:
    return ErrorSchedule(alpha=lambda k: 0.0, beta=lambda k: 0.0, summable=True)
