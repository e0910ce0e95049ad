"""Vectors, inner products, and linear operators with exact adjoints.

Vectors are plain 1-D float64 numpy arrays; :func:`as_vector` validates
them on construction (finite entries, expected length).  Operators are
:class:`LinearMap` records bundling ``apply`` and ``adjoint_apply``
closures with structural metadata.  The adjoint of every shipped
operator is derived from the forward stencil itself, so the adjoint
identity ``<L u, v> == <u, L* v>`` holds to machine precision rather
than only up to discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels

__all__ = [
    "as_vector",
    "inner",
    "norm",
    "GridSpec",
    "LinearMap",
    "AdjointReport",
    "identity_operator",
    "matrix_operator",
    "gradient_operator",
    "interior_gradient_operator",
    "check_adjoint",
    "cg_solve",
    "load_matrix_csv",
    "load_vector_csv",
]

# Rank computation is cheap enough to classify matrices up to this size.
_RANK_FLAG_LIMIT = 400


def as_vector(data, dim: Optional[int] = None) -> np.ndarray:
    """Validate and return a finite 1-D float64 vector."""
    v = np.asarray(data, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean inner product, with a dimension check."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


@dataclass(frozen=True)
class GridSpec:
    """Uniform 1-D or 2-D grid: node counts per axis and spacings."""

    shape: tuple
    spacing: tuple

    def __init__(self, shape, spacing=1.0):
        shape = tuple(int(s) for s in (shape if np.iterable(shape) else (shape,)))
        if not 1 <= len(shape) <= 2:
            raise ValueError("only 1-D and 2-D grids are supported")
        if any(s < 2 for s in shape):
            raise ValueError("grid needs at least 2 nodes per axis")
        if np.iterable(spacing):
            spacing = tuple(float(h) for h in spacing)
        else:
            spacing = (float(spacing),) * len(shape)
        if len(spacing) != len(shape):
            raise ValueError("one spacing per axis required")
        if any(h <= 0 for h in spacing):
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Bounded linear operator with an exact adjoint.

    ``injective`` and ``normal_surjective`` (surjectivity of L*L) are
    tri-state: True/False when known, None when not established.  Code
    that needs a flag must treat None as "unknown", not as False.
    """

    domain_dim: int
    codomain_dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    adjoint_apply: Callable[[np.ndarray], np.ndarray]
    injective: Optional[bool] = None
    normal_surjective: Optional[bool] = None


@dataclass(frozen=True)
class AdjointReport:
    max_relative_defect: float


def identity_operator(dim: int) -> LinearMap:
    dim = int(dim)
    if dim < 1:
        raise ValueError("dimension must be positive")
    return LinearMap(
        domain_dim=dim,
        codomain_dim=dim,
        apply=lambda v: np.array(v, dtype=float, copy=True),
        adjoint_apply=lambda v: np.array(v, dtype=float, copy=True),
        injective=True,
        normal_surjective=True,
    )


def matrix_operator(entries) -> LinearMap:
    """Dense-matrix operator; the adjoint is the exact transpose."""
    a = np.asarray(entries, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("matrix entries must form a non-empty rectangular 2-D array")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    m, n = a.shape
    at = np.ascontiguousarray(a.T)
    injective = None
    if max(m, n) <= _RANK_FLAG_LIMIT:
        injective = bool(np.linalg.matrix_rank(a) == n)
    return LinearMap(
        domain_dim=n,
        codomain_dim=m,
        apply=lambda v: a @ np.asarray(v, dtype=float),
        adjoint_apply=lambda v: at @ np.asarray(v, dtype=float),
        injective=injective,
        # in finite dimensions L*L is surjective iff L is injective
        normal_surjective=injective,
    )


def gradient_operator(grid: GridSpec) -> LinearMap:
    """Forward-difference gradient with zero (Dirichlet) ghost values.

    Each node carries one forward difference per axis; differences that
    would reach past the far boundary use a zero ghost value, so the
    operator maps n nodes to n differences per axis and is injective.
    The adjoint is the transpose of the stencil (a backward-difference
    negative divergence).  Per-node difference components are
    interleaved, giving contiguous blocks of size ``grid.ndim``.
    """
    if grid.ndim == 1:
        (n,) = grid.shape
        (h,) = grid.spacing
        return LinearMap(
            domain_dim=n,
            codomain_dim=n,
            apply=lambda u: kernels.grad_dirichlet_1d(np.ascontiguousarray(u, dtype=float), h),
            adjoint_apply=lambda v: kernels.neg_div_dirichlet_1d(np.ascontiguousarray(v, dtype=float), h),
            injective=True,
            normal_surjective=True,
        )
    n1, n2 = grid.shape
    h1, h2 = grid.spacing
    return LinearMap(
        domain_dim=n1 * n2,
        codomain_dim=2 * n1 * n2,
        apply=lambda u: kernels.grad_dirichlet_2d(np.ascontiguousarray(u, dtype=float), n1, n2, h1, h2),
        adjoint_apply=lambda v: kernels.neg_div_dirichlet_2d(np.ascontiguousarray(v, dtype=float), n1, n2, h1, h2),
        injective=True,
        normal_surjective=True,
    )


def interior_gradient_operator(grid: GridSpec) -> LinearMap:
    """Forward differences between adjacent nodes only (no ghost values).

    In 1-D this maps n nodes to n-1 differences; in 2-D the per-node
    difference pair is formed at the (n1-1)(n2-1) cell-origin nodes that
    have both forward neighbours.  Constants lie in the null space, so
    the operator is not injective; it is the natural gradient when the
    boundary values are carried by the unknowns themselves rather than
    by a zero extension.
    """
    if grid.ndim == 1:
        (n,) = grid.shape
        (h,) = grid.spacing
        return LinearMap(
            domain_dim=n,
            codomain_dim=n - 1,
            apply=lambda u: kernels.grad_interior_1d(np.ascontiguousarray(u, dtype=float), h),
            adjoint_apply=lambda v: kernels.neg_div_interior_1d(np.ascontiguousarray(v, dtype=float), h),
            injective=False,
            normal_surjective=False,
        )
    n1, n2 = grid.shape
    h1, h2 = grid.spacing
    return LinearMap(
        domain_dim=n1 * n2,
        codomain_dim=2 * (n1 - 1) * (n2 - 1),
        apply=lambda u: kernels.grad_interior_2d(np.ascontiguousarray(u, dtype=float), n1, n2, h1, h2),
        adjoint_apply=lambda v: kernels.neg_div_interior_2d(np.ascontiguousarray(v, dtype=float), n1, n2, h1, h2),
        injective=False,
        normal_surjective=False,
    )


def check_adjoint(L: LinearMap, trials: int = 50, seed: int = 0) -> AdjointReport:
    """Probe ``<L u, v> == <u, L* v>`` with random pairs.

    The defect is relative: ``|<Lu,v> - <u,L*v>| / (1 + |<Lu,v>|)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(L.domain_dim)
        v = rng.standard_normal(L.codomain_dim)
        lhs = float(np.dot(L.apply(u), v))
        rhs = float(np.dot(u, L.adjoint_apply(v)))
        defect = abs(lhs - rhs) / (1.0 + abs(lhs))
        worst = max(worst, defect)
    return AdjointReport(max_relative_defect=worst)


def cg_solve(matvec, rhs, x0=None, tol: float = 1e-12, max_iter: int = 10000):
    """Conjugate gradients for an SPD system given as a matvec closure.

    Returns ``(x, residual_norm, iterations)``; the caller decides
    whether the residual is acceptable.  Stops when
    ``||r|| <= tol * max(1, ||rhs||)``.
    """
    rhs = np.asarray(rhs, dtype=float)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float, copy=True)
    r = rhs - matvec(x)
    thresh = tol * max(1.0, float(np.linalg.norm(rhs)))
    rs = float(np.dot(r, r))
    if np.sqrt(rs) <= thresh:
        return x, float(np.sqrt(rs)), 0
    p = r.copy()
    k = 0
    for k in range(1, max_iter + 1):
        ap = matvec(p)
        alpha = rs / float(np.dot(p, ap))
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.dot(r, r))
        if np.sqrt(rs_new) <= thresh:
            return x, float(np.sqrt(rs_new)), k
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, float(np.sqrt(rs)), k


def load_matrix_csv(path) -> np.ndarray:
    """Dense matrix from CSV: one row per line, comma-separated decimals."""
    a = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite entries in {path}")
    return a


def load_vector_csv(path) -> np.ndarray:
    """Vector from a single-column CSV file."""
    a = np.loadtxt(path, delimiter=",", ndmin=1, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{path} is not a single-column vector file")
    return as_vector(a)
