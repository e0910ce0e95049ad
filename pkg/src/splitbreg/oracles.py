"""Independent reference solvers used to pin expected optima.

None of these share iteration machinery with the splitting solvers:
the 1-D total-variation optimum comes from an exact taut-string
construction, separable shrinkage problems from their closed form,
quadratic-fidelity TV problems from a gap-certified projected gradient
method on the dual, and fixed-boundary weighted-gradient problems from
an explicit dual-field stationarity certificate.  A plain projected
subgradient descent is included for coarse cross-checks; its accuracy
is limited by its O(1/sqrt(k)) rate and it must not be used to pin
tight tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .asb import SplitProblem
from .linops import LinearMap

__all__ = [
    "taut_string_denoise",
    "taut_string_dirichlet",
    "soft_threshold_optimum",
    "DualSolveResult",
    "tv_dual_solve",
    "subgradient_descent",
    "interior_stationarity_defect",
]


def taut_string_denoise(y: np.ndarray, mu: float) -> np.ndarray:
    """Exact minimizer of ``0.5 ||u - y||^2 + mu * sum |u_{i+1} - u_i|``.

    Constructs the shortest path through the radius-``mu`` tube around
    the running sums of y (pinned at both ends); its increments are the
    denoised signal.
    """
    y = np.ascontiguousarray(y, dtype=float)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if mu == 0.0:
        return y.copy()
    n = y.shape[0]
    r = np.empty(n + 1)
    r[0] = 0.0
    np.cumsum(y, out=r[1:])
    lo = r - mu
    hi = r + mu
    lo[0] = hi[0] = r[0]
    lo[n] = hi[n] = r[n]
    return kernels.taut_string_slopes(lo, hi)


def taut_string_dirichlet(y: np.ndarray, mu: float) -> np.ndarray:
    """Exact minimizer of ``0.5||u-y||^2 + mu*(sum |u_{i+1}-u_i| + |u_n|)``.

    The extra boundary term treats the signal as continued by a pinned
    zero past its last sample.  Solved by odd reflection: the problem on
    the antisymmetric extension ``(y, 0, -reverse(y))`` has a unique,
    antisymmetric minimizer whose middle sample is exactly zero, and its
    first n samples minimize the pinned objective.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    extended = np.concatenate([y, [0.0], -y[::-1]])
    u_ext = taut_string_denoise(extended, mu)
    return u_ext[:n]


def soft_threshold_optimum(y: np.ndarray, mu: float) -> np.ndarray:
    """Closed-form minimizer of ``0.5 ||u - y||^2 + mu ||u||_1``."""
    y = np.ascontiguousarray(y, dtype=float)
    return kernels.soft_threshold(y, np.full(y.shape[0], float(mu)))


@dataclass(frozen=True)
class DualSolveResult:
    u: np.ndarray
    b: np.ndarray
    primal_value: float
    gap: float
    iterations: int


def _project_dual(f, b: np.ndarray) -> np.ndarray:
    """Project onto the domain of f* for the shrinkage-type catalogue."""
    if f.label == "l1":
        w = f.params["weights"]
        return np.clip(b, -w, w)
    if f.label == "weighted_l21":
        w = f.params["weights"]
        bs = f.params["block_size"]
        blocks = b.reshape(-1, bs)
        nrm = np.linalg.norm(blocks, axis=1)
        scale = np.ones_like(nrm)
        over = nrm > w
        scale[over] = w[over] / nrm[over]
        return (blocks * scale[:, None]).reshape(-1)
    raise ValueError(f"no dual projection for functional {f.label!r}")


def _opnorm_sq_estimate(L: LinearMap, iters: int = 200, seed: int = 3) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(L.domain_dim)
    v /= np.linalg.norm(v)
    est = 1.0
    for _ in range(iters):
        w = L.adjoint_apply(L.apply(v))
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


def tv_dual_solve(problem: SplitProblem, gap_tol: float = 1e-10,
                  max_iter: int = 200_000) -> DualSolveResult:
    """Gap-certified optimum for quadratic-fidelity shrinkage problems.

    Requires ``g`` quadratic and ``f`` of l1 / weighted-l21 type.  Runs
    an accelerated projected gradient iteration on the dual (a smooth
    quadratic over a product of boxes or balls), recovering the primal
    candidate from the dual gradient; stops when the measured duality
    gap falls below ``gap_tol * (1 + |primal|)``, so the returned
    ``primal_value`` is certified to that accuracy by weak duality.
    """
    if problem.g.label != "quadratic":
        raise ValueError("dual solve needs a quadratic fidelity term")
    L, f = problem.L, problem.f
    y = problem.g.params["target"]
    rho = problem.g.params["scale"]

    lip = _opnorm_sq_estimate(L) / rho
    step = 1.0 / (1.05 * lip) if lip > 0 else 1.0

    def primal_pair(b):
        u = y - L.adjoint_apply(b) / rho
        primal = problem.g.value(u) + f.value(L.apply(u))
        ltb = L.adjoint_apply(b)
        dual = -(float(np.dot(ltb, ltb)) / (2.0 * rho) - float(np.dot(ltb, y)))
        return u, primal, primal - dual

    b = np.zeros(f.dim)
    z = b.copy()
    t_acc = 1.0
    u, primal, gap = primal_pair(b)
    k = 0
    for k in range(1, max_iter + 1):
        grad = L.apply(L.adjoint_apply(z)) / rho - L.apply(y)
        b_new = _project_dual(f, z - step * grad)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        z = b_new + ((t_acc - 1.0) / t_new) * (b_new - b)
        b, t_acc = b_new, t_new
        if k % 25 == 0 or k == max_iter:
            u, primal, gap = primal_pair(b)
            if gap <= gap_tol * (1.0 + abs(primal)):
                break
    return DualSolveResult(u=u, b=b, primal_value=float(primal), gap=float(gap), iterations=k)


def subgradient_descent(problem: SplitProblem, steps: int = 20_000,
                        step_scale: float = 0.1, x0: Optional[np.ndarray] = None):
    """Projected subgradient descent on the primal; coarse oracle only.

    Uses normalized diminishing steps ``step_scale / (sqrt(k) ||g_k||)``
    and returns the best iterate seen.  Point-indicator terms are
    handled by projecting every iterate, so all visited points are
    feasible.
    """
    g, f, L = problem.g, problem.f, problem.L
    project = g.prox if g.label == "indicator_point" else (lambda v, t: v)
    u = np.zeros(g.dim) if x0 is None else np.array(x0, dtype=float, copy=True)
    u = project(u, 1.0)  # feasible start for indicator-type g
    best_u = u.copy()
    best_val = g.value(u) + f.value(L.apply(u))

    def f_subgrad(v):
        if f.label == "l1":
            return f.params["weights"] * np.sign(v)
        if f.label == "weighted_l21":
            bs = f.params["block_size"]
            blocks = v.reshape(-1, bs)
            nrm = np.linalg.norm(blocks, axis=1)
            safe = np.where(nrm > 0, nrm, 1.0)
            s = blocks * (f.params["weights"] / safe)[:, None]
            s[nrm == 0] = 0.0
            return s.reshape(-1)
        raise ValueError(f"no subgradient rule for functional {f.label!r}")

    for k in range(1, steps + 1):
        grad = L.adjoint_apply(f_subgrad(L.apply(u)))
        if g.label == "quadratic":
            grad = grad + g.params["scale"] * (u - g.params["target"])
        elif g.label in ("indicator_point", "zero"):
            pass
        else:
            raise ValueError(f"no subgradient rule for functional {g.label!r}")
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            break
        u = project(u - (step_scale / (np.sqrt(k) * gnorm)) * grad, 1.0)
        val = g.value(u) + f.value(L.apply(u))
        if val < best_val:
            best_val = val
            best_u = u.copy()
    return best_u, float(best_val)


def interior_stationarity_defect(problem: SplitProblem, u: np.ndarray) -> float:
    """Certifies a candidate for fixed-boundary weighted-gradient problems.

    Builds the dual field with one ball-boundary element per gradient
    block (requires every block of ``L u`` to be nonzero, where the
    norm's subdifferential is a singleton) and returns the sup norm of
    its discrete divergence on the free coordinates.  A defect of zero
    proves ``u`` minimizes ``f(L u)`` over the affine feasible set, so
    the candidate's energy is the exact optimal value.
    """
    f, g, L = problem.f, problem.g, problem.L
    if f.label != "weighted_l21" or g.label != "indicator_point":
        raise ValueError("certificate applies to fixed-boundary weighted-gradient problems")
    u = np.asarray(u, dtype=float)
    w = f.params["weights"]
    bs = f.params["block_size"]
    img = L.apply(u).reshape(-1, bs)
    nrm = np.linalg.norm(img, axis=1)
    if np.any(nrm[w > 0] == 0.0):
        return np.inf
    q = img * (w / np.where(nrm > 0, nrm, 1.0))[:, None]
    q[nrm == 0.0] = 0.0
    div = L.adjoint_apply(q.reshape(-1))
    free = ~g.params["mask"]
    if not np.any(free):
        return 0.0
    return float(np.max(np.abs(div[free])))
