"""Profile entropies and the constrained entropy-maximization problem.

The entropic optimizer ``m*`` maximizes the product-measure entropy

    H(v) = -sum_i [v_i log(v_i/p_i) + (p_i - v_i) log((p_i - v_i)/p_i)]

over ``{0 <= v <= p}`` intersected with the constraint set. For linear
constraints ``A v <= b`` the solution has the logistic closed form
``v_i / p_i = 1 / (1 + exp(A_i^T lam))`` in terms of the nonnegative dual
vector ``lam``, which is found by Newton's method on the dual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import LinearConstraint, Bounds, linprog, milp
from scipy.special import expit, gammaln, xlogy

from .constraints import ConstraintSpec, Spectral
from .exceptions import InvalidInputError, InvalidStateError
from .graphspace import Partition

__all__ = [
    "MaxEntSolution",
    "ent",
    "p_entropy",
    "stirling_gap",
    "log_binomial",
    "maximize_entropy",
    "product_matrix",
    "kkt_residual",
    "CONVERGED",
    "INFEASIBLE",
    "ITERATION_LIMIT",
]

CONVERGED = "converged"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"


def log_binomial(p, m):
    """``log C(p, m)`` via log-gamma, elementwise."""
    p = np.asarray(p, dtype=float)
    m = np.asarray(m, dtype=float)
    return gammaln(p + 1) - gammaln(m + 1) - gammaln(p - m + 1)


def ent(m, part: Partition) -> float:
    """Log of the number of graphs with integer profile ``m``: ``sum_i log C(p_i, m_i)``."""
    m = part.check_profile(m, integer=True)
    return float(np.sum(log_binomial(part.part_sizes, m)))


def _h(v, p):
    # natural-log binary entropy scaled by p, with 0 log 0 = 0
    return -(xlogy(v, v / p) + xlogy(p - v, (p - v) / p))


def p_entropy(v, part: Partition) -> float:
    """Entropy of the product measure whose part densities are ``v_i / p_i``."""
    v = part.check_profile(v)
    return float(np.sum(_h(v, part.part_sizes.astype(float))))


def stirling_gap(m, part: Partition) -> float:
    """``p_entropy(m) - ent(m)``, the loss of the first-order Stirling approximation."""
    return p_entropy(m, part) - ent(m, part)


@dataclass(frozen=True)
class MaxEntSolution:
    """Result of :func:`maximize_entropy`.

    ``duals`` holds one multiplier per linear row of the constraint (after any
    cutting planes for nonlinear members, which are appended in order).
    """

    m_star: np.ndarray
    q_star: np.ndarray
    duals: np.ndarray
    objective: float
    status: str
    kkt_residual: float = float("nan")
    iterations: int = 0
    part_sizes: np.ndarray = field(default=None, repr=False)

    @property
    def a_star(self) -> np.ndarray:
        return self.q_star

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self) -> dict:
        return {
            "m_star": [float(x) for x in self.m_star],
            "q_star": [float(x) for x in self.q_star],
            "duals": [float(x) for x in self.duals],
            "objective": float(self.objective),
            "status": self.status,
            "kkt_residual": float(self.kkt_residual),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# -- dual machinery --------------------------------------------------------


class _Dual:
    """Dual of ``max H(v)`` s.t. ``lo <= v <= hi``, ``A v <= b`` (minimized over ``lam >= 0``)."""

    def __init__(self, p, A, b, lo, hi):
        self.p, self.A, self.b, self.lo, self.hi = p, A, b, lo, hi

    def primal(self, lam):
        t = self.A.T @ lam if self.A.shape[0] else np.zeros_like(self.p)
        v_free = self.p * expit(-t)
        v = np.clip(v_free, self.lo, self.hi)
        free = (v_free > self.lo) & (v_free < self.hi)
        return v, t, free

    def value(self, lam):
        v, t, _ = self.primal(lam)
        return float(np.sum(_h(v, self.p)) - t @ v + lam @ self.b)

    def grad_hess(self, lam):
        v, t, free = self.primal(lam)
        g = self.b - self.A @ v
        a = v / self.p
        w = np.where(free, self.p * a * (1 - a), 0.0)
        H = (self.A * w) @ self.A.T
        return v, g, H


def _proj_grad_norm(lam, g):
    return float(np.max(np.abs(lam - np.maximum(lam - g, 0.0)))) if lam.size else 0.0


def _solve_scalar(dual: _Dual, tol: float, max_iter: int):
    """Safeguarded Newton with a bisection fallback on ``g(lam) = b - a.v(lam)``."""
    def grad(x):
        return dual.grad_hess(np.array([x]))[1][0]

    g0 = grad(0.0)
    if g0 >= -tol:
        return np.array([0.0]), 0, True
    lo, hi = 0.0, 50.0
    it = 0
    while grad(hi) < 0:
        lo, hi = hi, 2 * hi
        it += 1
        if hi > 1e12:
            return np.array([hi]), it, False
    x = 0.5 * (lo + hi)
    for it in range(it, max_iter):
        _, g, H = dual.grad_hess(np.array([x]))
        g, h = g[0], H[0, 0]
        if abs(g) <= tol:
            return np.array([x]), it, True
        if g < 0:
            lo = x
        else:
            hi = x
        step = x - g / h if h > 0 else None
        x = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, hi):
            return np.array([x]), it, abs(grad(x)) <= max(tol, 1e-6)
    return np.array([x]), max_iter, False


def _solve_dual(dual: _Dual, tol: float, max_iter: int, lam0=None):
    ell = dual.A.shape[0]
    if ell == 0:
        return np.zeros(0), 0, True
    if ell == 1:
        return _solve_scalar(dual, tol, max_iter)
    lam = np.zeros(ell) if lam0 is None else np.maximum(np.asarray(lam0, float), 0.0)
    f = dual.value(lam)
    for it in range(max_iter):
        _, g, H = dual.grad_hess(lam)
        if _proj_grad_norm(lam, g) <= tol:
            return lam, it, True
        # rows pinned at zero with the gradient pushing outward stay fixed
        active = (lam <= 1e-14) & (g > 0)
        freeidx = np.flatnonzero(~active)
        d = np.zeros(ell)
        if freeidx.size:
            Hff = H[np.ix_(freeidx, freeidx)]
            reg = 1e-12 * max(1.0, np.trace(Hff) / freeidx.size)
            try:
                d[freeidx] = -np.linalg.solve(Hff + reg * np.eye(freeidx.size), g[freeidx])
            except np.linalg.LinAlgError:
                d[freeidx] = -np.linalg.lstsq(Hff, g[freeidx], rcond=None)[0]
        if not g @ d < 0:
            d = -g
        # damping: halve until the projected step decreases the dual
        alpha = 1.0
        pg = _proj_grad_norm(lam, g)
        while True:
            cand = np.maximum(lam + alpha * d, 0.0)
            fc = dual.value(cand)
            if fc <= f + 1e-4 * (g @ (cand - lam)) or alpha < 1e-20:
                break
            # near the optimum the dual is flat to round-off; fall back on the gradient
            if abs(fc - f) <= 1e-12 * (1.0 + abs(f)) and _proj_grad_norm(cand, dual.grad_hess(cand)[1]) < 0.5 * pg:
                break
            alpha *= 0.5
        if alpha < 1e-20:
            # Newton direction stalled; take a projected gradient step instead
            alpha = 1.0
            d = -g
            while alpha > 1e-30:
                cand = np.maximum(lam + alpha * d, 0.0)
                fc = dual.value(cand)
                if fc < f:
                    break
                alpha *= 0.5
            else:
                return lam, it, _proj_grad_norm(lam, g) <= max(tol, 1e-7)
        lam, f = cand, fc
    _, g, _ = dual.grad_hess(lam)
    return lam, max_iter, _proj_grad_norm(lam, g) <= tol


def _coordinate_ranges(A, b, lo, hi):
    """Min and max of each coordinate over the polytope, or ``None`` if it is empty."""
    k = lo.shape[0]
    vmin, vmax = lo.copy(), hi.copy()
    if A.shape[0] == 0:
        return (vmin, vmax) if np.all(lo <= hi) else None
    bounds = list(zip(lo, hi))
    for i in range(k):
        c = np.zeros(k)
        c[i] = 1.0
        res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        if res.status == 2:
            return None
        vmin[i] = max(lo[i], res.fun)
        res = linprog(-c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        vmax[i] = min(hi[i], -res.fun)
    return vmin, vmax


def _has_integer_point(A, b, lo, hi) -> bool:
    lo_i, hi_i = np.ceil(lo - 1e-9), np.floor(hi + 1e-9)
    if np.any(lo_i > hi_i):
        return False
    if A.shape[0] == 0:
        return True
    k = lo.shape[0]
    res = milp(
        np.zeros(k),
        constraints=LinearConstraint(A, -np.inf, b + 1e-9 * (1 + np.abs(b))),
        integrality=np.ones(k),
        bounds=Bounds(lo_i, hi_i),
    )
    return res.status == 0


def kkt_residual(v, lam, A, b, lo, hi, p) -> float:
    """Max violation of stationarity, primal/dual feasibility and complementary slackness."""
    parts = [0.0]
    if A.shape[0]:
        slack = b - A @ v
        parts.append(float(np.max(np.maximum(-slack, 0.0))))
        parts.append(float(np.max(np.maximum(-lam, 0.0))))
        parts.append(float(np.max(np.abs(lam * slack))))
        t = A.T @ lam
    else:
        t = np.zeros_like(v)
    interior = (v > lo) & (v < hi)
    if interior.any():
        vi, pi = v[interior], p[interior]
        parts.append(float(np.max(np.abs(np.log((pi - vi) / vi) - t[interior]))))
    return max(parts)


def _infeasible(part, ell):
    k = part.k
    return MaxEntSolution(
        m_star=np.full(k, np.nan),
        q_star=np.full(k, np.nan),
        duals=np.zeros(ell),
        objective=float("nan"),
        status=INFEASIBLE,
        part_sizes=part.part_sizes,
    )


def maximize_entropy(
    part: Partition,
    spec: ConstraintSpec | None = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    max_cuts: int = 2_000,
) -> MaxEntSolution:
    """Entropic optimizer of the set described by ``spec`` over ``part``.

    Linear members (budgets, linear systems, boxes) are solved through the
    dual. Nonlinear members (spectral conditions) are handled by adding
    supporting halfspaces at the current iterate until the iterate satisfies
    them to within ``tol`` (outer approximation), resolving the dual each
    round.

    ``spec=None`` means no constraint: every density is 1/2.
    """
    if not tol > 0:
        raise InvalidInputError(f"tol must be positive, got {tol!r}")
    p = part.part_sizes.astype(float)
    k = part.k
    if spec is None:
        A, b, lo, hi = np.zeros((0, k)), np.zeros(0), np.zeros(k), p.copy()
        nonlinear = []
    else:
        spec.validate(part)
        rows = spec.linear_rows(part)
        if rows is None:
            rows = np.zeros((0, k)), np.zeros(0), np.zeros(k), p.copy()
        A, b, lo, hi = rows
        nonlinear = spec.nonlinear_parts()
    A = np.asarray(A, dtype=float).reshape(-1, k)
    b = np.asarray(b, dtype=float)
    ell = A.shape[0]
    if not _has_integer_point(A, b, lo, hi):
        return _infeasible(part, ell)
    ranges = _coordinate_ranges(A, b, lo, hi)
    if ranges is None:
        return _infeasible(part, ell)
    # tightening to the implied coordinate ranges pins coordinates forced onto
    # the boundary, where the dual would otherwise diverge
    rlo, rhi = ranges
    pinned = rhi - rlo <= 1e-12 * np.maximum(1.0, p)
    fixed = np.round(0.5 * (rlo + rhi), 12)
    blo = np.where(pinned, fixed, lo)
    bhi = np.where(pinned, fixed, hi)

    rows_A, rows_b = A, b
    lam = None
    total_iter = 0
    v = None
    for _ in range(max_cuts + 1):
        dual = _Dual(p, rows_A, rows_b, blo, bhi)
        lam, it, ok = _solve_dual(dual, tol, max_iter, lam0=lam)
        total_iter += it
        v, _, _ = dual.primal(lam)
        if not ok:
            return _finish(part, v, lam, rows_A, rows_b, blo, bhi, ITERATION_LIMIT, total_iter)
        cut = _most_violated_cut(nonlinear, v, part, tol)
        if cut is None:
            return _finish(part, v, lam, rows_A, rows_b, blo, bhi, CONVERGED, total_iter)
        rows_A = np.vstack([rows_A, cut[0][None, :]])
        rows_b = np.append(rows_b, cut[1])
        lam = np.append(lam, 0.0)
    return _finish(part, v, lam, rows_A, rows_b, blo, bhi, ITERATION_LIMIT, total_iter)


def _most_violated_cut(nonlinear, v, part, tol):
    best = None
    for s in nonlinear:
        if not isinstance(s, Spectral):
            raise InvalidInputError(f"unsupported nonlinear constraint {type(s).__name__}")
        value, g = s.norm_subgradient(v, part.n)
        excess = value - s.threshold
        if excess > tol * max(1.0, s.threshold) and (best is None or excess > best[2]):
            # value + g.(w - v) <= threshold, using homogeneity value = g.v
            best = (g, s.threshold - value + g @ v, excess)
    return None if best is None else best[:2]


def _finish(part, v, lam, A, b, lo, hi, status, iterations):
    p = part.part_sizes.astype(float)
    return MaxEntSolution(
        m_star=v,
        q_star=v / p,
        duals=lam,
        objective=float(np.sum(_h(v, p))),
        status=status,
        kkt_residual=kkt_residual(v, lam, A, b, lo, hi, p),
        iterations=iterations,
        part_sizes=part.part_sizes,
    )


def product_matrix(sol: MaxEntSolution, part: Partition) -> np.ndarray:
    """Symmetric ``n x n`` matrix of edge probabilities ``m*_i / p_i``, zero diagonal."""
    if not sol.converged:
        raise InvalidStateError(f"solution status is {sol.status!r}, not converged")
    if sol.m_star.shape[0] != part.k:
        raise InvalidInputError("solution and partition disagree on k")
    Q = np.zeros((part.n, part.n))
    rows, cols = np.triu_indices(part.n, k=1)
    Q[rows, cols] = sol.q_star[part.part_of]
    return Q + Q.T
