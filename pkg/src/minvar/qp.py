"""Finite-size minimum-variance optimizers: budget equality, optional w >= 0.

Solves min w' C w subject to sum(w) = budget, and optionally w >= 0, for a
dense PSD covariance C. The equality problem is handled through one
eigendecomposition, which also certifies rank: when C is singular and the
budget plane intersects its null space the minimum is exactly zero, the
solution is non-unique, and the reported weights are the minimum-norm
representative with the degeneracy flagged rather than regularized away.

The nonnegative problem uses a primal active-set method: start from the
feasible equal-weight point, repeatedly solve the equality-restricted KKT
system on the free coordinates, take the minimum-ratio step when a free
weight would cross zero (that bound joins the working set), and release
the working-set bound with the most negative multiplier when the
restricted optimum is feasible. Lowest index breaks ties. Singular
restricted KKT systems fall back to a least-squares solve, which is exact
here because a bounded-below convex restriction always has a consistent
stationarity system.

No ridge, no jitter: a flat optimum is reported as flat.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ActiveSetError, CovarianceError

__all__ = [
    "CovMatrix",
    "QpResult",
    "min_variance_equality",
    "min_variance_noshort",
    "kkt_residual",
    "brute_force_noshort",
]

# eigenvalues below RANK_RTOL * max_eig count as zero when certifying rank
RANK_RTOL = 1e-10
# an objective below ZERO_RTOL * trace(C)/N is a zero-variance (flat) optimum
ZERO_RTOL = 1e-10


@dataclass(frozen=True)
class CovMatrix:
    """Validated dense symmetric PSD matrix.

    `undersampled` records whether the matrix came from fewer observations
    than assets (None when unknown). Use `from_returns` for Gram matrices
    of return samples (PSD by construction) and `from_matrix` for raw
    arrays, which get symmetry- and spectrum-checked.
    """

    matrix: np.ndarray
    undersampled: bool | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise CovarianceError("covariance must be a square matrix")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_returns(cls, x: np.ndarray) -> "CovMatrix":
        """Second-moment matrix X X' / T of an (N, T) return sample."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise CovarianceError("returns must be an (N, T) array")
        t = x.shape[1]
        if t < 1:
            raise CovarianceError("need at least one observation")
        c = (x @ x.T) / t
        c = 0.5 * (c + c.T)
        return cls(c, undersampled=t < x.shape[0])

    @classmethod
    def from_matrix(cls, c: np.ndarray, undersampled: bool | None = None) -> "CovMatrix":
        c = np.asarray(c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise CovarianceError("covariance must be a square matrix")
        scale = max(1.0, float(np.max(np.abs(c))) if c.size else 0.0)
        if float(np.max(np.abs(c - c.T))) > 1e-12 * scale:
            raise CovarianceError("covariance must be symmetric to 1e-12")
        sym = 0.5 * (c + c.T)
        vals = np.linalg.eigvalsh(sym)
        if vals[0] < -1e-10 * max(float(np.trace(sym)), 0.0) - 1e-300:
            raise CovarianceError(
                f"matrix is not positive semidefinite (min eigenvalue {vals[0]:.3e})"
            )
        return cls(sym, undersampled=undersampled)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        vals, vecs = np.linalg.eigh(self.matrix)
        return vals, vecs

    @cached_property
    def rank(self) -> int:
        vals = self._eig[0]
        top = float(vals[-1])
        if top <= 0.0:
            return 0
        return int(np.sum(vals > RANK_RTOL * top))

    @property
    def tol_zero(self) -> float:
        """Objective threshold under which the optimum counts as zero variance."""
        return ZERO_RTOL * float(np.trace(self.matrix)) / self.n


@dataclass(frozen=True)
class QpResult:
    """Solution record of one quadratic program.

    `active_set` lists the indices pinned at zero (always empty for the
    equality-only problem). `degenerate` marks a zero-variance optimum;
    `flat_directions` counts the covariance null-space dimensions along
    which the optimum is flat (N - rank(C) when degenerate, else 0), and
    the reported weights are then the minimum-norm representative.
    `lam` is the budget multiplier of the final KKT system.
    """

    weights: np.ndarray
    objective: float
    active_set: tuple[int, ...]
    degenerate: bool
    flat_directions: int
    constraint: str
    lam: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


def _as_cov(c) -> CovMatrix:
    return c if isinstance(c, CovMatrix) else CovMatrix.from_matrix(c)


def min_variance_equality(c, budget: float = None) -> QpResult:
    """Minimize w' C w on the plane sum(w) = budget (default budget = N).

    Full-rank C gives the classic precision-weighted solution. If C is
    singular and the budget plane meets the null space, the minimum is
    exactly zero along an affine set; the minimum-norm point of that set
    is returned with `degenerate` set and `flat_directions` = N - rank.
    """
    cov = _as_cov(c)
    n = cov.n
    b = float(n if budget is None else budget)
    vals, vecs = cov._eig
    top = float(vals[-1])
    if top < 0.0:
        raise CovarianceError("covariance has negative spectrum")
    thresh = RANK_RTOL * max(top, 0.0)
    keep = vals > thresh
    rank = int(np.sum(keep))
    ones = np.ones(n)
    a = vecs.T @ ones

    if rank < n:
        # component of the budget direction inside the null space
        z = ones - vecs[:, keep] @ a[keep]
        z_sq = float(z @ z)
        if z_sq > n * 1e-20:
            w = (b / z_sq) * z
            obj = max(float(w @ cov.matrix @ w), 0.0)
            return QpResult(
                weights=w,
                objective=obj,
                active_set=(),
                degenerate=True,
                flat_directions=n - rank,
                constraint="equality",
                lam=0.0,
            )
        # measure-zero corner: budget direction orthogonal to the null
        # space; minimize on the positive eigenspace instead

    denom = vals.copy()
    denom[~keep] = 1.0  # masked below
    y = np.where(keep, a / denom, 0.0)
    w_tilde = vecs @ y
    s = float(a[keep] @ y[keep])
    if s <= 0.0:
        raise CovarianceError("budget direction carries no positive spectrum mass")
    w = (b / s) * w_tilde
    obj = max(float(w @ cov.matrix @ w), 0.0)
    degen = obj < cov.tol_zero
    return QpResult(
        weights=w,
        objective=obj,
        active_set=(),
        degenerate=degen,
        flat_directions=(n - rank) if degen else 0,
        constraint="equality",
        lam=2.0 * b / s,
    )


def _kkt_solve(cff: np.ndarray, b: float):
    """Stationary point of min w' Cff w, sum(w) = b; least squares if singular.

    Returns (w, lam). The least-squares branch is exact: the restricted
    problem is convex and bounded below, so its KKT system is consistent
    and lstsq picks the minimum-norm stationary pair.
    """
    k = cff.shape[0]
    kkt = np.empty((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * cff
    kkt[:k, k] = -1.0
    kkt[k, :k] = 1.0
    kkt[k, k] = 0.0
    rhs = np.zeros(k + 1)
    rhs[k] = b
    try:
        sol = np.linalg.solve(kkt, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
        # reject solutions of nearly singular systems that solve() mangled
        scale = max(abs(b), float(np.max(np.abs(kkt))) * float(np.max(np.abs(sol))))
        if float(np.max(np.abs(kkt @ sol - rhs))) > 1e-8 * max(scale, 1e-300):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k], float(sol[k])


def min_variance_noshort(c, budget: float = None, max_iter: int = None) -> QpResult:
    """Minimize w' C w with sum(w) = budget and w >= 0, by primal active set.

    Weights in the working set are exactly zero in the result. Flat
    (zero-variance) optima are detected from the final objective against
    the scaled threshold and flagged, never regularized. Raises
    ActiveSetError if the iteration cap (50 N) is exhausted.
    """
    cov = _as_cov(c)
    n = cov.n
    b = float(n if budget is None else budget)
    if b < 0:
        raise ValueError("budget must be nonnegative")
    cap = 50 * n if max_iter is None else max_iter
    cm = cov.matrix

    free = np.ones(n, dtype=bool)
    w = np.full(n, b / n)
    lam = 0.0
    mu_scale = 2.0 * max(float(np.trace(cm)) / n, 1e-300) * max(abs(b), 1.0)
    tol_mu = 1e-10 * mu_scale
    tol_w = 1e-12 * max(abs(b), 1.0)

    for _ in range(cap):
        f_idx = np.flatnonzero(free)
        w_hat, lam = _kkt_solve(cm[np.ix_(f_idx, f_idx)], b)
        if w_hat.min(initial=np.inf) >= -tol_w:
            w[:] = 0.0
            w[f_idx] = np.maximum(w_hat, 0.0)
            a_idx = np.flatnonzero(~free)
            if a_idx.size == 0:
                break
            mu = 2.0 * (cm[a_idx] @ w) - lam
            j = int(np.argmin(mu))
            if mu[j] >= -tol_mu:
                break
            free[a_idx[j]] = True  # release the most negative multiplier
        else:
            # minimum-ratio step toward the restricted optimum
            w_f = w[f_idx]
            blocked = w_hat < -tol_w
            ratios = np.full(f_idx.size, np.inf)
            ratios[blocked] = w_f[blocked] / (w_f[blocked] - w_hat[blocked])
            j = int(np.argmin(ratios))
            alpha = min(max(ratios[j], 0.0), 1.0)
            w[f_idx] = w_f + alpha * (w_hat - w_f)
            w[f_idx[j]] = 0.0
            free[f_idx[j]] = False
    else:
        raise ActiveSetError(
            f"active-set cap {cap} reached",
            iterate=np.flatnonzero(~free).tolist(),
            residual=None,
        )

    obj = max(float(w @ cm @ w), 0.0)
    degen = obj < cov.tol_zero
    return QpResult(
        weights=w,
        objective=obj,
        active_set=tuple(int(i) for i in np.flatnonzero(~free)),
        degenerate=degen,
        flat_directions=(n - cov.rank) if degen else 0,
        constraint="noshort",
        lam=lam,
    )


def kkt_residual(c, result: QpResult, budget: float) -> float:
    """Max-norm violation of the first-order conditions at `result`.

    Components: budget gap, stationarity of the free gradient around the
    fitted multiplier, and for the nonnegative problem also weight
    negativity, multiplier negativity, and complementary slackness.
    """
    cov = _as_cov(c)
    w = np.asarray(result.weights, dtype=float)
    g = 2.0 * (cov.matrix @ w)
    res = abs(float(np.sum(w)) - float(budget))
    active = np.zeros(cov.n, dtype=bool)
    if result.constraint == "noshort":
        active[list(result.active_set)] = True
    free = ~active
    if np.any(free):
        lam = float(np.mean(g[free]))
        res = max(res, float(np.max(np.abs(g[free] - lam))))
    else:
        lam = result.lam
    if result.constraint == "noshort":
        res = max(res, max(0.0, -float(np.min(w))))
        if np.any(active):
            mu = g[active] - lam
            res = max(res, max(0.0, -float(np.min(mu))))
            res = max(res, float(np.max(np.abs(mu * w[active]))))
    return res


def brute_force_noshort(c, budget: float = None) -> QpResult:
    """Exact reference for the nonnegative problem by support enumeration.

    Every nonempty support set gets its equality-restricted stationary
    point; feasible candidates (all entries nonnegative) are compared on
    the objective. Some optimal face always contains a vertex whose
    support yields a unique, hence feasible, restricted solution, so the
    scan is exhaustive. Guarded to N <= 12.
    """
    cov = _as_cov(c)
    n = cov.n
    if n > 12:
        raise ValueError("brute force is limited to N <= 12")
    b = float(n if budget is None else budget)
    if b < 0:
        raise ValueError("budget must be nonnegative")
    cm = cov.matrix
    tol_feas = 1e-12 * max(abs(b), 1.0)
    best = None
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        w_s, lam = _kkt_solve(cm[np.ix_(idx, idx)], b)
        if w_s.min() < -tol_feas:
            continue
        w = np.zeros(n)
        w[idx] = np.maximum(w_s, 0.0)
        obj = float(w @ cm @ w)
        if best is None or obj < best[0] - 1e-15 * max(1.0, abs(best[0])):
            best = (obj, w, lam)
    obj, w, lam = best
    obj = max(obj, 0.0)
    degen = obj < cov.tol_zero
    zero = w <= tol_feas
    return QpResult(
        weights=w,
        objective=obj,
        active_set=tuple(int(i) for i in np.flatnonzero(zero)),
        degenerate=degen,
        flat_directions=(n - cov.rank) if degen else 0,
        constraint="noshort",
        lam=lam,
    )
