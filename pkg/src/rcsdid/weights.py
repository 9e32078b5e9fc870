"""Simplex-constrained weight families for RC-SDiD.

Three weight families are computed from the aggregated panel:

* unit weights over control groups, matching the treated pre-period
  average with a ridge penalty;
* time weights over pre-treatment periods, matching the control-group
  post-period averages (no ridge);
* cross-sectional weights, the elementwise reciprocal of cell counts.

Both least-squares families share one kernel: an away-step Frank-Wolfe
solver over the probability simplex with the intercept profiled out
analytically and exact line search on the quadratic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .data import AggregatedPanel

__all__ = [
    "SolverReport",
    "UnitWeights",
    "TimeWeights",
    "NuWeights",
    "ZetaResult",
    "compute_zeta",
    "solve_unit_weights",
    "solve_time_weights",
    "cross_sectional_weights",
    "frank_wolfe_simplex",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    final_objective: float
    gradient_gap: float
    converged: bool


@dataclass(frozen=True)
class UnitWeights:
    """Control-group weights; treated groups implicitly carry 1/K_tr."""

    omega0: float
    omega: np.ndarray
    zeta: float
    solver_report: SolverReport

    def full_vector(self, k_tr: int) -> np.ndarray:
        """Length-K weight vector including the treated groups."""
        return np.concatenate([self.omega, np.full(k_tr, 1.0 / k_tr)])


@dataclass(frozen=True)
class TimeWeights:
    """Pre-period weights; post periods implicitly carry 1/T_post."""

    lambda0: float
    lam: np.ndarray
    solver_report: SolverReport

    def full_vector(self, t_post: int) -> np.ndarray:
        """Length-T weight vector including the post periods."""
        return np.concatenate([self.lam, np.full(t_post, 1.0 / t_post)])


@dataclass(frozen=True)
class NuWeights:
    """Per-cell reciprocal-count weights."""

    nu: np.ndarray


@dataclass(frozen=True)
class ZetaResult:
    zeta: float
    sigma_hat: float
    delta_bar: float


def compute_zeta(panel: AggregatedPanel) -> ZetaResult:
    """Ridge level from first differences of control pre-period means.

    sigma_hat^2 is the dispersion of Delta_{k,t} = Ybar_{k,t+1} - Ybar_{k,t}
    over control groups and pre-periods, with denominator K_co*(T_pre-1);
    zeta = (K_tr * T_post)^(1/4) * sigma_hat.
    """
    lay = panel.layout
    if lay.t_pre < 2:
        raise ValueError("zeta undefined for t_pre < 2")
    pre = panel.means[: lay.k_co, : lay.t_pre]
    deltas = np.diff(pre, axis=1)
    delta_bar = deltas.mean()
    sigma2 = np.mean((deltas - delta_bar) ** 2)
    sigma_hat = float(np.sqrt(sigma2))
    zeta = float((lay.k_tr * lay.t_post) ** 0.25 * sigma_hat)
    return ZetaResult(zeta=zeta, sigma_hat=sigma_hat, delta_bar=float(delta_bar))


def _profiled_objective(a: np.ndarray, b: np.ndarray, ridge: float, x: np.ndarray) -> float:
    resid = a @ x - b
    resid = resid - resid.mean()
    return float(resid @ resid + ridge * (x @ x))


def frank_wolfe_simplex(
    a: np.ndarray,
    b: np.ndarray,
    ridge: float = 0.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
):
    """Minimize ||center(A x - b)||^2 + ridge * ||x||^2 over the simplex.

    The intercept is profiled out by centering the residual across rows.
    Uses away-step Frank-Wolfe with exact line search, started at the
    uniform point, ties in the vertex oracle broken by lowest index.
    Returns ``(x, intercept, SolverReport)``; the reported gap is the
    standard Frank-Wolfe duality gap at exit.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A {a.shape}, b {b.shape}")
    n_rows, n = a.shape
    if n < 1:
        raise ValueError("A needs at least one column")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")

    ac = a - a.mean(axis=0)
    bc = b - b.mean()
    # f(x) = x'Qx - 2 p'x + const with Q = Ac'Ac + ridge*I, p = Ac'bc
    q = ac.T @ ac
    q[np.diag_indices(n)] += ridge
    p = ac.T @ bc

    if n == 1:
        x = np.ones(1)
        obj = _profiled_objective(a, b, ridge, x)
        intercept = float((b - a @ x).mean())
        return x, intercept, SolverReport(0, obj, 0.0, True)

    x, iterations, gap = _afw_loop(q, p, float(tol), int(max_iter))
    x = _clean_simplex(x)
    obj = _profiled_objective(a, b, ridge, x)
    intercept = float((b - a @ x).mean())
    report = SolverReport(
        iterations=iterations,
        final_objective=obj,
        gradient_gap=gap,
        converged=bool(gap <= tol),
    )
    return x, intercept, report


@njit(cache=True)
def _afw_loop(q, p, tol, max_iter):  # pragma: no cover - exercised via wrapper
    """Away-step Frank-Wolfe on the simplex for f(x) = x'Qx - 2p'x.

    Starts at the uniform point; exact line search; vertex-oracle ties
    broken by lowest index. Maintains qx = Q x incrementally and refreshes
    it periodically to bound drift.
    """
    n = q.shape[0]
    x = np.full(n, 1.0 / n)
    qx = q @ x
    gap = np.inf
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        grad = 2.0 * (qx - p)
        gx = 0.0
        for i in range(n):
            gx += grad[i] * x[i]
        i_fw = 0
        for i in range(1, n):
            if grad[i] < grad[i_fw]:
                i_fw = i
        gap = gx - grad[i_fw]
        if gap <= tol:
            break
        i_aw = -1
        for i in range(n):
            if x[i] > 0.0 and (i_aw < 0 or grad[i] > grad[i_aw]):
                i_aw = i
        gap_away = grad[i_aw] - gx

        # curvature d'Qd from cached quantities: d = +-(e_j - x)
        xqx = 0.0
        for i in range(n):
            xqx += x[i] * qx[i]

        if gap >= gap_away:
            j = i_fw
            slope = -gap
            gamma_max = 1.0
            fw_step = True
        else:
            j = i_aw
            slope = -gap_away
            denom_mass = 1.0 - x[j]
            gamma_max = x[j] / denom_mass if denom_mass > 0.0 else 0.0
            fw_step = False
        curv = q[j, j] - 2.0 * qx[j] + xqx
        if curv <= 0.0:
            gamma = gamma_max
        else:
            gamma = min(-slope / (2.0 * curv), gamma_max)
        if gamma <= 0.0:
            break
        if fw_step:
            for i in range(n):
                x[i] = (1.0 - gamma) * x[i]
                qx[i] = (1.0 - gamma) * qx[i] + gamma * q[i, j]
            x[j] += gamma
            if gamma == 1.0:
                for i in range(n):
                    x[i] = 0.0
                x[j] = 1.0
        else:
            for i in range(n):
                x[i] = (1.0 + gamma) * x[i]
                qx[i] = (1.0 + gamma) * qx[i] - gamma * q[i, j]
            x[j] -= gamma
            if gamma == gamma_max:
                x[j] = 0.0  # drop step: the away vertex leaves the support
        if it % 128 == 0:
            total = 0.0
            for i in range(n):
                if x[i] < 0.0:
                    x[i] = 0.0
                total += x[i]
            for i in range(n):
                x[i] /= total
            qx = q @ x
    return x, iterations, gap


def _clean_simplex(x: np.ndarray) -> np.ndarray:
    if x.min() < -1e-12:
        raise AssertionError("solver produced a materially negative weight")
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def solve_unit_weights(
    panel: AggregatedPanel,
    zeta: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> UnitWeights:
    """Simplex weights over control groups matching treated pre-trends.

    Objective: sum over pre-periods of (omega0 + sum_k omega_k Ybar_{k,t}
    - treated average)^2 + zeta^2 * T_pre * ||omega||^2.
    """
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    lay = panel.layout
    a = panel.means[: lay.k_co, : lay.t_pre].T  # T_pre x K_co
    b = panel.means[lay.k_co :, : lay.t_pre].mean(axis=0)
    ridge = zeta**2 * lay.t_pre
    omega, omega0, report = frank_wolfe_simplex(a, b, ridge=ridge, tol=tol, max_iter=max_iter)
    return UnitWeights(omega0=omega0, omega=omega, zeta=float(zeta), solver_report=report)


def solve_time_weights(
    panel: AggregatedPanel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> TimeWeights:
    """Simplex weights over pre-periods matching control post averages."""
    lay = panel.layout
    a = panel.means[: lay.k_co, : lay.t_pre]  # K_co x T_pre
    b = panel.means[: lay.k_co, lay.t_pre :].mean(axis=1)
    lam, lambda0, report = frank_wolfe_simplex(a, b, ridge=0.0, tol=tol, max_iter=max_iter)
    return TimeWeights(lambda0=lambda0, lam=lam, solver_report=report)


def cross_sectional_weights(panel: AggregatedPanel) -> NuWeights:
    """Elementwise reciprocal of the cell counts."""
    return NuWeights(nu=1.0 / panel.counts)
