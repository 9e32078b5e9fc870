"""Weighted two-way fixed-effects estimators: DiD, SDiD, RC-SDiD.

All three estimators minimize a weighted sum of squares of
(Y - mu - alpha_k - beta_t - tau * W_{k,t}) over individual observations;
they differ only in the per-observation weight:

* DiD: 1 for every observation;
* SDiD: omega_k * lambda_t (unit and time weights);
* RC-SDiD: omega_k * lambda_t / N_{k,t} (adds the cross-sectional weight).

Because the regressors are constant within a (group, period) cell, the
individual-level problem collapses exactly to a cell-level weighted
regression on the cell means with cell weight equal to the summed
observation weights. That collapse is the default fast path; the
individual-level path is kept for verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import AggregatedPanel, RCDataset, aggregate
from .weights import (
    NuWeights,
    TimeWeights,
    UnitWeights,
    compute_zeta,
    cross_sectional_weights,
    solve_time_weights,
    solve_unit_weights,
)

__all__ = [
    "DegenerateDesignError",
    "WeightSet",
    "Estimate",
    "weighted_twfe_regression",
    "estimate_did",
    "estimate_sdid_baseline",
    "estimate_rcsdid",
    "estimate_all",
]

METHODS = ("did", "sdid", "rcsdid")


class DegenerateDesignError(ValueError):
    """The weighted design cannot identify the treatment effect."""


@dataclass(frozen=True)
class WeightSet:
    """Weights attached to an estimate; None marks the uniform/unit default."""

    unit: UnitWeights | None = None
    time: TimeWeights | None = None
    cross_sectional: NuWeights | None = None


@dataclass(frozen=True)
class Estimate:
    method: str
    tau_hat: float
    mu_hat: float
    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    weights_used: WeightSet
    n_obs: int


def weighted_twfe_regression(
    means: np.ndarray,
    cell_weights: np.ndarray,
    treat_mask: np.ndarray,
):
    """Cell-level weighted regression on group + time dummies + treatment.

    Identification by reference levels: alpha_1 = beta_1 = 0. Groups or
    periods with zero total weight get alpha/beta reported as NaN rather
    than being dropped from the output shape.

    Returns ``(tau, mu, alpha, beta)``.
    """
    means = np.asarray(means, dtype=np.float64)
    w = np.asarray(cell_weights, dtype=np.float64)
    treat = np.asarray(treat_mask, dtype=bool)
    if means.shape != w.shape or means.shape != treat.shape:
        raise ValueError("means, cell_weights, treat_mask must share a shape")
    if not np.all(np.isfinite(w)) or w.min() < 0:
        raise DegenerateDesignError("cell weights must be finite and nonnegative")
    n_groups, n_periods = means.shape

    if w[treat].sum() <= 0:
        raise DegenerateDesignError("zero total weight on treated-post cells")
    if w[~treat].sum() <= 0:
        raise DegenerateDesignError("zero total weight on untreated cells")

    group_w = w.sum(axis=1)
    period_w = w.sum(axis=0)
    live_groups = np.flatnonzero(group_w > 0)
    live_periods = np.flatnonzero(period_w > 0)
    if live_groups.size < 1 or live_periods.size < 2:
        raise DegenerateDesignError("design collapses to a single period or group")

    rows = np.flatnonzero(w.ravel() > 0)
    g_idx, t_idx = np.divmod(rows, n_periods)
    g_pos = np.searchsorted(live_groups, g_idx)
    t_pos = np.searchsorted(live_periods, t_idx)

    n_g = live_groups.size
    n_t = live_periods.size
    # columns: intercept | group dummies 2..n_g | period dummies 2..n_t | W
    n_cols = 1 + (n_g - 1) + (n_t - 1) + 1
    x = np.zeros((rows.size, n_cols))
    x[:, 0] = 1.0
    has_g = g_pos > 0
    x[np.flatnonzero(has_g), g_pos[has_g]] = 1.0
    has_t = t_pos > 0
    x[np.flatnonzero(has_t), n_g - 1 + t_pos[has_t]] = 1.0
    x[:, -1] = treat.ravel()[rows]

    y = means.ravel()[rows]
    sw = np.sqrt(w.ravel()[rows])
    xw = x * sw[:, None]
    yw = y * sw

    rank = np.linalg.matrix_rank(xw)
    if rank < n_cols:
        raise DegenerateDesignError(
            "collinear design: treatment indicator or dummy block is not "
            "identified under the given weights"
        )
    coef, *_ = np.linalg.lstsq(xw, yw, rcond=None)

    mu = float(coef[0])
    alpha = np.full(n_groups, np.nan)
    alpha[live_groups] = np.concatenate(([0.0], coef[1:n_g]))
    beta = np.full(n_periods, np.nan)
    beta[live_periods] = np.concatenate(([0.0], coef[n_g : n_g + n_t - 1]))
    tau = float(coef[-1])
    return tau, mu, alpha, beta


def _individual_twfe(data: RCDataset, obs_weights: np.ndarray):
    """Reference individual-level weighted solve (verification path)."""
    lay = data.layout
    n = data.n_rows
    n_cols = 1 + (lay.k - 1) + (lay.t - 1) + 1
    x = np.zeros((n, n_cols))
    x[:, 0] = 1.0
    g = data.group - 1
    t = data.time - 1
    rows = np.arange(n)
    x[rows[g > 0], g[g > 0]] = 1.0
    x[rows[t > 0], lay.k - 1 + t[t > 0]] = 1.0
    treated = lay.is_treated_cell()
    x[:, -1] = treated[g, t]
    sw = np.sqrt(obs_weights)
    coef, *_ = np.linalg.lstsq(x * sw[:, None], data.outcome * sw, rcond=None)
    mu = float(coef[0])
    alpha = np.concatenate(([0.0], coef[1 : lay.k]))
    beta = np.concatenate(([0.0], coef[lay.k : lay.k + lay.t - 1]))
    return float(coef[-1]), mu, alpha, beta


def _solve_sdid_weights(panel: AggregatedPanel):
    zres = compute_zeta(panel)
    unit = solve_unit_weights(panel, zres.zeta)
    time = solve_time_weights(panel)
    return unit, time


def _cell_weights(panel: AggregatedPanel, method: str, unit=None, time=None):
    lay = panel.layout
    if method == "did":
        return panel.counts.astype(np.float64)
    omega_full = unit.full_vector(lay.k_tr)
    lambda_full = time.full_vector(lay.t_post)
    base = np.outer(omega_full, lambda_full)
    if method == "sdid":
        return base * panel.counts
    if method == "rcsdid":
        # nu = 1/N cancels the per-cell count exactly
        return base
    raise ValueError(f"unknown method {method!r}")


def _estimate(data: RCDataset, method: str, use_cells: bool = True) -> Estimate:
    panel = aggregate(data)
    lay = data.layout
    unit = time = nu = None
    if method in ("sdid", "rcsdid"):
        unit, time = _solve_sdid_weights(panel)
    if method == "rcsdid":
        nu = cross_sectional_weights(panel)

    if use_cells:
        cw = _cell_weights(panel, method, unit, time)
        tau, mu, alpha, beta = weighted_twfe_regression(
            panel.means, cw, lay.is_treated_cell()
        )
    else:
        g = data.group - 1
        t = data.time - 1
        if method == "did":
            ow = np.ones(data.n_rows)
        else:
            omega_full = unit.full_vector(lay.k_tr)
            lambda_full = time.full_vector(lay.t_post)
            ow = omega_full[g] * lambda_full[t]
            if method == "rcsdid":
                ow = ow * nu.nu[g, t]
        tau, mu, alpha, beta = _individual_twfe(data, ow)

    return Estimate(
        method=method,
        tau_hat=tau,
        mu_hat=mu,
        alpha_hat=alpha,
        beta_hat=beta,
        weights_used=WeightSet(unit=unit, time=time, cross_sectional=nu),
        n_obs=data.n_rows,
    )


def estimate_did(data: RCDataset, use_cells: bool = True) -> Estimate:
    """Unweighted two-way fixed-effects regression."""
    return _estimate(data, "did", use_cells)


def estimate_sdid_baseline(data: RCDataset, use_cells: bool = True) -> Estimate:
    """SDiD on repeated cross-sections: omega * lambda observation weights."""
    return _estimate(data, "sdid", use_cells)


def estimate_rcsdid(data: RCDataset, use_cells: bool = True) -> Estimate:
    """RC-SDiD: omega * lambda * (1/N_{k,t}) observation weights."""
    return _estimate(data, "rcsdid", use_cells)


def estimate_all(data: RCDataset, use_cells: bool = True) -> dict[str, Estimate]:
    """Run DiD, SDiD and RC-SDiD on the same dataset.

    The SDiD weight solve is shared between SDiD and RC-SDiD.
    """
    panel = aggregate(data)
    lay = data.layout
    unit, time = _solve_sdid_weights(panel)
    nu = cross_sectional_weights(panel)
    treated = lay.is_treated_cell()
    out: dict[str, Estimate] = {}
    for method in METHODS:
        cw = _cell_weights(panel, method, unit, time)
        tau, mu, alpha, beta = weighted_twfe_regression(panel.means, cw, treated)
        out[method] = Estimate(
            method=method,
            tau_hat=tau,
            mu_hat=mu,
            alpha_hat=alpha,
            beta_hat=beta,
            weights_used=WeightSet(
                unit=None if method == "did" else unit,
                time=None if method == "did" else time,
                cross_sectional=nu if method == "rcsdid" else None,
            ),
            n_obs=data.n_rows,
        )
    if not use_cells:
        out = {m: _estimate(data, m, use_cells=False) for m in METHODS}
    return out
