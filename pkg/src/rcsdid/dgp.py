"""Interactive fixed-effects data generating process for the simulations.

Outcome model: Y = tau*W + alpha_k + beta_t + Lambda_k . f_t + eps, with
group effects and loadings drawn uniformly (controls on [-sqrt3, sqrt3],
treated on a shifted interval controlled by the overlap parameter w) and
cell counts evolving by a scaled random-walk increment.

Parameter draws use fixed-order canonical uniforms/normals, so two
configurations sharing a seed but differing in, say, w or the scale range
produce comonotone draws; tables that vary one knob hold everything else
fixed, as in a classic Monte Carlo design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .data import PanelLayout, RCDataset
from .streams import substream

__all__ = [
    "ScenarioConfig",
    "GroupParams",
    "CountsMatrix",
    "draw_group_params",
    "draw_count_increments",
    "simulate_counts",
    "simulate_dataset",
]

SQRT3 = float(np.sqrt(3.0))


@dataclass(frozen=True)
class ScenarioConfig:
    """Full parameterization of one simulation scenario.

    Defaults follow the benchmark setting: 30 control groups, one treated
    group, 30 periods (half pre-treatment), tau=0.3, one factor, w=0.2,
    rho=0.2, baseline 100 observations per cell, scale range [1, 10].
    """

    k_co: int = 30
    k_tr: int = 1
    t: int = 30
    t_pre: int = 15
    tau: float = 0.3
    r: int = 1
    w: float = 0.2
    rho: float = 0.2
    base_rc: int = 100
    s_range: tuple[int, int] = (1, 10)
    seed: int = 0

    def __post_init__(self):
        if min(self.k_co, self.k_tr, self.t, self.t_pre, self.base_rc) < 1:
            raise ValueError("counts must be positive")
        if self.t_pre >= self.t:
            raise ValueError("t_pre must be smaller than t")
        if not 0.0 <= self.w <= 1.0:
            raise ValueError("w must lie in [0, 1]")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        s_lo, s_hi = self.s_range
        if s_lo < 1 or s_hi < s_lo:
            raise ValueError("s_range must satisfy 1 <= s_lo <= s_hi")

    @property
    def layout(self) -> PanelLayout:
        return PanelLayout(
            k_co=self.k_co, k_tr=self.k_tr, t_pre=self.t_pre, t_post=self.t - self.t_pre
        )

    def replace(self, **kwargs) -> "ScenarioConfig":
        from dataclasses import replace

        return replace(self, **kwargs)


@dataclass(frozen=True)
class GroupParams:
    """One draw of the fixed simulation parameters."""

    alpha: np.ndarray  # K
    lambda_load: np.ndarray  # K x r
    scale: np.ndarray  # K, integer
    beta: np.ndarray  # T
    factors: np.ndarray  # T x r


@dataclass(frozen=True)
class CountsMatrix:
    counts: np.ndarray  # K x T positive integers

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.min() < 1:
            raise ValueError("cell counts must be >= 1")
        object.__setattr__(self, "counts", c)


def _map_uniform(u: np.ndarray, treated: np.ndarray, w: float) -> np.ndarray:
    """Map canonical U(0,1) draws onto the control/treated intervals."""
    lo = np.where(treated, SQRT3 - 2.0 * w * SQRT3, -SQRT3)
    return lo + u * 2.0 * SQRT3  # both intervals have width 2*sqrt(3)


def draw_group_params(cfg: ScenarioConfig, rng: np.random.Generator) -> GroupParams:
    """Draw alpha, loadings, scale, time effects and factors.

    The scale parameter is coupled to alpha through a Gaussian copula at
    correlation rho, preserving both marginals exactly; rho=0 recovers
    independence, rho=1 comonotone draws.
    """
    k = cfg.k_co + cfg.k_tr
    treated = np.zeros(k, dtype=bool)
    treated[cfg.k_co :] = True

    z = rng.standard_normal((k, 2))
    z_s = cfg.rho * z[:, 0] + np.sqrt(1.0 - cfg.rho**2) * z[:, 1]
    u_alpha = norm.cdf(z[:, 0])
    alpha = _map_uniform(u_alpha, treated, cfg.w)

    s_lo, s_hi = cfg.s_range
    n_levels = s_hi - s_lo + 1
    scale = s_lo + np.minimum(
        (norm.cdf(z_s) * n_levels).astype(np.int64), n_levels - 1
    )

    u_load = rng.uniform(size=(k, cfg.r)) if cfg.r > 0 else np.zeros((k, 0))
    lambda_load = _map_uniform(u_load, treated[:, None], cfg.w)

    beta = rng.standard_normal(cfg.t)
    factors = rng.standard_normal((cfg.t, cfg.r)) if cfg.r > 0 else np.zeros((cfg.t, 0))
    return GroupParams(
        alpha=alpha, lambda_load=lambda_load, scale=scale, beta=beta, factors=factors
    )


def draw_count_increments(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """K x T increments E_{k,t} ~ Normal(0.02 * Base, sqrt(Base) / 2)."""
    k = cfg.k_co + cfg.k_tr
    return rng.normal(
        loc=0.02 * cfg.base_rc, scale=np.sqrt(cfg.base_rc) / 2.0, size=(k, cfg.t)
    )


def simulate_counts(
    params: GroupParams, cfg: ScenarioConfig, rng: np.random.Generator
) -> CountsMatrix:
    """Evolve cell counts: N_{k,1} = S_k*(Base + E_{k,1}), then random-walk
    increments S_k * E_{k,t} with E ~ Normal(0.02*Base, sqrt(Base)/2).

    The recursion runs in floats; each cell is then rounded half away from
    zero and floored at 1.
    """
    e = draw_count_increments(cfg, rng)
    s = params.scale.astype(np.float64)[:, None]
    raw = s * cfg.base_rc + np.cumsum(s * e, axis=1)
    counts = np.maximum(np.floor(np.abs(raw) + 0.5) * np.sign(raw), 1.0)
    return CountsMatrix(counts=counts.astype(np.int64))


def simulate_dataset(
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    params: GroupParams | None = None,
    counts: CountsMatrix | None = None,
    noise: bool = True,
) -> RCDataset:
    """Simulate one repeated cross-sectional dataset.

    When ``params``/``counts`` are given they are held fixed and only the
    observation noise is drawn from ``rng`` (the harness uses this to
    redraw noise across replications while keeping everything else fixed).
    ``noise=False`` switches the error term off entirely.
    """
    if params is None:
        params = draw_group_params(cfg, rng)
    if counts is None:
        counts = simulate_counts(params, cfg, rng)
    lay = cfg.layout
    n_cells = counts.counts
    treated = lay.is_treated_cell()

    cell_base = (
        params.alpha[:, None]
        + params.beta[None, :]
        + params.lambda_load @ params.factors.T
        + cfg.tau * treated
    )

    per_cell = n_cells.ravel()
    group = np.repeat(np.arange(1, lay.k + 1), n_cells.sum(axis=1))
    time = np.repeat(np.tile(np.arange(1, lay.t + 1), lay.k), per_cell)
    y = np.repeat(cell_base.ravel(), per_cell)
    if noise:
        y = y + rng.standard_normal(y.size)
    return RCDataset(group=group, time=time, outcome=y, layout=lay)


def scenario_streams(cfg: ScenarioConfig, meta_seed: int):
    """(params_rng, counts_rng) pair for the fixed draw of a scenario."""
    return substream(meta_seed, "params"), substream(meta_seed, "counts")
