"""Monte Carlo replication loops and table generation.

A scenario fixes one draw of the DGP parameters (group effects, loadings,
factors, cell counts) and redraws only the observation noise across
replications. Tables vary one knob at a time around the benchmark
configuration and report mean bias, standard deviation and RMSE of each
estimator's treatment-effect estimate.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import aggregate
from .dgp import ScenarioConfig, draw_group_params, simulate_counts, simulate_dataset
from .estimators import DegenerateDesignError, estimate_all
from .streams import substream

__all__ = [
    "EstimatorMetrics",
    "MetricsRow",
    "TableSpec",
    "summarize",
    "run_scenario",
    "run_table",
    "table_spec",
    "rows_to_csv",
    "rows_to_markdown",
    "TABLE_IDS",
]

ESTIMATORS = ("did", "rcsdid", "sdid")
TABLE_IDS = ("scale", "factors", "assignment", "correlation", "size")

MAX_EXCLUSION_SHARE = 0.01


@dataclass(frozen=True)
class EstimatorMetrics:
    mean_bias: float
    sd: float
    rmse: float
    single_draw: bool = False


@dataclass(frozen=True)
class MetricsRow:
    scenario_label: str
    metrics: dict  # estimator name -> EstimatorMetrics
    replications: int
    meta_seed: int
    excluded: int = 0


@dataclass(frozen=True)
class TableSpec:
    """A table = one varied parameter over a base scenario."""

    table_id: str
    values: tuple
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    replications: int = 1000
    meta_replications: int = 1
    meta_seed: int = 0
    redraw_counts: bool = False

    def __post_init__(self):
        if self.table_id not in TABLE_IDS + ("custom",):
            raise ValueError(f"unknown table id {self.table_id!r}")
        if len(self.values) == 0:
            raise ValueError("values must be non-empty")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.meta_replications < 1:
            raise ValueError("meta_replications must be >= 1")


def summarize(tau_draws, tau_true: float) -> EstimatorMetrics:
    """Mean bias, sample SD (n-1) and RMSE of the draws around tau_true."""
    draws = np.asarray(tau_draws, dtype=np.float64)
    if draws.size == 0:
        raise ValueError("summarize needs at least one draw")
    errors = draws - tau_true
    bias = float(errors.mean())
    rmse = float(np.sqrt(np.mean(errors**2)))
    n = draws.size
    if n == 1:
        return EstimatorMetrics(mean_bias=bias, sd=0.0, rmse=rmse, single_draw=True)
    sd = float(draws.std(ddof=1))
    # internal consistency of the three statistics
    assert abs(rmse**2 - (bias**2 + sd**2 * (n - 1) / n)) <= 1e-10 * max(1.0, rmse**2)
    return EstimatorMetrics(mean_bias=bias, sd=sd, rmse=rmse)


def _one_replication(cfg, params, counts, meta_seed, rep, redraw_counts):
    if redraw_counts:
        counts = simulate_counts(params, cfg, substream(meta_seed, "counts", rep))
    rng = substream(meta_seed, "eps", rep)
    data = simulate_dataset(cfg, rng, params=params, counts=counts)
    estimates = estimate_all(data)
    return {m: estimates[m].tau_hat for m in ESTIMATORS}


def _replication_block(args):
    cfg, params, counts, meta_seed, reps_slice, redraw_counts = args
    out = []
    for rep in reps_slice:
        try:
            out.append((rep, _one_replication(cfg, params, counts, meta_seed, rep, redraw_counts)))
        except DegenerateDesignError:
            out.append((rep, None))
    return out


def run_scenario(
    cfg: ScenarioConfig,
    reps: int,
    meta_seed: int,
    label: str | None = None,
    redraw_counts: bool = False,
    threads: int | None = None,
) -> MetricsRow:
    """Replicate one scenario and summarize the three estimators.

    Fixed parameters and counts come from streams keyed only by
    ``meta_seed``; replication ``rep`` draws its noise from a stream keyed
    by (meta_seed, rep). Output is therefore identical for any thread
    count or execution order. A replication that hits a degenerate design
    is excluded; more than 1% exclusions aborts the run.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    params = draw_group_params(cfg, substream(meta_seed, "params"))
    counts = simulate_counts(params, cfg, substream(meta_seed, "counts"))

    workers = resolve_threads(threads)
    results: list = [None] * reps
    if workers <= 1 or reps == 1:
        for rep, res in _replication_block(
            (cfg, params, counts, meta_seed, range(reps), redraw_counts)
        ):
            results[rep] = res
    else:
        chunks = [
            (cfg, params, counts, meta_seed, range(lo, min(lo + 16, reps)), redraw_counts)
            for lo in range(0, reps, 16)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for block in pool.map(_replication_block, chunks):
                for rep, res in block:
                    results[rep] = res

    kept = [r for r in results if r is not None]
    excluded = reps - len(kept)
    if excluded > MAX_EXCLUSION_SHARE * reps:
        raise RuntimeError(
            f"{excluded}/{reps} replications hit a degenerate design"
        )
    metrics = {
        m: summarize([r[m] for r in kept], cfg.tau) for m in ESTIMATORS
    }
    return MetricsRow(
        scenario_label=label if label is not None else f"seed={meta_seed}",
        metrics=metrics,
        replications=len(kept),
        meta_seed=meta_seed,
        excluded=excluded,
    )


def resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("RCSDID_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _apply_value(table_id: str, base: ScenarioConfig, value) -> tuple[ScenarioConfig, str]:
    if table_id == "scale":
        lo, hi = value
        label = f"S_k={lo}" if lo == hi else f"S_k in [{lo},{hi}]"
        return base.replace(s_range=(int(lo), int(hi))), label
    if table_id == "factors":
        return base.replace(r=int(value)), f"r={value}"
    if table_id == "assignment":
        return base.replace(w=float(value)), f"w={value}"
    if table_id == "correlation":
        return base.replace(rho=float(value)), f"rho={value}"
    if table_id == "size":
        base_rc, k_co, t = value
        return (
            base.replace(base_rc=int(base_rc), k_co=int(k_co), t=int(t), t_pre=int(t) // 2),
            f"Base_RC={base_rc}, K_co={k_co}, T={t}",
        )
    if table_id == "custom":
        return base, str(value)
    raise ValueError(f"unknown table id {table_id!r}")


def table_spec(
    table_id: str,
    base: ScenarioConfig | None = None,
    replications: int = 1000,
    meta_replications: int = 1,
    meta_seed: int = 0,
    values=None,
    redraw_counts: bool = False,
) -> TableSpec:
    """Preset TableSpec for each published table; values may be overridden."""
    base = base if base is not None else ScenarioConfig()
    defaults = {
        "scale": ((1, 1), (1, 2), (1, 4), (1, 6), (1, 8), (1, 10), (1, 15), (1, 20)),
        "factors": (0, 1, 2, 3, 4),
        "assignment": (1.0, 0.8, 0.6, 0.4, 0.2, 0.0),
        "correlation": (0.0, 0.2, 0.5, 0.8, 1.0),
        "size": (
            (100, 30, 30),
            (100, 15, 30),
            (100, 30, 15),
            (100, 15, 15),
            (50, 30, 30),
            (50, 15, 30),
            (50, 30, 15),
            (50, 15, 15),
        ),
        "custom": (None,),
    }
    if values is None:
        values = defaults[table_id]
    return TableSpec(
        table_id=table_id,
        values=tuple(values),
        base=base,
        replications=replications,
        meta_replications=meta_replications,
        meta_seed=meta_seed,
        redraw_counts=redraw_counts,
    )


def run_table(spec: TableSpec, threads: int | None = None) -> list[MetricsRow]:
    """One MetricsRow per (parameter value, meta-replication).

    All rows of a given meta-replication share the same underlying
    parameter draws (streams keyed by the meta seed only), so varying one
    knob leaves everything else literally fixed, as in the published
    design where only the knob of interest moves between rows.
    """
    rows = []
    for m in range(spec.meta_replications):
        meta_seed = spec.meta_seed if spec.meta_replications == 1 else _meta_seed(spec.meta_seed, m)
        for value in spec.values:
            cfg, label = _apply_value(spec.table_id, spec.base, value)
            if spec.meta_replications > 1:
                label = f"{label} (meta={m})"
            rows.append(
                run_scenario(
                    cfg,
                    spec.replications,
                    meta_seed,
                    label=label,
                    redraw_counts=spec.redraw_counts,
                    threads=threads,
                )
            )
    return rows


def _meta_seed(base_seed: int, meta_index: int) -> int:
    return int(substream(base_seed, "meta", meta_index).integers(0, 2**63 - 1))


def rows_to_csv(rows) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scenario_label", "estimator", "mean_bias", "sd", "rmse", "reps", "meta_seed"])
    for row in rows:
        for est in ESTIMATORS:
            m = row.metrics[est]
            writer.writerow(
                [row.scenario_label, est, repr(m.mean_bias), repr(m.sd),
                 repr(m.rmse), row.replications, row.meta_seed]
            )
    return buf.getvalue()


def rows_to_markdown(rows) -> str:
    header = "| scenario | estimator | mean bias | sd | rmse | reps |"
    sep = "|---|---|---:|---:|---:|---:|"
    lines = [header, sep]
    for row in rows:
        for est in ESTIMATORS:
            m = row.metrics[est]
            lines.append(
                f"| {row.scenario_label} | {est} | {m.mean_bias:.7f} "
                f"| {m.sd:.7f} | {m.rmse:.7f} | {row.replications} |"
            )
    return "\n".join(lines) + "\n"
