import numpy as np
import pytest

from rcsdid import ScenarioConfig, run_scenario, run_table, summarize
from rcsdid.harness import TableSpec, rows_to_csv, rows_to_markdown, table_spec

FAST_CFG = ScenarioConfig(k_co=4, t=6, t_pre=3, base_rc=10, s_range=(1, 3), tau=0.3)


def test_summarize_constant_draws():
    m = summarize([0.3, 0.3, 0.3], 0.3)
    assert (m.mean_bias, m.sd, m.rmse) == (0.0, 0.0, 0.0)


def test_summarize_hand_arithmetic():
    m = summarize([0.2, 0.4], 0.3)
    assert m.mean_bias == pytest.approx(0.0, abs=1e-15)
    assert m.sd == pytest.approx(np.sqrt(0.02), abs=1e-12)
    assert m.rmse == pytest.approx(0.1, abs=1e-12)


def test_summarize_single_draw():
    m = summarize([0.5], 0.3)
    assert m.single_draw
    assert m.mean_bias == pytest.approx(0.2, abs=1e-15)
    assert m.sd == 0.0
    assert m.rmse == pytest.approx(0.2, abs=1e-15)


def test_summarize_empty_raises():
    with pytest.raises(ValueError):
        summarize([], 0.3)


def test_run_scenario_noiseless_degenerate_case():
    # with one rep the metrics collapse onto the single estimate
    row = run_scenario(FAST_CFG, reps=1, meta_seed=0)
    for m in row.metrics.values():
        assert m.single_draw and m.sd == 0.0


def test_run_scenario_is_deterministic_across_thread_counts():
    row1 = run_scenario(FAST_CFG, reps=12, meta_seed=7, threads=1)
    row2 = run_scenario(FAST_CFG, reps=12, meta_seed=7, threads=3)
    for est in row1.metrics:
        assert row1.metrics[est] == row2.metrics[est]


def test_run_scenario_redraw_counts_changes_results():
    fixed = run_scenario(FAST_CFG, reps=10, meta_seed=3, threads=1)
    redrawn = run_scenario(FAST_CFG, reps=10, meta_seed=3, threads=1, redraw_counts=True)
    assert fixed.metrics["rcsdid"] != redrawn.metrics["rcsdid"]


def test_table_spec_validation():
    with pytest.raises(ValueError):
        TableSpec(table_id="nope", values=(1,))
    with pytest.raises(ValueError):
        TableSpec(table_id="factors", values=())
    with pytest.raises(ValueError):
        TableSpec(table_id="factors", values=(1,), replications=0)


def test_run_table_row_order_and_labels():
    spec = table_spec(
        "factors", base=FAST_CFG, values=(0, 1), replications=3, meta_seed=5
    )
    rows = run_table(spec, threads=1)
    assert [r.scenario_label for r in rows] == ["r=0", "r=1"]
    assert all(r.replications == 3 for r in rows)


def test_run_table_meta_replications_share_row_structure():
    spec = table_spec(
        "scale", base=FAST_CFG, values=((1, 1), (1, 3)), replications=2,
        meta_replications=2, meta_seed=5,
    )
    rows = run_table(spec, threads=1)
    assert len(rows) == 4
    assert rows[0].meta_seed == rows[1].meta_seed
    assert rows[0].meta_seed != rows[2].meta_seed


def test_rows_to_csv_is_parseable_and_quoted():
    spec = table_spec(
        "size", base=FAST_CFG, values=((10, 4, 6),), replications=2, meta_seed=1
    )
    rows = run_table(spec, threads=1)
    text = rows_to_csv(rows)
    import csv
    import io

    parsed = list(csv.reader(io.StringIO(text)))
    assert parsed[0] == ["scenario_label", "estimator", "mean_bias", "sd", "rmse", "reps", "meta_seed"]
    assert len(parsed) == 1 + 3
    assert parsed[1][0] == "Base_RC=10, K_co=4, T=6"
    float(parsed[1][2])  # round-trippable numbers


def test_rows_to_markdown_shape():
    spec = table_spec("factors", base=FAST_CFG, values=(0,), replications=2, meta_seed=1)
    text = rows_to_markdown(run_table(spec, threads=1))
    lines = text.strip().splitlines()
    assert lines[0].startswith("| scenario ")
    assert len(lines) == 2 + 3


def test_run_table_determinism_bytes():
    spec = table_spec(
        "scale", base=FAST_CFG, values=((1, 2),), replications=8, meta_seed=9
    )
    a = rows_to_csv(run_table(spec, threads=1))
    b = rows_to_csv(run_table(spec, threads=2))
    assert a == b


def test_rmse_identity_from_raw_draws():
    rng = np.random.default_rng(3)
    draws = rng.normal(0.3, 0.05, size=57)
    m = summarize(draws, 0.3)
    n = draws.size
    assert m.rmse**2 == pytest.approx(m.mean_bias**2 + m.sd**2 * (n - 1) / n, abs=1e-10)
