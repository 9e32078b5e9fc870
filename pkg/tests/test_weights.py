import numpy as np
import pytest

from rcsdid import (
    AggregatedPanel,
    PanelLayout,
    compute_zeta,
    cross_sectional_weights,
    frank_wolfe_simplex,
    solve_time_weights,
    solve_unit_weights,
    substream,
)

ZETA_HAND_VALUE = 2.0**0.25 * 0.5  # K_co=2, T_pre=3 worked example


def panel_from_means(means, k_co, t_pre, counts=None):
    means = np.asarray(means, dtype=float)
    k, t = means.shape
    layout = PanelLayout(k_co=k_co, k_tr=k - k_co, t_pre=t_pre, t_post=t - t_pre)
    if counts is None:
        counts = np.ones((k, t), dtype=np.int64)
    return AggregatedPanel(means=means, counts=np.asarray(counts), layout=layout)


def simplex_grid(n, step=1e-3):
    """All points of the n-simplex on a regular grid with the given step."""
    m = round(1.0 / step)
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        w = np.arange(m + 1) / m
        return np.column_stack([w, 1.0 - w])
    if n == 3:
        i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        keep = (i + j) <= m
        i, j = i[keep], j[keep]
        return np.column_stack([i / m, j / m, (m - i - j) / m])
    raise NotImplementedError(n)


def grid_objective(a, b, ridge, grid):
    resid = grid @ a.T - b  # M x rows
    resid = resid - resid.mean(axis=1, keepdims=True)
    return (resid**2).sum(axis=1) + ridge * (grid**2).sum(axis=1)


# ---------------------------------------------------------------- zeta


def test_zeta_hand_example():
    # control pre-period rows [1,2,4] and [0,1,3]: deltas {1,2,1,2}
    means = np.array(
        [
            [1.0, 2.0, 4.0, 0.0, 0.0],
            [0.0, 1.0, 3.0, 0.0, 0.0],
            [5.0, 5.0, 5.0, 5.0, 5.0],
        ]
    )
    panel = panel_from_means(means, k_co=2, t_pre=3)
    res = compute_zeta(panel)
    assert res.delta_bar == pytest.approx(1.5, abs=1e-15)
    assert res.sigma_hat == pytest.approx(0.5, abs=1e-15)
    assert res.zeta == pytest.approx(ZETA_HAND_VALUE, abs=1e-12)


def test_zeta_zero_variance():
    means = np.zeros((2, 4))
    means[1] = 3.0  # constant in t
    panel = panel_from_means(means, k_co=1, t_pre=2)
    assert compute_zeta(panel).zeta == 0.0


def test_zeta_homogeneity():
    rng = substream(5, "zeta-scale")
    means = rng.normal(size=(4, 6))
    panel = panel_from_means(means, k_co=3, t_pre=4)
    base = compute_zeta(panel).zeta
    for c in (0.5, 2.0, 17.0):
        scaled = panel_from_means(c * means, k_co=3, t_pre=4)
        assert compute_zeta(scaled).zeta == pytest.approx(c * base, rel=1e-12)


# ---------------------------------------------------------------- kernel


def test_kernel_singleton_column():
    x, intercept, report = frank_wolfe_simplex(np.array([[1.0], [2.0]]), np.array([3.0, 4.0]))
    np.testing.assert_array_equal(x, [1.0])
    assert report.iterations == 0 and report.converged


def test_kernel_orthogonal_columns_pick_matching_vertex():
    # b equals column 1 exactly; centered problem has a zero-loss vertex
    a = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b = a[:, 0].copy()
    x, _, report = frank_wolfe_simplex(a, b)
    assert report.converged
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-7)
    assert report.final_objective <= report.gradient_gap + 1e-12


def test_kernel_ridge_only_uniform():
    a = np.zeros((3, 4))
    b = np.zeros(3)
    x, _, report = frank_wolfe_simplex(a, b, ridge=2.5)
    np.testing.assert_allclose(x, 0.25, atol=1e-12)
    assert report.converged


def test_kernel_dimension_mismatch():
    with pytest.raises(ValueError):
        frank_wolfe_simplex(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ValueError):
        frank_wolfe_simplex(np.zeros((3, 2)), np.zeros(3), tol=0.0)


def test_kernel_objective_within_gap_of_grid():
    rng = substream(17, "kernel-grid")
    for _ in range(10):
        rows, cols = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        a = rng.normal(size=(rows, cols))
        b = rng.normal(size=rows)
        ridge = float(rng.uniform(0, 0.5))
        x, _, report = frank_wolfe_simplex(a, b, ridge=ridge)
        grid = simplex_grid(cols)
        best = grid_objective(a, b, ridge, grid).min()
        assert report.final_objective <= best + 1e-6


# ---------------------------------------------------------------- unit weights


def test_unit_weights_singleton_control():
    means = np.array([[1.0, 2.0, 0.0], [9.0, 9.0, 9.0]])
    panel = panel_from_means(means, k_co=1, t_pre=2)
    uw = solve_unit_weights(panel, zeta=0.7)
    np.testing.assert_array_equal(uw.omega, [1.0])


def test_unit_weights_identical_controls_split_evenly():
    # ridge makes the uniform point the unique minimizer
    pre = np.array([1.0, 2.0, 3.0])
    means = np.zeros((3, 5))
    means[0, :3] = pre
    means[1, :3] = pre
    means[2, :3] = [1.5, 2.5, 3.5]
    panel = panel_from_means(means, k_co=2, t_pre=3)
    uw = solve_unit_weights(panel, zeta=0.4)
    np.testing.assert_allclose(uw.omega, [0.5, 0.5], atol=1e-8)
    grid = simplex_grid(2)
    a = means[:2, :3].T
    b = means[2, :3]
    best = grid_objective(a, b, 0.4**2 * 3, grid).min()
    assert uw.solver_report.final_objective <= best + 1e-8


def test_unit_weights_random_panel_beats_grid():
    rng = substream(23, "unit-grid")
    means = rng.normal(size=(4, 6))
    panel = panel_from_means(means, k_co=3, t_pre=4)
    zeta = compute_zeta(panel).zeta
    uw = solve_unit_weights(panel, zeta)
    a = means[:3, :4].T
    b = means[3, :4]
    best = grid_objective(a, b, zeta**2 * 4, simplex_grid(3)).min()
    assert uw.solver_report.final_objective <= best + 1e-6


def test_unit_weights_zeta_zero_exact_match_up_to_constant():
    rng = substream(29, "unit-const")
    t_pre, t_post = 4, 2
    treated = rng.normal(size=t_pre + t_post)
    means = rng.normal(size=(4, t_pre + t_post))
    means[0, :t_pre] = treated[:t_pre] + 3.7  # control 1 parallels the treated
    means[3] = treated
    panel = panel_from_means(means, k_co=3, t_pre=t_pre)
    uw = solve_unit_weights(panel, zeta=0.0)
    assert uw.omega[0] > 0.999
    assert uw.solver_report.final_objective < 1e-10
    assert uw.omega0 == pytest.approx(-3.7, abs=1e-4)


def test_unit_weights_simplex_feasibility_and_reject_negative_zeta():
    rng = substream(31, "unit-simplex")
    for trial in range(5):
        means = rng.normal(size=(5, 7))
        panel = panel_from_means(means, k_co=4, t_pre=4)
        uw = solve_unit_weights(panel, zeta=float(rng.uniform(0, 1)))
        assert uw.omega.min() >= 0.0
        assert uw.omega.sum() == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        solve_unit_weights(panel, zeta=-0.1)


# ---------------------------------------------------------------- time weights


def test_time_weights_concentrate_on_matching_period():
    rng = substream(37, "time-vertex")
    k_co, t_pre, t_post = 3, 4, 2
    means = rng.normal(size=(k_co + 1, t_pre + t_post))
    # post averages equal the pre-period column t*=3 exactly
    means[:k_co, t_pre:] = means[:k_co, 2][:, None]
    panel = panel_from_means(means, k_co=k_co, t_pre=t_pre)
    tw = solve_time_weights(panel)
    assert tw.lam[2] > 0.999
    assert tw.solver_report.final_objective < 1e-10


def test_time_weights_shift_invariance():
    rng = substream(41, "time-shift")
    means = rng.normal(size=(4, 6))
    panel = panel_from_means(means, k_co=3, t_pre=4)
    lam = solve_time_weights(panel).lam
    shifted = panel_from_means(means + 11.5, k_co=3, t_pre=4)
    lam2 = solve_time_weights(shifted).lam
    np.testing.assert_allclose(lam2, lam, atol=1e-8)


def test_time_weights_beat_grid_search():
    rng = substream(43, "time-grid")
    means = rng.normal(size=(3, 6))
    panel = panel_from_means(means, k_co=2, t_pre=3)
    tw = solve_time_weights(panel)
    best = grid_objective(
        means[:2, :3], means[:2, 3:].mean(axis=1), 0.0, simplex_grid(3)
    ).min()
    assert tw.solver_report.final_objective <= best + 1e-6


# ---------------------------------------------------------------- nu weights


def test_nu_is_reciprocal_counts():
    layout = PanelLayout(k_co=1, k_tr=1, t_pre=2, t_post=1)
    panel = AggregatedPanel(
        means=np.zeros((2, 3)), counts=np.array([[4, 1, 2], [5, 10, 1]]), layout=layout
    )
    nu = cross_sectional_weights(panel)
    assert nu.nu[0, 0] == 0.25
    np.testing.assert_array_equal(nu.nu * panel.counts, np.ones((2, 3)))


def test_nu_all_ones_for_unit_counts():
    layout = PanelLayout(k_co=1, k_tr=1, t_pre=2, t_post=1)
    panel = AggregatedPanel(
        means=np.zeros((2, 3)), counts=np.ones((2, 3), dtype=int), layout=layout
    )
    np.testing.assert_array_equal(cross_sectional_weights(panel).nu, np.ones((2, 3)))


def test_total_cell_weight_identity():
    # nu * N * omega * lambda == omega * lambda.  The estimator exploits this
    # cancellation and builds the cell weight as outer(omega, lambda) directly,
    # so in floating point the raw product is only identical up to one ulp
    # (1/N * N != 1.0 exactly for every integer N).
    rng = substream(47, "identity")
    means = rng.normal(size=(4, 6))
    counts = rng.integers(1, 50, size=(4, 6))
    panel = panel_from_means(means, k_co=3, t_pre=4, counts=counts)
    uw = solve_unit_weights(panel, compute_zeta(panel).zeta)
    tw = solve_time_weights(panel)
    nu = cross_sectional_weights(panel).nu
    omega = uw.full_vector(panel.layout.k_tr)
    lam = tw.full_vector(panel.layout.t_post)
    ol = np.outer(omega, lam)
    np.testing.assert_allclose(nu * panel.counts * ol, ol, rtol=1e-15, atol=0.0)


def test_objective_monotonicity_of_solver_path():
    # re-run the kernel at increasing iteration caps: objective never rises
    rng = substream(53, "monotone")
    a = rng.normal(size=(5, 4))
    b = rng.normal(size=5)
    objs = []
    for cap in (1, 2, 5, 10, 50, 200, 1000):
        _, _, report = frank_wolfe_simplex(a, b, ridge=0.05, max_iter=cap)
        objs.append(report.final_objective)
    assert all(o2 <= o1 + 1e-12 for o1, o2 in zip(objs, objs[1:]))
