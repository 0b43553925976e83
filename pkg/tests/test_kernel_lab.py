import numpy as np
import pytest
from numpy.testing import assert_allclose

from griddy import (
    BoxDomain,
    ClampBounds,
    Grid1D,
    GriddyError,
    GridMismatchError,
    KernelMatrix,
    RelativeClamp,
    ReducibilityError,
    StateGrid,
    StateSpaceError,
    TailBoundError,
    TruncationSpec,
    beta_mixture_2d,
    discretize_gibbs_kernel,
    discretize_griddy_kernel,
    discretize_metropolized_kernel,
    doeblin_constant,
    fixed_space_dimension,
    invariant_measure,
    kernel_lp,
    perturbation_report,
    piecewise_linear_density,
    regularity_check,
    spectral_gap_alpha,
    truncation_bound_report,
    tv_convergence,
    vector_lp,
)


def _grid1(length, cells):
    return StateGrid(BoxDomain((0.0,), (float(length),)), (int(cells),))


def _pl_target_2d(n=9, seed=3):
    knots = (np.linspace(-1.0, 1.0, n), np.linspace(-1.0, 1.0, n))
    rng = np.random.default_rng(seed)
    table = 0.5 + rng.random((n, n))
    return piecewise_linear_density(knots, table), knots


def _pl_target_1d():
    knots = np.linspace(0.0, 1.0, 5)
    return piecewise_linear_density((knots,), np.array([0.5, 1.2, 0.8, 1.5, 0.6]))


def _discretized_target_density(target, states):
    vals = target.evaluate(states.points())
    return vals / (vals.sum() * states.cell_volume)


class TestStateGrid:
    def test_geometry(self):
        g = StateGrid(BoxDomain((-1.0, -1.0), (1.0, 1.0)), (4, 4))
        assert g.n_states == 16
        assert g.cell_volume == 0.25
        assert g.axis_step(0) == 0.5
        assert_allclose(g.axis_centers(0), [-0.75, -0.25, 0.25, 0.75])
        pts = g.points()
        assert pts.shape == (16, 2)
        # C order: the last axis varies fastest.
        assert_allclose(pts[0], [-0.75, -0.75])
        assert_allclose(pts[1], [-0.75, -0.25])
        assert_allclose(pts[4], [-0.25, -0.75])

    def test_state_cap(self):
        with pytest.raises(StateSpaceError):
            StateGrid(BoxDomain((-1.0, -1.0), (1.0, 1.0)), (150, 150))

    def test_shape_must_match_dimension(self):
        with pytest.raises(StateSpaceError):
            StateGrid(BoxDomain((-1.0, -1.0), (1.0, 1.0)), (4,))

    def test_cell_counts_positive(self):
        with pytest.raises(StateSpaceError):
            StateGrid(BoxDomain((0.0,), (1.0,)), (0,))


class TestKernelMatrix:
    def test_mass_and_action(self):
        g = _grid1(2.0, 2)
        k = KernelMatrix(np.array([[0.9, 0.1], [0.2, 0.8]]), g)
        assert_allclose(k.mass().sum(axis=1), 1.0)
        assert_allclose(k.action_matrix(), k.mass().T)

    def test_row_mass_drift_rejected(self):
        g = _grid1(2.0, 2)
        bad = np.array([[0.9, 0.2], [0.2, 0.8]])
        with pytest.raises(GriddyError, match="unit mass"):
            KernelMatrix(bad, g)

    def test_negative_entry_rejected(self):
        g = _grid1(2.0, 2)
        with pytest.raises(GriddyError, match="nonnegative"):
            KernelMatrix(np.array([[1.1, -0.1], [0.2, 0.8]]), g)

    def test_shape_rejected(self):
        g = _grid1(2.0, 2)
        with pytest.raises(GriddyError, match="2 x 2"):
            KernelMatrix(np.ones((3, 3)) / 3.0, g)

    def test_check_can_be_skipped(self):
        g = _grid1(2.0, 2)
        k = KernelMatrix(np.array([[0.9, 0.2], [0.2, 0.8]]), g, check=False)
        assert k.density[0, 1] == 0.2


class TestNorms:
    def test_vector_lp_hand_values(self):
        v = np.array([3.0, -4.0])
        assert vector_lp(v, 0.5, 1.0) == pytest.approx(3.5)
        assert vector_lp(v, 0.5, 2.0) == pytest.approx(np.sqrt(12.5))
        assert vector_lp(v, 0.5, np.inf) == 4.0

    def test_kernel_lp_hand_values(self):
        k = np.full((2, 2), 1.0)
        assert kernel_lp(k, 0.5, 2.0) == pytest.approx(1.0)
        assert kernel_lp(k, 0.5, np.inf) == 1.0
        assert kernel_lp(k, 0.5, 1.0) == pytest.approx(1.0)

    def test_norm_index_below_one_rejected(self):
        with pytest.raises(GriddyError, match="p >= 1"):
            vector_lp(np.ones(2), 1.0, 0.5)
        with pytest.raises(GriddyError, match="p >= 1"):
            kernel_lp(np.ones((2, 2)), 1.0, 0.5)


class TestTwoStateToy:
    def test_invariant_is_two_thirds_one_third(self):
        g = _grid1(2.0, 2)
        k = KernelMatrix(np.array([[0.9, 0.1], [0.2, 0.8]]), g)
        eta = invariant_measure(k)
        assert_allclose(eta.density, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)
        assert eta.density.sum() * g.cell_volume == pytest.approx(1.0, abs=1e-12)
        assert doeblin_constant(k) == pytest.approx(0.1)
        assert fixed_space_dimension(k) == 1

    def test_tv_within_envelope(self):
        g = _grid1(2.0, 2)
        k = KernelMatrix(np.array([[0.9, 0.1], [0.2, 0.8]]), g)
        tv, env = tv_convergence(k, n_max=30)
        assert env[0] == 1.0
        assert_allclose(env, 0.8 ** np.arange(30))
        assert np.all(tv <= env + 1e-9)
        assert np.all(np.diff(tv) <= 1e-12)


class TestGibbsKernel:
    def test_one_dimensional_rows_equal_invariant(self):
        target = _pl_target_1d()
        states = StateGrid(target.domain, (16,))
        k = discretize_gibbs_kernel(target, states)
        expected = _discretized_target_density(target, states)
        assert np.max(np.abs(k.density - expected[None, :])) < 1e-13
        eta = invariant_measure(k)
        assert_allclose(eta.density, expected, atol=1e-12)

    def test_product_target_gives_identical_rows(self):
        knots = (np.linspace(-1.0, 1.0, 7), np.linspace(-1.0, 1.0, 7))
        u = np.array([0.4, 1.0, 0.7, 1.3, 0.9, 1.1, 0.5])
        v = np.array([0.8, 0.6, 1.4, 1.0, 0.5, 1.2, 0.7])
        target = piecewise_linear_density(knots, np.outer(u, v))
        states = StateGrid(target.domain, (10, 10))
        k = discretize_gibbs_kernel(target, states)
        assert np.max(np.abs(k.density - k.density[0][None, :])) < 1e-13
        eta = invariant_measure(k)
        assert_allclose(eta.density, k.density[0], atol=1e-12)

    def test_invariant_matches_discretized_mixture(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (16, 16))
        k = discretize_gibbs_kernel(target, states)
        eta = invariant_measure(k)
        expected = _discretized_target_density(target, states)
        assert np.max(np.abs(eta.density - expected)) < 1e-13 * expected.max()


class TestGriddyKernel:
    def test_matches_gibbs_on_matching_knots(self):
        target, knots = _pl_target_2d(n=9, seed=3)
        states = StateGrid(target.domain, (12, 12))
        exact = discretize_gibbs_kernel(target, states)
        grids = [Grid1D(np.asarray(kn)) for kn in knots]
        approx = discretize_griddy_kernel(target, states, grids, scheme="pl",
                                          clamp=None)
        scale = exact.density.max()
        assert np.max(np.abs(approx.density - exact.density)) < 1e-12 * scale
        # The default relative clamp never binds on a strictly positive table.
        clamped = discretize_griddy_kernel(target, states, grids, scheme="pl")
        assert np.max(np.abs(clamped.density - exact.density)) < 1e-12 * scale

    def test_coarse_grid_perturbs_kernel(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (12, 12))
        exact = discretize_gibbs_kernel(target, states)
        approx = discretize_griddy_kernel(
            target, states, Grid1D.uniform(-1.0, 1.0, 6))
        dist = kernel_lp(exact.density - approx.density,
                         states.cell_volume, 2.0)
        assert dist > 1e-4

    def test_grid_must_span_domain(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (8, 8))
        with pytest.raises(GridMismatchError):
            discretize_griddy_kernel(target, states,
                                     Grid1D.uniform(-0.5, 1.0, 11))

    def test_grid_count_must_match_dimension(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (8, 8))
        with pytest.raises(GriddyError, match="expected 2 grids"):
            discretize_griddy_kernel(target, states,
                                     [Grid1D.uniform(-1.0, 1.0, 11)])

    def test_clamp_floor_raises_doeblin_constant(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (10, 10))
        grid1d = Grid1D.uniform(-1.0, 1.0, 11)
        lightly = discretize_griddy_kernel(target, states, grid1d,
                                           clamp=RelativeClamp())
        heavily = discretize_griddy_kernel(target, states, grid1d,
                                           clamp=ClampBounds(0.05, 50.0))
        assert doeblin_constant(lightly) > 0.0
        assert doeblin_constant(heavily) > doeblin_constant(lightly)

    def test_clamped_kernel_contracts_within_envelope(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (10, 10))
        k = discretize_griddy_kernel(target, states,
                                     Grid1D.uniform(-1.0, 1.0, 11))
        assert doeblin_constant(k) > 0.0
        assert fixed_space_dimension(k) == 1
        tv, env = tv_convergence(k, n_max=50)
        assert np.all(tv <= env + 1e-9)
        assert np.all(np.diff(tv) <= 1e-12)


class TestMetropolizedKernel:
    def test_invariant_is_discretized_target_1d(self):
        target = _pl_target_1d()
        states = StateGrid(target.domain, (16,))
        k = discretize_metropolized_kernel(target, states,
                                           Grid1D.uniform(0.0, 1.0, 6))
        eta = invariant_measure(k)
        expected = _discretized_target_density(target, states)
        tv = 0.5 * np.abs(eta.density - expected).sum() * states.cell_volume
        assert tv <= 1e-10

    def test_plain_griddy_misses_what_metropolization_repairs(self):
        target = _pl_target_1d()
        states = StateGrid(target.domain, (16,))
        k = discretize_griddy_kernel(target, states,
                                     Grid1D.uniform(0.0, 1.0, 6))
        eta = invariant_measure(k)
        expected = _discretized_target_density(target, states)
        tv = 0.5 * np.abs(eta.density - expected).sum() * states.cell_volume
        assert tv > 1e-6

    def test_exact_proposals_leave_diagonal_rejections_empty(self):
        target, knots = _pl_target_2d(n=7, seed=11)
        states = StateGrid(target.domain, (8, 8))
        grids = [Grid1D(np.asarray(kn)) for kn in knots]
        met = discretize_metropolized_kernel(target, states, grids, clamp=None)
        gib = discretize_gibbs_kernel(target, states)
        scale = gib.density.max()
        assert np.max(np.abs(met.density - gib.density)) < 1e-11 * scale


class TestInvariantMeasure:
    def test_norms_are_cached_and_consistent(self):
        g = _grid1(2.0, 2)
        k = KernelMatrix(np.array([[0.9, 0.1], [0.2, 0.8]]), g)
        eta = invariant_measure(k)
        assert eta.norm(1.0) == pytest.approx(1.0, abs=1e-12)
        assert eta.norm(2.0) == pytest.approx(
            vector_lp(eta.density, 1.0, 2.0))
        assert eta.norm(np.inf) == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_repeated_calls_return_cached_object(self):
        g = _grid1(2.0, 2)
        k = KernelMatrix(np.array([[0.9, 0.1], [0.2, 0.8]]), g)
        assert invariant_measure(k) is invariant_measure(k)

    def test_reducible_kernel_is_rejected(self):
        g = _grid1(4.0, 4)
        mass = np.zeros((4, 4))
        mass[:2, :2] = [[0.9, 0.1], [0.2, 0.8]]
        mass[2:, 2:] = [[0.5, 0.5], [0.5, 0.5]]
        k = KernelMatrix(mass, g)
        assert fixed_space_dimension(k) == 2
        with pytest.raises(ReducibilityError):
            invariant_measure(k)

    def test_identity_kernel_has_full_fixed_space(self):
        g = _grid1(4.0, 4)
        k = KernelMatrix(np.eye(4), g)
        assert fixed_space_dimension(k) == 4
        # Every density is fixed, so the solve cannot isolate one direction
        # and the gap collapses to zero.
        with pytest.warns(RuntimeWarning, match="degenerate"):
            assert spectral_gap_alpha(k) == 0.0


class TestSpectralGap:
    def test_symmetric_three_state_gap_is_half(self):
        v2 = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
        v3 = np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0)
        mass = (np.full((3, 3), 1.0 / 3.0)
                + 0.5 * np.outer(v2, v2) + 0.2 * np.outer(v3, v3))
        assert mass.min() > 0.0
        g = _grid1(3.0, 3)
        k = KernelMatrix(mass, g)
        eta = invariant_measure(k)
        assert_allclose(eta.density, np.full(3, 1.0 / 3.0), atol=1e-12)
        assert spectral_gap_alpha(k) == pytest.approx(0.5, abs=1e-12)
        assert fixed_space_dimension(k) == 1
        assert doeblin_constant(k) == pytest.approx(mass.min())

    def test_identical_rows_give_unit_gap(self):
        g = _grid1(3.0, 3)
        row = np.array([0.5, 0.3, 0.2])
        k = KernelMatrix(np.tile(row, (3, 1)), g)
        assert spectral_gap_alpha(k) == pytest.approx(1.0, abs=1e-12)
        eta = invariant_measure(k)
        assert_allclose(eta.density, row, atol=1e-13)
        tv, env = tv_convergence(k, n_max=5)
        assert np.max(tv) < 1e-14

    def test_supplied_fixed_vector_matches_internal(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (8, 8))
        k = discretize_gibbs_kernel(target, states)
        eta = invariant_measure(k)
        fresh = discretize_gibbs_kernel(target, states)
        assert spectral_gap_alpha(fresh, u=eta) == pytest.approx(
            spectral_gap_alpha(k), rel=1e-12)


class TestRegularity:
    def test_uniform_kernel_attains_sup_bound(self):
        g = StateGrid(BoxDomain((-1.0, -1.0), (1.0, 1.0)), (4, 4))
        k = KernelMatrix(np.full((16, 16), 0.25), g)
        report = regularity_check(k)
        assert report.all_ok
        assert report.sup_lhs == pytest.approx(report.sup_rhs, abs=1e-13)

    def test_bounds_scale_linearly_with_density(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (8, 8))
        k = discretize_gibbs_kernel(target, states)
        g = invariant_measure(k).density
        base = regularity_check(k, g)
        scaled = regularity_check(k, 10.0 * g)
        assert scaled.sup_lhs == pytest.approx(10.0 * base.sup_lhs, rel=1e-12)
        assert scaled.sup_rhs == pytest.approx(10.0 * base.sup_rhs, rel=1e-12)
        for p, (lhs, rhs) in base.action_bounds.items():
            s_lhs, s_rhs = scaled.action_bounds[p]
            assert s_lhs == pytest.approx(10.0 * lhs, rel=1e-12)
            assert s_rhs == pytest.approx(10.0 * rhs, rel=1e-12)

    def test_mixture_kernel_satisfies_all_bounds(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (12, 12))
        k = discretize_gibbs_kernel(target, states)
        report = regularity_check(k, invariant_measure(k))
        assert report.all_ok
        assert report.sup_lhs < report.sup_rhs
        assert set(report.action_bounds) == {2.0, 4.0, float("inf")}


class TestPerturbationReport:
    def test_self_comparison_is_null(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (8, 8))
        k = discretize_gibbs_kernel(target, states)
        report = perturbation_report(k, k, p=2.0)
        assert report.kernel_dist == 0.0
        assert report.measure_dist == 0.0
        assert np.isnan(report.implied_constant)
        assert report.overlap_lambda == pytest.approx(1.0, abs=1e-12)
        assert report.fixed_space_dim_reference == 1
        assert report.fixed_space_dim_approx == 1
        assert report.approx_l2_within_2x
        assert report.l2_operator_to_kernel_ratio <= 1.0 + 1e-12

    def test_coarse_approximation_report(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (12, 12))
        exact = discretize_gibbs_kernel(target, states)
        approx = discretize_griddy_kernel(
            target, states, Grid1D.uniform(-1.0, 1.0, 6))
        report = perturbation_report(exact, approx, p=2.0)
        assert report.kernel_dist > 0.0
        assert report.measure_dist > 0.0
        assert report.implied_constant == pytest.approx(
            report.measure_dist / report.kernel_dist)
        assert report.gap_alpha > 0.0
        assert 0.9 < report.overlap_lambda <= 1.0
        assert report.doeblin_eps == doeblin_constant(approx)
        assert report.approx_l2_within_2x
        d = report.as_dict()
        assert d["p"] == 2.0
        assert d["kernel_dist"] == report.kernel_dist

    def test_grid_mismatch_rejected(self):
        target = beta_mixture_2d()
        a = discretize_gibbs_kernel(target, StateGrid(target.domain, (8, 8)))
        b = discretize_gibbs_kernel(target, StateGrid(target.domain, (10, 10)))
        with pytest.raises(GriddyError, match="state grids"):
            perturbation_report(a, b, p=2.0)

    def test_operator_norm_never_exceeds_kernel_norm(self):
        target = beta_mixture_2d()
        states = StateGrid(target.domain, (10, 10))
        for k in (discretize_gibbs_kernel(target, states),
                  discretize_griddy_kernel(
                      target, states, Grid1D.uniform(-1.0, 1.0, 11)),
                  discretize_metropolized_kernel(
                      target, states, Grid1D.uniform(-1.0, 1.0, 11))):
            report = perturbation_report(k, k, p=2.0)
            assert report.l2_operator_to_kernel_ratio <= 1.0 + 1e-12


def _mixture_report(p=2.0):
    target = beta_mixture_2d()
    states = StateGrid(target.domain, (10, 10))
    exact = discretize_gibbs_kernel(target, states)
    approx = discretize_griddy_kernel(
        target, states, Grid1D.uniform(-1.0, 1.0, 11))
    return perturbation_report(exact, approx, p), invariant_measure(exact)


class TestTruncationBound:
    def test_derived_constants_at_unit_scale(self):
        report, eta = _mixture_report()
        pinorm = eta.norm(2.0)
        out = truncation_bound_report(TruncationSpec(t=2.0, c3=1.0, c4=1.0),
                                      2.0, pinorm, report)
        assert out.c1 == 1.0
        assert out.c2 == 2.0
        assert out.cap_term == 0.5 * pinorm
        assert out.tail_term == 1.0 / (2.0 * pinorm)
        assert out.perturbation_term == pytest.approx(report.measure_dist)
        assert out.total == (out.perturbation_term + out.cap_term
                             + out.tail_term)

    def test_doubling_the_box_halves_both_tail_terms(self):
        report, eta = _mixture_report()
        pinorm = eta.norm(2.0)
        near = truncation_bound_report(TruncationSpec(t=2.0, c3=1.0, c4=1.0),
                                       2.0, pinorm, report)
        far = truncation_bound_report(TruncationSpec(t=4.0, c3=1.0, c4=1.0),
                                      2.0, pinorm, report)
        assert far.cap_term == near.cap_term / 2.0
        assert far.tail_term == near.tail_term / 2.0

    def test_explicit_constants_win_over_derived(self):
        report, eta = _mixture_report()
        spec = TruncationSpec(t=3.0, c1=5.0, c2=4.0, c3=1.0, c4=1.0)
        out = truncation_bound_report(spec, 2.0, eta.norm(2.0), report)
        assert out.c1 == 5.0
        assert out.c2 == 4.0

    def test_box_too_small_for_tail_control(self):
        report, eta = _mixture_report()
        spec = TruncationSpec(t=0.9, c1=1.0, c2=2.0)
        with pytest.raises(TailBoundError, match="t >= c2 / 2"):
            truncation_bound_report(spec, 2.0, eta.norm(2.0), report)

    def test_compact_case_reduces_to_perturbation_term(self):
        report, eta = _mixture_report()
        spec = TruncationSpec(t=1.0, c1=0.0, c2=0.0)
        out = truncation_bound_report(spec, 2.0, eta.norm(2.0), report)
        assert out.cap_term == 0.0
        assert out.tail_term == 0.0
        assert out.total == out.perturbation_term

    def test_missing_constants_rejected(self):
        report, eta = _mixture_report()
        with pytest.raises(TailBoundError, match="supply"):
            truncation_bound_report(TruncationSpec(t=2.0), 2.0,
                                    eta.norm(2.0), report)

    def test_nonpositive_norm_rejected(self):
        report, _ = _mixture_report()
        spec = TruncationSpec(t=2.0, c3=1.0, c4=1.0)
        with pytest.raises(TailBoundError, match="positive"):
            truncation_bound_report(spec, 2.0, 0.0, report)
