import logging
import warnings

import numpy as np
import pytest

from valleyopt.evaluation import generate_valley
from valleyopt.solver import (DadpConfig, DadpSolver, DualState, dual_gradient, solve_dadp, solve_dp,
                              solve_subproblem)
from valleyopt.solver.solver_dadp import default_z_levels
from valleyopt.solver.solver_dadp.dual_gradient import DualGradient
from valleyopt.solver.solver_dadp.dual_state import resolve_z_levels
from valleyopt.solver.solver_dadp.lbfgs import LbfgsMemory, armijo_search
from valleyopt.solver.solver_dadp.solver_dadp import Evaluation, _residual
from valleyopt.tests.config import (deterministic_valley, integer_knots, make_dam, one_dam_one_stage, spill_valley,
                                    three_dam_valley, two_dam_desk_valley, two_dam_stochastic_valley)
from valleyopt.utils.exceptions import ConvergenceWarning, SampleCountError

DESK_Z_LEVELS = {0: [0.0, 1.0, 2.0, 3.0]}
STOCHASTIC_Z_LEVELS = {0: [0.0, 1.0, 2.0, 3.0, 4.0]}


def _solutions(valley, multipliers, z_levels):
    knots = [np.asarray(k) for k in integer_knots(valley)]
    levels = {link: np.asarray(values) for link, values in z_levels.items()}
    return [solve_subproblem(valley, i, np.asarray(multipliers, dtype=float), levels, knots[i])
            for i in range(valley.n_dams)]


def _dual(valley, multipliers, z_levels):
    return dual_gradient(valley, _solutions(valley, multipliers, z_levels), exact=True)


def test_single_dam_subproblem_equals_dp():
    valley = deterministic_valley([make_dam(u_max=3.0, x_target=5.0, penalty_a=0.5)], [None],
                                  [[1.0], [0.0], [2.0]], [[2.0], [1.0], [3.0]])
    knots = integer_knots(valley)
    exact = solve_dp(valley, grids=knots)
    solution = solve_subproblem(valley, 0, DualState.zeros(valley), {}, np.asarray(knots[0]))
    for a, b in zip(exact, solution.value_functions):
        np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_single_dam_converges_immediately():
    valley = one_dam_one_stage()
    result = solve_dadp(valley, DadpConfig(knots=integer_knots(valley), exact=True))
    assert result.converged
    assert result.status == "gradient-tolerance"
    assert result.state.iteration == 0
    assert result.dual_value == pytest.approx(-5.0)


def test_desk_gradient_at_zero():
    gradient = _dual(two_dam_desk_valley(), [[0.0]], DESK_Z_LEVELS)
    assert gradient.gradient.tolist() == [[1.0]]
    assert gradient.dual_value == pytest.approx(-8.0)


def test_desk_dual_function_is_linear():
    valley = two_dam_desk_valley()
    for multiplier in (-0.5, 0.3, 1.7):
        assert _dual(valley, [[multiplier]], DESK_Z_LEVELS).dual_value == pytest.approx(multiplier - 8.0)


def test_free_water_is_taken_at_zero_price():
    solutions = _solutions(two_dam_desk_valley(), [[0.0]], DESK_Z_LEVELS)
    downstream = solutions[1]
    # from an empty reservoir only upstream water allows turbining
    assert downstream.z_table[0][0, 0, 0] == 3.0
    assert downstream.u_table[0][0, 0] == 3.0


def test_high_outflow_price_maximizes_turbining():
    valley = two_dam_desk_valley()
    upstream = _solutions(valley, [[100.0]], DESK_Z_LEVELS)[0]
    for k, x in enumerate(upstream.knots):
        assert upstream.u_table[0][k, 0] == min(2.0, x)


def test_subproblem_matches_enumeration():
    valley = two_dam_stochastic_valley()
    multipliers = np.array([[0.613], [0.427]])
    downstream = _solutions(valley, multipliers, STOCHASTIC_Z_LEVELS)[1]
    dam = valley.dams[1]

    def cost_to_go(t, x):
        if t == valley.horizon:
            return dam.penalty_a * min(0.0, x - dam.x_target) ** 2
        expected = 0.0
        for atom in valley.noise.stages[t].atoms:
            a, p = atom.inflows[1], atom.prices[1]
            best = np.inf
            for z in STOCHASTIC_Z_LEVELS[0]:
                for u in dam.control_levels:
                    if u > min(dam.u_max, x + a + z - dam.x_min):
                        continue
                    x_next = min(dam.x_max, x - u + a + z)
                    cost = -p * u + dam.epsilon * u ** 2 + multipliers[t, 0] * z
                    best = min(best, cost + cost_to_go(t + 1, x_next))
            expected += atom.p * best
        return expected

    assert downstream.value == pytest.approx(cost_to_go(0, dam.x0), abs=1e-9)


def test_exact_gradient_matches_finite_differences():
    valley = two_dam_stochastic_valley()
    multipliers = np.array([[0.613], [0.427]])
    gradient = _dual(valley, multipliers, STOCHASTIC_Z_LEVELS).gradient
    h = 1e-4
    for t in range(valley.horizon):
        shift = np.zeros_like(multipliers)
        shift[t, 0] = h
        above = _dual(valley, multipliers + shift, STOCHASTIC_Z_LEVELS).dual_value
        below = _dual(valley, multipliers - shift, STOCHASTIC_Z_LEVELS).dual_value
        assert gradient[t, 0] == pytest.approx((above - below) / (2 * h), abs=1e-5)


def test_monte_carlo_gradient_agrees_with_exact():
    valley = two_dam_stochastic_valley()
    solutions = _solutions(valley, [[0.613], [0.427]], STOCHASTIC_Z_LEVELS)
    exact = dual_gradient(valley, solutions, exact=True)
    sampled = dual_gradient(valley, solutions, n_samples=100000, rng_seed=4)
    assert np.all(np.abs(sampled.gradient - exact.gradient) <= 3 * sampled.std_error + 1e-9)
    assert sampled.dual_value == exact.dual_value


def test_monte_carlo_is_deterministic_per_seed():
    valley = two_dam_stochastic_valley()
    solutions = _solutions(valley, [[0.2], [0.1]], STOCHASTIC_Z_LEVELS)
    first = dual_gradient(valley, solutions, n_samples=500, rng_seed=1)
    second = dual_gradient(valley, solutions, n_samples=500, rng_seed=1)
    np.testing.assert_array_equal(first.gradient, second.gradient)


def test_zero_samples_rejected():
    valley = two_dam_desk_valley()
    with pytest.raises(SampleCountError):
        dual_gradient(valley, _solutions(valley, [[0.0]], DESK_Z_LEVELS), n_samples=0)


def test_fixed_step_ascent_is_monotone():
    valley = two_dam_desk_valley()
    config = DadpConfig(z_levels=DESK_Z_LEVELS, knots=integer_knots(valley), exact=True, optimizer="fixed",
                        step=0.1, max_iterations=10, tolerance=1e-6, smoothing=0.0)
    with pytest.warns(ConvergenceWarning):
        result = solve_dadp(valley, config)
    values = result.log["dual_value"].to_numpy()
    assert len(values) == 11
    assert np.all(np.diff(values) >= -1e-12)
    assert result.status == "max-iterations"
    assert not result.converged
    assert result.dual_value == pytest.approx(-7.0)


def test_lbfgs_closes_the_desk_gap():
    valley = two_dam_desk_valley()
    optimum = solve_dp(valley, grids=integer_knots(valley))[0](valley.x0)
    config = DadpConfig(z_levels=DESK_Z_LEVELS, knots=integer_knots(valley), exact=True, max_iterations=20,
                        smoothing=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        result = solve_dadp(valley, config)
    assert result.dual_value <= optimum + 1e-6
    assert result.dual_value == pytest.approx(optimum)


def test_weak_duality_on_three_dams():
    valley = three_dam_valley()
    optimum = solve_dp(valley, grids=integer_knots(valley))[0](valley.x0)
    z_levels = {0: [float(z) for z in range(9)], 1: [float(z) for z in range(9)]}
    config = DadpConfig(z_levels=z_levels, knots=integer_knots(valley), exact=True, max_iterations=15)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        result = solve_dadp(valley, config)
    assert result.dual_value <= optimum + 1e-6
    assert result.status in ("gradient-tolerance", "max-iterations")


def test_converges_on_generated_chains():
    converged = 0
    for seed in range(10):
        valley = generate_valley("chain", 3, seed=seed)
        config = DadpConfig(knots=integer_knots(valley), exact=True, max_iterations=200)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            result = solve_dadp(valley, config)
        converged += result.converged
        assert result.status in ("gradient-tolerance", "max-iterations")
    assert converged >= 9


def test_bound_holds_when_the_upstream_dam_spills():
    valley = spill_valley()
    optimum = solve_dp(valley, grids=integer_knots(valley))[0](valley.x0)
    assert optimum == pytest.approx(-8.0)
    for smoothing in (0.0, None):
        config = DadpConfig(knots=integer_knots(valley), exact=True, max_iterations=30, smoothing=smoothing)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            result = solve_dadp(valley, config)
        assert result.dual_value <= optimum + 1e-9
        assert result.dual_value == pytest.approx(-8.0)


def test_failed_line_search_falls_back_to_a_fixed_step():
    # at zero price the dual is flat downhill of the kink: no ascent step is accepted
    valley = spill_valley()
    result = solve_dadp(valley, DadpConfig(knots=integer_knots(valley), exact=True, smoothing=0.0))
    assert result.converged
    assert result.state.iteration == 1
    assert result.log["update"].tolist() == ["initial", "fixed"]
    assert result.state.multipliers[0, 0] == pytest.approx(-0.02)
    assert result.dual_value == pytest.approx(-8.0)


def test_smoothed_dual_lies_below_the_exact_dual():
    valley = two_dam_stochastic_valley()
    multipliers = np.array([[0.613], [0.427]])
    knots = [np.asarray(k) for k in integer_knots(valley)]
    levels = {0: np.asarray(STOCHASTIC_Z_LEVELS[0])}
    exact = sum(solve_subproblem(valley, i, multipliers, levels, knots[i]).value for i in range(2))
    smoothed = [sum(solve_subproblem(valley, i, multipliers, levels, knots[i], smoothing=tau).value
                    for i in range(2)) for tau in (0.01, 0.1, 1.0)]
    assert smoothed[0] <= exact + 1e-12
    assert smoothed[0] == pytest.approx(exact, abs=0.15)
    assert smoothed[2] <= smoothed[1] + 1e-12 and smoothed[1] <= smoothed[0] + 1e-12


def test_smoothed_gradient_matches_finite_differences_off_the_knots():
    valley = two_dam_stochastic_valley()
    multipliers = np.array([[0.613], [0.427]])
    # x0 lies strictly between knots on both dams
    knots = [np.linspace(dam.x_min, dam.x_max, 4) for dam in valley.dams]
    levels = {0: np.asarray(STOCHASTIC_Z_LEVELS[0])}

    def dual(values):
        solutions = [solve_subproblem(valley, i, values, levels, knots[i], smoothing=0.5) for i in range(2)]
        return dual_gradient(valley, solutions, exact=True)

    gradient = dual(multipliers).gradient
    h = 1e-4
    for t in range(valley.horizon):
        shift = np.zeros_like(multipliers)
        shift[t, 0] = h
        difference = (dual(multipliers + shift).dual_value - dual(multipliers - shift).dual_value) / (2 * h)
        assert gradient[t, 0] == pytest.approx(difference, abs=1e-5)


def test_smoothed_monte_carlo_gradient_agrees_with_exact():
    valley = two_dam_stochastic_valley()
    knots = [np.linspace(dam.x_min, dam.x_max, 4) for dam in valley.dams]
    levels = {0: np.asarray(STOCHASTIC_Z_LEVELS[0])}
    solutions = [solve_subproblem(valley, i, np.array([[0.613], [0.427]]), levels, knots[i], smoothing=0.5)
                 for i in range(2)]
    exact = dual_gradient(valley, solutions, exact=True)
    sampled = dual_gradient(valley, solutions, n_samples=100000, rng_seed=4)
    assert np.all(np.abs(sampled.gradient - exact.gradient) <= 4 * sampled.std_error + 1e-9)


def test_stopping_test_allows_for_sampling_noise():
    gradient = DualGradient(np.array([[0.5, -0.2]]), 0.0, np.array([[0.2, 0.0]]))
    evaluation = Evaluation(np.zeros((1, 2)), [], gradient)
    assert _residual(evaluation, 3.0) == pytest.approx(0.2)
    assert _residual(evaluation, 0.0) == pytest.approx(0.5)


def test_multiplier_history_columns():
    valley = three_dam_valley()
    config = DadpConfig(knots=integer_knots(valley), exact=True, max_iterations=2, optimizer="fixed")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        result = solve_dadp(valley, config)
    assert list(result.multipliers.columns) == ["iteration", "t0:1->2", "t0:2->3", "t1:1->2", "t1:2->3",
                                                "t2:1->2", "t2:2->3"]
    assert result.multipliers["iteration"].tolist() == list(range(len(result.log)))
    assert len(result.value_functions) == valley.n_dams


def test_default_z_levels():
    valley = two_dam_desk_valley()
    # upstream holds at most 4 and never spills without inflow
    assert default_z_levels(valley, integer_knots(valley))[0].tolist() == [0.0, 1.0, 2.0]


def test_default_z_levels_cover_spill():
    valley = spill_valley()
    levels = default_z_levels(valley, integer_knots(valley))
    assert levels[0].tolist() == [float(z) for z in range(9)]


def test_default_z_levels_add_up_along_a_chain():
    valley = three_dam_valley()
    levels = default_z_levels(valley, integer_knots(valley))
    assert levels[0].tolist() == [0.0, 1.0, 2.0]
    # a full dam 2 passes on its own inflow and the upstream release
    assert levels[1].tolist() == [0.0, 1.0, 2.0, 3.0]
    given = default_z_levels(valley, integer_knots(valley), given={0: [0.0, 5.0]})
    assert given[0].tolist() == [0.0, 5.0]
    assert given[1][-1] == 6.0


def test_default_z_levels_cap(caplog):
    valley = spill_valley()
    with caplog.at_level(logging.WARNING):
        capped = default_z_levels(valley, integer_knots(valley), max_levels=3)
    assert capped[0].tolist() == [0.0, 4.0, 8.0]
    assert "no longer a guaranteed bound" in caplog.text


def test_z_levels_for_unknown_link():
    valley = two_dam_desk_valley()
    with pytest.raises(ValueError, match="feed no other dam"):
        resolve_z_levels(valley, DadpConfig(z_levels={1: [0.0, 1.0]}), integer_knots(valley))


def test_config_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        DadpConfig(z_levels={0: [1.0, 0.0]})
    with pytest.raises(ValueError, match="step sizes"):
        DadpConfig(step=-1.0)
    with pytest.raises(ValueError, match="step sizes for horizon"):
        DadpConfig(step=[0.1, 0.2]).steps_for(two_dam_desk_valley())
    assert DadpConfig().tolerance_for(two_dam_desk_valley()) == pytest.approx(7e-3)


def test_lbfgs_memory_on_quadratic():
    hessian = np.diag([1.0, 4.0])
    memory = LbfgsMemory(memory=5)
    x = np.array([1.0, 1.0])
    for _ in range(2):
        direction = memory.direction(hessian @ x) if len(memory) else -(hessian @ x)
        result = armijo_search(lambda v: (0.5 * v @ hessian @ v, hessian @ v, None), x, 0.5 * x @ hessian @ x,
                               hessian @ x, direction)
        assert result is not None
        memory.update(result.point - x, result.gradient - hessian @ x)
        x = result.point
    assert 0.5 * x @ hessian @ x < 2.5


def test_lbfgs_rejects_negative_curvature():
    memory = LbfgsMemory()
    assert not memory.update(np.array([1.0]), np.array([-1.0]))
    assert len(memory) == 0


def test_armijo_failure():
    result = armijo_search(lambda v: (float(v @ v), 2 * v, None), np.zeros(1), 0.0, np.zeros(1), np.ones(1),
                           max_trials=3)
    assert result is None


def test_solver_result_bound():
    valley = two_dam_desk_valley()
    config = DadpConfig(z_levels=DESK_Z_LEVELS, knots=integer_knots(valley), exact=True, max_iterations=20,
                        smoothing=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        result = DadpSolver(config).solve(valley)
    assert result.method == "dadp"
    assert result.bound == pytest.approx(-6.0)
    assert "multipliers" in result.tables
