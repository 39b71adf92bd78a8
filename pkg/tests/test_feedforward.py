import numpy as np
import pytest

from conftest import tracking_cost, two_state_bench, uncontrollable_3state
from lqdr import (CostSpec, DisturbanceProfile, GareSolution, StabilizationError,
                  SystemModel, closed_form_terms, draw_instance,
                  solve_closed_form, solve_finite_horizon, solve_gare,
                  solve_recursive, solve_steady)


def scalar_setup(P_terminal=1.0, r=1.0):
    model = SystemModel(A=[[1.0]], B=[[1.0]], E=[[1.0]], c_o=[[1.0]])
    cost = CostSpec(Q=[[1.0]], R=[[1.0]], P_terminal=[[P_terminal]], r=[r])
    return model, cost


def test_zero_signals_give_zero_sequences():
    model = two_state_bench()
    cost = tracking_cost(model)
    sol = solve_finite_horizon(model, cost, N=12)
    for solver in (solve_recursive, solve_closed_form):
        ff = solver(sol, model, cost, np.zeros((13, 1)))
        assert np.all(ff.h == 0) and np.all(ff.f == 0)


def test_scalar_backward_pass_hand_values():
    model, cost = scalar_setup()
    sol = solve_finite_horizon(model, cost, N=0)
    ff = solve_recursive(sol, model, cost, np.zeros((1, 1)))
    assert ff.f[1] == pytest.approx(-1.0)
    assert ff.h[0] == pytest.approx(-1.0)
    assert sol.Upsilon[0] == pytest.approx(2.0)
    assert sol.M[0] == pytest.approx(1.0)
    assert ff.f[0] == pytest.approx(-1.5)


def test_recursive_satisfies_defining_identity():
    rng = np.random.default_rng(8)
    inst = draw_instance(rng)
    sol = solve_finite_horizon(inst.model, inst.cost, inst.N)
    ff = solve_recursive(sol, inst.model, inst.cost, inst.d)
    B, E, R = inst.model.B, inst.model.E, inst.cost.R
    assert np.max(np.abs(ff.f[-1] + sol.P[-1] @ inst.cost.r)) <= 1e-12
    for k in range(inst.N + 1):
        lhs = ff.h[k]
        rhs = B.T @ (R + sol.P[k + 1]) @ (E @ inst.d[k]) + B.T @ ff.f[k + 1]
        assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_closed_form_matches_recursion_on_bench():
    model = uncontrollable_3state()
    cost = tracking_cost(model)
    sol = solve_finite_horizon(model, cost, N=100)
    profile = DisturbanceProfile.constant(3.0, start_step=50)
    rec = solve_recursive(sol, model, cost, profile)
    closed = solve_closed_form(sol, model, cost, profile)
    assert np.max(np.abs(rec.h - closed.h)) <= 1e-9
    assert np.max(np.abs(rec.f - closed.f)) <= 1e-9


def test_closed_form_matches_recursion_random():
    rng = np.random.default_rng(21)
    for _ in range(15):
        inst = draw_instance(rng)
        sol = solve_finite_horizon(inst.model, inst.cost, inst.N)
        rec = solve_recursive(sol, inst.model, inst.cost, inst.d)
        closed = solve_closed_form(sol, inst.model, inst.cost, inst.d)
        scale = 1 + max(np.max(np.abs(rec.h)), np.max(np.abs(rec.f)))
        assert np.max(np.abs(rec.h - closed.h)) <= 1e-9 * scale
        assert np.max(np.abs(rec.f - closed.f)) <= 1e-9 * scale


def test_single_step_closed_form_identity():
    model, cost = scalar_setup()
    sol = solve_finite_horizon(model, cost, N=0)
    d = np.array([[0.7]])
    rec = solve_recursive(sol, model, cost, d)
    closed = solve_closed_form(sol, model, cost, d)
    terms = closed_form_terms(sol, model, cost)
    # empty sum in h, empty product (= identity) in f
    assert closed.h[0] == pytest.approx(
        terms.H[0] @ d[0] - model.B.T @ terms.Rscript[1] @ cost.r)
    assert closed.f[0] == pytest.approx(terms.F[0] @ d[0] - terms.Rscript[0] @ cost.r)
    assert np.allclose(rec.h, closed.h) and np.allclose(rec.f, closed.f)


def test_closed_form_terms_reconstruct():
    rng = np.random.default_rng(33)
    inst = draw_instance(rng)
    sol = solve_finite_horizon(inst.model, inst.cost, inst.N)
    terms = closed_form_terms(sol, inst.model, inst.cost)
    A, B, E, R = inst.model.A, inst.model.B, inst.model.E, inst.cost.R
    for k in range(inst.N + 1):
        assert np.max(np.abs(terms.H[k] - B.T @ (R + sol.P[k + 1]) @ E)) <= 1e-12
        assert np.max(np.abs(terms.Abar[k] - (A - B @ sol.K[k]))) <= 1e-12
    assert np.max(np.abs(terms.Rscript[-1] - sol.P[-1])) == 0.0


def test_feedforward_linear_in_signals():
    rng = np.random.default_rng(4)
    model = two_state_bench()
    N = 20
    d1 = rng.standard_normal((N + 1, 1))
    d2 = rng.standard_normal((N + 1, 1))
    r1 = rng.standard_normal(2)
    r2 = rng.standard_normal(2)
    R = np.eye(2)
    costs = [CostSpec.from_model(model, R=R, r=r) for r in (r1, r2, r1 + r2)]
    sol = solve_finite_horizon(model, costs[0], N)
    ff1 = solve_recursive(sol, model, costs[0], d1)
    ff2 = solve_recursive(sol, model, costs[1], d2)
    ff12 = solve_recursive(sol, model, costs[2], d1 + d2)
    assert np.max(np.abs(ff12.h - ff1.h - ff2.h)) <= 1e-10
    assert np.max(np.abs(ff12.f - ff1.f - ff2.f)) <= 1e-10


def test_horizon_mismatch_rejected():
    model = two_state_bench()
    cost = tracking_cost(model)
    sol = solve_finite_horizon(model, cost, N=10)
    with pytest.raises(ValueError):
        solve_recursive(sol, model, cost, np.zeros((5, 1)))


# ---------------------------------------------------------------------------
# stationary pair
# ---------------------------------------------------------------------------

def test_steady_zero_signals():
    model = two_state_bench()
    cost = tracking_cost(model)
    g = solve_gare(model, cost)
    h, f = solve_steady(g, model, cost, np.zeros(1), np.zeros(2))
    assert np.all(h == 0) and np.all(f == 0)


def test_steady_matched_scalar_rejects_completely():
    model = SystemModel(A=[[1.0]], B=[[1.0]], E=[[1.0]], c_o=[[1.0]])
    cost = CostSpec(Q=[[1.0]], R=[[0.0]], P_terminal=[[0.0]], r=[0.0])
    g = solve_gare(model, cost)
    assert g.P == pytest.approx(1.0) and g.K == pytest.approx(1.0)
    h, f = solve_steady(g, model, cost, [1.0])
    assert f == pytest.approx(0.0)
    assert h == pytest.approx(1.0)
    # closed loop: u = -x - 1 drives B u + E d to zero
    x = 0.7
    for _ in range(5):
        u = -g.K[0, 0] * x - h[0]
        assert x + u + 1.0 == pytest.approx(0.0)
        x = x + u + 1.0


def test_steady_is_fixed_point_of_backward_step():
    model = two_state_bench()
    cost = tracking_cost(model, r=[0.3, -0.1])
    g = solve_gare(model, cost)
    d = np.array([3.0])
    h, f = solve_steady(g, model, cost, d)
    A, B, E = model.A, model.B, model.E
    pinv = np.linalg.pinv(g.Upsilon, rcond=1e-10)
    h_next = B.T @ (cost.R + g.P) @ (E @ d) + B.T @ f
    f_next = A.T @ g.P @ (E @ d) + A.T @ f - g.M.T @ (pinv @ h_next) - cost.Q @ cost.r
    assert np.max(np.abs(h_next - h)) <= 1e-10
    assert np.max(np.abs(f_next - f)) <= 1e-10


def test_steady_is_limit_of_long_recursion():
    model = two_state_bench()
    cost = tracking_cost(model)
    g = solve_gare(model, cost)
    h_inf, f_inf = solve_steady(g, model, cost, [3.0])
    N = 2000
    sol = solve_finite_horizon(model, cost, N)
    ff = solve_recursive(sol, model, cost, np.full((N + 1, 1), 3.0))
    assert np.max(np.abs(ff.h[0] - h_inf)) <= 1e-6
    assert np.max(np.abs(ff.f[0] - f_inf)) <= 1e-6


def test_steady_rejects_expanding_loop():
    model = two_state_bench()
    cost = tracking_cost(model)
    g = solve_gare(model, cost)
    broken = GareSolution(P=g.P, Upsilon=g.Upsilon, M=g.M, K=g.K,
                          closed_loop_radius=1.2, iterations=g.iterations,
                          residual=g.residual)
    with pytest.raises(StabilizationError):
        solve_steady(broken, model, cost, [1.0])


def test_compensation_stays_bounded_for_bounded_disturbance():
    model = two_state_bench()
    cost = tracking_cost(model)
    sups = []
    for N in (2500, 5000):
        sol = solve_finite_horizon(model, cost, N)
        ks = np.arange(N + 1)
        d = np.where(ks >= 0, np.sin(ks / 50.0), 0.0).reshape(-1, 1)
        ff = solve_recursive(sol, model, cost, d)
        sups.append(float(np.max(np.abs(ff.h))))
    assert np.isfinite(sups).all()
    # saturation: doubling the horizon no longer grows the peak
    assert sups[1] <= sups[0] * 1.01 + 1e-12
