import dataclasses
import math

import numpy as np
import pytest

from conftest import aero_engine_continuous, two_state_bench, uncontrollable_3state
from lqdr import (MATCHED, MISMATCHED, CostSpec, DisturbanceProfile,
                  SystemModel, check_detectability, classify_disturbance,
                  discretize_zoh, disturbance_sequence, sample_disturbance,
                  validate)


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

def test_system_model_dimensions():
    model = two_state_bench()
    assert (model.n, model.m, model.l) == (2, 1, 1)
    with pytest.raises(ValueError):
        SystemModel(A=[[1.0, 0.0]], B=[[1.0]], E=[[1.0]], c_o=[[1.0]])
    with pytest.raises(ValueError):
        SystemModel(A=np.eye(2), B=[[1.0], [0.0]], E=[[1.0]], c_o=[[1.0, 0.0]])
    with pytest.raises(ValueError):
        SystemModel(A=[[np.nan]], B=[[1.0]], E=[[1.0]], c_o=[[1.0]])


def test_system_model_is_immutable():
    model = two_state_bench()
    with pytest.raises(dataclasses.FrozenInstanceError):
        model.A = np.eye(2)
    with pytest.raises(ValueError):
        model.A[0, 0] = 5.0


def test_cost_spec_shapes():
    model = two_state_bench()
    cost = CostSpec.from_model(model, R=np.eye(2))
    assert np.allclose(cost.Q, model.c_o.T @ model.c_o)
    assert np.all(cost.P_terminal == 0) and np.all(cost.r == 0)
    with pytest.raises(ValueError):
        CostSpec(Q=np.eye(2), R=np.eye(3), P_terminal=np.zeros((2, 2)), r=[0, 0])
    with pytest.raises(ValueError):
        CostSpec(Q=np.eye(2), R=np.eye(2), P_terminal=np.zeros((2, 2)), r=[0, 0, 0])
    # indefinite weights are allowed at construction; validate() flags them
    CostSpec(Q=np.eye(2), R=-np.eye(2), P_terminal=np.zeros((2, 2)), r=[0, 0])


# ---------------------------------------------------------------------------
# validate / matching
# ---------------------------------------------------------------------------

def test_validate_two_state_bench_is_mismatched():
    model = two_state_bench()
    report = validate(model, CostSpec.from_model(model, R=np.eye(2)))
    assert report.dimension_ok
    assert report.disturbance_class == MISMATCHED
    assert all(report.psd_flags.values())
    assert report.detectable


def test_validate_is_pure():
    model = two_state_bench()
    cost = CostSpec.from_model(model, R=np.eye(2))
    assert validate(model, cost) == validate(model, cost)


def test_matched_when_E_in_span_of_B():
    model = SystemModel(A=np.eye(2), B=[[0.0], [1.0]], E=[[0.0], [2.0]], c_o=[[1.0, 0.0]])
    report = validate(model, CostSpec.from_model(model, R=np.eye(2)))
    assert report.disturbance_class == MATCHED


def test_aero_engine_channels_are_mismatched():
    _, B_c, E_c, _ = aero_engine_continuous()
    assert classify_disturbance(B_c, E_c) == MISMATCHED


def test_matching_invariant_under_column_scaling():
    rng = np.random.default_rng(7)
    for _ in range(10):
        B = rng.standard_normal((4, 2))
        gamma = rng.standard_normal((2, 2))
        matched = B @ gamma
        orthogonal = np.linalg.qr(np.hstack([B, rng.standard_normal((4, 2))]))[0][:, 2:]
        for scale in (1e-6, 1.0, -2.0, 1e6):
            assert classify_disturbance(B, matched * scale) == MATCHED
            assert classify_disturbance(B, orthogonal * scale) == MISMATCHED


def test_validate_flags_indefinite_weights():
    model = two_state_bench()
    cost = CostSpec(Q=[[1.0, 0.0], [0.0, -1.0]], R=np.eye(2),
                    P_terminal=np.zeros((2, 2)), r=[0.0, 0.0])
    report = validate(model, cost)
    assert not report.psd_flags["Q"]
    assert report.psd_flags["R"]
    assert any("Q" in msg for msg in report.messages)


def test_validate_flags_dimension_mismatch():
    model = uncontrollable_3state()
    cost = CostSpec(Q=np.eye(2), R=np.eye(2), P_terminal=np.zeros((2, 2)), r=[0.0, 0.0])
    report = validate(model, cost)
    assert not report.dimension_ok


# ---------------------------------------------------------------------------
# detectability
# ---------------------------------------------------------------------------

def test_detectability_diagonal_cases():
    A = np.diag([2.0, 0.5])
    assert check_detectability(A, np.diag([1.0, 0.0]))
    assert not check_detectability(A, np.diag([0.0, 1.0]))


def test_detectability_vacuous_for_stable_plant():
    A = uncontrollable_3state().A
    eigs = np.abs(np.linalg.eigvals(A))
    assert np.max(eigs) < 1.0
    # complex pair has modulus sqrt(det of the 2x2 block) = sqrt(0.9902)
    assert np.isclose(sorted(eigs)[-1], np.sqrt(0.9902))
    rng = np.random.default_rng(3)
    for _ in range(5):
        C = rng.standard_normal((3, 3))
        assert check_detectability(A, C.T @ C)
    assert check_detectability(A, np.zeros((3, 3)))


def test_detectability_rejects_non_square():
    with pytest.raises(ValueError):
        check_detectability(np.ones((2, 3)), np.eye(2))


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------

def test_zoh_zero_dynamics():
    B_c = np.array([[1.0], [2.0]])
    model = discretize_zoh(np.zeros((2, 2)), B_c, 0.5 * B_c, Ts=0.02)
    assert np.allclose(model.A, np.eye(2))
    assert np.allclose(model.B, 0.02 * B_c)
    assert np.allclose(model.E, 0.01 * B_c)
    assert model.c_o.shape == (2, 2)  # identity selector by default


def test_zoh_scalar_closed_form():
    a, b, Ts = -1.3, 0.7, 0.05
    model = discretize_zoh([[a]], [[b]], [[b]], Ts)
    assert np.isclose(model.A[0, 0], np.exp(a * Ts), atol=1e-14)
    assert np.isclose(model.B[0, 0], b * (np.exp(a * Ts) - 1.0) / a, atol=1e-14)


def test_zoh_matches_series_expansion_oracle():
    A_c, B_c, E_c, c_o = aero_engine_continuous()
    Ts = 0.02
    # independent truncated-series oracle: exp(A Ts) and int_0^Ts exp(A s) ds
    n = 2
    A_d = np.zeros((n, n))
    S = np.zeros((n, n))
    term = np.eye(n)
    for j in range(21):
        A_d += term * Ts ** j / math.factorial(j)
        S += term * Ts ** (j + 1) / math.factorial(j + 1)
        term = term @ A_c
    model = discretize_zoh(A_c, B_c, E_c, Ts, c_o=c_o)
    assert np.max(np.abs(model.A - A_d)) <= 1e-12
    assert np.max(np.abs(model.B - S @ B_c)) <= 1e-12
    assert np.max(np.abs(model.E - S @ E_c)) <= 1e-12


def test_zoh_preserves_stability():
    rng = np.random.default_rng(11)
    for _ in range(10):
        n = int(rng.integers(1, 5))
        G = rng.standard_normal((n, n))
        shift = np.max(np.real(np.linalg.eigvals(G))) + rng.uniform(0.2, 2.0)
        A_c = G - shift * np.eye(n)
        model = discretize_zoh(A_c, rng.standard_normal((n, 1)),
                               rng.standard_normal((n, 1)), Ts=rng.uniform(0.01, 1.0))
        assert np.max(np.abs(np.linalg.eigvals(model.A))) < 1.0


def test_zoh_rejects_bad_sample_time():
    with pytest.raises(ValueError):
        discretize_zoh(np.eye(1), np.eye(1), np.eye(1), Ts=0.0)
    with pytest.raises(ValueError):
        discretize_zoh(np.eye(1), np.eye(1), np.eye(1), Ts=-0.1)


# ---------------------------------------------------------------------------
# disturbance profiles
# ---------------------------------------------------------------------------

def test_constant_profile_onset():
    profile = DisturbanceProfile.constant(3.0, start_step=500)
    assert sample_disturbance(profile, 499) == pytest.approx(0.0)
    assert sample_disturbance(profile, 500) == pytest.approx(3.0)
    assert sample_disturbance(profile, 10_000) == pytest.approx(3.0)


def test_sinusoid_profile_starts_at_zero():
    profile = DisturbanceProfile.sinusoid(1.0, rate=0.02, start_step=500)
    assert sample_disturbance(profile, 500) == pytest.approx(0.0)
    assert sample_disturbance(profile, 400) == pytest.approx(0.0)
    k = 540
    assert sample_disturbance(profile, k) == pytest.approx(np.sin((k - 500) / 50.0))


def test_ramp_profile_rises_then_holds():
    # nozzle-area ramp: 0.1273 per second sampled at 20 ms, capped at the
    # total area change 0.063649
    profile = DisturbanceProfile.ramp(rate=0.002546, limit=0.063649)
    assert sample_disturbance(profile, 10) == pytest.approx(0.02546)
    assert sample_disturbance(profile, 25) == pytest.approx(0.063649)
    assert sample_disturbance(profile, 40) == pytest.approx(0.063649)


def test_table_profile_holds_last_value():
    profile = DisturbanceProfile.table([[1.0], [2.0], [3.0]], start_step=2)
    assert sample_disturbance(profile, 1) == pytest.approx(0.0)
    assert sample_disturbance(profile, 2) == pytest.approx(1.0)
    assert sample_disturbance(profile, 4) == pytest.approx(3.0)
    assert sample_disturbance(profile, 99) == pytest.approx(3.0)


def test_sample_rejects_negative_step():
    with pytest.raises(ValueError):
        sample_disturbance(DisturbanceProfile.constant(1.0), -1)


def test_limit_values():
    assert DisturbanceProfile.constant(3.0).limit_value() == pytest.approx(3.0)
    assert DisturbanceProfile.ramp(0.1, 2.5).limit_value() == pytest.approx(2.5)
    assert DisturbanceProfile.table([[1.0], [7.0]]).limit_value() == pytest.approx(7.0)
    assert DisturbanceProfile.sinusoid(0.0, 1.0).limit_value() == pytest.approx(0.0)
    with pytest.raises(ValueError):
        DisturbanceProfile.sinusoid(1.0, 1.0).limit_value()


def test_disturbance_sequence_matches_samples():
    profile = DisturbanceProfile.sinusoid(2.0, rate=0.3, start_step=4, dim=2)
    seq = disturbance_sequence(profile, 12)
    assert seq.shape == (12, 2)
    for k in range(12):
        assert np.allclose(seq[k], sample_disturbance(profile, k))
    raw = disturbance_sequence(np.arange(6.0), 5)
    assert raw.shape == (5, 1)
    with pytest.raises(ValueError):
        disturbance_sequence(np.zeros((3, 1)), 5)
    with pytest.raises(ValueError):
        disturbance_sequence(profile, 4, dim=3)
