"""Tests for the finite truncated models and the level-shift oracle."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import spinbath as sb

SPEC, TRUNC = sb.standard_test_bath()


def _build(spec=SPEC, trunc=TRUNC, grid=None):
    bath = sb.discretize(sb.coupling_function(spec, grid=grid), trunc)
    return sb.build_model(bath, spec, trunc)


@pytest.fixture(scope="module")
def small_model():
    f_beta = sb.coupling_function(SPEC)
    bath = sb.discretize(f_beta, TRUNC)
    return f_beta, bath, sb.build_model(bath, SPEC, TRUNC)


# --- truncation spec ----------------------------------------------------------

def test_truncation_spec_validation():
    with pytest.raises(sb.ConfigurationError):
        sb.TruncationSpec(m_pos=0, u_max=3.0, n_max=3, eta=0.1)
    with pytest.raises(sb.ConfigurationError):
        sb.TruncationSpec(m_pos=2, u_max=3.0, n_max=0, eta=0.1)
    with pytest.raises(sb.ConfigurationError):
        sb.TruncationSpec(m_pos=2, u_max=0.0, n_max=3, eta=0.1)
    with pytest.raises(sb.ConfigurationError):
        sb.TruncationSpec(m_pos=2, u_max=3.0, n_max=3, eta=-0.1)
    with pytest.raises(sb.ConfigurationError):
        sb.TruncationSpec(m_pos=2, u_max=3.0, n_max=3, eta=0.1, budget=2.0)


def test_budget_rejects_oversized_with_suggestions():
    with pytest.raises(sb.ConfigurationError) as exc:
        sb.TruncationSpec(m_pos=4, u_max=3.0, n_max=3, eta=0.1)
    msg = str(exc.value)
    assert "m_pos <= 3" in msg
    assert "n_max <= 2" in msg


def test_budget_checked_without_overflow():
    with pytest.raises(sb.ConfigurationError):
        sb.TruncationSpec(m_pos=200, u_max=3.0, n_max=50, eta=0.1)


def test_budget_inf_admits_virtual_sizes():
    trunc = sb.TruncationSpec(m_pos=6, u_max=3.0, n_max=9, eta=0.1,
                              budget=np.inf)
    assert trunc.bath_dim == 10 ** 12


def test_bath_dim_matches_layout():
    assert TRUNC.bath_dim == (TRUNC.n_max + 1) ** (2 * TRUNC.m_pos)


# --- discretize ---------------------------------------------------------------

def test_discretize_mirror_layout(small_model):
    _, bath, _ = small_model
    assert bath.n_modes == 2 * TRUNC.m_pos
    assert np.all(np.diff(bath.freqs) > 0)
    assert np.array_equal(bath.freqs, -bath.freqs[::-1])
    assert np.array_equal(bath.bin_edges,
                          np.linspace(0.0, TRUNC.u_max, TRUNC.m_pos + 1))


def test_discretize_inherits_sign_relation(small_model):
    _, bath, _ = small_model
    assert bath.balance_residual(SPEC.beta) < 1e-5


def test_discretize_norm_identity_at_documented_resolution():
    spec = sb.standard_oracle_bath()
    f_beta = sb.coupling_function(spec)
    trunc = sb.TruncationSpec(m_pos=8, u_max=12.0 / spec.beta, n_max=3,
                              eta=0.1, budget=np.inf)
    bath = sb.discretize(f_beta, trunc)
    target = 4.0 * f_beta.norm_sq()
    assert np.sum(np.abs(bath.amps) ** 2) == pytest.approx(target, rel=0.02)


def test_discretize_norm_error_halves_with_m_pos():
    f_beta = sb.coupling_function(SPEC)
    target = 4.0 * f_beta.norm_sq()
    errs = []
    for m in (8, 16, 32):
        trunc = sb.TruncationSpec(m_pos=m, u_max=8.0, n_max=1, eta=0.1,
                                  budget=np.inf)
        bath = sb.discretize(f_beta, trunc)
        errs.append(abs(np.sum(np.abs(bath.amps) ** 2) - target) / target)
    assert errs[1] <= 0.5 * errs[0]
    assert errs[2] <= 0.5 * errs[1]


def test_discretize_zero_coupling_gives_silent_bath():
    spec = dataclasses.replace(SPEC, q0=0.0)
    bath = sb.discretize(sb.coupling_function(spec), TRUNC)
    assert np.all(bath.amps == 0.0)


def test_discretize_needs_covering_samples():
    f_beta = sb.coupling_function(SPEC, grid=sb.GridSpec(u_max=2.0))
    with pytest.raises(sb.PreconditionError):
        sb.discretize(f_beta, TRUNC)


@pytest.fixture(scope="module")
def wide_glue():
    return sb.coupling_function(SPEC)


@settings(max_examples=25, deadline=None)
@given(m_pos=st.integers(min_value=1, max_value=8),
       u_max=st.floats(min_value=1.0, max_value=20.0))
def test_discretize_layout_properties(wide_glue, m_pos, u_max):
    trunc = sb.TruncationSpec(m_pos=m_pos, u_max=u_max, n_max=1, eta=0.1,
                              budget=np.inf)
    bath = sb.discretize(wide_glue, trunc)
    assert np.array_equal(bath.freqs, -bath.freqs[::-1])
    assert np.all(np.isfinite(bath.amps))
    assert bath.balance_residual(SPEC.beta) < 1e-4


# --- finite operator algebra --------------------------------------------------

def test_transformed_interaction_squares_to_one(small_model):
    _, _, model = small_model
    eye = np.eye(model.dim)
    assert np.abs(model.cal_V @ model.cal_V - eye).max() <= 1e-12
    assert np.abs(model.cal_JVJ @ model.cal_JVJ - eye).max() <= 1e-12


def test_left_right_interactions_commute(small_model):
    _, _, model = small_model
    comm = model.V @ model.JVJ - model.JVJ @ model.V
    vnorm = np.linalg.norm(model.V, 2)
    assert np.abs(comm).max() <= 1e-8 * vnorm ** 2


def test_interaction_is_a_contraction(small_model):
    _, _, model = small_model
    assert np.linalg.norm(model.I, 2) <= 1.0 + 1e-3


def test_generators_self_adjoint(small_model):
    _, _, model = small_model
    assert np.isrealobj(model.L0)
    for op in (model.I, model.L, model.cal_L):
        assert np.abs(op - op.conj().T).max() <= 1e-10


def test_polaron_dressing_is_unitary(small_model):
    _, _, model = small_model
    eye = np.eye(model.dim)
    assert np.abs(model.U.conj().T @ model.U - eye).max() <= 1e-12


def test_vacuum_projections_sit_on_sector_vacua(small_model):
    _, _, model = small_model
    bd = model.bath_dim
    assert np.array_equal(np.nonzero(model.P_Omega)[0], np.arange(4) * bd)
    assert np.array_equal(np.nonzero(model.Pi0)[0], np.array([0, 3 * bd]))


def test_weyl_unitarity_monitor_trips():
    bath = sb.DiscretizedBath(freqs=np.array([-1.0, 1.0]),
                              amps=np.array([1e12 + 0j, 1e12 + 0j]),
                              bin_edges=np.linspace(0.0, 1.0, 2))
    trunc = sb.TruncationSpec(m_pos=1, u_max=1.0, n_max=1, eta=0.1)
    with pytest.raises(sb.TruncationError, match="n_max"):
        sb.build_model(bath, SPEC, trunc)


# --- unitary equivalence ------------------------------------------------------

def test_equivalence_residual_refines_with_n_max():
    res = []
    for n_max in (2, 3, 4):
        trunc = sb.TruncationSpec(m_pos=2, u_max=3.0, n_max=n_max, eta=0.1)
        res.append(sb.check_unitary_equivalence(_build(trunc=trunc)))
    assert res[0] > res[1] > res[2]
    assert res[2] < 0.03


def test_equivalence_exact_without_coupling():
    spec = dataclasses.replace(SPEC, q0=0.0)
    model = _build(spec=spec)
    assert sb.check_unitary_equivalence(model) <= 1e-12
    assert np.array_equal(model.U, np.eye(model.dim))


def test_equivalence_residual_ignores_delta():
    res = [sb.check_unitary_equivalence(_build(
        spec=dataclasses.replace(SPEC, delta=d))) for d in (0.0, 0.2, 0.7)]
    assert max(res) - min(res) <= 1e-10


# --- level-shift matrix -------------------------------------------------------

def test_lso_dense_matches_virtual(small_model):
    _, _, model = small_model
    dense = sb.lso_finite(model)
    virtual = sb.lso_finite(model, force_virtual=True)
    assert np.abs(dense - virtual).max() <= 1e-7


def test_lso_entries_structure(small_model):
    _, _, model = small_model
    lam = sb.lso_finite(model)
    assert lam.shape == (2, 2)
    assert abs(lam[0, 1] - lam[1, 0]) <= 1e-12
    assert np.abs(lam.real).max() <= 1e-12


def test_lso_free_spin_closed_form():
    spec = dataclasses.replace(SPEC, q0=0.0)
    model = _build(spec=spec)
    eta = TRUNC.eta
    val = 0.5j * eta / (spec.eps ** 2 + eta ** 2)
    expected = val * np.array([[1.0, -1.0], [-1.0, 1.0]])
    lam = sb.lso_finite(model)
    assert np.allclose(lam, expected, rtol=1e-12, atol=1e-15)


def test_lso_rejects_bad_eta(small_model):
    _, _, model = small_model
    with pytest.raises(sb.ConfigurationError):
        sb.lso_finite(model, eta=0.0)
    with pytest.raises(sb.ConfigurationError):
        sb.lso_finite(model, eta=-0.5)


def test_virtual_model_supports_only_lso():
    trunc = sb.TruncationSpec(m_pos=6, u_max=3.0, n_max=2, eta=0.1,
                              budget=np.inf)
    model = _build(trunc=trunc)
    assert not model.materialized
    with pytest.raises(sb.ConfigurationError):
        model.L
    with pytest.raises(sb.ConfigurationError):
        sb.kms_vector(model)
    lam = sb.lso_finite(model)
    assert lam.shape == (2, 2)
    assert np.all(np.isfinite(lam))
    assert np.abs(lam.real).max() <= 1e-6 * np.abs(lam.imag).max()


# --- KMS vector ---------------------------------------------------------------

def test_kms_decoupled_is_exact_kernel_vector():
    spec = dataclasses.replace(SPEC, delta=0.0)
    model = _build(spec=spec)
    psi, res = sb.kms_vector(model)
    assert res <= 1e-12
    support = np.nonzero(psi)[0]
    assert np.array_equal(support, np.array([0, 3 * model.bath_dim]))
    ratio = (psi[3 * model.bath_dim] / psi[0]).real
    assert ratio == pytest.approx(np.exp(0.5 * spec.beta * spec.eps), rel=1e-12)


def test_free_generator_annihilates_sector_vacua(small_model):
    _, _, model = small_model
    assert model.L0[0] == 0.0
    assert model.L0[3 * model.bath_dim] == 0.0


def test_kms_residual_refines():
    spec = dataclasses.replace(SPEC, delta=0.05)
    res = []
    for m_pos, n_max in ((1, 2), (2, 3), (2, 4)):
        trunc = sb.TruncationSpec(m_pos=m_pos, u_max=3.0, n_max=n_max, eta=0.1)
        _, r = sb.kms_vector(_build(spec=spec, trunc=trunc))
        res.append(r)
    assert res[0] > res[1] > res[2]
    assert res[2] < 1e-3


def test_kms_normalized(small_model):
    _, _, model = small_model
    psi, _ = sb.kms_vector(model)
    assert np.linalg.norm(psi) == pytest.approx(1.0, rel=1e-12)


def test_kms_overflow_guard():
    spec = dataclasses.replace(SPEC, beta=500.0)
    trunc = sb.TruncationSpec(m_pos=1, u_max=3.0, n_max=1, eta=0.1)
    grid = sb.GridSpec(u_max=3.5)
    with pytest.raises(sb.ScalingError, match="smaller beta"):
        sb.kms_vector(_build(spec=spec, trunc=trunc, grid=grid))
    decoupled = dataclasses.replace(spec, delta=0.0)
    _, res = sb.kms_vector(_build(spec=decoupled, trunc=trunc, grid=grid))
    assert res <= 1e-12


# --- singular Weyl sequences --------------------------------------------------

WEYL_TRUNC = sb.TruncationSpec(m_pos=5, u_max=3.0, n_max=1, eta=0.1)


def test_weyl_residuals_decrease_into_spectrum():
    spec = dataclasses.replace(SPEC, delta=0.02)
    res = sb.weyl_sequence_check(_build(spec=spec, trunc=WEYL_TRUNC), s=1.0)
    assert np.all(np.diff(res) <= 1e-12)
    assert res[-1] < res[0]


def test_weyl_empty_window_is_a_precondition():
    spec = dataclasses.replace(SPEC, delta=0.02)
    model = _build(spec=spec, trunc=WEYL_TRUNC)
    with pytest.raises(sb.PreconditionError):
        sb.weyl_sequence_check(model, s=10.0)


def test_weyl_free_field_matches_window_rms():
    spec = dataclasses.replace(SPEC, delta=0.0, q0=0.0)
    model = _build(spec=spec, trunc=WEYL_TRUNC)
    res = sb.weyl_sequence_check(model, s=0.0, n_seq=3)
    for n, r in enumerate(res, start=1):
        sel = np.abs(model.bath.freqs) <= 1.0 / n
        expected = np.sqrt(np.mean(model.bath.freqs[sel] ** 2))
        assert r == pytest.approx(expected, rel=1e-9)


# --- oracle schedule ----------------------------------------------------------

SMOKE_SCHEDULE = ((1, 0.4), (2, 0.2), (3, 0.1))


def test_oracle_schedule_shape_and_determinism():
    spec = sb.standard_oracle_bath()
    first = sb.run_oracle_schedule(spec, SMOKE_SCHEDULE, n_max=2)
    second = sb.run_oracle_schedule(spec, SMOKE_SCHEDULE, n_max=2)
    assert first.schedule == SMOKE_SCHEDULE
    assert len(first.rungs) == 3
    for a, b in zip(first.rungs, second.rungs):
        assert np.array_equal(a, b)
    assert set(first.extrapolated) == {"x_plus", "x_minus", "z"}
    assert set(first.observed_order) == set(first.extrapolated)
    assert all(isinstance(v, bool) for v in first.monotone.values())
    top = first.entries(-1)
    lam = first.rungs[-1]
    assert top["x_plus"] == lam[0, 0]
    assert top["x_minus"] == lam[1, 1]
    assert top["z"] == 0.5 * (lam[0, 1] + lam[1, 0])


def test_oracle_schedule_needs_three_rungs():
    with pytest.raises(sb.ConfigurationError):
        sb.run_oracle_schedule(schedule=((4, 0.2), (8, 0.1)))


def test_standard_oracle_bath_pins_saturated_weight():
    spec = sb.standard_oracle_bath()
    a = spec.q0 ** 2 / np.pi
    assert a * sb.c2_saturation(spec) == pytest.approx(4.0, rel=1e-9)
