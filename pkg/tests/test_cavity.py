import logging
import math

import numpy as np
import pytest

from chiral_feedback import cavity, markov
from chiral_feedback.errors import ParameterError
from chiral_feedback.models import CavityConfig, SystemParams
from chiral_feedback.operators import partial_trace, trace_distance, wrap_phase


def test_effective_coupling_and_loss_ratio():
    c = CavityConfig(g=5.0, kappa=100.0)
    assert cavity.effective_coupling(c) == pytest.approx(1.0)
    lossy = CavityConfig(g=5.0, kappa=100.0, kappa_loss=10.0)
    assert cavity.effective_coupling(lossy) == pytest.approx(100.0 * 100.0 / 110.0**2)
    ratio = cavity.loss_ratio(SystemParams(gamma_loss=0.02), lossy)
    assert ratio == pytest.approx(0.02 / cavity.effective_coupling(lossy) + 0.1)


def test_cavity_model_structure():
    c = CavityConfig(g=5.0, kappa=100.0, kappa_loss=1.0, n_max=2)
    model = cavity.build_cavity_model(SystemParams(omega=0.5, gamma_loss=0.01), c)
    assert model.dims == (3, 3, 3)
    assert model.dim == 27
    assert model.labels == ["guided", "cavity_loss_1", "cavity_loss_2", "loss_1", "loss_2"]
    assert model.jump("guided")[1] == pytest.approx(200.0)


def test_cavity_model_needs_chiral_coupling():
    with pytest.raises(ParameterError):
        cavity.build_cavity_model(SystemParams(eta=0.8), CavityConfig(g=1.0, kappa=10.0))


@pytest.mark.parametrize("delta_phi", [0.0, math.pi / 3, -2.0, math.pi])
def test_adiabatic_model_is_v_atom_with_shifted_phase(delta_phi):
    p = SystemParams(omega=0.7, delta1=0.2, delta2=-0.1, delta_phi=delta_phi)
    c = CavityConfig(g=5.0, kappa=100.0)
    reduced = cavity.adiabatic_model(p, c)
    shifted = markov.build_v_atom_model(p.model_copy(update={"delta_phi": wrap_phase(delta_phi + math.pi)}))
    np.testing.assert_allclose(reduced.hamiltonian, shifted.hamiltonian, atol=1e-12)
    (op_r, rate_r), (op_s, rate_s) = reduced.jumps[0], shifted.jumps[0]
    assert rate_r == pytest.approx(rate_s)
    np.testing.assert_allclose(op_r, op_s, atol=1e-12)


def test_adiabatic_model_adds_cavity_loss_to_atomic_decay():
    c = CavityConfig(g=5.0, kappa=100.0, kappa_loss=5.0)
    reduced = cavity.adiabatic_model(SystemParams(omega=0.5, gamma_loss=0.01), c)
    _, rate = reduced.jump("loss_1")
    assert rate == pytest.approx(0.01 + cavity.effective_coupling(c) * 0.05)


def test_adiabatic_model_warns_on_strong_coupling(caplog):
    with caplog.at_level(logging.WARNING, logger="chiral_feedback.cavity"):
        cavity.adiabatic_model(SystemParams(omega=0.5), CavityConfig(g=30.0, kappa=100.0))
    assert "adiabatic elimination is unreliable" in caplog.text


def test_empty_cavity_correlation_at_zero_time():
    assert cavity.cavity_correlation("T", "T", 0.0, 100.0) == pytest.approx(1.0)
    assert cavity.cavity_correlation("S", "T", 0.0, 100.0) == pytest.approx(0.0)


@pytest.mark.parametrize("t", [0.0, 0.004, 0.03])
@pytest.mark.parametrize("kappa_loss", [0.0, 20.0])
def test_correlations_match_regression_theorem(t, kappa_loss):
    for i in cavity.MODES:
        for k in cavity.MODES:
            exact = cavity.cavity_correlation(i, k, t, 100.0, kappa_loss)
            numeric = cavity.regression_correlation(i, k, t, 100.0, kappa_loss, delta_phi=0.6)
            assert numeric == pytest.approx(exact, abs=1e-8)


def test_correlation_rejects_bad_input():
    with pytest.raises(ParameterError):
        cavity.cavity_correlation("X", "T", 0.1, 1.0)
    with pytest.raises(ParameterError):
        cavity.cavity_correlation("T", "T", -0.1, 1.0)


def test_verify_adiabatic_limit_at_dark_point():
    report = cavity.verify_adiabatic_limit(
        SystemParams(omega=0.5, delta_phi=math.pi), CavityConfig(g=5.0, kappa=100.0, n_max=2)
    )
    assert report.passed
    assert report.gamma_eff == pytest.approx(1.0)
    assert report.purity_adiabatic == pytest.approx(1.0, abs=1e-8)
    assert report.as_dict()["passed"] is True


def test_reduction_improves_as_cavity_gets_faster():
    # keep gamma_eff = 1 while g/kappa shrinks
    p = SystemParams(omega=0.8, delta_phi=2.0)
    distances = []
    for ratio in (0.2, 0.1, 0.05, 0.02):
        kappa = 1.0 / (4.0 * ratio**2)
        c = CavityConfig(g=ratio * kappa, kappa=kappa, n_max=2)
        full = cavity.build_cavity_model(p, c)
        rho_full = markov.steady_state(markov.vectorize(full))
        rho_reduced = markov.steady_state(markov.vectorize(cavity.adiabatic_model(p, c)))
        distances.append(trace_distance(partial_trace(rho_full, full.dims, [0]), rho_reduced))
    assert all(b <= a + 1e-3 for a, b in zip(distances, distances[1:]))


def test_cutoff_population_of_vacuum():
    c = CavityConfig(g=1.0, kappa=10.0, n_max=1)
    rho = np.zeros((12, 12), dtype=complex)
    rho[0, 0] = 1.0
    assert cavity.cutoff_population(rho, c) == pytest.approx(0.0)


@pytest.mark.slow
def test_weak_drive_converged_in_fock_cutoff():
    p = SystemParams(omega=0.1, delta_phi=2.0)
    reduced = []
    for n_max in (1, 3):
        c = CavityConfig(g=5.0, kappa=100.0, n_max=n_max)
        model = cavity.build_cavity_model(p, c)
        rho = markov.steady_state(markov.vectorize(model))
        reduced.append(partial_trace(rho, model.dims, [0]))
    assert cavity.cutoff_population(rho, c) < 1e-6
    assert trace_distance(*reduced) < 1e-6
