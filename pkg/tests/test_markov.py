import math

import numpy as np
import pytest

from chiral_feedback import markov
from chiral_feedback.dark_states import alpha_commensurate, dark_phases, dark_state_vector, dimer_dark_state
from chiral_feedback.errors import DegenerateSteadyStateError, ParameterError
from chiral_feedback.models import SystemParams
from chiral_feedback.operators import G, collective_states, fidelity, projector, purity, trace_distance


def _random_density_matrix(dim, seed=7):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_v_atom_model_structure():
    model = markov.build_v_atom_model(SystemParams(omega=1.0, delta_phi=0.4))
    assert model.labels == ["guided"]
    np.testing.assert_allclose(model.hamiltonian, model.hamiltonian.conj().T)

    lossy = markov.build_v_atom_model(SystemParams(omega=1.0, gamma_loss=0.1))
    assert lossy.labels == ["guided", "loss_1", "loss_2"]
    assert lossy.jump("loss_2")[1] == pytest.approx(0.1)


def test_model_rejects_non_hermitian_hamiltonian():
    h = np.zeros((3, 3), dtype=complex)
    h[0, 1] = 1.0
    with pytest.raises(ParameterError):
        markov.LindbladModel(hamiltonian=h, jumps=[(np.zeros((3, 3)), 1.0)], labels=["guided"], delta_phi=0.0)


def test_vectorized_liouvillian_matches_termwise_rhs():
    model = markov.build_v_atom_model(SystemParams(omega=0.8, delta1=0.3, delta2=-0.2, delta_phi=1.0, gamma_loss=0.05))
    rho = _random_density_matrix(3)
    liou = markov.vectorize(model)
    np.testing.assert_allclose(liou.apply(rho), markov.liouvillian_rhs(model, rho), atol=1e-12)
    assert abs(np.trace(liou.apply(rho))) < 1e-12


def test_commensurate_steady_state_is_dark(commensurate_params):
    p = commensurate_params
    rho, obs = markov.solve_steady(p)
    psi = dark_state_vector(alpha_commensurate(p.omega, p.delta1, p.gamma), 0.0)
    assert obs["purity"] == pytest.approx(1.0, abs=1e-8)
    assert fidelity(rho, psi) == pytest.approx(1.0, abs=1e-8)
    assert obs["emission_rate"] == pytest.approx(0.0, abs=1e-8)


def test_resonant_commensurate_ground_population():
    # alpha = i sqrt(2) at omega = gamma, so |g> carries a third of the weight
    _, obs = markov.solve_steady(SystemParams(omega=1.0))
    assert obs["pop_g"] == pytest.approx(1.0 / 3.0, abs=1e-8)


def test_incommensurate_dark_point(dark_params):
    _, obs = markov.solve_steady(dark_params)
    assert obs["purity"] == pytest.approx(1.0, abs=1e-8)
    assert obs["pop_S"] == pytest.approx(0.5, abs=1e-8)
    assert obs["pop_T"] == pytest.approx(0.0, abs=1e-8)
    assert obs["H_expectation"] == pytest.approx(0.5, abs=1e-8)


def test_loss_spoils_purity():
    _, obs = markov.solve_steady(SystemParams(omega=2.0, gamma_loss=0.05))
    assert obs["purity"] < 0.99


def test_degenerate_kernel_is_reported():
    zero = np.zeros((3, 3), dtype=complex)
    model = markov.LindbladModel(hamiltonian=zero, jumps=[(zero, 1.0)], labels=["guided"], delta_phi=0.0)
    with pytest.raises(DegenerateSteadyStateError) as err:
        markov.steady_state(markov.vectorize(model))
    assert err.value.kernel_dimension == 9


def test_propagation_relaxes_to_steady_state(commensurate_params):
    model = markov.build_v_atom_model(commensurate_params)
    liou = markov.vectorize(model)
    late = markov.propagate(liou, markov.initial_state("g"), [200.0])[0]
    assert trace_distance(late, markov.steady_state(liou)) < 1e-6


def test_evolve_methods_agree():
    model = markov.build_v_atom_model(SystemParams(omega=1.0, delta_phi=0.7))
    rho0 = markov.initial_state("e1")
    exact = markov.evolve(model, rho0, t_final=1.0, dt=0.01, method="expm", sample_every=10)
    rk4 = markov.evolve(model, rho0, t_final=1.0, dt=0.01, method="rk4", sample_every=10)
    assert len(exact) == 11
    np.testing.assert_allclose(exact.times, rk4.times)
    np.testing.assert_allclose(exact.states, rk4.states, atol=1e-8)
    assert exact.warnings == []
    for _, rho in exact:
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)


def test_evolve_input_checks():
    model = markov.build_v_atom_model(SystemParams(omega=1.0))
    rho0 = markov.initial_state("g")
    with pytest.raises(ParameterError):
        markov.evolve(model, rho0, 1.0, dt=0.0)
    with pytest.raises(ParameterError):
        markov.evolve(model, rho0, 1.0, dt=0.01, method="euler")
    with pytest.raises(ParameterError):
        markov.evolve(model, 2 * rho0, 1.0, dt=0.01)


def test_default_horizon():
    # relaxation rate 2 gamma / (1 + |alpha|^2) = 2/3 at the resonant commensurate point
    assert markov.default_horizon(SystemParams(omega=1.0)) == pytest.approx(75.0)
    assert markov.default_horizon(SystemParams(omega=1.0, gamma_loss=0.1)) == pytest.approx(200.0)


def test_initial_states():
    singlet = markov.initial_ket("S", 0.5)
    assert np.linalg.norm(singlet) == pytest.approx(1.0)
    assert purity(markov.initial_state("T", 0.5)) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        markov.initial_ket("x")


def test_observables_of_ground_state():
    model = markov.build_v_atom_model(SystemParams(omega=1.0))
    obs = markov.observables(projector(np.eye(3)[0]), model)
    assert obs["pop_g"] == pytest.approx(1.0)
    assert obs["emission_rate"] == pytest.approx(0.0)
    assert obs["H_expectation"] == pytest.approx(0.0)


def test_dimer_steady_state_matches_v_atom_amplitude():
    omega, delta = 1.0, 0.5
    model = markov.build_dimer_model(omega, 1.0, delta, -delta, 0.0)
    assert model.dims == (2, 2)
    rho = markov.steady_state(markov.vectorize(model))
    assert fidelity(rho, dimer_dark_state(omega, delta, 1.0)) == pytest.approx(1.0, abs=1e-8)
    obs = markov.observables(rho, model)
    alpha = alpha_commensurate(omega, delta, 1.0)
    assert obs["pop_g"] == pytest.approx(1.0 / (1.0 + abs(alpha) ** 2), abs=1e-8)


def test_dimer_rejects_bad_rates():
    with pytest.raises(ParameterError):
        markov.build_dimer_model(-1.0, 1.0, 0.0, 0.0, 0.0)


def test_dipole_dipole_is_hermitian():
    s1 = np.zeros((3, 3), dtype=complex)
    s1[0, 1] = 1.0
    s2 = np.zeros((3, 3), dtype=complex)
    s2[0, 2] = 1.0
    h = markov.dipole_dipole(s1, s2, 1.0, math.pi / 3)
    np.testing.assert_allclose(h, h.conj().T)


def test_steady_state_depends_only_on_phase_difference():
    a = SystemParams.from_bare_phases(1.2, 0.4, omega=1.0)
    b = SystemParams.from_bare_phases(2.0, 1.2, omega=1.0)
    assert a.delta_phi == pytest.approx(b.delta_phi)
    np.testing.assert_allclose(markov.solve_steady(a)[0], markov.solve_steady(b)[0], atol=1e-10)

    wrapped = SystemParams.from_bare_phases(3.0, -2.0, omega=1.0)
    assert wrapped.delta_phi == pytest.approx(5.0 - 2 * math.pi)
    direct = SystemParams(omega=1.0, delta_phi=5.0 - 2 * math.pi)
    np.testing.assert_allclose(markov.solve_steady(wrapped)[0], markov.solve_steady(direct)[0], atol=1e-10)


@pytest.mark.parametrize(
    "delta1, delta2, aligned",
    [(0.5, -0.5, True), (0.3, -0.3, True), (0.0, 0.0, True), (0.5, 0.5, False), (0.2, 0.0, False)],
)
def test_symmetric_state_stays_level_with_ground_for_opposite_detunings(delta1, delta2, aligned):
    h = markov.build_v_atom_model(SystemParams(omega=1.0, delta1=delta1, delta2=delta2)).hamiltonian
    singlet, triplet = collective_states(0.0)
    # S only picks up energy from the detunings; its exchange with T is fixed by gamma
    assert (abs(np.vdot(singlet, h @ singlet) - h[G, G]) < 1e-12) == aligned
    assert np.vdot(triplet, h @ singlet) == pytest.approx(0.5 * (delta2 - delta1) - 0.5j)


def test_equal_detunings_leave_steady_state_mixed():
    _, obs = markov.solve_steady(SystemParams(omega=1.0, delta1=0.5, delta2=0.5))
    assert obs["purity"] < 1 - 1e-4

    model = markov.build_dimer_model(1.0, 1.0, 0.5, 0.5, 0.0)
    rho = markov.steady_state(markov.vectorize(model))
    assert purity(rho) < 1 - 1e-4


def test_emission_vanishes_at_every_dark_phase():
    omega = 2.0
    for phi in dark_phases(omega, 0.0, 1.0):
        at_root = markov.solve_steady(SystemParams(omega=omega, delta_phi=phi))[1]["emission_rate"]
        assert at_root < 1e-8
        for shift in (-0.1, 0.1):
            nearby = SystemParams(omega=omega, delta_phi=max(-math.pi, min(math.pi, phi + shift)))
            assert markov.solve_steady(nearby)[1]["emission_rate"] > at_root + 1e-6


def test_drive_phase_only_enters_below_full_directionality():
    chiral = markov.build_v_atom_model(SystemParams(omega=1.0, phi_prime=0.7)).hamiltonian
    np.testing.assert_allclose(chiral, markov.build_v_atom_model(SystemParams(omega=1.0)).hamiltonian)

    partial = markov.build_v_atom_model(SystemParams(omega=1.0, eta=0.8, phi_prime=0.7)).hamiltonian
    assert partial[G, 2] == pytest.approx(-0.5 * np.exp(0.7j))
    assert partial[G, 1] == pytest.approx(-0.5)
