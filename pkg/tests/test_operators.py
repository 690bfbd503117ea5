import math

import numpy as np
import pytest

from chiral_feedback.errors import ParameterError
from chiral_feedback.operators import (
    E1,
    E2,
    G,
    atomic_operators,
    check_density_matrix,
    collective_states,
    dag,
    destroy,
    expm,
    fidelity,
    kron,
    partial_trace,
    projector,
    purity,
    trace_distance,
    transition,
    wrap_phase,
)


def test_chiral_operators_reduce_to_bare_transitions():
    ops = atomic_operators(1.0, 0.3)
    np.testing.assert_allclose(ops.s_left, transition(G, E1))
    np.testing.assert_allclose(ops.s_right, transition(G, E2))
    np.testing.assert_allclose(ops.s_t, ops.s1 + np.exp(0.3j) * ops.s2)
    np.testing.assert_allclose(ops.s_s, ops.s1 - np.exp(0.3j) * ops.s2)


def test_partially_chiral_operators_mix_transitions():
    ops = atomic_operators(0.75, 0.0)
    np.testing.assert_allclose(ops.s_left, math.sqrt(0.75) * ops.s1 + 0.5 * ops.s2)
    np.testing.assert_allclose(ops.s_right, 0.5 * ops.s1 + math.sqrt(0.75) * ops.s2)


@pytest.mark.parametrize("eta", [0.4, 1.2])
def test_eta_outside_range_is_rejected(eta):
    with pytest.raises(ParameterError):
        atomic_operators(eta, 0.0)


def test_singlet_is_dark_to_collective_decay():
    phi = 1.1
    singlet, triplet = collective_states(phi)
    ops = atomic_operators(1.0, phi)
    assert np.vdot(singlet, triplet) == pytest.approx(0.0)
    assert np.linalg.norm(singlet) == pytest.approx(1.0)
    np.testing.assert_allclose(ops.s_t @ singlet, 0.0, atol=1e-15)
    assert np.linalg.norm(ops.s_t @ triplet) == pytest.approx(math.sqrt(2.0))


def test_destroy_number_operator():
    a = destroy(3)
    np.testing.assert_allclose(np.diag(dag(a) @ a).real, [0, 1, 2, 3])
    with pytest.raises(ParameterError):
        destroy(0)


def test_partial_trace_of_product_state():
    rho_a = projector(np.array([1, 1j, 0]) / math.sqrt(2))
    rho_b = np.diag([0.25, 0.75]).astype(complex)
    joint = kron(rho_a, rho_b)
    np.testing.assert_allclose(partial_trace(joint, (3, 2), [0]), rho_a, atol=1e-15)
    np.testing.assert_allclose(partial_trace(joint, (3, 2), [1]), rho_b, atol=1e-15)


def test_partial_trace_rejects_bad_dims():
    with pytest.raises(ParameterError):
        partial_trace(np.eye(6), (3, 3), [0])
    with pytest.raises(ParameterError):
        partial_trace(np.eye(6), (3, 2), [2])


def test_purity_distance_and_fidelity():
    g = projector(np.eye(3)[G])
    e1 = projector(np.eye(3)[E1])
    mixed = 0.5 * (g + e1)
    assert purity(g) == pytest.approx(1.0)
    assert purity(mixed) == pytest.approx(0.5)
    assert trace_distance(g, e1) == pytest.approx(1.0)
    assert trace_distance(g, mixed) == pytest.approx(0.5)
    assert fidelity(mixed, np.eye(3)[G]) == pytest.approx(0.5)


def test_check_density_matrix():
    check_density_matrix(np.eye(3) / 3)
    with pytest.raises(ParameterError):
        check_density_matrix(np.eye(3))
    with pytest.raises(ParameterError):
        check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ParameterError):
        check_density_matrix(np.diag([1.5, -0.5]))


def test_expm_requires_square_matrix():
    np.testing.assert_allclose(expm(np.zeros((2, 2))), np.eye(2))
    with pytest.raises(ParameterError):
        expm(np.zeros((2, 3)))


@pytest.mark.parametrize(
    "raw, wrapped",
    [
        (0.3, 0.3),
        (math.pi, math.pi),
        (-math.pi, -math.pi),
        (3 * math.pi / 2, -math.pi / 2),
        (-3 * math.pi / 2, math.pi / 2),
        (2 * math.pi + 0.1, 0.1),
    ],
)
def test_wrap_phase(raw, wrapped):
    assert wrap_phase(raw) == pytest.approx(wrapped, abs=1e-12)
