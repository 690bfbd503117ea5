"""Dense complex linear algebra and the atomic/cavity operator constructors.

Basis order for the atom is fixed to (|g>, |e1>, |e2>). Every operator is a
plain complex ``numpy.ndarray``; nothing here keeps state.
"""
import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import ParameterError

ATOM_DIM = 3
G, E1, E2 = 0, 1, 2


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def transition(lower: int, upper: int, dim: int = ATOM_DIM) -> np.ndarray:
    """|lower><upper|"""
    op = np.zeros((dim, dim), dtype=complex)
    op[lower, upper] = 1.0
    return op


@dataclass(frozen=True)
class AtomicOperators:
    s1: np.ndarray
    s2: np.ndarray
    s_left: np.ndarray
    s_right: np.ndarray
    s_t: np.ndarray
    s_s: np.ndarray


def atomic_operators(eta: float, delta_phi: float, phi_prime: float = 0.0) -> AtomicOperators:
    """Lowering operators of the V-atom and their directional/collective combinations.

    s_t and s_s are the unnormalized sums s_left +/- e^{i delta_phi} s_right; at
    eta = 1 they are sqrt(2) times the normalized T/S operators. ``phi_prime`` is
    gauged into ``delta_phi`` and does not enter the lowering operators.
    """
    if not 0.5 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0.5, 1], got {eta}")

    s1 = transition(G, E1)
    s2 = transition(G, E2)
    s_left = math.sqrt(eta) * s1 + math.sqrt(1.0 - eta) * s2
    s_right = math.sqrt(1.0 - eta) * s1 + math.sqrt(eta) * s2
    phase = np.exp(1j * delta_phi)
    return AtomicOperators(
        s1=s1,
        s2=s2,
        s_left=s_left,
        s_right=s_right,
        s_t=s_left + phase * s_right,
        s_s=s_left - phase * s_right,
    )


def collective_states(delta_phi: float) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized |S>, |T> = (|e1> -/+ e^{-i delta_phi}|e2>)/sqrt(2)."""
    w = np.exp(-1j * delta_phi)
    s = (ket(E1, ATOM_DIM) - w * ket(E2, ATOM_DIM)) / math.sqrt(2.0)
    t = (ket(E1, ATOM_DIM) + w * ket(E2, ATOM_DIM)) / math.sqrt(2.0)
    return s, t


def destroy(n_max: int) -> np.ndarray:
    """Bosonic annihilation operator truncated at n_max photons."""
    if n_max < 1:
        raise ParameterError(f"Fock cutoff must be >= 1, got {n_max}")
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)


def kron(*ops: np.ndarray) -> np.ndarray:
    if not ops:
        raise ParameterError("kron needs at least one operand")
    return reduce(np.kron, (np.asarray(op, dtype=complex) for op in ops))


def expm(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"expm needs a square matrix, got shape {a.shape}")
    return scipy.linalg.expm(a)


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix over the subsystems in ``keep`` (kept in ascending order)."""
    rho = np.asarray(rho, dtype=complex)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims)) if dims else 1
    if rho.shape != (total, total):
        raise ParameterError(f"dims {dims} imply a {total}x{total} matrix, got {rho.shape}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ParameterError(f"keep indices {keep} out of range for {len(dims)} subsystems")

    n = len(dims)
    rows = [chr(ord("a") + i) for i in range(n)]
    cols = [chr(ord("a") + n + i) if i in keep else rows[i] for i in range(n)]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    reduced = np.einsum(f"{''.join(rows)}{''.join(cols)}->{out}", rho.reshape(dims + dims))
    kept_dim = int(np.prod([dims[k] for k in keep])) if keep else 1
    return reduced.reshape(kept_dim, kept_dim)


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=complex)
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.real(np.vdot(rho.conj().T, rho)))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = np.asarray(rho, dtype=complex) - np.asarray(sigma, dtype=complex)
    diff = 0.5 * (diff + dag(diff))
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """<psi|rho|psi> for a pure reference state."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return float(np.real(psi.conj() @ rho @ psi))


def check_density_matrix(rho: np.ndarray, atol: float = 1e-12, eig_tol: float = 1e-10) -> None:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ParameterError(f"density matrix must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ParameterError("density matrix has non-finite entries")
    if np.max(np.abs(rho - dag(rho))) > atol:
        raise ParameterError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > atol:
        raise ParameterError(f"density matrix trace is {tr.real:.3g}, expected 1")
    lowest = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0]
    if lowest < -eig_tol:
        raise ParameterError(f"density matrix has negative eigenvalue {lowest:.3g}")


def wrap_phase(x: float) -> float:
    """Map a phase to [-pi, pi]; exact ties at +/-pi keep the sign of the input."""
    if -math.pi <= x <= math.pi:
        return float(x)
    y = math.remainder(x, 2.0 * math.pi)
    if abs(abs(y) - math.pi) < 1e-15:
        return math.copysign(math.pi, x)
    return y
