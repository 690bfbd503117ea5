"""Closed-form dark-state predictors for the chirally coupled V-atom and the cascaded dimer."""
import cmath
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import UndefinedRegimeError
from .models import SystemParams
from .operators import ATOM_DIM, G, collective_states, wrap_phase

logger = logging.getLogger(__name__)

# Relative tolerance for "H|D> is parallel to |D>"
EIGEN_TOL = 1e-8


class DressedAlphas(NamedTuple):
    plus: Optional[complex]
    minus: Optional[complex]
    degenerate: bool = False


class DressedEnergies(NamedTuple):
    e_plus: float
    e_minus: float
    j_tb: Optional[complex]


@dataclass(frozen=True)
class DarkStatePrediction:
    exists: bool
    alpha: Optional[complex] = None
    state: Optional[np.ndarray] = None
    e_plus: Optional[float] = None
    e_minus: Optional[float] = None
    j_tb: Optional[complex] = None
    omega_required: Optional[float] = None


# ==============================================================
#  Amplitudes
# ==============================================================
def alpha_commensurate(omega: float, delta1: float, gamma: float) -> complex:
    """Excited amplitude for delta_phi = 0 and delta2 = -delta1; also the dimer amplitude."""
    return -math.sqrt(2.0) * omega / (1j * gamma + 2.0 * delta1)


def alpha_general(omega: float, delta_phi: float, delta1: float, delta2: float, gamma: float) -> complex:
    """Amplitude that cancels the coupling between |g> + alpha|S> and |T>."""
    return -(omega / math.sqrt(2.0)) * (1.0 + cmath.exp(1j * delta_phi)) / (1j * gamma + delta1 - delta2)


def dark_rabi(delta_phi: float, delta: float, gamma: float) -> Optional[float]:
    """Rabi frequency that makes the equal-detuning system dark, or None if no real root exists."""
    if delta_phi == 0.0:
        raise UndefinedRegimeError(
            "dark_rabi is undefined at delta_phi = 0; use alpha_commensurate with delta2 = -delta1"
        )
    if abs(abs(delta_phi) - math.pi) < 1e-12:
        return None
    radicand = 1.0 / (1.0 + math.cos(delta_phi)) - (2.0 * delta / gamma) / math.sin(delta_phi)
    if radicand <= 0.0:
        return None
    return gamma * math.sqrt(radicand)


def dressed_alphas(omega: float, delta: float, delta_phi: float) -> DressedAlphas:
    """Amplitudes of the two dressed states of the {|g>, |S>} block.

    A vanishing denominator marks a divergent amplitude and is returned as None.
    """
    if delta_phi == 0.0:
        return DressedAlphas(0j, 0j, degenerate=True)

    c = omega * (1.0 - cmath.exp(1j * delta_phi)) / math.sqrt(2.0)
    root = math.sqrt(delta * delta + abs(c) ** 2)
    sign = math.copysign(1.0, delta_phi)

    def amplitude(den: float, is_plus: bool) -> Optional[complex]:
        if c == 0 and is_plus:
            return 0j
        if abs(den) < 1e-15:
            return None
        return -c / den

    return DressedAlphas(
        plus=amplitude(delta + sign * root, True),
        minus=amplitude(delta - sign * root, False),
    )


# ==============================================================
#  Energies & Couplings
# ==============================================================
def dark_energies(delta_phi: float, delta: float, gamma: float) -> DressedEnergies:
    """Dressed-state energies E+ (dark) and E-, plus the T-bright coupling J_TB.

    At delta_phi = 0 the energies are taken as their limits. E+ and E- diverge at
    delta_phi = +/-pi while J_TB stays finite.
    """
    if abs(abs(delta_phi) - math.pi) < 1e-12:
        raise UndefinedRegimeError(f"E+ and E- diverge at delta_phi = {delta_phi:+.6f}")
    half_tan = math.tan(delta_phi / 2.0)
    e_plus = -delta + 0.5 * gamma * half_tan
    e_minus = -0.5 * gamma * half_tan

    if e_minus == 0.0:
        j_tb = 0.5j * gamma * math.sqrt(2.0) if delta == 0.0 else None
    else:
        j_tb = 0.5j * gamma * cmath.sqrt(2.0 + delta / e_minus)
    return DressedEnergies(e_plus, e_minus, j_tb)


def predicted_phase_line(phi_d: float, delta: float, gamma: float, tau: float) -> float:
    """Feedback phase at which the delayed system keeps the dark point found at phi_d."""
    energies = dark_energies(phi_d, delta, gamma)
    return wrap_phase(phi_d + (energies.e_plus - energies.e_minus) * tau)


def relaxation_rate(alpha: complex, gamma: float) -> float:
    return 2.0 * gamma / (1.0 + abs(alpha) ** 2)


# ==============================================================
#  Dark States
# ==============================================================
def dark_state_vector(alpha: complex, delta_phi: float) -> np.ndarray:
    singlet, _ = collective_states(delta_phi)
    psi = np.eye(ATOM_DIM, dtype=complex)[G] + alpha * singlet
    return psi / np.linalg.norm(psi)


def dimer_dark_state(omega: float, delta1: float, gamma: float) -> np.ndarray:
    """Normalized |gg> + alpha|S12> in the basis (|gg>, |eg>, |ge>, |ee>)."""
    alpha = alpha_commensurate(omega, delta1, gamma)
    psi = np.array([1.0, alpha / math.sqrt(2.0), -alpha / math.sqrt(2.0), 0.0], dtype=complex)
    return psi / np.linalg.norm(psi)


def predict_dark_state(p: SystemParams) -> DarkStatePrediction:
    """Full prediction for a parameter set; exists only for ideal chiral coupling without loss."""
    if p.eta < 1.0 or p.gamma_loss > 0.0:
        return DarkStatePrediction(exists=False)

    from .markov import build_v_atom_model

    alpha = alpha_general(p.omega, p.delta_phi, p.delta1, p.delta2, p.gamma)
    psi = dark_state_vector(alpha, p.delta_phi)
    h = build_v_atom_model(p).hamiltonian
    h_psi = h @ psi
    energy = np.vdot(psi, h_psi)
    residual = float(np.linalg.norm(h_psi - energy * psi))
    scale = max(1.0, float(np.linalg.norm(h)))
    exists = residual <= EIGEN_TOL * scale

    e_plus = e_minus = j_tb = omega_required = None
    if p.delta1 == p.delta2 and abs(abs(p.delta_phi) - math.pi) > 1e-12:
        e_plus, e_minus, j_tb = dark_energies(p.delta_phi, p.delta1, p.gamma)
        if p.delta_phi != 0.0:
            omega_required = dark_rabi(p.delta_phi, p.delta1, p.gamma)

    return DarkStatePrediction(
        exists=exists,
        alpha=alpha if exists else None,
        state=psi if exists else None,
        e_plus=e_plus,
        e_minus=e_minus,
        j_tb=j_tb,
        omega_required=omega_required,
    )


# ==============================================================
#  Dark Curves & Phases
# ==============================================================
def _rabi_mismatch(phi: float, omega: float, delta: float, gamma: float) -> float:
    return gamma * gamma / (1.0 + math.cos(phi)) - 2.0 * delta * gamma / math.sin(phi) - omega * omega


def dark_phases(omega: float, delta: float, gamma: float, samples: int = 4001) -> List[float]:
    """Sorted feedback phases at which the Markovian system is dark for a fixed Rabi frequency."""
    if delta == 0.0:
        phases = [0.0]
        if omega * omega > 0.5 * gamma * gamma:
            phi = math.acos(gamma * gamma / (omega * omega) - 1.0)
            if phi > 0.0:
                phases += [-phi, phi]
        return sorted(phases)

    eps = 1e-9
    roots: List[float] = []
    for lo, hi in ((-math.pi + eps, -eps), (eps, math.pi - eps)):
        grid = np.linspace(lo, hi, samples)
        values = np.array([_rabi_mismatch(x, omega, delta, gamma) for x in grid])
        for i in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]:
            roots.append(brentq(_rabi_mismatch, grid[i], grid[i + 1], args=(omega, delta, gamma), xtol=1e-14))
    logger.debug(f"dark_phases(omega={omega}, delta={delta}): {len(roots)} root(s)")
    return sorted(roots)


def dark_curve(delta: float, phases: Sequence[float], gamma: float = 1.0) -> List[Tuple[float, float, Optional[float]]]:
    """Rows (delta, delta_phi, omega_dark); omega_dark is None where no dark state exists."""
    rows = []
    for phi in phases:
        omega = None if phi == 0.0 else dark_rabi(phi, delta, gamma)
        rows.append((delta, float(phi), omega))
    return rows
