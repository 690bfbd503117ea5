"""Atom coupled to a two-mode cavity, its adiabatic reduction, and cavity correlation functions."""
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import ParameterError
from .markov import (
    LindbladModel,
    _drive_and_detuning,
    propagate,
    steady_state,
    vectorize,
)
from .models import CavityConfig, SystemParams
from .operators import (
    ATOM_DIM,
    E1,
    atomic_operators,
    collective_states,
    dag,
    destroy,
    kron,
    partial_trace,
    projector,
    purity,
    trace_distance,
    wrap_phase,
)

logger = logging.getLogger(__name__)

ADIABATIC_RATIO_WARN = 0.2
CUTOFF_WARN = 1e-6
MODES = ("T", "S")


@dataclass
class AdiabaticReport:
    trace_distance: float
    gamma_eff: float
    gamma_fit: float
    relative_rate_error: float
    cutoff_population: float
    purity_full: float
    purity_adiabatic: float
    tolerance: float
    warnings: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.trace_distance <= self.tolerance and self.relative_rate_error <= 0.05

    def as_dict(self) -> dict:
        return {
            "trace_distance": self.trace_distance,
            "gamma_eff": self.gamma_eff,
            "gamma_fit": self.gamma_fit,
            "relative_rate_error": self.relative_rate_error,
            "cutoff_population": self.cutoff_population,
            "purity_full": self.purity_full,
            "purity_adiabatic": self.purity_adiabatic,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "warnings": list(self.warnings),
        }


def effective_coupling(c: CavityConfig) -> float:
    """Guided rate seen by the atom once the cavity is eliminated."""
    return (2.0 * c.g) ** 2 * c.kappa / (c.kappa + c.kappa_loss) ** 2


def loss_ratio(p: SystemParams, c: CavityConfig) -> float:
    return p.gamma_loss / effective_coupling(c) + c.kappa_loss / c.kappa


def _mode_operators(n_max: int, delta_phi: float, atom_dim: int = ATOM_DIM):
    a = destroy(n_max)
    eye_c = np.eye(n_max + 1, dtype=complex)
    eye_a = np.eye(atom_dim, dtype=complex)
    a1 = kron(eye_a, a, eye_c)
    a2 = kron(eye_a, eye_c, a)
    phase = np.exp(1j * delta_phi)
    a_t = (a1 + phase * a2) / math.sqrt(2.0)
    a_s = (a1 - phase * a2) / math.sqrt(2.0)
    return a1, a2, a_t, a_s


def _cavity_exchange(a_t: np.ndarray, a_s: np.ndarray, kappa: float) -> np.ndarray:
    term = dag(a_s) @ a_t
    return 0.5j * kappa * (term - dag(term))


def build_cavity_model(p: SystemParams, c: CavityConfig) -> LindbladModel:
    if p.eta < 1.0:
        raise ParameterError("the cavity model assumes perfectly chiral coupling (eta = 1)")
    n = c.n_max
    eye_c = np.eye(n + 1, dtype=complex)

    def atom(op):
        return kron(op, eye_c, eye_c)

    ops = atomic_operators(1.0, p.delta_phi)
    a1, a2, a_t, a_s = _mode_operators(n, p.delta_phi)
    s1, s2 = atom(ops.s1), atom(ops.s2)

    coupling = dag(s1) @ a1 + dag(s2) @ a2
    h = atom(_drive_and_detuning(p)) + c.g * (coupling + dag(coupling))
    h = h + _cavity_exchange(a_t, a_s, c.kappa)

    jumps = [(a_t, 2.0 * c.kappa)]
    labels = ["guided"]
    if c.kappa_loss > 0:
        jumps += [(a1, c.kappa_loss), (a2, c.kappa_loss)]
        labels += ["cavity_loss_1", "cavity_loss_2"]
    if p.gamma_loss > 0:
        jumps += [(s1, p.gamma_loss), (s2, p.gamma_loss)]
        labels += ["loss_1", "loss_2"]

    logger.debug(f"Built cavity model: dim={h.shape[0]}, g={c.g}, kappa={c.kappa}, n_max={n}")
    return LindbladModel(
        hamiltonian=h,
        jumps=jumps,
        labels=labels,
        delta_phi=p.delta_phi,
        kind="cavity",
        dims=(ATOM_DIM, n + 1, n + 1),
    )


def adiabatic_model(p: SystemParams, c: CavityConfig) -> LindbladModel:
    """Three-level master equation left after eliminating the cavity.

    Eliminating the cavity swaps the roles of |T> and |S>, so the effective
    feedback phase is delta_phi + pi.
    """
    ratio = c.g / c.kappa
    if ratio > ADIABATIC_RATIO_WARN:
        logger.warning(f"g/kappa = {ratio:.3f} exceeds {ADIABATIC_RATIO_WARN}; adiabatic elimination is unreliable")

    gamma = effective_coupling(c)
    shifted = wrap_phase(p.delta_phi + math.pi)
    ops = atomic_operators(1.0, shifted)
    singlet, triplet = collective_states(shifted)
    ground = np.eye(ATOM_DIM, dtype=complex)[0]
    s_t = np.outer(ground, triplet.conj())
    s_s = np.outer(ground, singlet.conj())

    exchange = dag(s_s) @ s_t - dag(s_t) @ s_s
    h = _drive_and_detuning(p) + 0.5j * gamma * exchange

    jumps = [(math.sqrt(2.0) * s_t, gamma)]
    labels = ["guided"]
    extra = p.gamma_loss + gamma * c.kappa_loss / c.kappa
    if extra > 0:
        jumps += [(ops.s1, extra), (ops.s2, extra)]
        labels += ["loss_1", "loss_2"]
    return LindbladModel(hamiltonian=h, jumps=jumps, labels=labels, delta_phi=shifted)


# ==============================================================
#  Correlations
# ==============================================================
def _check_modes(i: str, k: str, t: float) -> None:
    if i not in MODES or k not in MODES:
        raise ParameterError(f"mode labels must be 'T' or 'S', got ({i}, {k})")
    if t < 0:
        raise ParameterError(f"correlation time must be non-negative, got {t}")


def cavity_correlation(i: str, k: str, t: float, kappa: float, kappa_loss: float = 0.0) -> complex:
    """Vacuum correlation <0|a_i(t) a_k^dag(0)|0> of the empty two-mode cavity."""
    _check_modes(i, k, t)
    decay = math.exp(-0.5 * (kappa + kappa_loss) * t)
    x = 0.5 * kappa * t
    table = {
        ("T", "T"): 1.0 - x,
        ("S", "S"): 1.0 + x,
        ("T", "S"): -x,
        ("S", "T"): x,
    }
    return complex(table[(i, k)] * decay)


def regression_correlation(
    i: str, k: str, t: float, kappa: float, kappa_loss: float = 0.0, delta_phi: float = 0.0, n_max: int = 1
) -> complex:
    """Same correlation from the cavity-only Liouvillian via the quantum regression theorem."""
    _check_modes(i, k, t)
    a1, a2, a_t, a_s = _mode_operators(n_max, delta_phi, atom_dim=1)
    h = _cavity_exchange(a_t, a_s, kappa)
    jumps = [(a_t, 2.0 * kappa)]
    labels = ["guided"]
    if kappa_loss > 0:
        jumps += [(a1, kappa_loss), (a2, kappa_loss)]
        labels += ["cavity_loss_1", "cavity_loss_2"]
    model = LindbladModel(
        hamiltonian=h, jumps=jumps, labels=labels, delta_phi=delta_phi, kind="cavity-only", dims=(n_max + 1, n_max + 1)
    )

    ops = {"T": a_t, "S": a_s}
    vacuum = np.zeros(h.shape[0], dtype=complex)
    vacuum[0] = 1.0
    seeded = dag(ops[k]) @ projector(vacuum)
    evolved = propagate(vectorize(model), seeded, [t])[0]
    return complex(np.trace(ops[i] @ evolved))


# ==============================================================
#  Adiabatic Check
# ==============================================================
def cutoff_population(rho: np.ndarray, c: CavityConfig) -> float:
    """Largest population of the top Fock level over both cavity modes."""
    dims = (ATOM_DIM, c.n_max + 1, c.n_max + 1)
    return max(float(np.real(partial_trace(rho, dims, [mode])[-1, -1])) for mode in (1, 2))


def _fit_decay_rate(p: SystemParams, c: CavityConfig, gamma: float) -> float:
    """Decay rate of |e1> in the undriven full model, fitted on a log scale."""
    model = build_cavity_model(p.model_copy(update={"omega": 0.0}), c)
    dims = model.dims
    psi = kron(np.eye(ATOM_DIM)[E1], np.eye(c.n_max + 1)[0], np.eye(c.n_max + 1)[0])
    # skip the initial slip of a few cavity lifetimes
    t0 = 10.0 / (c.kappa + c.kappa_loss)
    times = t0 + np.linspace(0.0, 2.0 / gamma, 21)
    states = propagate(vectorize(model), projector(psi), times)
    pops = np.array([np.real(partial_trace(rho, dims, [0])[E1, E1]) for rho in states])
    slope, _ = np.polyfit(times, np.log(np.clip(pops, 1e-300, None)), 1)
    return float(-slope)


def verify_adiabatic_limit(p: SystemParams, c: CavityConfig, tolerance: float = 1e-2) -> AdiabaticReport:
    """Compare steady states of the full and reduced models and fit the effective decay rate."""
    warnings: List[str] = []
    ratio = c.g / c.kappa
    if ratio > ADIABATIC_RATIO_WARN:
        warnings.append(f"g/kappa = {ratio:.3f} exceeds {ADIABATIC_RATIO_WARN}")

    full = build_cavity_model(p, c)
    rho_full = steady_state(vectorize(full))
    atom_full = partial_trace(rho_full, full.dims, [0])

    reduced = adiabatic_model(p, c)
    rho_reduced = steady_state(vectorize(reduced))

    top = cutoff_population(rho_full, c)
    if top > CUTOFF_WARN:
        note = f"population {top:.2e} at Fock cutoff n_max={c.n_max}; increase n_max"
        logger.warning(note)
        warnings.append(note)

    gamma = effective_coupling(c)
    expected = gamma + p.gamma_loss + gamma * c.kappa_loss / c.kappa
    fitted = _fit_decay_rate(p, c, gamma)

    report = AdiabaticReport(
        trace_distance=trace_distance(atom_full, rho_reduced),
        gamma_eff=gamma,
        gamma_fit=fitted,
        relative_rate_error=abs(fitted - expected) / expected,
        cutoff_population=top,
        purity_full=purity(atom_full),
        purity_adiabatic=purity(rho_reduced),
        tolerance=tolerance,
        warnings=warnings,
    )
    logger.info(
        f"Adiabatic check g/kappa={ratio:.3f}: distance={report.trace_distance:.2e}, "
        f"gamma_fit={fitted:.4f} (expected {expected:.4f})"
    )
    return report
