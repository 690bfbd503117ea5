import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import expm_multiply

from .errors import DegenerateSteadyStateError, ParameterError
from .models import SystemParams
from .operators import (
    ATOM_DIM,
    E1,
    E2,
    G,
    atomic_operators,
    check_density_matrix,
    collective_states,
    dag,
    expm,
    kron,
    projector,
    purity,
)

logger = logging.getLogger(__name__)

KERNEL_TOL = 1e-8
RESIDUAL_WARN = 1e-10


# ==============================================================
#  Model Types
# ==============================================================
@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus weighted jump operators; the first jump is the guided channel."""

    hamiltonian: np.ndarray
    jumps: List[Tuple[np.ndarray, float]]
    labels: List[str]
    delta_phi: float
    kind: str = "v-atom"
    dims: Tuple[int, ...] = (ATOM_DIM,)

    def __post_init__(self):
        h = self.hamiltonian
        if np.max(np.abs(h - dag(h))) > 1e-12:
            raise ParameterError(f"{self.kind} Hamiltonian is not Hermitian")
        if len(self.labels) != len(self.jumps):
            raise ParameterError("every jump operator needs a label")
        for (op, rate), label in zip(self.jumps, self.labels):
            if rate < 0:
                raise ParameterError(f"jump '{label}' has negative rate {rate}")
            if op.shape != h.shape:
                raise ParameterError(f"jump '{label}' has shape {op.shape}, expected {h.shape}")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def jump(self, label: str) -> Tuple[np.ndarray, float]:
        return self.jumps[self.labels.index(label)]


@dataclass(frozen=True)
class Liouvillian:
    """Superoperator acting on column-major vec(rho)."""

    superop: np.ndarray
    dim: int

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.superop @ vec(rho), self.dim)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    warnings: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.states))


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


# ==============================================================
#  Model Builders
# ==============================================================
def _drive_and_detuning(p: SystemParams) -> np.ndarray:
    ops = atomic_operators(p.eta, p.delta_phi, p.phi_prime)
    # The drive phase is gauged into delta_phi for perfectly chiral coupling
    drive_phase = np.exp(1j * p.phi_prime) if p.eta < 1.0 else 1.0
    drive = ops.s1 + drive_phase * ops.s2
    h = -p.delta1 * projector(np.eye(ATOM_DIM)[E1]) - p.delta2 * projector(np.eye(ATOM_DIM)[E2])
    return h - 0.5 * p.omega * (drive + dag(drive))


def dipole_dipole(s_up: np.ndarray, s_down: np.ndarray, gamma: float, delta_phi: float) -> np.ndarray:
    """Coherent exchange i(gamma/2)(e^{i dphi} s_up^+ s_down - h.c.) mediated by the mirror."""
    term = np.exp(1j * delta_phi) * dag(s_up) @ s_down
    return 0.5j * gamma * (term - dag(term))


def build_v_atom_model(p: SystemParams) -> LindbladModel:
    ops = atomic_operators(p.eta, p.delta_phi, p.phi_prime)
    h = _drive_and_detuning(p) + dipole_dipole(ops.s_left, ops.s_right, p.gamma, p.delta_phi)

    jumps = [(ops.s_t, p.gamma)]
    labels = ["guided"]
    if p.gamma_loss > 0:
        jumps += [(ops.s1, p.gamma_loss), (ops.s2, p.gamma_loss)]
        labels += ["loss_1", "loss_2"]

    logger.debug(f"Built V-atom model: omega={p.omega}, delta_phi={p.delta_phi:.4f}, eta={p.eta}")
    return LindbladModel(hamiltonian=h, jumps=jumps, labels=labels, delta_phi=p.delta_phi)


def dimer_operators() -> Tuple[np.ndarray, np.ndarray]:
    """Lowering operators of two two-level atoms; basis index n1 + 2*n2."""
    s = np.array([[0, 1], [0, 0]], dtype=complex)
    eye = np.eye(2, dtype=complex)
    return kron(eye, s), kron(s, eye)


def build_dimer_model(
    omega: float, gamma: float, delta1: float, delta2: float, delta_phi: float
) -> LindbladModel:
    if omega < 0 or gamma <= 0:
        raise ParameterError(f"need omega >= 0 and gamma > 0, got omega={omega}, gamma={gamma}")
    s1, s2 = dimer_operators()
    h = -delta1 * dag(s1) @ s1 - delta2 * dag(s2) @ s2
    h = h - 0.5 * omega * (s1 + s2 + dag(s1) + dag(s2))
    h = h + dipole_dipole(s1, s2, gamma, delta_phi)

    collective = s1 + np.exp(1j * delta_phi) * s2
    return LindbladModel(
        hamiltonian=h,
        jumps=[(collective, gamma)],
        labels=["guided"],
        delta_phi=delta_phi,
        kind="dimer",
        dims=(2, 2),
    )


# ==============================================================
#  Liouvillian
# ==============================================================
def dissipator(jump: np.ndarray, rho: np.ndarray) -> np.ndarray:
    jd_j = dag(jump) @ jump
    return jump @ rho @ dag(jump) - 0.5 * (jd_j @ rho + rho @ jd_j)


def liouvillian_rhs(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """d rho/dt evaluated termwise, without building the superoperator."""
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for op, rate in model.jumps:
        if rate:
            out = out + rate * dissipator(op, rho)
    return out


def vectorize(model: LindbladModel) -> Liouvillian:
    d = model.dim
    eye = np.eye(d, dtype=complex)
    h = model.hamiltonian
    superop = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op, rate in model.jumps:
        if not rate:
            continue
        jd_j = dag(op) @ op
        superop += rate * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, jd_j) - 0.5 * np.kron(jd_j.T, eye))
    return Liouvillian(superop=superop, dim=d)


def steady_state(liouvillian: Liouvillian, tol: float = KERNEL_TOL) -> np.ndarray:
    """Unique steady state from the smallest right singular vector of the Liouvillian."""
    _, s, vh = np.linalg.svd(liouvillian.superop)
    kernel = int(np.sum(s <= tol))
    if kernel > 1:
        raise DegenerateSteadyStateError(kernel, tol)

    rho = unvec(vh[-1].conj(), liouvillian.dim)
    rho = 0.5 * (rho + dag(rho))
    rho = rho / np.trace(rho)

    residual = float(np.linalg.norm(liouvillian.superop @ vec(rho)))
    if residual > RESIDUAL_WARN:
        logger.warning(f"Steady-state residual {residual:.2e} exceeds {RESIDUAL_WARN:g}")
    logger.debug(f"Steady state found: smallest singular value {s[-1]:.2e}, residual {residual:.2e}")
    return rho


# ==============================================================
#  Time Evolution
# ==============================================================
def evolve(
    model: LindbladModel,
    rho0: np.ndarray,
    t_final: float,
    dt: float,
    method: str = "expm",
    sample_every: int = 1,
) -> Trajectory:
    """Fixed-step integration; samples every ``sample_every`` steps plus the final state."""
    if dt <= 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    if t_final < 0:
        raise ParameterError(f"t_final must be non-negative, got {t_final}")
    if sample_every < 1:
        raise ParameterError(f"sample_every must be >= 1, got {sample_every}")
    check_density_matrix(rho0, atol=1e-10)

    liou = vectorize(model)
    n_steps = int(round(t_final / dt))
    v = vec(rho0)

    if method == "expm":
        propagator = expm(liou.superop * dt)

        def advance(x):
            return propagator @ x

    elif method == "rk4":
        lmat = liou.superop

        def advance(x):
            k1 = lmat @ x
            k2 = lmat @ (x + 0.5 * dt * k1)
            k3 = lmat @ (x + 0.5 * dt * k2)
            k4 = lmat @ (x + dt * k3)
            return x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    else:
        raise ParameterError(f"unknown evolution method '{method}' (expected 'expm' or 'rk4')")

    times = [0.0]
    states = [unvec(v, liou.dim).copy()]
    for k in range(1, n_steps + 1):
        v = advance(v)
        if k % sample_every == 0 or k == n_steps:
            times.append(k * dt)
            states.append(unvec(v, liou.dim).copy())

    traj = Trajectory(times=np.asarray(times), states=np.asarray(states))
    drift = abs(np.trace(traj.states[-1]) - 1.0)
    if drift > 1e-8:
        note = f"trace drift {drift:.2e} after {n_steps} {method} steps; reduce dt"
        logger.warning(note)
        traj.warnings.append(note)
    return traj


def propagate(liouvillian: Liouvillian, rho0: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """Exact exp(L t) rho0 at each requested time."""
    v0 = vec(rho0)
    out = []
    for t in times:
        if t < 0:
            raise ParameterError(f"times must be non-negative, got {t}")
        out.append(unvec(expm_multiply(liouvillian.superop * t, v0), liouvillian.dim))
    return np.asarray(out)


def default_horizon(p: SystemParams) -> float:
    """50/gamma_eff when an analytic dark state predicts the relaxation rate, else 200/gamma."""
    from .dark_states import predict_dark_state, relaxation_rate

    prediction = predict_dark_state(p)
    if prediction.exists:
        return 50.0 / relaxation_rate(prediction.alpha, p.gamma)
    return 200.0 / p.gamma


# ==============================================================
#  Observables
# ==============================================================
def _ground_and_collective(model: LindbladModel) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if model.kind == "dimer":
        w = np.exp(-1j * model.delta_phi)
        ground = np.eye(4, dtype=complex)[0]
        eg, ge = np.eye(4, dtype=complex)[1], np.eye(4, dtype=complex)[2]
        singlet = (eg - w * ge) / math.sqrt(2.0)
        triplet = (eg + w * ge) / math.sqrt(2.0)
        return ground, singlet, triplet
    if model.kind != "v-atom":
        raise ParameterError(f"observables are defined for v-atom and dimer models, not '{model.kind}'")
    singlet, triplet = collective_states(model.delta_phi)
    return np.eye(ATOM_DIM, dtype=complex)[G], singlet, triplet


def observables(rho: np.ndarray, model: LindbladModel) -> Dict[str, float]:
    ground, singlet, triplet = _ground_and_collective(model)
    guided, rate = model.jumps[0]
    return {
        "purity": purity(rho),
        "pop_g": float(np.real(ground.conj() @ rho @ ground)),
        "pop_S": float(np.real(singlet.conj() @ rho @ singlet)),
        "pop_T": float(np.real(triplet.conj() @ rho @ triplet)),
        "emission_rate": float(rate * np.real(np.trace(dag(guided) @ guided @ rho))),
        "H_expectation": float(np.real(np.trace(model.hamiltonian @ rho))),
    }


def initial_ket(label: str, delta_phi: float = 0.0) -> np.ndarray:
    """Atomic ket for one of the labels g, e1, e2, S, T."""
    basis = np.eye(ATOM_DIM, dtype=complex)
    singlet, triplet = collective_states(delta_phi)
    kets = {"g": basis[G], "e1": basis[E1], "e2": basis[E2], "S": singlet, "T": triplet}
    if label not in kets:
        raise ParameterError(f"unknown initial state '{label}' (expected one of {', '.join(kets)})")
    return kets[label]


def initial_state(label: str, delta_phi: float = 0.0) -> np.ndarray:
    return projector(initial_ket(label, delta_phi))


def solve_steady(p: SystemParams, model: Optional[LindbladModel] = None) -> Tuple[np.ndarray, Dict[str, float]]:
    """Build, vectorize and solve; returns the steady state and its observables."""
    model = model or build_v_atom_model(p)
    rho = steady_state(vectorize(model))
    return rho, observables(rho, model)
