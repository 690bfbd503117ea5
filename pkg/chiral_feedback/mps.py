"""Time-bin matrix-product-state evolution of the atom with delayed mirror feedback.

The chain at rest is ``[atom, b_k, b_{k-1}, ..., b_{k-m+1}]``: the atom first, then the
m bins inside the feedback loop from newest to oldest. The orthogonality center sits on
the last site. Both boundary bonds are dangling purification indices with an identity
environment: the left one absorbs photons lost to non-guided modes, the right one
absorbs bins that have left the loop.
"""
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import DegenerateSteadyStateError, NumericalError, ParameterError
from .markov import _drive_and_detuning, build_v_atom_model, steady_state, vectorize
from .models import SystemParams, TimeBinConfig
from .operators import ATOM_DIM, G, atomic_operators, dag, destroy, expm, kron, purity
from .parallel import parallel_map

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


# ==============================================================
#  Types
# ==============================================================
@dataclass(frozen=True)
class TensorTrainState:
    """Site tensors are indexed (left bond, physical, right bond)."""

    tensors: Tuple[np.ndarray, ...]
    center: int
    step_index: int = 0
    emitted_total: float = 0.0
    lost_total: float = 0.0
    last_emitted: float = 0.0
    last_lost: float = 0.0
    discarded_weight: float = 0.0
    overflow_steps: Tuple[int, ...] = ()

    atom_site = 0

    @property
    def delay_steps(self) -> int:
        return len(self.tensors) - 1

    @property
    def bond_dims(self) -> List[int]:
        return [self.tensors[0].shape[0]] + [t.shape[2] for t in self.tensors]

    @property
    def max_bond_dim(self) -> int:
        return max(self.bond_dims)

    def norm(self) -> float:
        env = np.eye(self.tensors[-1].shape[2], dtype=complex)
        for a in reversed(self.tensors[1:]):
            env = _absorb_right(a, env)
        a0 = self.tensors[0]
        return float(np.sqrt(np.real(np.einsum("lax,xy,lay->", a0, env, a0.conj()))))


@dataclass(frozen=True)
class StepGate:
    """One-step propagator over atom (x) fresh bin (x) delayed bin [(x) loss 1 (x) loss 2]."""

    unitary: np.ndarray
    bin_dim: int
    with_loss: bool

    @property
    def kernel(self) -> np.ndarray:
        """Columns of the unitary with the fresh bin and loss modes in vacuum."""
        nb = self.bin_dim
        if self.with_loss:
            u = self.unitary.reshape((ATOM_DIM, nb, nb, nb, nb) * 2)
            return u[:, :, :, :, :, :, 0, :, 0, 0]
        u = self.unitary.reshape((ATOM_DIM, nb, nb) * 2)
        return u[:, :, :, :, 0, :]


@dataclass
class TimeBinRun:
    times: np.ndarray
    rho_atom: np.ndarray
    purity: np.ndarray
    flux_in_loop: np.ndarray
    flux_emitted: np.ndarray
    flux_lost: np.ndarray
    max_bond_dim: np.ndarray
    discarded_weight: np.ndarray
    final_state: TensorTrainState
    steady_at: Optional[float] = None
    window_steps: int = 1
    warnings: List[str] = field(default_factory=list)

    COLUMNS = (
        "t",
        "pop_g",
        "pop_e1",
        "pop_e2",
        "purity",
        "flux_in_loop",
        "flux_emitted",
        "flux_lost",
        "max_bond_dim",
        "discarded_weight",
    )

    def rows(self) -> List[List[float]]:
        pops = np.real(np.einsum("nii->ni", self.rho_atom))
        return [
            [
                float(self.times[i]),
                float(pops[i, 0]),
                float(pops[i, 1]),
                float(pops[i, 2]),
                float(self.purity[i]),
                float(self.flux_in_loop[i]),
                float(self.flux_emitted[i]),
                float(self.flux_lost[i]),
                float(self.max_bond_dim[i]),
                float(self.discarded_weight[i]),
            ]
            for i in range(len(self.times))
        ]


# ==============================================================
#  Linear Algebra Helpers
# ==============================================================
def truncated_svd(mat: np.ndarray, d_max: int, svd_tol: float):
    """SVD keeping the fewest singular values whose discarded weight is <= svd_tol, capped at d_max.

    Kept singular values are rescaled to unit norm. Returns (u, s, vh, discarded, overflow).
    """
    try:
        u, s, vh = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, s, vh = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")

    weights = s**2
    total = float(np.sum(weights))
    if not total > 0.0 or not math.isfinite(total):
        raise NumericalError(f"cannot truncate a tensor with norm^2 = {total}")

    tail = np.cumsum(weights[::-1])[::-1] / total
    keep = max(1, int(np.count_nonzero(tail > svd_tol)))
    overflow = False
    if keep > d_max:
        overflow = bool(tail[d_max] > 100.0 * svd_tol)
        keep = d_max
    discarded = float(tail[keep]) if keep < len(s) else 0.0

    s = s[:keep]
    s = s / np.linalg.norm(s)
    return u[:, :keep], s, vh[:keep], discarded, overflow


def _absorb_right(a: np.ndarray, env: np.ndarray) -> np.ndarray:
    return np.einsum("xsy,yz,wsz->xw", a, env, a.conj(), optimize=True)


class _Truncations:
    def __init__(self, cfg: TimeBinConfig):
        self.cfg = cfg
        self.discarded = 0.0
        self.overflow = False

    def svd(self, mat: np.ndarray):
        u, s, vh, discarded, overflow = truncated_svd(mat, self.cfg.d_max, self.cfg.svd_tol)
        self.discarded += discarded
        self.overflow = self.overflow or overflow
        return u, s, vh

    def swap(self, tensors: List[np.ndarray], j: int, center_right: bool) -> None:
        """Exchange the physical sites j and j+1, leaving the center on the side it moves to."""
        theta = np.tensordot(tensors[j], tensors[j + 1], axes=(2, 0))
        left, dj, dj1, right = theta.shape
        u, s, vh = self.svd(theta.transpose(0, 2, 1, 3).reshape(left * dj1, dj * right))
        if center_right:
            tensors[j] = u.reshape(left, dj1, -1)
            tensors[j + 1] = (s[:, None] * vh).reshape(-1, dj, right)
        else:
            tensors[j] = (u * s).reshape(left, dj1, -1)
            tensors[j + 1] = vh.reshape(-1, dj, right)


# ==============================================================
#  Engine
# ==============================================================
def check_step_size(p: SystemParams, cfg: TimeBinConfig) -> None:
    if cfg.max_step_product is None:
        return
    fastest = max(p.gamma, p.omega, abs(p.delta1), abs(p.delta2), p.gamma_loss)
    product = cfg.dt * fastest
    if product > cfg.max_step_product:
        raise ParameterError(
            f"dt * max rate = {product:.3g} exceeds {cfg.max_step_product}; reduce dt or raise max_step_product"
        )


def init_state(atom_state: Sequence[complex], cfg: TimeBinConfig, delay_steps: int) -> TensorTrainState:
    """Product of the atomic state and ``delay_steps`` vacuum bins."""
    psi = np.asarray(atom_state, dtype=complex).reshape(-1)
    if psi.shape != (ATOM_DIM,):
        raise ParameterError(f"atom state must have {ATOM_DIM} components, got {psi.shape[0]}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ParameterError(f"atom state must be normalized, got norm {np.linalg.norm(psi):.6g}")
    if delay_steps < 1:
        raise ParameterError(f"a time-bin run needs at least one delay step, got {delay_steps}")

    vacuum = np.zeros(cfg.fock_cutoff + 1, dtype=complex)
    vacuum[0] = 1.0
    tensors = [psi.reshape(1, ATOM_DIM, 1)] + [vacuum.reshape(1, -1, 1).copy() for _ in range(delay_steps)]
    return TensorTrainState(tensors=tuple(tensors), center=delay_steps)


def build_step_unitary(p: SystemParams, cfg: TimeBinConfig) -> StepGate:
    """exp(-i H_a dt + sqrt(gamma dt)(b_k^dag s_L + e^{i dphi} b_{k-m}^dag s_R - h.c.)), first order in dt.

    With gamma' > 0 two loss modes couple to s_1 and s_2 with amplitude sqrt(gamma' dt).
    """
    nb = cfg.fock_cutoff + 1
    with_loss = p.gamma_loss > 0
    n_modes = 4 if with_loss else 2
    ops = atomic_operators(p.eta, p.delta_phi, p.phi_prime)
    b = destroy(cfg.fock_cutoff)
    eye_b = np.eye(nb, dtype=complex)

    def on_atom(op):
        return kron(op, *([eye_b] * n_modes))

    def on_mode(op, index):
        factors = [np.eye(ATOM_DIM, dtype=complex)] + [eye_b] * n_modes
        factors[index + 1] = op
        return kron(*factors)

    emit = on_mode(dag(b), 0) @ on_atom(ops.s_left)
    emit = emit + np.exp(1j * p.delta_phi) * on_mode(dag(b), 1) @ on_atom(ops.s_right)
    generator = -1j * cfg.dt * on_atom(_drive_and_detuning(p)) + math.sqrt(p.gamma * cfg.dt) * (emit - dag(emit))
    if with_loss:
        lost = on_mode(dag(b), 2) @ on_atom(ops.s1) + on_mode(dag(b), 3) @ on_atom(ops.s2)
        generator = generator + math.sqrt(p.gamma_loss * cfg.dt) * (lost - dag(lost))

    return StepGate(unitary=expm(generator), bin_dim=nb, with_loss=with_loss)


def step(state: TensorTrainState, gate: StepGate, cfg: TimeBinConfig) -> TensorTrainState:
    """Advance one time bin: interact with the fresh and the delayed bin, then drop the delayed one."""
    tensors = list(state.tensors)
    m = len(tensors) - 1
    trunc = _Truncations(cfg)

    for j in range(m - 1, 0, -1):
        trunc.swap(tensors, j, center_right=False)

    theta = np.tensordot(tensors[0], tensors[1], axes=(2, 0))
    if gate.with_loss:
        theta = np.einsum("AFDXYad,ladr->lAFDXYr", gate.kernel, theta, optimize=True)
    else:
        theta = np.einsum("AFDad,ladr->lAFDr", gate.kernel, theta, optimize=True)

    weights = np.abs(theta) ** 2
    norm = float(weights.sum())
    levels = np.arange(gate.bin_dim)

    def occupation(axis: int) -> float:
        others = tuple(i for i in range(weights.ndim) if i != axis)
        return float(weights.sum(axis=others) @ levels) / norm

    n_emitted = occupation(3)
    n_lost = occupation(4) + occupation(5) if gate.with_loss else 0.0

    if gate.with_loss:
        left, a, f, d, x, y, right = theta.shape
        mat = theta.transpose(0, 4, 5, 1, 2, 3, 6).reshape(left * x * y, a * f * d * right)
        _, s, vh = trunc.svd(mat)
        theta = (s[:, None] * vh).reshape(-1, a, f, d, right)

    left, a, f, d, right = theta.shape
    u, s, vh = trunc.svd(theta.reshape(left * a, f * d * right))
    atom = u.reshape(left, a, -1)
    rest = (s[:, None] * vh).reshape(-1, f, d, right)
    chi = rest.shape[0]
    u, s, vh = trunc.svd(rest.reshape(chi * f, d * right))
    tensors = [atom, u.reshape(chi, f, -1), (s[:, None] * vh).reshape(-1, d, right)] + tensors[2:]

    for j in range(2, m + 1):
        trunc.swap(tensors, j, center_right=True)

    # the delayed bin has met the atom twice; fold it into the right purification bond
    delayed = tensors.pop()
    u, s, _ = trunc.svd(delayed.reshape(delayed.shape[0], -1))
    tensors[-1] = np.tensordot(tensors[-1], u * s, axes=(2, 0))

    k = state.step_index + 1
    overflow_steps = state.overflow_steps + ((k,) if trunc.overflow else ())
    return replace(
        state,
        tensors=tuple(tensors),
        center=m,
        step_index=k,
        emitted_total=state.emitted_total + n_emitted,
        lost_total=state.lost_total + n_lost,
        last_emitted=n_emitted,
        last_lost=n_lost,
        discarded_weight=state.discarded_weight + trunc.discarded,
        overflow_steps=overflow_steps,
    )


def reduced_atom(state: TensorTrainState) -> np.ndarray:
    env = np.eye(state.tensors[-1].shape[2], dtype=complex)
    for a in reversed(state.tensors[1:]):
        env = _absorb_right(a, env)
    a0 = state.tensors[0]
    rho = np.einsum("lax,xy,lby->ab", a0, env, a0.conj(), optimize=True)
    rho = 0.5 * (rho + dag(rho))
    return rho / np.trace(rho)


def photon_fluxes(state: TensorTrainState, cfg: TimeBinConfig) -> Dict[str, float]:
    """Photon fluxes per unit time: into the loop (freshest bin), out of the loop, and into lost modes."""
    env = np.eye(state.tensors[-1].shape[2], dtype=complex)
    for a in reversed(state.tensors[2:]):
        env = _absorb_right(a, env)
    a0, a1 = state.tensors[0], state.tensors[1]
    left = np.einsum("lax,lay->xy", a0, a0.conj())
    levels = np.arange(a1.shape[1])
    number = np.einsum("xy,xsz,s,ysw,zw->", left, a1, levels, a1.conj(), env, optimize=True)
    norm = np.einsum("xy,xsz,ysw,zw->", left, a1, a1.conj(), env, optimize=True)
    return {
        "flux_in_loop": float(np.real(number / norm)) / cfg.dt,
        "flux_emitted": state.last_emitted / cfg.dt,
        "flux_lost": state.last_lost / cfg.dt,
    }


def _steady_window(p: SystemParams, cfg: TimeBinConfig) -> int:
    return max(1, int(math.ceil(cfg.steady_window / p.gamma / cfg.dt)))


def run(
    p: SystemParams,
    cfg: TimeBinConfig,
    atom_state: Optional[Sequence[complex]] = None,
    state: Optional[TensorTrainState] = None,
) -> TimeBinRun:
    """Evolve until cfg.t_final (or until the steady-state detector fires with stop_at_steady)."""
    check_step_size(p, cfg)
    m = cfg.delay_steps(p.tau)
    if state is None:
        if atom_state is None:
            atom_state = np.eye(ATOM_DIM, dtype=complex)[G]
        state = init_state(atom_state, cfg, m)
    elif state.delay_steps != m:
        raise ParameterError(f"state holds {state.delay_steps} delay bins but tau/dt gives {m}")

    gate = build_step_unitary(p, cfg)
    window = _steady_window(p, cfg)
    t0 = state.step_index * cfg.dt
    logger.info(f"Time-bin run: m={m}, dt={cfg.dt}, steps={cfg.n_steps}, fock_cutoff={cfg.fock_cutoff}")

    times = [t0]
    rhos = [reduced_atom(state)]
    fluxes = [{"flux_in_loop": 0.0, "flux_emitted": 0.0, "flux_lost": 0.0}]
    bonds = [state.max_bond_dim]
    discarded = [state.discarded_weight]
    steady_at = None

    for _ in range(cfg.n_steps):
        state = step(state, gate, cfg)
        times.append(state.step_index * cfg.dt)
        rhos.append(reduced_atom(state))
        fluxes.append(photon_fluxes(state, cfg))
        bonds.append(state.max_bond_dim)
        discarded.append(state.discarded_weight)

        if steady_at is None and len(rhos) > window:
            recent = np.asarray(rhos[-window - 1 :])
            if np.max(np.abs(recent - recent[-1])) < cfg.steady_tol:
                steady_at = times[-1]
                logger.info(f"Steady state detected at t={steady_at:.3f}")
                if cfg.stop_at_steady:
                    break

    warnings = []
    if state.overflow_steps:
        note = (
            f"bond dimension capped at d_max={cfg.d_max} with discarded weight above "
            f"{100 * cfg.svd_tol:g} in {len(state.overflow_steps)} step(s), first at step {state.overflow_steps[0]}"
        )
        logger.warning(note)
        warnings.append(note)
    if steady_at is None:
        logger.warning(f"No steady state detected within t={times[-1]:.3f}")

    rho_arr = np.asarray(rhos)
    return TimeBinRun(
        times=np.asarray(times),
        rho_atom=rho_arr,
        purity=np.array([purity(r) for r in rho_arr]),
        flux_in_loop=np.array([f["flux_in_loop"] for f in fluxes]),
        flux_emitted=np.array([f["flux_emitted"] for f in fluxes]),
        flux_lost=np.array([f["flux_lost"] for f in fluxes]),
        max_bond_dim=np.asarray(bonds),
        discarded_weight=np.asarray(discarded),
        final_state=state,
        steady_at=steady_at,
        window_steps=window,
        warnings=warnings,
    )


def steady_summary(result: TimeBinRun) -> Dict[str, object]:
    """Final atomic state with purity and fluxes averaged over the detector window."""
    w = min(result.window_steps, len(result.times) - 1) or 1
    return {
        "steady": result.steady_at is not None,
        "steady_at": result.steady_at,
        "rho_atom": result.rho_atom[-1],
        "purity": purity(result.rho_atom[-1]),
        "flux_in_loop": float(np.mean(result.flux_in_loop[-w:])),
        "flux_emitted": float(np.mean(result.flux_emitted[-w:])),
        "flux_lost": float(np.mean(result.flux_lost[-w:])),
        "max_bond_dim": int(np.max(result.max_bond_dim)),
    }


# ==============================================================
#  Phase / Delay Scans
# ==============================================================
SCAN_COLUMNS = ("delta_phi", "tau", "purity", "flux_in_loop", "flux_emitted", "flux_lost", "max_bond_dim")


def markov_fluxes(p: SystemParams, rho: np.ndarray) -> Dict[str, float]:
    """Instantaneous-feedback counterparts of the time-bin fluxes."""
    ops = atomic_operators(p.eta, p.delta_phi, p.phi_prime)

    def expect(op):
        return float(np.real(np.trace(dag(op) @ op @ rho)))

    return {
        "flux_in_loop": p.gamma * expect(ops.s_left),
        "flux_emitted": p.gamma * expect(ops.s_t),
        "flux_lost": p.gamma_loss * (expect(ops.s1) + expect(ops.s2)),
    }


def steady_point(p: SystemParams, cfg: TimeBinConfig) -> List[float]:
    """Steady purity, fluxes and max bond dimension; tau = 0 is answered by the Lindblad solver.

    A degenerate Lindblad steady state gives a row of NaNs.
    """
    if p.tau == 0.0:
        try:
            rho = steady_state(vectorize(build_v_atom_model(p)))
        except DegenerateSteadyStateError as e:
            logger.warning(f"Degenerate steady state at {p.model_dump()}: {e}")
            return [math.nan] * 5
        fl = markov_fluxes(p, rho)
        return [purity(rho), fl["flux_in_loop"], fl["flux_emitted"], fl["flux_lost"], 1.0]
    summary = steady_summary(run(p, cfg))
    return [
        summary["purity"],
        summary["flux_in_loop"],
        summary["flux_emitted"],
        summary["flux_lost"],
        float(summary["max_bond_dim"]),
    ]


def _scan_point(task: Tuple[SystemParams, TimeBinConfig]) -> List[float]:
    p, cfg = task
    return [p.delta_phi, p.tau] + steady_point(p, cfg)


def purity_vs_phase_delay_scan(
    p: SystemParams,
    phases: Sequence[float],
    delays: Sequence[float],
    cfg: TimeBinConfig,
    threads: int = 1,
) -> List[List[float]]:
    """Steady-state purity and fluxes on a (tau, delta_phi) grid; tau = 0 uses the Lindblad solver."""
    tasks = []
    for tau in delays:
        if 0.0 < tau and cfg.delay_steps(tau) < 1:
            raise ParameterError(f"tau={tau} is shorter than one time bin (dt={cfg.dt})")
        for phi in phases:
            tasks.append((p.model_copy(update={"delta_phi": float(phi), "tau": float(tau)}), cfg))
    logger.info(f"Phase/delay scan over {len(phases)} phase(s) x {len(delays)} delay(s)")
    return parallel_map(_scan_point, tasks, threads)


def purity_maxima(table: Sequence[Sequence[float]], column: int = 2) -> Dict[float, List[float]]:
    """Local maxima of a column along delta_phi for every delay, treating the phase grid as periodic."""
    by_tau: Dict[float, List[Tuple[float, float]]] = {}
    for row in table:
        by_tau.setdefault(float(row[1]), []).append((float(row[0]), float(row[column])))

    maxima = {}
    for tau, points in by_tau.items():
        points.sort()
        # -pi and +pi are the same phase
        if len(points) > 2 and abs(points[-1][0] - points[0][0] - 2.0 * math.pi) < 1e-9:
            points = points[:-1]
        values = [v for _, v in points]
        n = len(values)
        found = []
        for i in range(n):
            prev, nxt = values[i - 1], values[(i + 1) % n]
            if values[i] > prev and values[i] >= nxt:
                found.append(points[i][0])
        maxima[tau] = found
    return maxima


# ==============================================================
#  Checkpoints
# ==============================================================
def save_checkpoint(path: str, state: TensorTrainState, params: SystemParams, cfg: TimeBinConfig) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "params": params.model_dump(),
        "time_bins": cfg.model_dump(),
        "step_index": state.step_index,
        "center": state.center,
        "emitted_total": state.emitted_total,
        "lost_total": state.lost_total,
        "last_emitted": state.last_emitted,
        "last_lost": state.last_lost,
        "discarded_weight": state.discarded_weight,
        "overflow_steps": list(state.overflow_steps),
        "n_tensors": len(state.tensors),
    }
    arrays = {f"site_{i}": t for i, t in enumerate(state.tensors)}
    with open(path, "wb") as f:
        np.savez(f, meta=np.array(json.dumps(meta)), **arrays)
    logger.info(f"Checkpoint written to {path} at step {state.step_index}")


def load_checkpoint(path: str) -> Tuple[TensorTrainState, SystemParams, TimeBinConfig]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ParameterError(f"unsupported checkpoint version {meta.get('version')} in {path}")
        tensors = tuple(data[f"site_{i}"] for i in range(meta["n_tensors"]))

    state = TensorTrainState(
        tensors=tensors,
        center=meta["center"],
        step_index=meta["step_index"],
        emitted_total=meta["emitted_total"],
        lost_total=meta["lost_total"],
        last_emitted=meta["last_emitted"],
        last_lost=meta["last_lost"],
        discarded_weight=meta["discarded_weight"],
        overflow_steps=tuple(meta["overflow_steps"]),
    )
    return state, SystemParams(**meta["params"]), TimeBinConfig(**meta["time_bins"])
