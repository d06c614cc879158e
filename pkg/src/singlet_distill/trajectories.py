"""Monte Carlo runs of the feedback protocol, one ancilla outcome at a time.

Each trajectory i of an ensemble seeded with ``seed`` draws from its own
PCG64 stream spawned from ``SeedSequence(seed, spawn_key=(i,))``, so a
trajectory is reproducible on its own and ensembles do not depend on how
the work is split. Trajectories are propagated as a batch; all random
numbers of a trajectory are drawn up front (two uniforms per cycle: the
first decides a detector miss, the second transmission vs reflection).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channels import (VEC_IDENTITY, Superoperator, channel_R, channel_S, channel_T,
                       detector_map, protocol_map, unvec, vec)
from .scattering import PhysicalParams
from .spin_algebra import SINGLET_KET, I4, check_density

BRANCH_FLOOR = 1e-14
VARIANTS = ("ideal", "detectorI", "detectorII")
_VEC_SINGLET = vec(np.outer(SINGLET_KET, SINGLET_KET.conj()))


class Outcome(enum.IntEnum):
    TRANSMITTED = 0
    REFLECTED = 1  # reflected, then shaken off resonance
    MISSED = 2


@dataclass(frozen=True)
class TrajectoryConfig:
    params: PhysicalParams = field(default_factory=PhysicalParams)
    N: int = 30
    variant: str = "ideal"
    seed: int = 0
    rho0: np.ndarray = field(default_factory=lambda: I4 / 4, repr=False)
    shaking_ancilla: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("N must be >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        check_density(self.rho0, dim=4)

    @property
    def eta(self) -> float:
        return 1.0 if self.variant == "ideal" else self.params.eta


class TrajectoryRecord(NamedTuple):
    outcomes: tuple[Outcome, ...]
    fidelities: np.ndarray
    final_state: np.ndarray


class EnsembleResult(NamedTuple):
    mean_fidelity: np.ndarray
    stderr_fidelity: np.ndarray
    mean_state: np.ndarray
    fidelities: np.ndarray  # (n_traj, N + 1)
    final_states: np.ndarray  # (n_traj, 4, 4)


class _Maps(NamedTuple):
    T: np.ndarray
    shaken_R: np.ndarray
    miss: np.ndarray | None
    channel: np.ndarray


def _maps(config: TrajectoryConfig) -> _Maps:
    p = config.params
    T = channel_T(p).matrix
    R = channel_R(p).matrix
    S_q = channel_S(p, kappa=p.chi, ancilla=config.shaking_ancilla).matrix
    miss = None
    if config.variant == "detectorI":
        miss = channel_S(p).matrix
    elif config.variant == "detectorII":
        miss = S_q @ channel_S(p).matrix
    eta = config.eta
    channel = T + S_q @ R
    if miss is not None:
        channel = eta * channel + (1 - eta) * miss
    return _Maps(T, S_q @ R, miss, channel)


def cycle_channel(config: TrajectoryConfig) -> Superoperator:
    """The deterministic map one averaged cycle of ``config`` implements."""
    if config.shaking_ancilla is None:
        if config.variant == "ideal":
            return protocol_map(config.params)
        return detector_map(config.params, "I" if config.variant == "detectorI" else "II",
                            eta=config.eta)
    return Superoperator(_maps(config).channel, "M(shaking ancilla)")


def branches(config: TrajectoryConfig, rho: np.ndarray) -> list[tuple[Outcome, float, np.ndarray]]:
    """All outcomes of one cycle from ``rho`` with their probabilities and
    normalized post-outcome states."""
    m = _maps(config)
    eta = config.eta
    v = vec(rho)
    t = m.T @ v
    r = m.shaken_R @ v
    p_t = float(np.real(VEC_IDENTITY @ t))
    out = []
    if p_t >= BRANCH_FLOOR:
        out.append((Outcome.TRANSMITTED, eta * p_t, unvec(t / p_t)))
    if 1 - p_t >= BRANCH_FLOOR:
        out.append((Outcome.REFLECTED, eta * (1 - p_t), unvec(r / (1 - p_t))))
    if m.miss is not None and eta < 1:
        s = m.miss @ v
        out.append((Outcome.MISSED, 1 - eta, unvec(s / np.real(VEC_IDENTITY @ s))))
    return out


def _uniforms(seed: int, indices: np.ndarray, N: int) -> np.ndarray:
    u = np.empty((len(indices), N, 2))
    for row, i in enumerate(indices):
        ss = np.random.SeedSequence(seed, spawn_key=(int(i),))
        u[row] = np.random.Generator(np.random.PCG64(ss)).random((N, 2))
    return u


def _propagate(config: TrajectoryConfig, indices: np.ndarray):
    m = _maps(config)
    eta = config.eta
    N = config.N
    u = _uniforms(config.seed, indices, N)
    B = len(indices)
    V = np.tile(vec(np.asarray(config.rho0, dtype=complex)), (B, 1))
    fid = np.empty((B, N + 1))
    outcomes = np.empty((B, N), dtype=np.int8)
    fid[:, 0] = np.real(V @ _VEC_SINGLET.conj())
    for c in range(N):
        t = V @ m.T.T
        p_t = np.real(t @ VEC_IDENTITY)
        missed = u[:, c, 0] >= eta
        transmitted = ~missed & ((u[:, c, 1] < p_t) | (1 - p_t < BRANCH_FLOOR)) & (p_t >= BRANCH_FLOOR)
        reflected = ~missed & ~transmitted
        new = np.empty_like(V)
        new[transmitted] = t[transmitted]
        new[reflected] = V[reflected] @ m.shaken_R.T
        if missed.any():
            new[missed] = V[missed] @ m.miss.T
        V = new / np.real(new @ VEC_IDENTITY)[:, None]
        outcomes[:, c] = np.where(missed, Outcome.MISSED,
                                  np.where(transmitted, Outcome.TRANSMITTED, Outcome.REFLECTED))
        fid[:, c + 1] = np.real(V @ _VEC_SINGLET.conj())
    states = V.reshape(B, 4, 4).transpose(0, 2, 1)  # undo column-major stacking
    return outcomes, fid, states


def run_trajectory(config: TrajectoryConfig, index: int = 0) -> TrajectoryRecord:
    """Trajectory ``index`` of the ensemble defined by ``config``."""
    outcomes, fid, states = _propagate(config, np.array([index]))
    return TrajectoryRecord(tuple(Outcome(o) for o in outcomes[0]), fid[0], states[0])


def ensemble_average(config: TrajectoryConfig, n_traj: int, batch: int = 4096) -> EnsembleResult:
    """Mean singlet fidelity per cycle (with standard errors) over ``n_traj``
    trajectories, together with the mean final state."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    fids, finals = [], []
    for start in range(0, n_traj, batch):
        idx = np.arange(start, min(start + batch, n_traj))
        _, f, s = _propagate(config, idx)
        fids.append(f)
        finals.append(s)
    fid = np.concatenate(fids)
    final = np.concatenate(finals)
    se = fid.std(axis=0, ddof=1) / np.sqrt(n_traj) if n_traj > 1 else np.zeros(fid.shape[1])
    return EnsembleResult(fid.mean(axis=0), se, final.mean(axis=0), fid, final)


def state_standard_error(final_states: np.ndarray) -> float:
    """Standard error of the mean state in Frobenius norm.

    Bounds the standard error of the trace distance between the sample mean
    and its expectation, since trace distance <= Frobenius norm for 4x4.
    """
    n = len(final_states)
    dev = final_states - final_states.mean(axis=0)
    return float(np.sqrt(np.sum(np.abs(dev) ** 2) / (n * (n - 1))))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    d = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2)).sum())


def tail_fraction(fidelities: np.ndarray, threshold: float = 0.9) -> np.ndarray:
    """Per-cycle fraction of trajectories with singlet fidelity below ``threshold``."""
    return (np.asarray(fidelities) < threshold).mean(axis=0)
