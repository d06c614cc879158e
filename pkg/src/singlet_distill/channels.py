"""Channels on the AB pair induced by scattering an unpolarized ancilla.

Superoperators act on density matrices stacked column-major
(``vec(rho) = rho.reshape(-1, order="F")``). Under that convention the map
``rho -> A rho B^dagger`` has matrix ``kron(B.conj(), A)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import NotMixingError, NumericalFailure, ResonantShakingWarning
from .momentum import PointMass, average
from .scattering import PhysicalParams, scatter_operators
from .spin_algebra import I2, I4, check_density, singlet, singlet_fidelity

DIM = 4
MIXING_TOL = 1e-9
RESIDUAL_TOL = 1e-10
VEC_IDENTITY = I4.reshape(-1, order="F")


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(DIM, DIM, order="F")


@dataclass(frozen=True)
class Superoperator:
    """Linear map on 4x4 matrices stored as a 16x16 matrix."""

    matrix: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (DIM**2, DIM**2):
            raise ValueError(f"superoperator must be 16x16, got {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))

    __call__ = apply

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix @ other.matrix, f"{self.label}.{other.label}")

    def __add__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix + other.matrix, f"{self.label}+{other.label}")

    def __rmul__(self, c: float) -> "Superoperator":
        return Superoperator(c * self.matrix, f"{c:g}*{self.label}")

    def relabel(self, label: str) -> "Superoperator":
        return Superoperator(self.matrix, label)

    def choi(self) -> np.ndarray:
        """Choi matrix sum_kl |k><l| (x) E(|k><l|)."""
        s4 = self.matrix.reshape(DIM, DIM, DIM, DIM)  # [j, i, l, k] for out (i,j) <- in (k,l)
        return s4.transpose(3, 1, 2, 0).reshape(DIM**2, DIM**2)


def conjugation(A: np.ndarray, B: np.ndarray | None = None, label: str = "") -> Superoperator:
    """Superoperator of ``rho -> A rho B^dagger`` (``B`` defaults to ``A``)."""
    B = A if B is None else B
    return Superoperator(np.kron(np.conj(B), A), label)


def identity_channel() -> Superoperator:
    return Superoperator(np.eye(DIM**2), "id")


def super_projector(sign: str) -> Superoperator:
    """P_+ rho P_+ (``sign="+"``) or P_- rho P_- (``sign="-"``) on AB."""
    p = singlet() if sign == "-" else I4 - singlet()
    return conjugation(p, label=f"P{sign}")


def reduced_channel(op: np.ndarray, ancilla: np.ndarray | None = None, label: str = "") -> Superoperator:
    """``rho -> Tr_X{op (ancilla (x) rho) op^dagger}`` for an 8x8 ``op``.

    Built from Kraus operators <a|op|j> sqrt(p_j), with p_j, |j> the
    eigenpairs of the ancilla state (maximally mixed by default).
    """
    ancilla = I2 / 2 if ancilla is None else check_density(ancilla, dim=2)
    p, U = np.linalg.eigh(ancilla)
    blocks = np.asarray(op).reshape(2, 4, 2, 4)  # [a, AB_out, b, AB_in]
    m = np.zeros((DIM**2, DIM**2), dtype=complex)
    for j in range(2):
        if p[j] <= 0:
            continue
        # ancilla basis vector |j> in the computational basis
        col = np.tensordot(blocks, U[:, j], axes=(2, 0))  # [a, out, in]
        for a in range(2):
            K = col[a]
            m += p[j] * np.kron(K.conj(), K)
    return Superoperator(m, label)


@lru_cache(maxsize=4096)
def _transfer(kappa: float, G: float) -> tuple[Superoperator, Superoperator]:
    pair = scatter_operators((kappa, G))
    tag = f"k={kappa / math.pi:.6g}pi,G={G / math.pi:.6g}pi"
    return reduced_channel(pair.T, label=f"T({tag})"), reduced_channel(pair.R, label=f"R({tag})")


def _transfer_with(kappa: float, G: float, ancilla) -> tuple[Superoperator, Superoperator]:
    if ancilla is None:
        return _transfer(float(kappa), float(G))
    pair = scatter_operators((kappa, G))
    return reduced_channel(pair.T, ancilla, "T"), reduced_channel(pair.R, ancilla, "R")


def channel_T(params: PhysicalParams, kappa: float | None = None, ancilla=None) -> Superoperator:
    """Transmitted branch. ``kappa`` defaults to the resonant-leg momentum."""
    return _transfer_with(params.kappa if kappa is None else kappa, params.G, ancilla)[0]


def channel_R(params: PhysicalParams, kappa: float | None = None, ancilla=None) -> Superoperator:
    return _transfer_with(params.kappa if kappa is None else kappa, params.G, ancilla)[1]


def channel_S(params: PhysicalParams, kappa: float | None = None, ancilla=None) -> Superoperator:
    """Unmonitored scattering T + R. Use ``kappa=params.chi`` for the shaking step."""
    k = params.kappa if kappa is None else kappa
    T, R = _transfer_with(k, params.G, ancilla)
    return Superoperator(T.matrix + R.matrix, f"S(k={k / math.pi:.6g}pi)")


def _warn_if_resonant_shaking(chi: float):
    if abs(chi / math.pi - round(chi / math.pi)) < 1e-6:
        warnings.warn(
            f"chi = {chi / math.pi:.9g} pi is resonant: the shaking step cannot "
            "feed the singlet and the map is not mixing",
            ResonantShakingWarning,
            stacklevel=3,
        )


def protocol_map(params: PhysicalParams, shaking_ancilla=None) -> Superoperator:
    """One protocol cycle T_k + S_q R_k; the ideal map when kappa = n pi.

    ``shaking_ancilla`` replaces the unpolarized spin of the off-resonant
    ancilla (a polarized spin there makes the protocol fail).
    """
    _warn_if_resonant_shaking(params.chi)
    T = channel_T(params)
    R = channel_R(params)
    S_q = channel_S(params, kappa=params.chi, ancilla=shaking_ancilla)
    label = (f"M(k={params.kappa / math.pi:.6g}pi, chi={params.chi / math.pi:.6g}pi, "
             f"G={params.G / math.pi:.6g}pi)")
    return Superoperator(T.matrix + S_q.matrix @ R.matrix, label)


def detector_map(params: PhysicalParams, variant: str, eta: float | None = None) -> Superoperator:
    """Protocol with detectors of efficiency ``eta`` (default ``params.eta``).

    Variant ``"I"``: a missed resonant ancilla is ignored.
    Variant ``"II"``: a miss is treated as a reflection and the pair is shaken.
    """
    eta = params.eta if eta is None else eta
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    M = protocol_map(params)
    S_k = channel_S(params)
    if variant == "I":
        miss = S_k.matrix
    elif variant == "II":
        miss = channel_S(params, kappa=params.chi).matrix @ S_k.matrix
    else:
        raise ValueError(f"unknown detector variant {variant!r}")
    return Superoperator(eta * M.matrix + (1 - eta) * miss, f"M_eta{variant}(eta={eta:g})")


def averaged_map(distribution, params: PhysicalParams, q_distribution=None,
                 order: int | None = None) -> Superoperator:
    """Protocol map averaged over the resonant-leg momentum distribution.

    The shaking momentum is sharp at ``params.chi`` unless ``q_distribution``
    is given, in which case the two momenta fluctuate independently. Since the
    map is bilinear in the two legs, this is T_avg + S_avg R_avg.
    """
    q_distribution = PointMass(params.chi) if q_distribution is None else q_distribution
    G = params.G

    def legs(ks):
        return np.stack([np.stack([m.matrix for m in _transfer(float(k), G)]) for k in ks])

    TR = average(distribution, legs, order)
    S_q = average(q_distribution, lambda qs: np.stack(
        [sum(m.matrix for m in _transfer(float(q), G)) for q in qs]), order)
    return Superoperator(TR[0] + S_q @ TR[1], f"M_avg({distribution})")


# --- spectra and fixed points ----------------------------------------------

def superop_spectrum(s: Superoperator) -> np.ndarray:
    """All 16 eigenvalues, sorted by descending modulus."""
    try:
        ev = np.linalg.eigvals(s.matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver failed for {s.label}: {exc}") from exc
    return ev[np.argsort(-np.abs(ev), kind="stable")]


def spectral_moduli(s: Superoperator) -> tuple[float, float]:
    """(|lambda_0|, |lambda_1|)."""
    ev = superop_spectrum(s)
    return float(abs(ev[0])), float(abs(ev[1]))


def is_mixing(s: Superoperator, tol: float = MIXING_TOL) -> bool:
    """Eigenvalue 1 is simple and every other eigenvalue is strictly inside the unit disc."""
    return spectral_moduli(s)[1] < 1 - tol


def power_moduli(s: Superoperator, fixed: np.ndarray, steps: int = 400,
                 rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Power-iteration estimate of (|lambda_0|, |lambda_1|) for a trace-preserving map.

    ``fixed`` is the known fixed point; the eigenvalue-1 component is
    deflated using vec(1) as the left eigenvector, after which the growth
    rate of the iterates gives |lambda_1| (also for complex-conjugate pairs).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    A = s.matrix
    x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    lam0 = np.linalg.norm(A @ vec(fixed)) / np.linalg.norm(vec(fixed))
    deflated = A - np.outer(vec(fixed), VEC_IDENTITY.conj()) / np.trace(fixed)
    half = steps // 2
    log_norm = 0.0
    log_half = None
    for i in range(steps):
        x = deflated @ x
        nrm = np.linalg.norm(x)
        if nrm == 0:
            return float(lam0), 0.0
        log_norm += math.log(nrm)
        x /= nrm
        if i + 1 == half:
            log_half = log_norm
    return float(lam0), math.exp((log_norm - log_half) / (steps - half))


def fixed_point(s: Superoperator) -> np.ndarray:
    """Unique fixed state of a mixing trace-preserving map.

    Raises NotMixingError if eigenvalue 1 is degenerate and
    NumericalFailure if the recovered state is not a valid density matrix.
    """
    ev = superop_spectrum(s)
    if abs(ev[1]) >= 1 - MIXING_TOL:
        raise NotMixingError(
            f"{s.label}: not mixing (|lambda_1| = {abs(ev[1]):.12g})")
    # (S - 1) x = 0 with tr x = 1, solved in the least-squares sense
    A = np.vstack([s.matrix - np.eye(16), VEC_IDENTITY.conj()[None, :]])
    b = np.zeros(17, dtype=complex)
    b[-1] = 1
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    rho = unvec(x)
    rho = (rho + rho.conj().T) / 2
    residual = np.linalg.norm(s.apply(rho) - rho)
    lo = np.linalg.eigvalsh(rho).min()
    if residual >= RESIDUAL_TOL or lo < -RESIDUAL_TOL:
        raise NumericalFailure(
            f"{s.label}: fixed point rejected (residual {residual:.3e}, min eigenvalue {lo:.3e})")
    return rho


def iterate(s: Superoperator, rho0: np.ndarray, N: int) -> list[np.ndarray]:
    """[rho0, s(rho0), ..., s^N(rho0)]."""
    if N < 0:
        raise ValueError("N must be >= 0")
    v = vec(np.asarray(rho0, dtype=complex))
    out = [unvec(v)]
    for _ in range(N):
        v = s.matrix @ v
        out.append(unvec(v))
    return out


def fidelity_curve(s: Superoperator, N: int, rho0: np.ndarray | None = None) -> np.ndarray:
    """Singlet fidelity after 0..N cycles, from the maximally mixed state by default."""
    rho0 = I4 / 4 if rho0 is None else rho0
    return np.array([singlet_fidelity(r) for r in iterate(s, rho0, N)])


def average_fidelity(s: Superoperator, N: int) -> float:
    """Singlet weight of s^N(1/4), i.e. the fidelity averaged over input states."""
    return float(fidelity_curve(s, N)[-1])


# --- certification ----------------------------------------------------------

class CPTReport(NamedTuple):
    trace_defect: float
    hermiticity_defect: float
    choi_min_eigenvalue: float

    def passed(self, tp_tol: float = 1e-12, herm_tol: float = 1e-12, cp_tol: float = 1e-10) -> bool:
        return (self.trace_defect < tp_tol and self.hermiticity_defect < herm_tol
                and self.choi_min_eigenvalue >= -cp_tol)


def certify(s: Superoperator, rng: np.random.Generator | None = None, samples: int = 20) -> CPTReport:
    """Trace preservation, Hermiticity preservation and Choi positivity of ``s``.

    The first two are measured on random (non-Hermitian) inputs as well as
    through the adjoint action on the identity.
    """
    rng = np.random.default_rng(1234) if rng is None else rng
    adj_identity = unvec(s.matrix.conj().T @ VEC_IDENTITY)
    tp = float(np.linalg.norm(adj_identity - I4))
    herm = 0.0
    for _ in range(samples):
        X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        X /= np.linalg.norm(X)
        tp = max(tp, abs(np.trace(s.apply(X)) - np.trace(X)))
        herm = max(herm, float(np.linalg.norm(s.apply(X).conj().T - s.apply(X.conj().T))))
    J = s.choi()
    choi_min = float(np.linalg.eigvalsh((J + J.conj().T) / 2).min())
    return CPTReport(tp, herm, choi_min)
