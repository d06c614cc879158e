"""Fixed operator algebra on the three-spin space X (ancilla) x A x B.

Basis convention: kets |s_X s_A s_B> with up = index 0 and X the
slowest-varying index, so an 8x8 operator is ``kron(x_part, a_part, b_part)``.
Two-qubit states on A x B use kets |s_A s_B> in the same ordering.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import InvalidStateError

SITES = ("X", "A", "B")
AXES = ("x", "y", "z")

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
I8 = np.eye(8, dtype=complex)

SINGLET_KET = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def pauli(axis: str, site: str) -> np.ndarray:
    """Pauli matrix ``axis`` on ``site``, identity on the other two spins."""
    if axis not in _PAULI:
        raise ValueError(f"unknown axis {axis!r}")
    if site not in SITES:
        raise ValueError(f"unknown site {site!r}")
    factors = [I2, I2, I2]
    factors[SITES.index(site)] = _PAULI[axis]
    return _frozen(np.kron(np.kron(factors[0], factors[1]), factors[2]))


def lift(op_ab: np.ndarray) -> np.ndarray:
    """Tensor a 4x4 operator on A x B with the identity on X."""
    op_ab = np.asarray(op_ab)
    if op_ab.shape != (4, 4):
        raise ValueError(f"expected a 4x4 operator, got shape {op_ab.shape}")
    return _frozen(np.kron(I2, op_ab))


def _dot(site1: str, site2: str) -> np.ndarray:
    return sum(pauli(a, site1) @ pauli(a, site2) for a in AXES)


def total_spin(axis: str) -> np.ndarray:
    """Generator sigma_a^X + sigma_a^A + sigma_a^B of global spin rotations."""
    return _frozen(sum(pauli(axis, s) for s in SITES))


class Projectors(NamedTuple):
    P_minus: np.ndarray
    P_plus: np.ndarray
    Q_32: np.ndarray
    Q_12: np.ndarray
    K_plus: np.ndarray
    K_minus: np.ndarray


@lru_cache(maxsize=1)
def build_projectors() -> Projectors:
    """Singlet/triplet projectors of AB, total-spin projectors of XAB and
    the singlet-triplet transition operators K_+ and K_-.

    K_+ maps the AB singlet into the triplet (P_+ K_+ P_- = K_+) and
    K_- = K_+^dagger goes the other way.
    """
    ab = _dot("A", "B")
    x_dot_ab = _dot("X", "A") + _dot("X", "B")
    p_minus = (I8 - ab) / 4
    p_plus = (3 * I8 + ab) / 4
    q_32 = 2 / 3 * p_plus + x_dot_ab / 6
    q_12 = p_minus + p_plus / 3 - x_dot_ab / 6

    sa = [pauli(a, "A") for a in AXES]
    sb = [pauli(a, "B") for a in AXES]
    cross = [
        sa[1] @ sb[2] - sa[2] @ sb[1],
        sa[2] @ sb[0] - sa[0] @ sb[2],
        sa[0] @ sb[1] - sa[1] @ sb[0],
    ]
    sigma_plus = [0.5 * ((a - b) + 1j * c) for a, b, c in zip(sa, sb, cross)]
    k_plus = sum(pauli(ax, "X") @ s for ax, s in zip(AXES, sigma_plus))
    k_minus = sum(pauli(ax, "X") @ s.conj().T for ax, s in zip(AXES, sigma_plus))
    return Projectors(*(_frozen(m) for m in (p_minus, p_plus, q_32, q_12, k_plus, k_minus)))


def partial_trace_X(op: np.ndarray) -> np.ndarray:
    """Trace out the ancilla from an 8x8 operator, leaving a 4x4 one on AB."""
    op = np.asarray(op)
    if op.shape != (8, 8):
        raise ValueError(f"expected an 8x8 operator, got shape {op.shape}")
    return np.trace(op.reshape(2, 4, 2, 4), axis1=0, axis2=2)


# --- two-qubit states -------------------------------------------------------

def singlet() -> np.ndarray:
    """|Psi-><Psi-| on AB."""
    return _frozen(np.outer(SINGLET_KET, SINGLET_KET.conj()))


def singlet_projector_ab() -> np.ndarray:
    return singlet()


def triplet_projector_ab() -> np.ndarray:
    return _frozen(I4 - singlet())


def maximally_mixed() -> np.ndarray:
    return _frozen(I4 / 4)


def product_state(a: int, b: int) -> np.ndarray:
    """|s_A s_B><s_A s_B| with 0 = up, 1 = down."""
    ket = np.zeros(4, dtype=complex)
    ket[2 * a + b] = 1
    return _frozen(np.outer(ket, ket))


def singlet_fidelity(rho: np.ndarray) -> float:
    """<Psi-| rho |Psi->, the singlet population of ``rho``."""
    return float(np.real(SINGLET_KET.conj() @ np.asarray(rho) @ SINGLET_KET))


def check_density(rho: np.ndarray, tol: float = 1e-9, dim: int | None = None) -> np.ndarray:
    """Return ``rho`` as an array, raising InvalidStateError unless it is
    Hermitian, unit-trace and positive semidefinite to within ``tol``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise InvalidStateError(f"expected a {dim}x{dim} density matrix, got {rho.shape}")
    herm = np.linalg.norm(rho - rho.conj().T)
    if herm > tol:
        raise InvalidStateError(f"not Hermitian (defect {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise InvalidStateError(f"trace is {tr.real:.12g}, not 1")
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lo < -tol:
        raise InvalidStateError(f"negative eigenvalue {lo:.3e}")
    return rho


def random_density(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> np.ndarray:
    """Random density matrix (Ginibre ensemble of the given rank)."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
