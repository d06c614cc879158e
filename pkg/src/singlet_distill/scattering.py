"""Transmission and reflection operators for an ancilla scattered off the
two delta-coupled spins A and B.

Everything is in dimensionless form: ``kappa = k d`` for the incident
momentum, ``G = m g d / hbar**2`` for the coupling, hence ``Omega = G / kappa``.
The closed forms are regular at resonances (kappa = n pi), so no special
casing is done there; :func:`resonant_operators` exists as an independent
construction to check against. Momenta below about ``1e-3 * pi`` are
accepted but have not been validated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError
from .spin_algebra import I8, build_projectors, check_density


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionless problem parameters.

    ``kappa`` is the momentum of the resonant leg (ideally ``n * pi``), ``chi``
    the off-resonant shaking momentum, ``delta_kappa`` the width of the
    momentum distribution of the resonant leg and ``eta`` the detector
    efficiency.
    """

    kappa: float = math.pi
    chi: float = 2.5 * math.pi
    G: float = math.pi
    n: int = 1
    delta_kappa: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidParameterError(f"kappa must be positive, got {self.kappa}")
        if not self.chi > 0:
            raise InvalidParameterError(f"chi must be positive, got {self.chi}")
        if self.G == 0:
            raise InvalidParameterError("G must be nonzero")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameterError(f"n must be a positive integer, got {self.n}")
        if self.delta_kappa < 0:
            raise InvalidParameterError(f"delta_kappa must be >= 0, got {self.delta_kappa}")
        if not 0 <= self.eta <= 1:
            raise InvalidParameterError(f"eta must lie in [0, 1], got {self.eta}")

    @classmethod
    def resonant(cls, n: int = 1, **kw) -> "PhysicalParams":
        """Parameters with the resonant leg tuned exactly to ``kappa = n pi``."""
        return cls(kappa=n * math.pi, n=n, **kw)

    def with_(self, **kw) -> "PhysicalParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class ScatterPair:
    T: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    kappa: float = math.nan


def coefficients(kappa, G):
    """Return ``(omega, alpha, beta)`` at momentum ``kappa``.

    Works elementwise on arrays. ``G = 0`` gives free propagation
    (``alpha = beta = 1``).
    """
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa <= 0):
        raise InvalidParameterError("the ancilla is injected from the left: kappa must be > 0")
    omega = G / kappa
    e = 1 - np.exp(2j * kappa)
    alpha = 1 / ((1 - 4j * omega) + 2 * omega**2 * (1 - 6j * omega) * e + 9 * omega**4 * e**2)
    beta = 1 / ((1 + 2j * omega) - omega**2 * e)
    if omega.ndim == 0:
        return float(omega), complex(alpha), complex(beta)
    return omega, alpha, beta


def _operators(kappa: float, G: float) -> tuple[np.ndarray, np.ndarray]:
    pr = build_projectors()
    omega, alpha, beta = coefficients(kappa, G)
    e = 1 - np.exp(2j * kappa)
    k_sum = pr.K_plus + pr.K_minus
    q12p = pr.Q_12 @ pr.P_plus
    q32p = pr.Q_32 @ pr.P_plus
    bracket = (
        alpha * (1 - 4j * omega) * pr.P_minus
        + alpha * q12p + beta * q32p
        - alpha * omega**2 * e * (pr.P_minus - 3 * q12p - pr.K_plus + pr.K_minus)
    )
    T = np.exp(1j * kappa) * bracket
    # the bracket multiplies (K_+ + K_-) from the left; the other order breaks unitarity
    R = (
        bracket - I8
        - 1j * omega * e * (
            6 * alpha * omega**2 * e * pr.P_minus
            + 2 * alpha * q12p - beta * q32p
            + 0.5 * alpha * ((1 + 3 * omega**2 * e) * I8 - 4j * omega * pr.P_plus) @ k_sum
        )
    )
    return T, R


def _kappa_G(params) -> tuple[float, float]:
    # a bare (kappa, G) pair is accepted so that the free limit G = 0 stays reachable
    if isinstance(params, PhysicalParams):
        return params.kappa, params.G
    kappa, G = params
    return float(kappa), float(G)


def scatter_operators(params: PhysicalParams | tuple[float, float]) -> ScatterPair:
    """8x8 transmission and reflection operators at the resonant-leg momentum.

    ``params`` is a :class:`PhysicalParams` or a bare ``(kappa, G)`` pair.
    """
    kappa, G = _kappa_G(params)
    T, R = _operators(kappa, G)
    T.flags.writeable = False
    R.flags.writeable = False
    return ScatterPair(T, R, kappa)


def resonant_operators(n: int, G: float) -> ScatterPair:
    """Simplified closed forms valid only at ``kappa = n pi``."""
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n}")
    if G == 0:
        raise InvalidParameterError("G must be nonzero")
    pr = build_projectors()
    omega = G / (n * math.pi)
    a = 1 / (1 - 4j * omega)
    b = 1 / (1 + 2j * omega)
    T = (-1) ** n * (pr.P_minus + (a * pr.Q_12 + b * pr.Q_32) @ pr.P_plus)
    R = (4j * omega * a * pr.Q_12 - 2j * omega * b * pr.Q_32) @ pr.P_plus
    T.flags.writeable = False
    R.flags.writeable = False
    return ScatterPair(T, R, n * math.pi)


def transmission_probability(params: PhysicalParams, spin_X, rho_AB) -> float:
    """Probability that the ancilla, prepared in ``spin_X``, ends up on the right."""
    spin_X = check_density(spin_X, dim=2)
    rho_AB = check_density(rho_AB, dim=4)
    T = scatter_operators(params).T
    return float(np.real(np.trace(T @ np.kron(spin_X, rho_AB) @ T.conj().T)))


def reflection_probability(params: PhysicalParams, spin_X, rho_AB) -> float:
    spin_X = check_density(spin_X, dim=2)
    rho_AB = check_density(rho_AB, dim=4)
    R = scatter_operators(params).R
    return float(np.real(np.trace(R @ np.kron(spin_X, rho_AB) @ R.conj().T)))


def unitarity_defect(pair: ScatterPair) -> float:
    """Frobenius norm of T^dag T + R^dag R - 1."""
    T, R = pair.T, pair.R
    return float(np.linalg.norm(T.conj().T @ T + R.conj().T @ R - I8))
