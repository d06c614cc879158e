"""Singlet/triplet population model.

Because the scattering channels commute with global spin rotations, the
singlet population after any of them depends only on the singlet and
triplet populations before. Each channel therefore reduces to a real 2x2
matrix acting on the column ``(p_singlet, p_triplet)``; index 0 is the
singlet and index 1 the triplet sector throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FidelityFormulaError
from .momentum import PointMass, TruncatedGaussian, average
from .scattering import coefficients


@dataclass(frozen=True)
class SectorMatrix:
    entries: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"sector matrix must be 2x2, got {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    def __matmul__(self, other: "SectorMatrix") -> "SectorMatrix":
        return SectorMatrix(self.entries @ other.entries, f"{self.label}.{other.label}")

    def __add__(self, other: "SectorMatrix") -> "SectorMatrix":
        return SectorMatrix(self.entries + other.entries, f"{self.label}+{other.label}")

    def __rmul__(self, c: float) -> "SectorMatrix":
        return SectorMatrix(c * self.entries, f"{c:g}*{self.label}")

    def __getitem__(self, idx):
        return self.entries[idx]

    @property
    def gain(self) -> float:
        """Triplet-to-singlet transfer, the (-, +) entry."""
        return float(self.entries[0, 1])

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def apply(self, populations) -> np.ndarray:
        return self.entries @ np.asarray(populations, dtype=float)


# --- closed-form entries, vectorized over kappa ----------------------------

def _t_entries(kappa, G):
    omega, a, b = coefficients(kappa, G)
    e = 1 - np.exp(2j * np.asarray(kappa, dtype=float))
    mm = abs(a) ** 2 * abs(1 - 4j * omega - omega**2 * e) ** 2
    mp = 4 * abs(a) ** 2 * omega**4 * abs(e) ** 2
    pp = (abs((a + 2 * b) + 3 * a * omega**2 * e) ** 2
          + 2 * abs((a - b) + 3 * a * omega**2 * e) ** 2) / 9
    return np.array([[mm, mp], [3 * mp, pp]], dtype=float)


def _r_entries(kappa, G):
    omega, a, b = coefficients(kappa, G)
    e = 1 - np.exp(2j * np.asarray(kappa, dtype=float))
    mm = abs(1 - a * (1 - 4j * omega) + a * omega**2 * e + 6j * a * omega**3 * e**2) ** 2
    mp = abs(a) ** 2 * omega**2 * abs(e) ** 2 * abs(1 - 2j * omega + 3 * omega**2 * e) ** 2
    pp = (abs(3 - (a + 2 * b) + 1j * omega * (2 * (a - b) + 3j * a * omega) * e) ** 2
          + 2 * abs((a - b) - 1j * omega * ((2 * a + b) + 3j * a * omega) * e) ** 2) / 9
    return np.array([[mm, mp], [3 * mp, pp]], dtype=float)


def _w(chi, G):
    omega, a, _ = coefficients(chi, G)
    e = 1 - np.exp(2j * np.asarray(chi, dtype=float))
    return abs(a) ** 2 * omega**2 * abs(e) ** 2 * (4 * omega**2 + abs(1 - 2j * omega + 3 * omega**2 * e) ** 2)


def _s_entries(chi, G):
    w = _w(chi, G)
    return np.array([[1 - 3 * w, w], [3 * w, 1 - w]], dtype=float)


def _m_entries(kappa, chi, G):
    """Protocol matrix entries; ``kappa`` may be an array, ``chi`` a scalar."""
    t = _t_entries(kappa, G)
    r = _r_entries(kappa, G)
    s = _s_entries(chi, G)
    return t + np.einsum("ij,jk...->ik...", s, r)


def _tag(x: float) -> str:
    return f"{x / math.pi:.6g}pi"


# --- public operations -------------------------------------------------------

def w_coefficient(chi: float, G: float) -> float:
    """Triplet-to-singlet transfer of one unmonitored scattering at momentum chi."""
    return float(_w(chi, G))


def v_coefficient(n: int, G: float) -> float:
    """Reflection probability of a resonant (kappa = n pi) ancilla off the triplet."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    o2 = (G / (n * math.pi)) ** 2
    return 8 * o2 * (1 + 8 * o2) / ((1 + 16 * o2) * (1 + 4 * o2))


def sector_T(kappa: float, G: float) -> SectorMatrix:
    return SectorMatrix(_t_entries(kappa, G), f"T(k={_tag(kappa)})")


def sector_R(kappa: float, G: float) -> SectorMatrix:
    return SectorMatrix(_r_entries(kappa, G), f"R(k={_tag(kappa)})")


def sector_S(chi: float, G: float) -> SectorMatrix:
    return SectorMatrix(_s_entries(chi, G), f"S(q={_tag(chi)})")


def sector_protocol(kappa: float, chi: float, G: float) -> SectorMatrix:
    return SectorMatrix(_m_entries(kappa, chi, G), f"M(k={_tag(kappa)},q={_tag(chi)})")


def sector_ideal(n: int, chi: float, G: float) -> SectorMatrix:
    g = w_coefficient(chi, G) * v_coefficient(n, G)
    return SectorMatrix([[1, g], [0, 1 - g]], f"M(n={n},q={_tag(chi)})")


def fixed_fidelity(m: SectorMatrix) -> float:
    """Singlet population of the stationary state of ``m``."""
    denom = 1 - m[0, 0] + m[0, 1]
    if not denom > 0:
        raise FidelityFormulaError(
            f"fidelity formula inapplicable (degenerate population dynamics) for {m.label}")
    return float(m[0, 1] / denom)


def detector_sector(n: int, chi: float, G: float, eta: float, variant: str) -> SectorMatrix:
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    W = w_coefficient(chi, G)
    V = v_coefficient(n, G)
    if variant == "I":
        g = eta * W * V
        entries = [[1, g], [0, 1 - g]]
    elif variant == "II":
        up = (1 - eta + eta * V) * W
        entries = [[1 - 3 * (1 - eta) * W, up], [3 * (1 - eta) * W, 1 - up]]
    else:
        raise ValueError(f"unknown detector variant {variant!r}")
    return SectorMatrix(entries, f"M_eta{variant}(n={n},eta={eta:g})")


def detector_fidelity_II(n: int, G: float, eta: float) -> float:
    V = v_coefficient(n, G)
    return ((1 - eta) + eta * V) / (4 * (1 - eta) + eta * V)


def averaged_protocol(distribution, chi: float, G: float, q_distribution=None,
                      order: int | None = None) -> SectorMatrix:
    """Protocol matrix averaged over the resonant-leg momentum distribution."""
    t = average(distribution, lambda k: np.moveaxis(_t_entries(k, G), -1, 0), order)
    r = average(distribution, lambda k: np.moveaxis(_r_entries(k, G), -1, 0), order)
    q_distribution = PointMass(chi) if q_distribution is None else q_distribution
    s = average(q_distribution, lambda q: np.moveaxis(_s_entries(q, G), -1, 0), order)
    return SectorMatrix(t + s @ r, f"M_avg({distribution})")


def averaged_sector(n: int, delta_kappa: float, chi: float, G: float,
                    order: int | None = None) -> tuple[SectorMatrix, float]:
    """Averaged matrix and stationary fidelity for a Gaussian of width
    ``delta_kappa`` centred at ``n pi``."""
    if delta_kappa < 0:
        raise ValueError("delta_kappa must be >= 0")
    if delta_kappa == 0:
        dist = PointMass(n * math.pi)
    else:
        dist = TruncatedGaussian(n * math.pi, delta_kappa)
    m = averaged_protocol(dist, chi, G, order=order)
    return m, fixed_fidelity(m)


def closed_form_curve(n: int, chi: float, G: float, F0: float, N: int) -> float:
    """Singlet fidelity after N ideal cycles from initial fidelity F0."""
    if not 0 <= F0 <= 1:
        raise ValueError("F0 must lie in [0, 1]")
    if N < 0:
        raise ValueError("N must be >= 0")
    g = w_coefficient(chi, G) * v_coefficient(n, G)
    return 1 - (1 - F0) * (1 - g) ** N
