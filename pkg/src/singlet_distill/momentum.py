"""Momentum distributions of the incident ancillas and the quadrature used
to average maps over them.

Only positive momenta are kept: every distribution is truncated to
``kappa > 0`` and renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr

from .errors import InvalidParameterError

DEFAULT_ORDER = 201
REFINE_TOL = 1e-11
MAX_ORDER = 201 * 2**5
MASS_FLOOR = 1e-12
# half-width of the Gaussian quadrature window, in standard deviations
N_SIGMA = 6.0


@lru_cache(maxsize=16)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@dataclass(frozen=True)
class PointMass:
    kappa: float

    adaptive = False

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidParameterError(f"momentum must be positive, got {self.kappa}")

    def nodes(self, order: int = DEFAULT_ORDER):
        return np.array([float(self.kappa)]), np.array([1.0])


@dataclass(frozen=True)
class DiscreteMomenta:
    """Finite mixture of sharp momenta. Weights are renormalized."""

    kappas: Sequence[float]
    weights: Sequence[float]

    adaptive = False

    def __post_init__(self):
        k = np.asarray(self.kappas, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if k.shape != w.shape or k.ndim != 1 or k.size == 0:
            raise InvalidParameterError("kappas and weights must be equal-length 1-d sequences")
        if np.any(k <= 0):
            raise InvalidParameterError("momenta must be positive")
        if np.any(w < 0) or w.sum() < MASS_FLOOR:
            raise InvalidParameterError("weights must be nonnegative with positive total")

    def nodes(self, order: int = DEFAULT_ORDER):
        w = np.asarray(self.weights, dtype=float)
        return np.asarray(self.kappas, dtype=float), w / w.sum()


@dataclass(frozen=True)
class TruncatedGaussian:
    """Gaussian of width ``width`` centred at ``center``, restricted to kappa > 0."""

    center: float
    width: float

    adaptive = True

    def __post_init__(self):
        if not self.width > 0:
            raise InvalidParameterError(f"width must be positive, got {self.width}")
        if self.positive_mass() < MASS_FLOOR:
            raise InvalidParameterError(
                f"Gaussian(center={self.center}, width={self.width}) has almost no mass at kappa > 0"
            )

    def positive_mass(self) -> float:
        return float(ndtr(self.center / self.width))

    def window(self) -> tuple[float, float]:
        lo = max(0.0, self.center - N_SIGMA * self.width)
        return lo, self.center + N_SIGMA * self.width

    def nodes(self, order: int = DEFAULT_ORDER):
        lo, hi = self.window()
        x, w = _legendre(order)
        k = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        w = w * np.exp(-((k - self.center) ** 2) / (2 * self.width**2))
        return k, w / w.sum()


def gaussian_or_point(center: float, width: float):
    """``width == 0`` collapses to a point mass."""
    if width == 0:
        return PointMass(center)
    return TruncatedGaussian(center, width)


def average(dist, fn: Callable[[np.ndarray], np.ndarray], order: int | None = None,
            tol: float = REFINE_TOL) -> np.ndarray:
    """Average ``fn(kappa_nodes)`` over ``dist``.

    ``fn`` receives a 1-d array of nodes and must return an array whose
    leading axis runs over those nodes. For continuous distributions the
    Gauss-Legendre order starts at ``order`` (default 201) and is doubled until
    the entrywise change drops below ``tol``; passing ``order`` explicitly with
    ``tol=None`` evaluates a single rule.
    """
    order = DEFAULT_ORDER if order is None else order

    def rule(m):
        k, w = dist.nodes(m)
        vals = np.asarray(fn(k))
        return np.tensordot(w, vals, axes=(0, 0))

    result = rule(order)
    if not dist.adaptive or tol is None:
        return result
    while True:
        order *= 2
        if order > MAX_ORDER:
            raise ArithmeticError(f"quadrature did not converge to {tol:g} by order {order // 2}")
        finer = rule(order)
        if np.max(np.abs(finer - result)) < tol:
            return finer
        result = finer


def near_resonance_mass(dist, n: int, eps: float) -> float:
    """Probability mass of ``dist`` inside (n pi - eps, n pi + eps)."""
    kn = n * math.pi
    if isinstance(dist, TruncatedGaussian):
        lo = max(0.0, kn - eps)
        cdf = lambda x: ndtr((x - dist.center) / dist.width)
        return float((cdf(kn + eps) - cdf(lo)) / dist.positive_mass())
    k, w = dist.nodes()
    return float(w[np.abs(k - kn) < eps].sum())
