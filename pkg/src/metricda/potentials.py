"""Omega-potentials and the convex functions they induce.

A potential is an increasing map ``phi`` with ``phi(0) <= 1`` whose inverse
integrates to the convex function ``f_phi(x) = int_1^x phi^{-1}(z) dz``. The
f-divergence regularizer ``h(x) = int f_phi(x(s)) dmu(s)`` built from it drives
the dual averaging update, whose density is ``phi(eta * (U + nu))_+``.

Two families are provided:

* :class:`ExponentialPotential`, ``phi(z) = exp(z - 1)``, which yields the
  negative entropy ``f_phi(x) = x log x``.
* :class:`RhoNormPotential`, ``phi(z) = max(z, 0) ** (1 / (rho - 1))``, which
  yields ``f_phi(x) = (x**rho - 1) / rho``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import OutOfDomainError

__all__ = [
    "Potential",
    "ExponentialPotential",
    "RhoNormPotential",
    "parse_potential",
    "phi_eval",
    "phi_inverse",
    "f_phi_eval",
]


class Potential:
    """Base class. Subclasses implement the closed forms.

    Attributes
    ----------
    omega : float
        Limit of ``phi`` at minus infinity.
    upper_limit : float
        Right end of the domain of ``phi``.
    modulus : float
        Constant ``K`` in the strong-convexity modulus ``gamma(r) = K r^2 / 2``
        of the regularizer with respect to the L1 norm on densities.
    kappa, c_phi : float
        Growth certificate ``f_phi(x) <= c_phi * x ** (1 + kappa)`` for ``x >= 1``.
    """

    omega = 0.0
    upper_limit = math.inf

    # -- to be overridden -------------------------------------------------
    @property
    def name(self) -> str:
        raise NotImplementedError

    @property
    def modulus(self) -> float:
        raise NotImplementedError

    @property
    def kappa(self) -> float:
        raise NotImplementedError

    @property
    def c_phi(self) -> float:
        raise NotImplementedError

    def _phi(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _phi_prime(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _phi_inverse(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _f_phi(self, x: np.ndarray) -> np.ndarray:
        """Numeric fallback: integrate ``phi^{-1}`` from 1 to x."""
        out = np.empty_like(x)
        for i, xi in np.ndenumerate(x):
            val, _ = integrate.quad(
                lambda z: float(self._phi_inverse(np.asarray(z))), 1.0, float(xi),
                epsabs=1e-12, epsrel=1e-12, limit=200,
            )
            out[i] = val
        return out

    def _min_inverse_arg(self) -> float:
        return self.omega

    # -- public, validated ------------------------------------------------
    def phi(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z >= self.upper_limit):
            raise OutOfDomainError(f"phi argument must be < {self.upper_limit}")
        return self._phi(z)

    def phi_prime(self, z):
        return self._phi_prime(np.asarray(z, dtype=float))

    def phi_inverse(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < self._min_inverse_arg()) or np.any(np.isnan(y)):
            raise OutOfDomainError(f"phi_inverse argument out of range for {self.name}")
        return self._phi_inverse(y)

    def f_phi(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(np.isnan(x)):
            raise OutOfDomainError("f_phi requires x >= 0")
        return self._f_phi(x)

    def gamma(self, r):
        """Strong-convexity modulus ``K r^2 / 2``."""
        return 0.5 * self.modulus * np.asarray(r, dtype=float) ** 2

    def gamma_tilde(self, r):
        return 0.5 * self.modulus * np.asarray(r, dtype=float)

    def gamma_tilde_inverse(self, y):
        return 2.0 * np.asarray(y, dtype=float) / self.modulus


@dataclass(frozen=True)
class ExponentialPotential(Potential):
    """``phi(z) = exp(z - 1)``; entropy regularizer, modulus 1 (Pinsker)."""

    @property
    def name(self) -> str:
        return "exp"

    @property
    def modulus(self) -> float:
        return 1.0

    # x log x <= x^2 / e for x >= 1
    @property
    def kappa(self) -> float:
        return 1.0

    @property
    def c_phi(self) -> float:
        return 1.0 / math.e

    def _phi(self, z):
        return np.exp(z - 1.0)

    def _phi_prime(self, z):
        return np.exp(z - 1.0)

    def _min_inverse_arg(self) -> float:
        return np.nextafter(0.0, 1.0)

    def _phi_inverse(self, y):
        return 1.0 + np.log(y)

    def _f_phi(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


@dataclass(frozen=True)
class RhoNormPotential(Potential):
    """``phi(z) = max(z, 0) ** (1/(rho-1))`` with ``f_phi(x) = (x**rho - 1)/rho``.

    For ``1 < rho <= 2`` the regularizer is strongly convex on densities with
    respect to L1 with ``K = (rho - 1) * 2 ** (rho - 2)``.
    """

    rho: float = 1.5

    def __post_init__(self):
        if not self.rho > 1:
            raise ValueError(f"rho must exceed 1, got {self.rho}")

    @property
    def name(self) -> str:
        return f"rho:{self.rho:g}"

    @property
    def power(self) -> float:
        return 1.0 / (self.rho - 1.0)

    @property
    def modulus(self) -> float:
        if self.rho > 2:
            raise ValueError("no L1 strong-convexity modulus for rho > 2")
        return (self.rho - 1.0) * 2.0 ** (self.rho - 2.0)

    @property
    def kappa(self) -> float:
        return self.rho - 1.0

    @property
    def c_phi(self) -> float:
        return 1.0 / self.rho

    def _phi(self, z):
        return np.maximum(z, 0.0) ** self.power

    def _phi_prime(self, z):
        k = self.power
        return k * np.maximum(z, 0.0) ** (k - 1.0)

    def _phi_inverse(self, y):
        return y ** (self.rho - 1.0)

    def _f_phi(self, x):
        return (x**self.rho - 1.0) / self.rho


def parse_potential(spec: str) -> Potential:
    """Build a potential from ``"exp"`` or ``"rho:<rho>"``."""
    spec = spec.strip().lower()
    if spec in ("exp", "entropy"):
        return ExponentialPotential()
    if spec.startswith("rho:"):
        return RhoNormPotential(rho=float(spec[4:]))
    raise ValueError(f"unknown potential spec {spec!r}")


def phi_eval(p: Potential, z):
    return p.phi(z)


def phi_inverse(p: Potential, y):
    return p.phi_inverse(y)


def f_phi_eval(p: Potential, x):
    return p.f_phi(x)
