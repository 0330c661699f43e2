"""Polytropic gas relations and the self-similar Bernoulli law.

Potential-flow quantities use the normalization in which state (0) is at rest
with density ``rho0`` and the Bernoulli constant is ``rho0**(gamma-1)/(gamma-1)``.
Under this normalization the sound speed satisfies ``c**2 = rho**(gamma-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class CavitationError(ValueError):
    """The Bernoulli law gives a negative base: the state lies past vacuum."""


@dataclass(frozen=True)
class GasParams:
    gamma: float = 1.4
    rho0: float = 1.0
    p0: Optional[float] = 1.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.rho0 > 0.0:
            raise ValueError(f"rho0 must be positive, got {self.rho0}")
        if self.p0 is not None and not self.p0 > 0.0:
            raise ValueError(f"p0 must be positive, got {self.p0}")

    @property
    def bernoulli_head(self) -> float:
        """``rho0**(gamma-1)``, the squared sound speed of state (0)."""
        return self.rho0 ** (self.gamma - 1.0)


def sonic_speed_euler(p: float, rho: float, gamma: float = 1.4) -> float:
    """Sound speed ``sqrt(gamma p / rho)`` of a polytropic gas."""
    if not (p > 0 and rho > 0):
        raise ValueError(f"pressure and density must be positive (p={p}, rho={rho})")
    return math.sqrt(gamma * p / rho)


def sonic_speed_selfsim(grad_phi_sq, phi, gas: GasParams):
    """Squared sound speed ``rho0^(g-1) - (g-1)(phi + |grad phi|^2/2)``.

    Works elementwise on arrays. Negative output means the query lies past
    vacuum; the caller decides what to do with it.
    """
    return gas.bernoulli_head - (gas.gamma - 1.0) * (phi + 0.5 * grad_phi_sq)


def bernoulli_density(grad_phi_sq, phi, gas: GasParams):
    """Density from the self-similar Bernoulli law, elementwise."""
    base = sonic_speed_selfsim(grad_phi_sq, phi, gas)
    if np.any(np.asarray(base) < 0):
        raise CavitationError("Bernoulli base is negative (vacuum reached)")
    return np.power(base, 1.0 / (gas.gamma - 1.0))


def critical_speed(phi, gas: GasParams):
    """Speed ``c_*`` at which the potential equation changes type."""
    rad = gas.bernoulli_head - (gas.gamma - 1.0) * np.asarray(phi, dtype=float)
    if np.any(rad < 0):
        raise ValueError("critical speed undefined: negative radicand")
    out = np.sqrt(2.0 / (gas.gamma + 1.0) * rad)
    return float(out) if out.ndim == 0 else out


def ellipticity_margin(grad_phi, phi, gas: GasParams):
    """``c_*(phi) - |grad phi|``; positive exactly where the equation is elliptic.

    ``grad_phi`` has its components on the last axis.
    """
    speed = np.linalg.norm(np.asarray(grad_phi, dtype=float), axis=-1)
    out = critical_speed(phi, gas) - speed
    return float(out) if np.ndim(out) == 0 else out
