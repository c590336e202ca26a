"""Laboratory parameters and the dimensionless groups derived from them.

Lengths are in metres and temperatures are Celsius differences.  Only two
composite fluid constants are needed: ``c_rayleigh = g*alpha/(kappa*nu)``
and the Marangoni/Rayleigh coupling ``c_marangoni`` (Ma = c_marangoni*R/d**2).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import DomainError, ParameterError

# R = 2228 at dT = 6.4 C, d = 2 mm  ->  2228 / (6.4 * 0.002**3)
DEFAULT_C_RAYLEIGH = 2228.0 / (6.4 * 0.002**3)
DEFAULT_C_MARANGONI = 9.2e-8


@dataclass(frozen=True)
class PhysicalConfig:
    a: float = 0.01
    delta: float = 0.02
    d: float = 0.002
    dT: float = 6.4
    dT_h: float = 6.4
    biot: float = 1.25
    c_rayleigh: float = DEFAULT_C_RAYLEIGH
    c_marangoni: float = DEFAULT_C_MARANGONI
    b_hydro: float = 0.0

    def validate(self) -> None:
        for name in ("a", "delta", "d", "dT", "c_rayleigh"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(name, f"must be positive and finite, got {value!r}")
        for name in ("dT_h", "biot", "c_marangoni", "b_hydro"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(name, f"must be non-negative and finite, got {value!r}")

    def with_dT(self, dT: float, coupled: bool = False) -> PhysicalConfig:
        """Copy with a new ``dT``; ``coupled`` also sets ``dT_h = dT``."""
        if coupled:
            return replace(self, dT=dT, dT_h=dT)
        return replace(self, dT=dT)

    def with_delta_star(self, delta_star: float) -> PhysicalConfig:
        """Copy with the depth chosen so that ``delta/d == delta_star``."""
        if not delta_star > 0:
            raise ParameterError("delta_star", f"must be positive, got {delta_star!r}")
        return replace(self, d=self.delta / delta_star)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DimensionlessGroup:
    R: float
    Ma: float
    B: float
    b: float
    a_star: float
    delta_star: float
    A: float
    ratio_h: float

    def G(self, r):
        """Metric coefficient ``1/rho`` at mapped radius ``r`` (no range check)."""
        return 2.0 / (2.0 * self.a_star + self.delta_star * (1.0 + np.asarray(r, dtype=float)))

    def rho(self, r):
        """Dimensionless physical radius at mapped radius ``r``."""
        return self.a_star + 0.5 * self.delta_star * (np.asarray(r, dtype=float) + 1.0)

    def to_dict(self) -> dict:
        return asdict(self)


def to_dimensionless(cfg: PhysicalConfig) -> DimensionlessGroup:
    cfg.validate()
    R = cfg.c_rayleigh * cfg.dT * cfg.d**3
    delta_star = cfg.delta / cfg.d
    return DimensionlessGroup(
        R=R,
        Ma=cfg.c_marangoni * R / cfg.d**2,
        B=cfg.biot,
        b=cfg.b_hydro,
        a_star=cfg.a / cfg.d,
        delta_star=delta_star,
        A=2.0 / delta_star,
        ratio_h=cfg.dT_h / cfg.dT,
    )


def metric_coefficient(group: DimensionlessGroup, r):
    """G(r) = 2d/(2a + delta + r*delta) on the mapped radius ``r`` in [-1, 1]."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < -1.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise DomainError(f"mapped radius must lie in [-1, 1], got {r!r}")
    out = group.G(arr)
    return float(out) if out.ndim == 0 else out
