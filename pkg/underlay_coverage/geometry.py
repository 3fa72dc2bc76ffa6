"""
Ground geometry of the cell: distance/angle laws and uniform samplers.

Frame: the stadium centre is the origin, the TBS sits at ``(d, 0)`` and the
ABS hovers at height ``h`` above the origin. Every angle is measured at the
stadium centre between a node's ground projection and the TBS direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError
from .params import SystemParams

FloatArray = NDArray[np.float64]

# cosines this close to +-1 are rounding noise at the ends of the arc branch
_COS_SNAP = 8.0 * np.finfo(float).eps


@dataclass(frozen=True)
class GroundPoint:
    """Ground projection of a device, in metres."""

    x: float
    y: float

    @classmethod
    def asd(cls, x: float, y: float, p: SystemParams) -> "GroundPoint":
        if x * x + y * y > p.R2 * p.R2:
            raise DomainError(f"AsD point ({x:.3f}, {y:.3f}) lies outside the stadium")
        return cls(float(x), float(y))

    @classmethod
    def tsue(cls, x: float, y: float, p: SystemParams) -> "GroundPoint":
        if x * x + y * y < p.R2 * p.R2:
            raise DomainError(f"TsUE point ({x:.3f}, {y:.3f}) lies inside the stadium")
        if (x - p.d) ** 2 + y * y > p.R1 * p.R1:
            raise DomainError(f"TsUE point ({x:.3f}, {y:.3f}) lies outside the cell")
        return cls(float(x), float(y))

    @property
    def radius(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def angle(self) -> float:
        return math.atan2(self.y, self.x)

    def distance_to_abs(self, h: float) -> float:
        return math.hypot(self.radius, h)

    def distance_to_tbs(self, d: float) -> float:
        return math.hypot(self.x - d, self.y)


def zd_support(p: SystemParams) -> tuple[float, float]:
    return p.h, math.sqrt(p.h**2 + p.R2**2)


def zc_support(p: SystemParams) -> tuple[float, float, float]:
    """``(low, branch, high)`` of the TsUE distance law.

    ``branch`` separates the full-ring part from the arc part; with ``d = 0``
    it coincides with ``high``.
    """
    low = math.sqrt(p.R2**2 + p.h**2)
    branch = math.sqrt((p.R1 - p.d) ** 2 + p.h**2)
    high = math.sqrt((p.R1 + p.d) ** 2 + p.h**2)
    return low, branch, high


def cdf_Zd(z: ArrayLike, p: SystemParams) -> FloatArray:
    z = np.asarray(z, dtype=float)
    return np.clip((z * z - p.h**2) / p.R2**2, 0.0, 1.0)


def pdf_Zd(z: ArrayLike, p: SystemParams) -> FloatArray:
    """Density of the AsD-to-ABS distance, ``2z/R2^2`` on its support."""
    z = np.asarray(z, dtype=float)
    low, high = zd_support(p)
    inside = (z >= low) & (z <= high)
    return np.where(inside, 2.0 * z / p.R2**2, 0.0)


def _omega_hat(z: FloatArray, p: SystemParams) -> FloatArray:
    r = np.sqrt(np.maximum(z * z - p.h**2, 0.0))
    cos_arg = (p.d**2 + r * r - p.R1**2) / (2.0 * p.d * r)
    cos_arg = np.where(np.abs(cos_arg) >= 1.0 - _COS_SNAP, np.sign(cos_arg), cos_arg)
    return np.arccos(np.clip(cos_arg, -1.0, 1.0))


def omega_hat(z: ArrayLike, p: SystemParams) -> FloatArray:
    """Half-angle of the part of the radius-``sqrt(z^2-h^2)`` circle inside the cell.

    Defined on the arc branch only; raises :class:`DomainError` elsewhere and
    whenever ``d = 0`` (no arc branch exists).
    """
    if p.d == 0:
        raise DomainError("omega_hat is undefined for d = 0 (no arc branch)")
    z = np.asarray(z, dtype=float)
    _, branch, high = zc_support(p)
    if np.any((z <= branch) | (z > high)):
        raise DomainError(f"z must lie in ({branch:.6g}, {high:.6g}] for the arc branch")
    return _omega_hat(z, p)


def omega_hat_arcsec(z: ArrayLike, p: SystemParams) -> FloatArray:
    """Same angle via ``arcsec``; only used to cross-check :func:`omega_hat`."""
    z = np.asarray(z, dtype=float)
    r2 = z * z - p.h**2
    sec_arg = 2.0 * p.d * np.sqrt(r2) / (p.d**2 + r2 - p.R1**2)
    return np.arccos(np.clip(1.0 / sec_arg, -1.0, 1.0))


def pdf_Zc(z: ArrayLike, p: SystemParams) -> FloatArray:
    """Density of the TsUE-to-ABS distance (ring branch then arc branch)."""
    z = np.asarray(z, dtype=float)
    low, branch, high = zc_support(p)
    scale = 2.0 * z / (p.R1**2 - p.R2**2)
    ring = (z >= low) & (z <= branch)
    if p.d == 0:
        return np.where(ring, scale, 0.0)
    arc = (z > branch) & (z <= high)
    arc_weight = _omega_hat(np.where(arc, z, high), p) / math.pi
    return np.where(ring, scale, np.where(arc, scale * arc_weight, 0.0))


def pdf_Omega(omega: ArrayLike, z: ArrayLike, p: SystemParams) -> FloatArray:
    """Conditional density of the TsUE angle given its distance ``z``."""
    omega = np.asarray(omega, dtype=float)
    z = np.asarray(z, dtype=float)
    low, branch, high = zc_support(p)
    if np.any((z < low) | (z > high)):
        raise DomainError(f"z outside the TsUE distance support [{low:.6g}, {high:.6g}]")
    if np.any(np.abs(omega) > math.pi):
        raise DomainError("omega must lie in [-pi, pi]")

    ring = z <= branch
    if p.d == 0:
        return np.broadcast_to(1.0 / (2.0 * math.pi), np.broadcast(omega, z).shape).copy()
    half = _omega_hat(np.where(ring, high, z), p)
    on_arc = np.abs(omega) <= half
    arc_density = np.where(on_arc, 1.0 / (2.0 * np.where(half > 0, half, 1.0)), 0.0)
    return np.where(ring, 1.0 / (2.0 * math.pi), arc_density)


def pdf_Zc_Omega(z: ArrayLike, p: SystemParams) -> FloatArray:
    """Joint density of (TsUE distance, angle) inside its support.

    Both branches reduce to ``z / (pi (R1^2 - R2^2))``; callers restrict the
    angle to ``|omega| <= pi`` on the ring and ``|omega| <= omega_hat`` on the arc.
    """
    z = np.asarray(z, dtype=float)
    return z / (math.pi * (p.R1**2 - p.R2**2))


def omega_upper(z: float, p: SystemParams) -> float:
    """Largest admissible TsUE angle at distance ``z``."""
    _, branch, _ = zc_support(p)
    if p.d == 0 or z <= branch:
        return math.pi
    return float(_omega_hat(np.asarray(z, dtype=float), p))


def ground_distance_to_tbs(z: ArrayLike, angle: ArrayLike, p: SystemParams) -> FloatArray:
    """Cosine-rule ground distance from a node at slant distance ``z`` to the TBS."""
    z = np.asarray(z, dtype=float)
    r = np.sqrt(np.maximum(z * z - p.h**2, 0.0))
    squared = r * r + p.d**2 - 2.0 * r * p.d * np.cos(angle)
    return np.sqrt(np.maximum(squared, 0.0))


def sample_asd_positions(p: SystemParams, rng: np.random.Generator, n: int) -> tuple[FloatArray, FloatArray]:
    radius = p.R2 * np.sqrt(rng.random(n))
    theta = rng.uniform(-math.pi, math.pi, n)
    return radius * np.cos(theta), radius * np.sin(theta)


def sample_tsue_positions(p: SystemParams, rng: np.random.Generator, n: int) -> tuple[FloatArray, FloatArray]:
    """Uniform points in the cell minus the stadium, by rejection from the cell disk."""
    xs = np.empty(n)
    ys = np.empty(n)
    filled = 0
    acceptance = 1.0 - (p.R2 / p.R1) ** 2
    while filled < n:
        batch = int((n - filled) / acceptance * 1.1) + 16
        radius = p.R1 * np.sqrt(rng.random(batch))
        phi = rng.uniform(-math.pi, math.pi, batch)
        x = p.d + radius * np.cos(phi)
        y = radius * np.sin(phi)
        keep = x * x + y * y >= p.R2**2
        take = min(int(keep.sum()), n - filled)
        xs[filled:filled + take] = x[keep][:take]
        ys[filled:filled + take] = y[keep][:take]
        filled += take
    return xs, ys


def sample_asd_position(p: SystemParams, rng: np.random.Generator) -> GroundPoint:
    x, y = sample_asd_positions(p, rng, 1)
    return GroundPoint(float(x[0]), float(y[0]))


def sample_tsue_position(p: SystemParams, rng: np.random.Generator) -> GroundPoint:
    x, y = sample_tsue_positions(p, rng, 1)
    return GroundPoint(float(x[0]), float(y[0]))
