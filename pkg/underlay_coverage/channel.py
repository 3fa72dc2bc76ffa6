"""Aerial LOS probability, path gain and small-scale fading."""

from __future__ import annotations

import enum
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError
from .params import AerialEnvironment, ChannelModel, SystemParams

# Model 2 is an empirical fit that starts at this elevation
MODEL2_MIN_ELEVATION_DEG = 15.0


class LosState(enum.Enum):
    LOS = "LOS"
    NLOS = "NLOS"

    def select(self, p: SystemParams) -> tuple[float, float, int]:
        """``(eta, alpha, m)`` of this link state."""
        if self is LosState.LOS:
            return p.eta_L, p.alpha_L, p.m_L
        return p.eta_N, p.alpha_N, p.m_N


def elevation_deg(h: float, z: ArrayLike) -> NDArray[np.float64]:
    z = np.asarray(z, dtype=float)
    return np.degrees(np.arcsin(np.clip(h / z, -1.0, 1.0)))


def p_los(env: AerialEnvironment, h: float, z: ArrayLike) -> NDArray[np.float64] | float:
    """LOS probability of an aerial link with slant length ``z`` from height ``h``."""
    z_arr = np.asarray(z, dtype=float)
    if h <= 0 or np.any(z_arr < h * (1.0 - 1e-12)):
        raise DomainError(f"p_los needs 0 < h <= z (h={h})")
    elevation = elevation_deg(h, z_arr)

    if env.model is ChannelModel.MODEL1:
        value = 1.0 / (1.0 + env.c * np.exp(-env.b * (elevation - env.c)))
    else:
        base = np.maximum(elevation - MODEL2_MIN_ELEVATION_DEG, 0.0)
        value = np.clip(env.c * base**env.b, 0.0, 1.0)

    return float(value) if np.ndim(z) == 0 else value


def link_constants(state: LosState | ArrayLike, p: SystemParams) -> tuple:
    """``(eta, alpha, m)`` for a :class:`LosState`, or per element for a boolean
    LOS array (``True`` for LOS)."""
    if isinstance(state, LosState):
        return state.select(p)
    los = np.asarray(state, dtype=bool)
    return (
        np.where(los, p.eta_L, p.eta_N),
        np.where(los, p.alpha_L, p.alpha_N),
        np.where(los, p.m_L, p.m_N),
    )


def aerial_path_gain(state: LosState | ArrayLike, z: ArrayLike, p: SystemParams) -> NDArray[np.float64]:
    eta, alpha, _ = link_constants(state, p)
    return eta * np.asarray(z, dtype=float) ** (-alpha)


def sample_fading(
    p: SystemParams,
    rng: np.random.Generator,
    state: LosState | ArrayLike | None = None,
    size: int | tuple[int, ...] | None = None,
) -> NDArray[np.float64] | float:
    """Unit-mean power gain: exponential for terrestrial links (``state=None``),
    gamma with shape ``m`` and scale ``1/m`` for aerial links.

    A boolean ``state`` array draws one gain per element with that element's order.
    """
    if state is None:
        return rng.exponential(1.0, size)
    _, _, m = link_constants(state, p)
    if isinstance(state, LosState):
        return rng.gamma(m, 1.0 / m, size)
    return rng.gamma(m, 1.0 / m)


def gamma_ccdf_terms(m: int) -> range:
    """Orders summed by the integer-shape gamma CCDF."""
    if m < 1 or m != math.floor(m):
        raise DomainError(f"integer Nakagami order required, got {m}")
    return range(int(m))
