"""
AsD uplink power control and the height regimes it induces.

The AsD inverts its aerial path loss so the ABS sees ``rho_d`` on average,
capped at ``P_max``. Depending on the ABS height the cap binds for all, some
or none of the stadium, separately for LOS and NLOS links; the combination is
a :class:`PowerRegime`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .channel import LosState, link_constants
from .params import RegimeBoundaries, SystemParams, regime_boundaries

PowerLaw = Literal["cap", "split", "inversion"]


class PowerRegime(enum.Enum):
    """Which piecewise case of the uplink formulas holds at the current height."""

    COND_1L = "Cond1L"
    COND_4_OR_8 = "Cond4or8"
    COND_5 = "Cond5"
    COND_6 = "Cond6"
    COND_7_OR_9 = "Cond7or9"
    COND_3N = "Cond3N"

    @property
    def label(self) -> str:
        return self.value


_BRANCHES: dict[tuple[PowerLaw, PowerLaw], PowerRegime] = {
    ("cap", "cap"): PowerRegime.COND_1L,
    ("split", "cap"): PowerRegime.COND_4_OR_8,
    ("split", "split"): PowerRegime.COND_5,
    ("inversion", "cap"): PowerRegime.COND_6,
    ("inversion", "split"): PowerRegime.COND_7_OR_9,
    ("inversion", "inversion"): PowerRegime.COND_3N,
}


def asd_tx_power(state: LosState | ArrayLike, z: ArrayLike, p: SystemParams) -> NDArray[np.float64]:
    """Transmit power of an AsD at slant distance ``z``.

    ``state`` is a :class:`LosState` or a boolean array (``True`` for LOS)
    broadcastable against ``z``.
    """
    z = np.asarray(z, dtype=float)
    eta, alpha, _ = link_constants(state, p)
    return np.minimum(p.P_max, p.rho_d / eta * z**alpha)


def _power_law(h: float, zmax: float, hcrit: float) -> PowerLaw:
    # h == hcrit inverts: the farthest AsD then sits on the cap distance itself
    if h >= zmax:
        return "cap"
    if hcrit > 0 and h <= hcrit:
        return "inversion"
    return "split"


def state_power_law(p: SystemParams, state: LosState, bounds: RegimeBoundaries | None = None) -> PowerLaw:
    bounds = bounds or regime_boundaries(p)
    if state is LosState.LOS:
        return _power_law(p.h, bounds.zmax_L, bounds.hcrit_L)
    return _power_law(p.h, bounds.zmax_N, bounds.hcrit_N)


def classify_regime(p: SystemParams) -> PowerRegime:
    bounds = regime_boundaries(p)
    key = (state_power_law(p, LosState.LOS, bounds), state_power_law(p, LosState.NLOS, bounds))
    return _BRANCHES[key]


@dataclass(frozen=True)
class RegimePanel:
    """Slice ``[z_low, z_high]`` of serving distances sharing one power law."""

    z_low: float
    z_high: float
    capped: bool

    def power(self, state: LosState, z: ArrayLike, p: SystemParams) -> NDArray[np.float64]:
        z = np.asarray(z, dtype=float)
        if self.capped:
            return np.full_like(z, p.P_max)
        eta, alpha, _ = state.select(p)
        return p.rho_d / eta * z**alpha


def regime_panels(p: SystemParams, state: LosState) -> tuple[RegimePanel, ...]:
    """Integration panels of the AsD distance for one serving-link state."""
    bounds = regime_boundaries(p)
    z_low, z_high = p.h, math.sqrt(p.h**2 + p.R2**2)
    zmax = bounds.zmax_L if state is LosState.LOS else bounds.zmax_N
    law = state_power_law(p, state, bounds)
    if law == "cap":
        return (RegimePanel(z_low, z_high, True),)
    if law == "inversion":
        return (RegimePanel(z_low, z_high, False),)
    return RegimePanel(z_low, zmax, False), RegimePanel(zmax, z_high, True)


@dataclass(frozen=True)
class RegimeDescription:
    h: float
    regime: PowerRegime
    boundaries: RegimeBoundaries

    def __str__(self) -> str:
        b = self.boundaries
        return (
            f"h = {self.h:.2f} m -> {self.regime.label}  "
            f"(zmax_L={b.zmax_L:.2f} m, hcrit_L={b.hcrit_L:.2f} m, "
            f"zmax_N={b.zmax_N:.2f} m, hcrit_N={b.hcrit_N:.2f} m)"
        )


def describe_regime(p: SystemParams) -> RegimeDescription:
    return RegimeDescription(p.h, classify_regime(p), regime_boundaries(p))
