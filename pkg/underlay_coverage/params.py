"""
System parameters for the underlay drone cell.

Configuration files speak dB/dBm (the units radio engineers quote), every
computation inside the package works in linear ratios and watts. This module
is the only place where the two meet.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import pathlib
import sys
from dataclasses import dataclass
from typing import Any, Mapping

from .errors import ConfigError, InvalidValue, MissingKey

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on older interpreters only
    import tomli as tomllib

logger = logging.getLogger(__name__)


def from_dbm(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def from_db(db: float) -> float:
    return 10.0 ** (db / 10.0)


def to_db(ratio: float) -> float:
    return 10.0 * math.log10(ratio)


@dataclass(frozen=True)
class SystemParams:
    """Radio and geometry scalars of one terrestrial cell plus its stadium ABS.

    Lengths are metres, powers watts, ratios linear. Instances are immutable;
    use :meth:`replace` to derive sweep points.
    """

    R1: float
    R2: float
    d: float
    h: float
    alpha_b: float
    alpha_L: float
    alpha_N: float
    eta_L: float
    eta_N: float
    m_L: int
    m_N: int
    rho_b: float
    rho_d: float
    P_max: float
    P_t: float
    P_a: float
    gamma_u_T: float
    gamma_u_A: float
    gamma_d_T: float
    gamma_d_A: float
    sigma2: float

    def validate(self) -> "SystemParams":
        """Raise :class:`InvalidValue` on the first violated invariant."""
        if not self.R2 > 0:
            raise InvalidValue("R2", "R2 > 0 required")
        if not self.R1 > self.R2:
            raise InvalidValue("R1", "R1 > R2 required")
        if not self.d >= 0:
            raise InvalidValue("d", "d >= 0 required")
        if self.d + self.R2 > self.R1:
            raise InvalidValue("d", "stadium must lie inside the cell (d + R2 <= R1)")
        if not self.h > 0:
            raise InvalidValue("h", "h > 0 required")
        for name in ("rho_b", "rho_d", "P_max", "P_t", "P_a",
                     "gamma_u_T", "gamma_u_A", "gamma_d_T", "gamma_d_A", "sigma2"):
            if not getattr(self, name) > 0:
                raise InvalidValue(name, f"{name} > 0 required")
        for name in ("alpha_b", "alpha_L", "alpha_N"):
            if not getattr(self, name) >= 2:
                raise InvalidValue(name, f"{name} >= 2 required")
        if not self.eta_N > 0:
            raise InvalidValue("eta_N", "eta_N > 0 required")
        if not self.eta_L > self.eta_N:
            raise InvalidValue("eta_L", "eta_L > eta_N required")
        for name in ("m_L", "m_N"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise InvalidValue(name, f"{name} must be an integer >= 1")
        bounds = regime_boundaries(self)
        if bounds.zmax_N > bounds.zmax_L:
            # the piecewise coverage formulas only cover the NLOS cap binding first
            raise InvalidValue("P_max", "NLOS power-cap distance exceeds the LOS one")
        return self

    def replace(self, *, validate: bool = True, **changes: Any) -> "SystemParams":
        updated = dataclasses.replace(self, **changes)
        return updated.validate() if validate else updated

    def m_for(self, los: bool) -> int:
        return self.m_L if los else self.m_N


class ChannelModel(enum.Enum):
    MODEL1 = 1
    MODEL2 = 2


@dataclass(frozen=True)
class AerialEnvironment:
    """LOS-probability model with its two environment constants."""

    model: ChannelModel
    c: float
    b: float
    name: str = "custom"

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise InvalidValue("env_c", "c > 0 required")
        if not self.b > 0:
            raise InvalidValue("env_b", "b > 0 required")

    @property
    def label(self) -> str:
        return f"{self.name}-m{self.model.value}"


MODEL1_PRESETS: dict[str, tuple[float, float]] = {
    "suburban": (4.88, 0.43),
    "urban": (9.6117, 0.1581),
    "dense-urban": (11.95, 0.136),
    "high-rise-urban": (27.23, 0.08),
}
MODEL2_PRESETS: dict[str, tuple[float, float]] = {
    "urban": (0.6, 0.11),
}
MODEL1_ENVIRONMENTS: tuple[str, ...] = tuple(MODEL1_PRESETS)


def environment(
    model: int | ChannelModel = 1,
    name: str | None = None,
    c: float | None = None,
    b: float | None = None,
) -> AerialEnvironment:
    """Resolve a preset by name or build a custom environment from (c, b)."""
    try:
        model = ChannelModel(model)
    except ValueError as exc:
        raise InvalidValue("env_model", f"unknown model {model!r} (expected 1 or 2)") from exc

    if c is not None or b is not None:
        if c is None or b is None:
            raise InvalidValue("env_c" if c is None else "env_b", "custom environments need both env_c and env_b")
        return AerialEnvironment(model, float(c), float(b), name or "custom")

    presets = MODEL1_PRESETS if model is ChannelModel.MODEL1 else MODEL2_PRESETS
    name = name or "urban"
    if name not in presets:
        raise InvalidValue("env_name", f"no Model {model.value} preset named {name!r} ({', '.join(presets)})")
    c_value, b_value = presets[name]
    return AerialEnvironment(model, c_value, b_value, name)


@dataclass(frozen=True)
class RegimeBoundaries:
    zmax_L: float
    zmax_N: float
    hcrit_L: float
    hcrit_N: float


def _cap_distance(p: SystemParams, eta: float, alpha: float) -> float:
    return (p.P_max * eta / p.rho_d) ** (1.0 / alpha)


def regime_boundaries(p: SystemParams) -> RegimeBoundaries:
    """Serving distances/heights at which the AsD power cap starts to bind."""
    zmax_L = _cap_distance(p, p.eta_L, p.alpha_L)
    zmax_N = _cap_distance(p, p.eta_N, p.alpha_N)
    return RegimeBoundaries(
        zmax_L=zmax_L,
        zmax_N=zmax_N,
        hcrit_L=math.sqrt(max(0.0, zmax_L**2 - p.R2**2)),
        hcrit_N=math.sqrt(max(0.0, zmax_N**2 - p.R2**2)),
    )


# config key -> (field, converter)
_LINEAR = float
_CONFIG_KEYS: dict[str, tuple[str, Any]] = {
    "r1_m": ("R1", _LINEAR),
    "r2_m": ("R2", _LINEAR),
    "d_m": ("d", _LINEAR),
    "h_m": ("h", _LINEAR),
    "alpha_b": ("alpha_b", _LINEAR),
    "alpha_los": ("alpha_L", _LINEAR),
    "alpha_nlos": ("alpha_N", _LINEAR),
    "eta_los_db": ("eta_L", from_db),
    "eta_nlos_db": ("eta_N", from_db),
    "m_los": ("m_L", int),
    "m_nlos": ("m_N", int),
    "rho_b_dbm": ("rho_b", from_dbm),
    "rho_d_dbm": ("rho_d", from_dbm),
    "p_max_dbm": ("P_max", from_dbm),
    "p_t_dbm": ("P_t", from_dbm),
    "p_a_dbm": ("P_a", from_dbm),
    "gamma_u_t_db": ("gamma_u_T", from_db),
    "gamma_u_a_db": ("gamma_u_A", from_db),
    "gamma_d_t_db": ("gamma_d_T", from_db),
    "gamma_d_a_db": ("gamma_d_A", from_db),
    "sigma2_dbm": ("sigma2", from_dbm),
}
_ENV_KEYS = ("env_model", "env_name", "env_c", "env_b")
_META_KEYS = ("use_defaults",)


def default_config() -> dict[str, Any]:
    """Reference parameter set (dB/dBm) used throughout the evaluation."""
    return {
        "r1_m": 500.0,
        "r2_m": 100.0,
        "d_m": 200.0,
        "h_m": 400.0,
        "alpha_b": 4.0,
        "alpha_los": 2.5,
        "alpha_nlos": 4.0,
        "eta_los_db": 0.0,
        "eta_nlos_db": -20.0,
        "m_los": 5,
        "m_nlos": 1,
        "rho_b_dbm": -75.0,
        "rho_d_dbm": -50.0,
        "p_max_dbm": 20.0,
        "p_t_dbm": 40.0,
        "p_a_dbm": 20.0,
        "gamma_u_t_db": 0.0,
        "gamma_u_a_db": 0.0,
        "gamma_d_t_db": 0.0,
        "gamma_d_a_db": 0.0,
        "sigma2_dbm": -100.0,
        "env_model": 1,
        "env_name": "urban",
    }


def _as_integer(key: str, value: Any) -> int:
    if isinstance(value, bool):
        raise InvalidValue(key, "integer required")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise InvalidValue(key, f"integer required, got {value!r}")


def build_params(raw_config: Mapping[str, Any]) -> SystemParams:
    """Convert a dB/dBm key map into validated linear :class:`SystemParams`."""
    unknown = set(raw_config) - set(_CONFIG_KEYS) - set(_ENV_KEYS) - set(_META_KEYS)
    if unknown:
        raise InvalidValue(sorted(unknown)[0], "unknown key")

    values: dict[str, Any] = {}
    for key, (field, convert) in _CONFIG_KEYS.items():
        if key not in raw_config:
            raise MissingKey(key)
        raw = raw_config[key]
        if convert is int:
            values[field] = _as_integer(key, raw)
            continue
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise InvalidValue(key, f"number required, got {raw!r}")
        values[field] = convert(float(raw))

    return SystemParams(**values).validate()


def build_environment(raw_config: Mapping[str, Any]) -> AerialEnvironment:
    return environment(
        raw_config.get("env_model", 1),
        raw_config.get("env_name"),
        raw_config.get("env_c"),
        raw_config.get("env_b"),
    )


def _flatten(table: Mapping[str, Any], into: dict[str, Any], where: str = "") -> dict[str, Any]:
    for key, value in table.items():
        if isinstance(value, Mapping):
            _flatten(value, into, f"{where}{key}.")
            continue
        if key in into:
            raise InvalidValue(key, f"defined twice (second time under [{where.rstrip('.')}])")
        into[key] = value
    return into


def read_config(path: str | pathlib.Path) -> dict[str, Any]:
    """Read a TOML config file into a flat key map.

    Nested tables are flattened; ``use_defaults = true`` fills omitted keys
    from :func:`default_config`.
    """
    path = pathlib.Path(path).expanduser()
    try:
        with path.open("rb") as handle:
            document = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    raw = _flatten(document, {})
    if raw.pop("use_defaults", False):
        merged = default_config()
        if any(key in raw for key in ("env_c", "env_b")):
            merged.pop("env_name")
        merged.update(raw)
        raw = merged
    logger.debug("Loaded %d config keys from %s", len(raw), path)
    return raw


def load_config(path: str | pathlib.Path) -> tuple[SystemParams, AerialEnvironment]:
    raw = read_config(path)
    return build_params(raw), build_environment(raw)
