"""
Analytic coverage probabilities of the four links of the underlay cell.

Each coverage value is an integral over the random positions of the two
active devices (one AsD inside the stadium, one TsUE outside it):

* TBS uplink   -- Rayleigh link, single AsD interferer at the TBS.
* ABS uplink   -- Nakagami serving link, TsUE interferer at the ABS.
* TsUE downlink -- Rayleigh link, ABS interferer at the TsUE.
* AsD downlink -- Nakagami serving link, TBS interferer at the AsD.

The Nakagami links use the integer-shape gamma CCDF, which needs the first
``m - 1`` derivatives of the interference Laplace transform. Those are
differentiated analytically under the integral sign and carried in the
scaled form ``(-s)^k L^(k)(s)``, which is nonnegative, so the expansion is a
sum of positive terms.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import comb, factorial, poch

from .channel import LosState, gamma_ccdf_terms, p_los
from .errors import DomainError, PrecisionLoss
from .geometry import (
    ground_distance_to_tbs,
    omega_upper,
    pdf_Zc_Omega,
    pdf_Zd,
    zc_support,
    zd_support,
)
from .params import AerialEnvironment, SystemParams, regime_boundaries
from .power import PowerRegime, RegimePanel, asd_tx_power, classify_regime, regime_panels
from .quadrature import QuadratureSpec, gauss_legendre, integrate_nested, panel_edges

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# bound on any partial sum of the gamma CCDF expansion
_PARTIAL_SUM_LIMIT = 10.0


class Metric(enum.Enum):
    TBS_UL = "TBS_UL"
    ABS_UL = "ABS_UL"
    TSUE_DL = "TSUE_DL"
    ASD_DL = "ASD_DL"

    @classmethod
    def parse(cls, name: str | Metric) -> Metric:
        if isinstance(name, Metric):
            return name
        key = name.strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError as exc:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown metric {name!r} (choose from {choices})") from exc

    def threshold(self, p: SystemParams) -> float:
        return {
            Metric.TBS_UL: p.gamma_u_T,
            Metric.ABS_UL: p.gamma_u_A,
            Metric.TSUE_DL: p.gamma_d_T,
            Metric.ASD_DL: p.gamma_d_A,
        }[self]


@dataclass(frozen=True)
class CoverageResult:
    value: float
    est_error: float
    regime: PowerRegime


def _finalize(value: float, error: float, p: SystemParams, quad: QuadratureSpec, what: str) -> CoverageResult:
    if not math.isfinite(value):
        raise PrecisionLoss(f"{what}: non-finite coverage value")
    if value < 0.0 or value > 1.0:
        overshoot = -value if value < 0.0 else value - 1.0
        if overshoot >= quad.abs_tol:
            raise PrecisionLoss(f"{what}: coverage {value!r} leaves [0, 1] by {overshoot:.3e}")
        value = min(max(value, 0.0), 1.0)
    return CoverageResult(value=value, est_error=error, regime=classify_regime(p))


def _state_probabilities(env: AerialEnvironment, h: float, z: ArrayLike) -> dict[LosState, FloatArray]:
    los = np.asarray(p_los(env, h, z), dtype=float)
    return {LosState.LOS: los, LosState.NLOS: 1.0 - los}


def gamma_ccdf_expansion(x: ArrayLike, scaled_derivatives: ArrayLike) -> FloatArray:
    """``Pr[G > s (I + sigma2)]`` for unit-scale gamma ``G`` of integer shape ``m``.

    ``x`` is ``s * sigma2`` and ``scaled_derivatives[..., k]`` holds
    ``(-s)^k L^(k)(s)`` for ``k = 0..m-1``, where ``L`` is the Laplace
    transform of ``I``. The double sum is accumulated with Neumaier
    compensation.
    """
    x = np.asarray(x, dtype=float)
    scaled = np.asarray(scaled_derivatives, dtype=float)
    m = scaled.shape[-1]
    noise = np.exp(-x)

    total = np.zeros(np.broadcast(x, scaled[..., 0]).shape)
    compensation = np.zeros_like(total)
    for n in gamma_ccdf_terms(m):
        for k in range(n + 1):
            term = comb(n, k) / factorial(n) * x ** (n - k) * noise * scaled[..., k]
            running = total + term
            compensation += np.where(
                np.abs(total) >= np.abs(term),
                (total - running) + term,
                (term - running) + total,
            )
            total = running
            partial = total + compensation
            if not np.all(np.isfinite(partial)) or np.any(np.abs(partial) > _PARTIAL_SUM_LIMIT):
                raise PrecisionLoss(f"gamma CCDF expansion lost precision at n={n}, k={k}")
    return total + compensation


# --------------------------------------------------------------------------- #
# TBS uplink
# --------------------------------------------------------------------------- #
def _tbs_uplink_laplace(s: float, p: SystemParams, env: AerialEnvironment, quad: QuadratureSpec) -> tuple[float, float]:
    if s == 0:
        return 1.0, 0.0
    bounds = regime_boundaries(p)
    panels = panel_edges(*zd_support(p), (bounds.zmax_L, bounds.zmax_N))

    def integrand(z: float, theta: float) -> FloatArray:
        d_a = ground_distance_to_tbs(z, theta, p) ** p.alpha_b
        weight = pdf_Zd(z, p) / math.pi
        probs = _state_probabilities(env, p.h, z)
        value = 0.0
        for state, prob in probs.items():
            power = asd_tx_power(state, z, p)
            value = value + prob * d_a / (d_a + s * power)
        return np.atleast_1d(weight * value)

    value, error = integrate_nested(integrand, panels, lambda z: math.pi, quad, "TBS uplink Laplace transform")
    return float(value[0]), error


def laplace_tbs_uplink(
    s: float, p: SystemParams, env: AerialEnvironment, quad: QuadratureSpec | None = None
) -> float:
    """Laplace transform of the AsD interference seen by the TBS."""
    if s < 0:
        raise DomainError(f"Laplace argument must be >= 0, got {s}")
    return _tbs_uplink_laplace(s, p, env, quad or QuadratureSpec())[0]


def coverage_tbs_uplink(p: SystemParams, env: AerialEnvironment, quad: QuadratureSpec | None = None) -> CoverageResult:
    quad = quad or QuadratureSpec()
    s = p.gamma_u_T / p.rho_b
    laplace, error = _tbs_uplink_laplace(s, p, env, quad)
    noise = math.exp(-s * p.sigma2)
    return _finalize(noise * laplace, noise * error, p, quad, "TBS uplink coverage")


# --------------------------------------------------------------------------- #
# ABS uplink
# --------------------------------------------------------------------------- #
def _reference_scale(p: SystemParams) -> float:
    """Inverse of a typical TsUE interference power at the ABS."""
    d_t = p.R1
    z = math.sqrt(p.h**2 + p.R2**2)
    return 1.0 / (p.rho_b * p.eta_L * d_t**p.alpha_b * z ** (-p.alpha_L))


def abs_interference_moments(
    s_values: ArrayLike,
    orders: int,
    p: SystemParams,
    env: AerialEnvironment,
    quad: QuadratureSpec,
    scale: ArrayLike | None = None,
) -> tuple[FloatArray, float]:
    """``u^k (-1)^k L^(k)(s)`` of the TsUE interference at the ABS.

    Returns an array of shape ``(len(s_values), orders)``; ``scale`` (``u``)
    defaults to ``s`` itself, which bounds entry ``k`` by the rising factorial ``(m)_k``.
    """
    s = np.atleast_1d(np.asarray(s_values, dtype=float))
    u = s if scale is None else np.broadcast_to(np.asarray(scale, dtype=float), s.shape)
    ks = np.arange(orders)
    low, branch, high = zc_support(p)
    panels = panel_edges(low, high, (branch,))

    per_state = {state: state.select(p) for state in LosState}
    pochhammer = {state: poch(m, ks) for state, (_, _, m) in per_state.items()}

    def integrand(z: float, omega: float) -> FloatArray:
        d_t = ground_distance_to_tbs(z, omega, p)
        base = p.rho_b * d_t**p.alpha_b
        probs = _state_probabilities(env, p.h, z)
        out = np.zeros((s.size, orders))
        for state, (eta, alpha, m) in per_state.items():
            mean_power = base * eta * z ** (-alpha)
            denominator = m + s * mean_power
            laplace = (m / denominator) ** m
            ratio = u * mean_power / denominator
            out += probs[state] * laplace[:, None] * pochhammer[state][None, :] * ratio[:, None] ** ks[None, :]
        return 2.0 * pdf_Zc_Omega(z, p) * out

    moments, error = integrate_nested(
        integrand, panels, lambda z: omega_upper(z, p), quad, "ABS uplink interference moments"
    )
    return moments.reshape(s.size, orders), error


def laplace_abs_uplink_deriv(
    s: float, k: int, p: SystemParams, env: AerialEnvironment, quad: QuadratureSpec | None = None
) -> float:
    """``k``-th derivative in ``s`` of the TsUE interference Laplace transform at the ABS."""
    if s < 0:
        raise DomainError(f"Laplace argument must be >= 0, got {s}")
    highest = max(p.m_L, p.m_N) - 1
    if not 0 <= k <= highest:
        raise DomainError(f"derivative order must lie in [0, {highest}], got {k}")
    if s == 0 and k == 0:
        return 1.0
    u = s if s > 0 else _reference_scale(p)
    moments, _ = abs_interference_moments([s], k + 1, p, env, quad or QuadratureSpec(), scale=[u])
    return float((-1) ** k * moments[0, k] / u**k)


def laplace_abs_uplink(
    s: float, p: SystemParams, env: AerialEnvironment, quad: QuadratureSpec | None = None
) -> float:
    return laplace_abs_uplink_deriv(s, 0, p, env, quad)


def _panel_power(panels: Sequence[RegimePanel], state: LosState, z: FloatArray, p: SystemParams) -> FloatArray:
    power = np.empty_like(z)
    for panel in panels:
        inside = (z >= panel.z_low) & (z <= panel.z_high)
        power[inside] = panel.power(state, z[inside], p)
    return power


def coverage_abs_uplink(p: SystemParams, env: AerialEnvironment, quad: QuadratureSpec | None = None) -> CoverageResult:
    """ABS uplink coverage.

    The outer integral over the AsD distance runs on Gauss-Legendre nodes
    (split where the power cap starts to bind); at every node the gamma CCDF
    needs the interference moments at that node's ``s``, and all of them come
    out of one nested quadrature.
    """
    quad = quad or QuadratureSpec()
    inner_quad = quad.tightened()
    total, error = 0.0, 0.0

    for state in LosState:
        eta, alpha, m = state.select(p)
        panels = regime_panels(p, state)

        def node_values(z: FloatArray, state: LosState = state, eta: float = eta,
                        alpha: float = alpha, m: int = m,
                        panels: Sequence[RegimePanel] = panels) -> tuple[FloatArray, float]:
            power = _panel_power(panels, state, z, p)
            s = m * p.gamma_u_A * z**alpha / (eta * power)
            unique_s, index = np.unique(s, return_inverse=True)
            moments, moment_error = abs_interference_moments(unique_s, m, p, env, inner_quad)
            ccdf = gamma_ccdf_expansion(unique_s * p.sigma2, moments)[index]
            weight = pdf_Zd(z, p) * _state_probabilities(env, p.h, z)[state]
            return weight * ccdf, moment_error * m * float(np.max(weight))

        value, err = gauss_legendre(
            node_values, [(panel.z_low, panel.z_high) for panel in panels], quad, f"ABS uplink ({state.value})"
        )
        total += value
        error += err

    return _finalize(total, error, p, quad, "ABS uplink coverage")


# --------------------------------------------------------------------------- #
# TsUE downlink
# --------------------------------------------------------------------------- #
def coverage_tsue_downlink(
    p: SystemParams, env: AerialEnvironment, quad: QuadratureSpec | None = None
) -> CoverageResult:
    quad = quad or QuadratureSpec()
    low, branch, high = zc_support(p)
    panels = panel_edges(low, high, (branch,))
    per_state = {state: state.select(p) for state in LosState}

    def integrand(z: float, omega: float) -> FloatArray:
        d_t = ground_distance_to_tbs(z, omega, p)
        s = p.gamma_d_T / p.P_t * d_t**p.alpha_b
        probs = _state_probabilities(env, p.h, z)
        laplace = 0.0
        for state, (eta, alpha, m) in per_state.items():
            laplace = laplace + probs[state] * (1.0 + s * p.P_a * eta * z ** (-alpha) / m) ** (-m)
        return np.atleast_1d(2.0 * pdf_Zc_Omega(z, p) * math.exp(-s * p.sigma2) * laplace)

    value, error = integrate_nested(integrand, panels, lambda z: omega_upper(z, p), quad, "TsUE downlink coverage")
    return _finalize(float(value[0]), error, p, quad, "TsUE downlink coverage")


# --------------------------------------------------------------------------- #
# AsD downlink
# --------------------------------------------------------------------------- #
def tbs_interference_moments(s: ArrayLike, d_a: ArrayLike, orders: int, p: SystemParams) -> FloatArray:
    """``(-s)^k L^(k)(s)`` of the single Rayleigh-faded TBS interferer at ground distance ``d_a``."""
    s = np.asarray(s, dtype=float)
    path = np.asarray(d_a, dtype=float) ** p.alpha_b
    load = s * p.P_t
    denominator = path + load
    safe = np.where(denominator > 0, denominator, 1.0)
    busy = np.where(denominator > 0, load / safe, 0.0)
    idle = np.where(denominator > 0, path / safe, 1.0)
    ks = np.arange(orders)
    return factorial(ks) * busy[..., None] ** ks * idle[..., None]


def coverage_asd_downlink(
    p: SystemParams, env: AerialEnvironment, quad: QuadratureSpec | None = None
) -> CoverageResult:
    quad = quad or QuadratureSpec()
    per_state = {state: state.select(p) for state in LosState}

    def integrand(z: float, theta: float) -> FloatArray:
        d_a = ground_distance_to_tbs(z, theta, p)
        probs = _state_probabilities(env, p.h, z)
        value = 0.0
        for state, (eta, alpha, m) in per_state.items():
            s = m * p.gamma_d_A * z**alpha / (p.P_a * eta)
            moments = tbs_interference_moments(s, d_a, m, p)
            value = value + probs[state] * gamma_ccdf_expansion(s * p.sigma2, moments)
        return np.atleast_1d(pdf_Zd(z, p) / math.pi * value)

    value, error = integrate_nested(integrand, [zd_support(p)], lambda z: math.pi, quad, "AsD downlink coverage")
    return _finalize(float(value[0]), error, p, quad, "AsD downlink coverage")


_DISPATCH = {
    Metric.TBS_UL: coverage_tbs_uplink,
    Metric.ABS_UL: coverage_abs_uplink,
    Metric.TSUE_DL: coverage_tsue_downlink,
    Metric.ASD_DL: coverage_asd_downlink,
}


def coverage(
    metric: Metric | str, p: SystemParams, env: AerialEnvironment, quad: QuadratureSpec | None = None
) -> CoverageResult:
    metric = Metric.parse(metric)
    result = _DISPATCH[metric](p, env, quad)
    logger.debug(
        "%s at h=%.1f d=%.1f (%s): %.6f +- %.1e", metric.value, p.h, p.d, env.label, result.value, result.est_error
    )
    return result
