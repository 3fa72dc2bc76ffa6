"""Analytic coverage formulas checked against limits, closed forms and simulation."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats

from underlay_coverage import (
    MODEL1_ENVIRONMENTS,
    DomainError,
    InvalidValue,
    Metric,
    PowerRegime,
    PrecisionLoss,
    QuadratureSpec,
    classify_regime,
    coverage,
    coverage_abs_uplink,
    coverage_asd_downlink,
    coverage_tbs_uplink,
    coverage_tsue_downlink,
    environment,
    estimate_many,
    from_db,
    laplace_abs_uplink_deriv,
    laplace_tbs_uplink,
    regime_boundaries,
)
from underlay_coverage.analytic import abs_interference_moments, gamma_ccdf_expansion, tbs_interference_moments
from underlay_coverage.channel import LosState, p_los
from underlay_coverage.geometry import ground_distance_to_tbs, pdf_Zd, zd_support
from underlay_coverage.montecarlo import estimate_laplace_tbs
from underlay_coverage.power import asd_tx_power

# a typical inverse interference power at the ABS for the reference cell
ABS_S = 2e7


def test_metric_parse() -> None:
    assert Metric.parse("abs_ul") is Metric.ABS_UL
    assert Metric.parse("tsue-dl") is Metric.TSUE_DL
    assert Metric.parse(Metric.ASD_DL) is Metric.ASD_DL
    with pytest.raises(ValueError, match="unknown metric"):
        Metric.parse("ABS_DL")


def test_tbs_laplace_transform_limits(ref_params, urban, quick_quad) -> None:
    assert laplace_tbs_uplink(0.0, ref_params, urban) == 1.0
    with pytest.raises(DomainError):
        laplace_tbs_uplink(-1.0, ref_params, urban)

    values = [laplace_tbs_uplink(s, ref_params, urban, quick_quad) for s in (1e8, 1e10, 1e12)]
    assert 1.0 > values[0] > values[1] > values[2] > 0.0


def test_far_tbs_sees_almost_no_interference(ref_params, urban, quick_quad) -> None:
    far = ref_params.replace(d=5000.0, validate=False)
    assert laplace_tbs_uplink(ref_params.gamma_u_T / ref_params.rho_b, far, urban, quick_quad) >= 0.999


@pytest.mark.parametrize("metric", list(Metric))
def test_vanishing_threshold_gives_full_coverage(ref_params, urban, quick_quad, metric: Metric) -> None:
    p = ref_params.replace(gamma_u_T=1e-12, gamma_u_A=1e-12, gamma_d_T=1e-12, gamma_d_A=1e-12)
    assert coverage(metric, p, urban, quick_quad).value == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("k", range(5))
def test_abs_laplace_derivatives_alternate_in_sign(ref_params, urban, quick_quad, k: int) -> None:
    value = laplace_abs_uplink_deriv(ABS_S, k, ref_params, urban, quick_quad)
    assert value != 0.0
    assert math.copysign(1.0, value) == (-1.0) ** k


def test_abs_laplace_derivative_arguments(ref_params, urban) -> None:
    assert laplace_abs_uplink_deriv(0.0, 0, ref_params, urban) == 1.0
    with pytest.raises(DomainError):
        laplace_abs_uplink_deriv(ABS_S, 5, ref_params, urban)
    with pytest.raises(DomainError):
        laplace_abs_uplink_deriv(-1.0, 0, ref_params, urban)


def test_abs_laplace_derivative_matches_finite_difference(ref_params, urban) -> None:
    tight = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-12, max_depth=60)
    step = 1e-3 * ABS_S
    upper = laplace_abs_uplink_deriv(ABS_S + step, 0, ref_params, urban, tight)
    lower = laplace_abs_uplink_deriv(ABS_S - step, 0, ref_params, urban, tight)
    slope = laplace_abs_uplink_deriv(ABS_S, 1, ref_params, urban, tight)
    assert slope == pytest.approx((upper - lower) / (2 * step), rel=1e-4)


def test_abs_laplace_derivative_at_zero_is_minus_mean_interference(ref_params, urban, quick_quad) -> None:
    slope = laplace_abs_uplink_deriv(0.0, 1, ref_params, urban, quick_quad)
    small = laplace_abs_uplink_deriv(1e3, 1, ref_params, urban, quick_quad)
    assert slope < 0.0
    assert slope == pytest.approx(small, rel=1e-3)


@pytest.mark.parametrize("m", [1, 2, 3, 5, 6])
@pytest.mark.parametrize(("x", "load"), [(0.0, 0.5), (0.3, 0.0), (0.7, 2.0), (2.0, 4.5)])
def test_expansion_matches_gamma_survival_for_fixed_interference(m: int, x: float, load: float) -> None:
    ks = np.arange(m)
    scaled = load**ks * math.exp(-load)
    expected = stats.gamma.sf(x + load, m)
    assert float(gamma_ccdf_expansion(x, scaled)) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_expansion_reduces_to_rayleigh_for_unit_order() -> None:
    x = np.array([0.0, 0.1, 1.0, 3.0])
    laplace = np.array([0.9, 0.5, 0.2, 0.05])
    got = gamma_ccdf_expansion(x, laplace[:, None])
    np.testing.assert_allclose(got, np.exp(-x) * laplace, rtol=1e-10)


def test_expansion_refuses_untrustworthy_partial_sums() -> None:
    with pytest.raises(PrecisionLoss):
        gamma_ccdf_expansion(0.1, [1.0, float("nan")])
    with pytest.raises(PrecisionLoss):
        gamma_ccdf_expansion(0.1, [1e3, 0.0])


def test_tbs_interference_moments(ref_params) -> None:
    s, d_a = 2.0, 3.0
    path = d_a**ref_params.alpha_b
    busy = s * ref_params.P_t / (path + s * ref_params.P_t)
    got = tbs_interference_moments(s, d_a, 3, ref_params)
    np.testing.assert_allclose(got, [1 - busy, busy * (1 - busy), 2 * busy**2 * (1 - busy)], rtol=1e-12)
    np.testing.assert_allclose(tbs_interference_moments(s, 0.0, 3, ref_params), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(tbs_interference_moments(0.0, d_a, 3, ref_params), [1.0, 0.0, 0.0])


def test_tsue_downlink_without_aerial_interference_is_noise_limited(ref_params, urban, quick_quad) -> None:
    p = ref_params.replace(P_a=1e-30, sigma2=1e-10)
    c = p.gamma_d_T * p.sigma2 / p.P_t

    full_disk, _ = integrate.quad(lambda rho: 2 * math.pi * rho * math.exp(-c * rho**4), 0.0, p.R1)
    stadium, _ = integrate.dblquad(
        lambda theta, r: r * math.exp(-c * (r**2 + p.d**2 - 2 * r * p.d * math.cos(theta)) ** 2),
        0.0, p.R2, 0.0, 2 * math.pi,
    )
    expected = (full_disk - stadium) / (math.pi * (p.R1**2 - p.R2**2))
    assert 0.3 < expected < 0.9
    assert coverage_tsue_downlink(p, urban, quick_quad).value == pytest.approx(expected, abs=1e-5)


def test_asd_downlink_without_terrestrial_interference_is_noise_limited(ref_params, urban, quick_quad) -> None:
    p = ref_params.replace(P_t=1e-30)

    def per_height(z: float) -> float:
        los = p_los(urban, p.h, z)
        value = 0.0
        for prob, eta, alpha, m in ((los, p.eta_L, p.alpha_L, p.m_L), (1 - los, p.eta_N, p.alpha_N, p.m_N)):
            value += prob * stats.gamma.sf(m * p.gamma_d_A * p.sigma2 * z**alpha / (p.P_a * eta), m)
        return float(pdf_Zd(z, p)) * value

    expected, _ = integrate.quad(per_height, *zd_support(p), epsabs=1e-12)
    assert coverage_asd_downlink(p, urban, quick_quad).value == pytest.approx(expected, abs=1e-5)


@pytest.mark.parametrize("edge", ["hcrit_L", "zmax_L"])
def test_uplink_coverage_is_continuous_across_regime_edges(ref_params, urban, quick_quad, edge: str) -> None:
    h_edge = getattr(regime_boundaries(ref_params), edge)
    below, above = ref_params.replace(h=h_edge - 0.1), ref_params.replace(h=h_edge + 0.1)
    assert classify_regime(below) is not classify_regime(above)
    for formula in (coverage_abs_uplink, coverage_tbs_uplink):
        below_value = formula(below, urban, quick_quad).value
        assert below_value == pytest.approx(formula(above, urban, quick_quad).value, abs=1e-3)


def test_tbs_uplink_is_flat_once_every_asd_is_capped(ref_params, urban) -> None:
    tight = QuadratureSpec(rel_tol=1e-8, abs_tol=1e-11)
    low = coverage_tbs_uplink(ref_params.replace(h=640.0), urban, tight)
    high = coverage_tbs_uplink(ref_params.replace(h=800.0), urban, tight)
    assert low.regime is high.regime is PowerRegime.COND_1L
    assert low.value == pytest.approx(high.value, abs=1e-6)


def test_result_reports_regime(ref_params, urban, quick_quad) -> None:
    result = coverage("TBS_UL", ref_params.replace(h=300.0), urban, quick_quad)
    assert result.regime is PowerRegime.COND_6
    assert 0.0 <= result.value <= 1.0
    assert result.est_error >= 0.0


def test_tbs_laplace_transform_matches_simulation(ref_params, urban, quick_quad) -> None:
    s = ref_params.gamma_u_T / ref_params.rho_b
    mean, std_error = estimate_laplace_tbs(s, ref_params, urban, n_trials=200_000, seed=5)
    assert laplace_tbs_uplink(s, ref_params, urban, quick_quad) == pytest.approx(mean, abs=3 * std_error + 1e-4)


def test_analytic_coverage_agrees_with_simulation(ref_params, urban, quick_quad) -> None:
    estimates = estimate_many(list(Metric), ref_params, urban, n_trials=200_000, seed=11)
    for metric, estimate in estimates.items():
        result = coverage(metric, ref_params, urban, quick_quad)
        assert result.value == pytest.approx(estimate.mean, abs=0.005 + result.est_error), metric


THRESHOLD_FIELDS = {
    Metric.TBS_UL: "gamma_u_T",
    Metric.ABS_UL: "gamma_u_A",
    Metric.TSUE_DL: "gamma_d_T",
    Metric.ASD_DL: "gamma_d_A",
}


@pytest.mark.parametrize("metric", list(Metric))
def test_coverage_never_rises_with_the_threshold(ref_params, urban, quick_quad, metric: Metric) -> None:
    values = [
        coverage(metric, ref_params.replace(**{THRESHOLD_FIELDS[metric]: from_db(db)}), urban, quick_quad).value
        for db in (-10.0, -5.0, 0.0, 5.0, 10.0)
    ]
    assert all(later <= earlier + 1e-6 for earlier, later in zip(values, values[1:])), values
    assert values[0] > values[-1]


def _perturbed_params(ref_params, rng: np.random.Generator):
    """Reference parameters with every scalar scaled by U(0.5, 1.5), redrawn until valid."""
    while True:
        scaled = {
            name: getattr(ref_params, name) * rng.uniform(0.5, 1.5)
            for name in ("R1", "R2", "d", "h", "rho_b", "rho_d", "P_max", "P_t", "P_a", "sigma2",
                         "gamma_u_T", "gamma_u_A", "gamma_d_T", "gamma_d_A")
        }
        for name in ("alpha_b", "alpha_L", "alpha_N"):
            scaled[name] = max(2.0, getattr(ref_params, name) * rng.uniform(0.5, 1.5))
        scaled["m_L"] = int(rng.integers(1, 6))
        try:
            return ref_params.replace(**scaled)
        except InvalidValue:
            continue


def test_analytic_coverage_agrees_with_simulation_at_random_points(ref_params, quick_quad) -> None:
    rng = np.random.default_rng(2024)
    for index in range(10):
        p = _perturbed_params(ref_params, rng)
        env = environment(1, MODEL1_ENVIRONMENTS[index % len(MODEL1_ENVIRONMENTS)])
        estimates = estimate_many(list(Metric), p, env, n_trials=50_000, seed=100 + index)
        for metric, estimate in estimates.items():
            result = coverage(metric, p, env, quick_quad)
            # 40 comparisons share one seed family, so allow four standard errors each
            bound = 4 * estimate.std_error + result.est_error + 1e-4
            assert abs(result.value - estimate.mean) <= bound, (index, metric, p)


RAYLEIGH_QUAD = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-12, max_depth=60)


def test_asd_downlink_reduces_to_rayleigh_closed_form(ref_params, urban) -> None:
    p = ref_params.replace(m_L=1, m_N=1)

    def integrand(theta: float, z: float) -> float:
        d_a = float(ground_distance_to_tbs(z, theta, p)) ** p.alpha_b
        los = p_los(urban, p.h, z)
        value = 0.0
        for prob, eta, alpha in ((los, p.eta_L, p.alpha_L), (1 - los, p.eta_N, p.alpha_N)):
            s = p.gamma_d_A * z**alpha / (p.P_a * eta)
            value += prob * math.exp(-s * p.sigma2) * d_a / (d_a + s * p.P_t)
        return 2 * z / p.R2**2 / math.pi * value

    expected, _ = integrate.dblquad(integrand, *zd_support(p), 0.0, math.pi, epsabs=1e-13, epsrel=1e-11)
    assert coverage_asd_downlink(p, urban, RAYLEIGH_QUAD).value == pytest.approx(expected, abs=1e-8)


def test_abs_uplink_reduces_to_rayleigh_closed_form(ref_params, urban) -> None:
    p = ref_params.replace(m_L=1, m_N=1, h=625.0)
    low, high = zd_support(p)
    bounds = regime_boundaries(p)
    nodes, weights = np.polynomial.legendre.leggauss(64)

    expected = 0.0
    for state, zmax in ((LosState.LOS, bounds.zmax_L), (LosState.NLOS, bounds.zmax_N)):
        eta, alpha, _ = state.select(p)
        edges = [low] + ([zmax] if low < zmax < high else []) + [high]
        for a, b in zip(edges, edges[1:]):
            z = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            s = p.gamma_u_A * z**alpha / (eta * asd_tx_power(state, z, p))
            moments, _ = abs_interference_moments(s, 1, p, urban, RAYLEIGH_QUAD.tightened())
            los = p_los(urban, p.h, z)
            prob = los if state is LosState.LOS else 1.0 - los
            integrand = pdf_Zd(z, p) * prob * np.exp(-s * p.sigma2) * moments[:, 0]
            expected += 0.5 * (b - a) * float(weights @ integrand)

    assert coverage_abs_uplink(p, urban, RAYLEIGH_QUAD).value == pytest.approx(expected, abs=1e-8)
