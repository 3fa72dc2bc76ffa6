"""
📡 Underlay Coverage
Coverage probabilities of an aerial base station sharing spectrum with a
terrestrial cell, computed analytically and checked by simulation.

Usage:
    from underlay_coverage import build_params, default_config, environment, coverage

    params = build_params(default_config())
    urban = environment(1, "urban")
    result = coverage("ABS_UL", params.replace(h=400.0), urban)
    print(result.value, result.est_error, result.regime.label)
"""

from .analytic import (
    CoverageResult,
    Metric,
    coverage,
    coverage_abs_uplink,
    coverage_asd_downlink,
    coverage_tbs_uplink,
    coverage_tsue_downlink,
    laplace_abs_uplink_deriv,
    laplace_tbs_uplink,
)
from .errors import (
    ConfigError,
    CoverageError,
    DomainError,
    InvalidValue,
    MissingKey,
    PrecisionLoss,
    QuadratureFailure,
)
from .montecarlo import McEstimate, estimate_coverage, estimate_many, estimate_no_fading
from .params import (
    MODEL1_ENVIRONMENTS,
    AerialEnvironment,
    SystemParams,
    build_params,
    default_config,
    environment,
    from_db,
    from_dbm,
    load_config,
    regime_boundaries,
)
from .power import PowerRegime, classify_regime
from .quadrature import QuadratureSpec
from .sweep import CoverageSweep, SweepRow, SweepSpec, best_height

__version__ = "0.3.0"
__author__ = "UnderlayCov"
__all__ = [
    "AerialEnvironment",
    "ConfigError",
    "CoverageError",
    "CoverageResult",
    "CoverageSweep",
    "DomainError",
    "InvalidValue",
    "MODEL1_ENVIRONMENTS",
    "McEstimate",
    "Metric",
    "MissingKey",
    "PowerRegime",
    "PrecisionLoss",
    "QuadratureFailure",
    "QuadratureSpec",
    "SweepRow",
    "SweepSpec",
    "SystemParams",
    "best_height",
    "build_params",
    "classify_regime",
    "coverage",
    "coverage_abs_uplink",
    "coverage_asd_downlink",
    "coverage_tbs_uplink",
    "coverage_tsue_downlink",
    "default_config",
    "environment",
    "estimate_coverage",
    "estimate_many",
    "estimate_no_fading",
    "from_db",
    "from_dbm",
    "laplace_abs_uplink_deriv",
    "laplace_tbs_uplink",
    "load_config",
    "regime_boundaries",
]
