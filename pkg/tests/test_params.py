"""Parameter loading, unit conversion and regime boundaries."""

from __future__ import annotations

import math
import pathlib

import pytest

from underlay_coverage import (
    ConfigError,
    InvalidValue,
    MissingKey,
    build_params,
    default_config,
    environment,
    load_config,
    regime_boundaries,
)
from underlay_coverage.params import (
    MODEL1_ENVIRONMENTS,
    ChannelModel,
    from_db,
    from_dbm,
    to_db,
    to_dbm,
)


def test_reference_config_converts_to_linear_units(ref_params) -> None:
    assert ref_params.rho_b == pytest.approx(10 ** -10.5, rel=1e-12)
    assert ref_params.rho_d == pytest.approx(1e-8, rel=1e-12)
    assert ref_params.P_max == pytest.approx(0.1, rel=1e-12)
    assert ref_params.eta_L == 1.0
    assert ref_params.eta_N == pytest.approx(0.01, rel=1e-12)
    assert ref_params.m_L == 5 and ref_params.m_N == 1
    assert ref_params.sigma2 == pytest.approx(1e-13, rel=1e-12)


@pytest.mark.parametrize("dbm", [-100.0, -75.0, -50.0, 0.0, 20.0, 40.0])
def test_dbm_and_db_round_trip(dbm: float) -> None:
    assert to_dbm(from_dbm(dbm)) == pytest.approx(dbm, rel=1e-12, abs=1e-12)
    assert to_db(from_db(dbm)) == pytest.approx(dbm, rel=1e-12, abs=1e-12)


def test_cell_radius_must_exceed_stadium_radius() -> None:
    raw = default_config() | {"r2_m": 150.0, "r1_m": 100.0}
    with pytest.raises(InvalidValue) as excinfo:
        build_params(raw)
    assert excinfo.value.name == "R1"
    assert "R1 > R2 required" in str(excinfo.value)


def test_missing_key_is_reported_by_name() -> None:
    raw = default_config()
    del raw["sigma2_dbm"]
    with pytest.raises(MissingKey) as excinfo:
        build_params(raw)
    assert excinfo.value.name == "sigma2_dbm"


def test_unknown_key_is_rejected() -> None:
    with pytest.raises(InvalidValue, match="unknown key"):
        build_params(default_config() | {"frequency_ghz": 2.0})


@pytest.mark.parametrize("value", [2.5, True, "5"])
def test_fading_orders_must_be_integers(value) -> None:
    with pytest.raises(InvalidValue) as excinfo:
        build_params(default_config() | {"m_los": value})
    assert excinfo.value.name == "m_los"


def test_integral_float_fading_order_is_accepted() -> None:
    assert build_params(default_config() | {"m_los": 3.0}).m_L == 3


def test_stadium_must_fit_inside_cell() -> None:
    with pytest.raises(InvalidValue) as excinfo:
        build_params(default_config() | {"d_m": 450.0})
    assert excinfo.value.name == "d"


@pytest.mark.parametrize(
    "overrides",
    [
        {"alpha_los": 4.0, "alpha_nlos": 2.0},
        {"alpha_los": 4.0, "alpha_nlos": 2.0, "eta_nlos_db": -1.0},
    ],
)
def test_nlos_cap_distance_may_not_exceed_los_one(overrides: dict) -> None:
    # no uplink case covers an NLOS cap that binds after the LOS one
    with pytest.raises(InvalidValue) as excinfo:
        build_params(default_config() | overrides)
    assert excinfo.value.name == "P_max"


def test_replace_validates_unless_told_otherwise(ref_params) -> None:
    assert ref_params.replace(h=250.0).h == 250.0
    with pytest.raises(InvalidValue):
        ref_params.replace(d=5000.0)
    assert ref_params.replace(d=5000.0, validate=False).d == 5000.0


def test_reference_regime_boundaries(ref_params) -> None:
    bounds = regime_boundaries(ref_params)
    assert bounds.zmax_L == pytest.approx(10 ** 2.8, rel=1e-12)
    assert bounds.zmax_L == pytest.approx(630.96, abs=0.01)
    assert bounds.zmax_N == pytest.approx(10 ** 1.25, rel=1e-12)
    assert bounds.hcrit_L == pytest.approx(622.982, abs=1e-3)
    assert bounds.hcrit_N == 0.0
    assert bounds.hcrit_N < bounds.zmax_N < bounds.hcrit_L < bounds.zmax_L


def test_unit_ratio_gives_unit_cap_distance(ref_params) -> None:
    assert regime_boundaries(ref_params.replace(P_max=ref_params.rho_d)).zmax_L == pytest.approx(1.0, rel=1e-12)


def test_cap_distance_equal_to_stadium_radius_gives_zero_height(ref_params) -> None:
    p_max = ref_params.R2 ** ref_params.alpha_N * ref_params.rho_d / ref_params.eta_N
    bounds = regime_boundaries(ref_params.replace(P_max=p_max))
    assert bounds.zmax_N == pytest.approx(ref_params.R2, rel=1e-12)
    assert bounds.hcrit_N == pytest.approx(0.0, abs=1e-3)


def test_boundaries_grow_with_power_cap(ref_params) -> None:
    previous = regime_boundaries(ref_params)
    for p_max_dbm in (21.0, 25.0, 30.0, 40.0):
        current = regime_boundaries(ref_params.replace(P_max=from_dbm(p_max_dbm)))
        for name in ("zmax_L", "zmax_N", "hcrit_L", "hcrit_N"):
            assert getattr(current, name) >= getattr(previous, name)
        previous = current


def test_environment_presets_match_published_constants() -> None:
    expected = {
        "suburban": (4.88, 0.43),
        "urban": (9.6117, 0.1581),
        "dense-urban": (11.95, 0.136),
        "high-rise-urban": (27.23, 0.08),
    }
    assert MODEL1_ENVIRONMENTS == tuple(expected)
    for name, (c, b) in expected.items():
        env = environment(1, name)
        assert (env.c, env.b, env.model) == (c, b, ChannelModel.MODEL1)
    model2 = environment(2, "urban")
    assert (model2.c, model2.b) == (0.6, 0.11)


def test_environment_errors() -> None:
    with pytest.raises(InvalidValue, match="env_name"):
        environment(1, "rural")
    with pytest.raises(InvalidValue, match="env_model"):
        environment(3)
    with pytest.raises(InvalidValue):
        environment(1, c=1.0)
    with pytest.raises(InvalidValue):
        environment(1, c=-1.0, b=0.2)
    assert environment(2, c=0.5, b=0.2).name == "custom"


def test_load_config_flattens_sections(tmp_path: pathlib.Path) -> None:
    raw = default_config()
    geometry_keys = ("r1_m", "r2_m", "d_m", "h_m")
    env_keys = ("env_model", "env_name")
    lines = ["[geometry]"]
    lines += [f"{key} = {raw[key]!r}" for key in geometry_keys]
    lines += ["", "[environment]", "env_model = 1", 'env_name = "suburban"', "", "[radio]"]
    lines += [f"{key} = {value!r}" for key, value in raw.items() if key not in geometry_keys + env_keys]
    path = tmp_path / "nested.toml"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    params, env = load_config(path)
    assert params.h == 400.0
    assert env.name == "suburban"


def test_use_defaults_fills_missing_keys(tmp_path: pathlib.Path) -> None:
    path = tmp_path / "short.toml"
    path.write_text("use_defaults = true\nh_m = 650.0\nenv_name = \"dense-urban\"\n", encoding="utf-8")
    params, env = load_config(path)
    assert params.h == 650.0
    assert params.R1 == 500.0
    assert env.name == "dense-urban"


def test_custom_environment_from_config(tmp_path: pathlib.Path) -> None:
    path = tmp_path / "custom.toml"
    path.write_text("use_defaults = true\nenv_c = 5.0\nenv_b = 0.3\n", encoding="utf-8")
    _, env = load_config(path)
    assert (env.c, env.b, env.name) == (5.0, 0.3, "custom")


def test_partial_config_without_defaults_is_rejected(tmp_path: pathlib.Path) -> None:
    path = tmp_path / "partial.toml"
    path.write_text("h_m = 400.0\n", encoding="utf-8")
    with pytest.raises(MissingKey):
        load_config(path)


def test_malformed_and_missing_files_raise_config_error(tmp_path: pathlib.Path) -> None:
    bad = tmp_path / "bad.toml"
    bad.write_text("h_m = = 3\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_math_helpers_agree_with_closed_forms() -> None:
    assert from_dbm(-75.0) == pytest.approx(3.1622776601683795e-11, rel=1e-12)
    assert math.isclose(from_db(-20.0), 0.01)
