"""Shared fixtures for the coverage engine tests."""

from __future__ import annotations

import pathlib
from typing import Any, Callable

import pytest

from underlay_coverage import QuadratureSpec, SystemParams, build_params, default_config, environment
from underlay_coverage.params import AerialEnvironment


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    return repr(value)


def write_toml(path: pathlib.Path, values: dict[str, Any]) -> pathlib.Path:
    lines = [f"{key} = {_toml_value(value)}" for key, value in values.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def ref_params() -> SystemParams:
    return build_params(default_config())


@pytest.fixture
def urban() -> AerialEnvironment:
    return environment(1, "urban")


@pytest.fixture
def suburban() -> AerialEnvironment:
    return environment(1, "suburban")


@pytest.fixture
def quick_quad() -> QuadratureSpec:
    return QuadratureSpec(rel_tol=1e-5, abs_tol=1e-8)


@pytest.fixture
def config_file(tmp_path: pathlib.Path) -> Callable[..., pathlib.Path]:
    """Factory writing the reference parameter set (plus overrides) to a TOML file."""

    def _write(name: str = "params.toml", drop: tuple[str, ...] = (), **overrides: Any) -> pathlib.Path:
        values = default_config()
        values.update(overrides)
        for key in drop:
            values.pop(key, None)
        return write_toml(tmp_path / name, values)

    return _write
