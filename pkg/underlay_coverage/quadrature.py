"""
Adaptive quadrature used by the analytic coverage formulas.

Everything funnels through :func:`scipy.integrate.quad_vec` so a single pass
integrates a whole vector of quantities (several ``s`` values, derivative
orders or LOS states) at once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import NDArray
from scipy.integrate import quad_vec

from .errors import InvalidValue, QuadratureFailure

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Panel = tuple[float, float]

# quad_vec subdivision budget per unit of max_depth
_INTERVALS_PER_LEVEL = 50
_GL_START_NODES = 8
_GL_MAX_NODES = 1024


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for every integral of one coverage evaluation."""

    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    max_depth: int = 30

    def __post_init__(self) -> None:
        if not self.rel_tol > 0:
            raise InvalidValue("rel_tol", "rel_tol > 0 required")
        if not self.abs_tol > 0:
            raise InvalidValue("abs_tol", "abs_tol > 0 required")
        if isinstance(self.max_depth, bool) or not isinstance(self.max_depth, int) or self.max_depth < 1:
            raise InvalidValue("max_depth", "integer max_depth >= 1 required")

    def tightened(self) -> "QuadratureSpec":
        """One order tighter, for integrals nested inside another one."""
        return replace(self, rel_tol=self.rel_tol / 10.0, abs_tol=self.abs_tol / 10.0)

    @property
    def limit(self) -> int:
        return _INTERVALS_PER_LEVEL * self.max_depth

    def tolerance(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


def integrate(
    f: Callable[[float], FloatArray],
    a: float,
    b: float,
    quad: QuadratureSpec,
    what: str,
) -> tuple[FloatArray, float]:
    """Integrate a (vector-valued) function over ``[a, b]``.

    Returns the integral and the max-norm error estimate.
    """
    result, error, info = quad_vec(
        f,
        a,
        b,
        epsabs=quad.abs_tol,
        epsrel=quad.rel_tol,
        norm="max",
        limit=quad.limit,
        full_output=True,
    )
    if not info.success:
        scale = float(np.max(np.abs(result))) if np.size(result) else 0.0
        raise QuadratureFailure(what, float(error), quad.tolerance(scale))
    return np.atleast_1d(np.asarray(result, dtype=float)), float(error)


def integrate_panels(
    f: Callable[[float], FloatArray],
    panels: Iterable[Panel],
    quad: QuadratureSpec,
    what: str,
) -> tuple[FloatArray, float]:
    """Sum of :func:`integrate` over consecutive panels; empty panels are skipped."""
    total: FloatArray | None = None
    error = 0.0
    for low, high in panels:
        if not high > low:
            continue
        value, err = integrate(f, low, high, quad, what)
        total = value if total is None else total + value
        error += err
    if total is None:
        raise QuadratureFailure(what, float("nan"), quad.abs_tol)
    return total, error


def integrate_nested(
    f: Callable[[float, float], FloatArray],
    outer_panels: Iterable[Panel],
    inner_upper: Callable[[float], float],
    quad: QuadratureSpec,
    what: str,
) -> tuple[FloatArray, float]:
    """``sum over panels of int dz int_0^{inner_upper(z)} f(z, w) dw``.

    The inner rule runs one order tighter than the outer one. Its error
    estimate rides along as an extra vector component so the outer rule
    integrates it into the reported bound.
    """
    inner_quad = quad.tightened()

    def outer(z: float) -> FloatArray:
        upper = inner_upper(z)
        if not upper > 0:
            return np.append(np.zeros_like(np.ravel(f(z, 0.0))), 0.0)
        value, err = integrate(lambda w: np.ravel(f(z, w)), 0.0, upper, inner_quad, what)
        return np.append(value, err)

    combined, outer_error = integrate_panels(outer, outer_panels, quad, what)
    return combined[:-1], outer_error + abs(float(combined[-1]))


def panel_edges(low: float, high: float, breakpoints: Sequence[float] = ()) -> list[Panel]:
    """Split ``[low, high]`` at the breakpoints that fall strictly inside it."""
    inner = sorted({b for b in breakpoints if low < b < high})
    edges = [low, *inner, high]
    return list(zip(edges[:-1], edges[1:]))


def gauss_legendre(
    g: Callable[[FloatArray], tuple[FloatArray, float]],
    panels: Sequence[Panel],
    quad: QuadratureSpec,
    what: str,
) -> tuple[float, float]:
    """Composite Gauss-Legendre with node doubling until two levels agree.

    ``g`` receives every node of every panel at once and returns the
    integrand values together with an error bound on them.
    """
    panels = [(low, high) for low, high in panels if high > low]
    previous: float | None = None
    estimate = change = float("nan")
    n_nodes = _GL_START_NODES
    for level in range(quad.max_depth):
        nodes, weights = leggauss(n_nodes)
        xs = np.concatenate([0.5 * (high - low) * nodes + 0.5 * (high + low) for low, high in panels])
        ws = np.concatenate([0.5 * (high - low) * weights for low, high in panels])
        values, value_error = g(xs)
        estimate = float(np.dot(ws, values))
        integrand_error = value_error * float(np.sum(ws))
        if previous is not None:
            change = abs(estimate - previous)
            logger.debug("%s: %d nodes/panel, estimate %.12g, change %.3e", what, n_nodes, estimate, change)
            if change <= quad.tolerance(estimate) + 2.0 * integrand_error:
                return estimate, change + integrand_error
        previous = estimate
        if n_nodes >= _GL_MAX_NODES or level + 1 >= quad.max_depth:
            break
        n_nodes *= 2
    raise QuadratureFailure(what, change, quad.tolerance(estimate))
