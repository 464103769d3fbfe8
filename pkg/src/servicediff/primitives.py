"""Market primitives: user type distributions and quality models.

A market is described by a distribution of user types on ``[0, 1]`` and
a quality model ``(v, w)`` over congestion levels ``q`` in ``[0, 1]``:

* ``v(q)`` is the fraction of a user's value realised at congestion ``q``,
  with ``v(0) = 1`` and ``v(1) = 0``;
* ``w(q)`` is the capacity one unit of demand needs to be served at
  congestion ``q``, decreasing with ``w(1) = 0``.

From these, :func:`derive_virtual_functions` builds the virtual valuation
``G(theta) = theta - (1 - F(theta)) / f(theta)`` and the virtual capacity
``h(q) = w'(q) / v'(q)`` after checking they are regular enough for the
closed-form solvers.

Every function stored here is vectorised: it accepts and returns numpy
arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import AssumptionViolation, IllConditionedError, InvalidParameterError
from .numerics import (
    DEFAULT_NUMERICS,
    NumericsConfig,
    bisect,
    central_difference,
    invert_decreasing,
    invert_increasing,
)

__all__ = [
    "INFINITY",
    "ValuationDistribution",
    "QualityModel",
    "VirtualFunctions",
    "make_power_distribution",
    "make_distribution",
    "canonical_quality",
    "inverse_congestion_quality",
    "linear_quality",
    "make_quality",
    "payg_transform",
    "derive_virtual_functions",
]

Func = Callable[[np.ndarray], np.ndarray]

#: Marker for unbounded endpoint values (``h(0)``, ``w(0)``, ``C_bar``).
#: IEEE infinity already orders above every finite float.
INFINITY = math.inf

_E1 = math.exp(-1.0)


def _vectorised(func: Func) -> Func:
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(func(x), dtype=float) * np.ones_like(x)
    wrapped.__wrapped__ = func
    return wrapped


@dataclass(frozen=True)
class ValuationDistribution:
    """Distribution of user types on ``[0, 1]``.

    ``pdf`` and ``cdf`` must be vectorised. Use :func:`make_power_distribution`
    or :func:`make_distribution` rather than constructing this directly.
    """

    pdf: Func
    cdf: Func
    kind: str = "custom"
    alpha: Optional[float] = None

    def quantile(self, u, tol=1e-12):
        """Inverse CDF by bisection (closed form for the power family)."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.kind == "power":
            return u ** (1.0 / self.alpha)
        return invert_increasing(self.cdf, u, 0.0, 1.0, tol)

    def __repr__(self):
        if self.kind == "power":
            return f"ValuationDistribution(power, alpha={self.alpha!r})"
        return f"ValuationDistribution({self.kind})"


def make_power_distribution(alpha: float) -> ValuationDistribution:
    """The family ``F(theta) = theta**alpha``; ``alpha = 1`` is uniform."""
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"alpha must be a number, got {alpha!r}") from None
    if not (alpha > 0 and math.isfinite(alpha)):
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")

    def cdf(theta):
        return np.power(np.asarray(theta, dtype=float), alpha)

    def pdf(theta):
        theta = np.asarray(theta, dtype=float)
        if alpha == 1.0:
            return np.ones_like(theta)
        with np.errstate(divide="ignore"):
            return alpha * np.power(theta, alpha - 1.0)

    return ValuationDistribution(pdf=pdf, cdf=cdf, kind="power", alpha=alpha)


def make_distribution(pdf: Func, cdf: Func, *, check_grid: int = 2048,
                      tol: float = 1e-6) -> ValuationDistribution:
    """Wrap a user-supplied density/CDF pair after basic sanity checks.

    The pair must satisfy ``F(0) = 0``, ``F(1) = 1``, ``F`` nondecreasing
    and ``f >= 0``; ``F`` is compared against a cumulative trapezoid of
    ``f`` on ``check_grid`` interior points to within ``tol``.
    """
    pdf, cdf = _vectorised(pdf), _vectorised(cdf)
    if abs(cdf(np.array([0.0]))[0]) > tol or abs(cdf(np.array([1.0]))[0] - 1.0) > tol:
        raise InvalidParameterError("CDF must satisfy F(0)=0 and F(1)=1")
    grid = np.linspace(0.0, 1.0, check_grid + 2)[1:-1]
    F = cdf(grid)
    f = pdf(grid)
    if np.any(np.diff(F) < -tol) or np.any(f < 0) or not np.all(np.isfinite(f)):
        raise InvalidParameterError("density must be nonnegative and CDF nondecreasing")
    cum = F[0] + np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(grid))])
    if np.max(np.abs(cum - F)) > max(tol, 1e-3):
        raise InvalidParameterError("density does not integrate to the CDF")
    return ValuationDistribution(pdf=pdf, cdf=cdf, kind="custom")


@dataclass(frozen=True)
class QualityModel:
    """Satisfaction discount ``v`` and unit implied capacity ``w``.

    Derivatives that are not supplied are filled by central differences.
    """

    v: Func
    dv: Func
    w: Func
    dw: Func
    kind: str = "custom"

    def __repr__(self):
        return f"QualityModel({self.kind})"


def canonical_quality() -> QualityModel:
    """Normalised exponential discount with quadratic implied capacity.

    ``v(q) = (exp(-q) - exp(-1)) / (1 - exp(-1))`` and ``w(q) = (1 - q)**2``.
    """
    scale = 1.0 - _E1

    def v(q):
        return (np.exp(-np.asarray(q, dtype=float)) - _E1) / scale

    def dv(q):
        return -np.exp(-np.asarray(q, dtype=float)) / scale

    def w(q):
        return (1.0 - np.asarray(q, dtype=float)) ** 2

    def dw(q):
        return -2.0 * (1.0 - np.asarray(q, dtype=float))

    return QualityModel(v=v, dv=dv, w=w, dw=dw, kind="canonical")


def linear_quality() -> QualityModel:
    """``v(q) = 1 - q`` with quadratic implied capacity ``w(q) = (1 - q)**2``."""

    def v(q):
        return 1.0 - np.asarray(q, dtype=float)

    def dv(q):
        return -np.ones_like(np.asarray(q, dtype=float))

    def w(q):
        return (1.0 - np.asarray(q, dtype=float)) ** 2

    def dw(q):
        return -2.0 * (1.0 - np.asarray(q, dtype=float))

    return QualityModel(v=v, dv=dv, w=w, dw=dw, kind="linear")


def inverse_congestion_quality() -> QualityModel:
    """Canonical discount with ``w(q) = 1/q - 1``.

    The capacity needed for an uncongested class is unbounded, so ``h(0)``
    and the abundance threshold are infinite while ``h(1) > 0``.
    """
    base = canonical_quality()

    def w(q):
        q = np.asarray(q, dtype=float)
        with np.errstate(divide="ignore"):
            return 1.0 / q - 1.0

    def dw(q):
        q = np.asarray(q, dtype=float)
        with np.errstate(divide="ignore"):
            return -1.0 / (q * q)

    return QualityModel(v=base.v, dv=base.dv, w=w, dw=dw, kind="inverse")


def make_quality(v: Func, w: Func, dv: Optional[Func] = None, dw: Optional[Func] = None,
                 *, kind: str = "custom", check_grid: int = 2048,
                 fd_step: float = 1e-6) -> QualityModel:
    """Build and validate a quality model from user functions."""
    v, w = _vectorised(v), _vectorised(w)
    dv = _vectorised(dv) if dv is not None else central_difference(v, fd_step)
    dw = _vectorised(dw) if dw is not None else central_difference(w, fd_step)
    model = QualityModel(v=v, dv=dv, w=w, dw=dw, kind=kind)
    validate_quality(model, check_grid)
    return model


def validate_quality(model: QualityModel, check_grid: int = 2048) -> None:
    """Check the normalisation and monotonicity of ``v`` and ``w``."""
    ends = np.array([0.0, 1.0])
    v0, v1 = model.v(ends)
    if abs(v0 - 1.0) > 1e-9 or abs(v1) > 1e-9:
        raise InvalidParameterError("satisfaction discount must have v(0)=1 and v(1)=0")
    w1 = model.w(np.array([1.0]))[0]
    if abs(w1) > 1e-9:
        raise InvalidParameterError("implied capacity must vanish at q=1")
    q = np.linspace(0.0, 1.0, check_grid + 2)[1:-1]
    vq, wq = model.v(q), model.w(q)
    if np.any(np.diff(vq) >= 0):
        raise InvalidParameterError("satisfaction discount must be strictly decreasing")
    if np.any(np.diff(wq) > 1e-12) or np.any(wq < 0):
        raise InvalidParameterError("implied capacity must be nonnegative and decreasing")


def payg_transform(quality: QualityModel) -> QualityModel:
    """Pay-as-you-go reduction: replace ``w`` by ``w * v``.

    Under usage-based pricing the capacity a class consumes scales with the
    traffic ``v(q)`` its users send, so the flat-rate machinery applies
    unchanged to the product.
    """
    v, dv, w, dw = quality.v, quality.dv, quality.w, quality.dw

    def w_new(q):
        q = np.asarray(q, dtype=float)
        vq = v(q)
        # w may be infinite where v is exactly one (q = 0)
        with np.errstate(invalid="ignore"):
            return np.where(vq == 0.0, 0.0, w(q) * vq)

    def dw_new(q):
        q = np.asarray(q, dtype=float)
        with np.errstate(invalid="ignore"):
            return dw(q) * v(q) + w(q) * dv(q)

    model = QualityModel(v=v, dv=dv, w=w_new, dw=dw_new, kind="payg-transformed")
    validate_quality(model)
    return model


@dataclass(frozen=True)
class VirtualFunctions:
    """Virtual valuation and virtual capacity of a validated market.

    Attributes
    ----------
    theta0 : float
        Unique zero of the virtual valuation.
    h_at_0, h_at_1 : float
        One-sided limits of the virtual capacity; ``h_at_0`` may be
        :data:`INFINITY`.
    w_at_0 : float
        Unit capacity of the uncongested class, possibly infinite.
    """

    dist: ValuationDistribution
    quality: QualityModel
    theta0: float
    h_at_0: float
    h_at_1: float
    w_at_0: float
    numerics: NumericsConfig = field(default=DEFAULT_NUMERICS, repr=False)

    def G(self, theta):
        """Virtual valuation; raises where the density is numerically zero."""
        theta = np.asarray(theta, dtype=float)
        f = self.dist.pdf(theta)
        if np.any(f < self.numerics.ill_conditioned_density):
            raise IllConditionedError("density is numerically zero; virtual valuation undefined")
        return theta - (1.0 - self.dist.cdf(theta)) / f

    def G_inv(self, y):
        """Inverse of ``G`` on ``[theta0, 1]``; clamps outside ``[0, G(1)]``."""
        return invert_increasing(self.G, y, self.theta0, 1.0, self.numerics.root_tol)

    def h(self, q):
        """Virtual capacity ``w'(q) / v'(q)``."""
        q = np.asarray(q, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.quality.dw(q) / self.quality.dv(q)

    def h_inv(self, z):
        """Extended inverse of ``h``.

        Equal to the true inverse on ``[h(1), h(0)]``, zero above ``h(0)``,
        and one below ``h(1)`` (used for excluded types).
        """
        z = np.asarray(z, dtype=float)
        out = invert_decreasing(self._h_interior, z, 0.0, 1.0, self.numerics.root_tol)
        out = np.where(z >= self.h_at_0, 0.0, out)
        return np.where(z <= self.h_at_1, 1.0, out)

    def _h_interior(self, q):
        # bisection never lands on the endpoints, but keep the limits finite
        q = np.clip(q, 1e-300, 1.0)
        return self.h(q)


def _one_sided_limit(func, point, direction):
    steps = 10.0 ** -np.arange(3, 13)
    values = func(point + direction * steps)
    if not np.all(np.isfinite(values)):
        return INFINITY
    # divergent sequences keep growing by orders of magnitude
    if values[-1] > 1e6 and values[-1] > 100.0 * values[0]:
        return INFINITY
    return float(values[-1])


def _endpoint(func, point, direction):
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = func(np.array([point]))[0]
        if np.isfinite(direct):
            return float(direct)
        return _one_sided_limit(func, point, direction)


def derive_virtual_functions(dist: ValuationDistribution, quality: QualityModel,
                             numerics: NumericsConfig = DEFAULT_NUMERICS) -> VirtualFunctions:
    """Locate ``theta0`` and validate the regularity of ``G`` and ``h``.

    Raises :class:`AssumptionViolation` when ``G`` has no sign change on
    ``(0, 1)``, is not strictly increasing above its zero, or when ``h`` is
    not decreasing, all checked on ``numerics.check_grid`` points.
    """
    n = numerics.check_grid
    grid = np.linspace(0.0, 1.0, n + 2)[1:-1]
    f = dist.pdf(grid)
    F = dist.cdf(grid)
    ok = f >= numerics.ill_conditioned_density
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(ok, grid - (1.0 - F) / np.where(ok, f, 1.0), -np.inf)
    if not np.all(np.isfinite(g[ok])):
        raise AssumptionViolation("virtual valuation", "G is not finite on the check grid")
    if not (g[0] < 0 < g[-1]):
        raise AssumptionViolation("virtual valuation", "G has no sign change on (0, 1)")

    positive = np.nonzero(g > 0)[0]
    first = positive[0]
    if np.any(g[first:] <= 0):
        raise AssumptionViolation("virtual valuation", "G has more than one zero on (0, 1)")

    def G_scalar(t):
        ft = dist.pdf(np.array([t]))[0]
        if ft < numerics.ill_conditioned_density:
            return -np.inf
        return t - (1.0 - dist.cdf(np.array([t]))[0]) / ft

    lo = grid[first - 1] if first > 0 else grid[0]
    theta0 = bisect(G_scalar, float(lo), float(grid[first]), numerics.root_tol * 1e-3)
    upper = grid[grid > theta0]
    if np.any(np.diff(g[-upper.size:]) <= 0):
        raise AssumptionViolation("virtual valuation",
                                  "G is not strictly increasing above its zero")

    with np.errstate(divide="ignore", invalid="ignore"):
        hq = quality.dw(grid) / quality.dv(grid)
    if not np.all(np.isfinite(hq)):
        raise AssumptionViolation("virtual capacity", "h is not finite on (0, 1)")
    if np.any(np.diff(hq) > 1e-12 * np.maximum(1.0, np.abs(hq[1:]))):
        raise AssumptionViolation("virtual capacity", "h is not decreasing on (0, 1)")
    if np.any(hq < -1e-12):
        raise AssumptionViolation("virtual capacity", "h must be nonnegative")

    def h(q):
        with np.errstate(divide="ignore", invalid="ignore"):
            return quality.dw(q) / quality.dv(q)

    h0 = _endpoint(h, 0.0, 1.0)
    h1 = max(_endpoint(h, 1.0, -1.0), 0.0)
    w0 = _endpoint(quality.w, 0.0, 1.0)
    return VirtualFunctions(dist=dist, quality=quality, theta0=float(theta0),
                            h_at_0=h0, h_at_1=h1, w_at_0=w0, numerics=numerics)
