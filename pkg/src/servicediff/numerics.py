"""Root finding, quadrature and differencing used by every solver.

All routines operate on vectorised callables: a function handed to
:func:`integrate` or :func:`invert_decreasing` receives a 1-D float array
and must return an array of the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InvalidParameterError, NumericalFailure

__all__ = [
    "NumericsConfig",
    "DEFAULT_NUMERICS",
    "bisect",
    "invert_increasing",
    "invert_decreasing",
    "integrate",
    "integrate_segments",
    "integrate_clustered",
    "central_difference",
]


@dataclass(frozen=True)
class NumericsConfig:
    """Tolerances and grid sizes shared by all computations.

    Parameters
    ----------
    quad_tol : float
        Absolute tolerance of the adaptive Simpson rule over a whole
        integration range.
    root_tol : float
        Absolute tolerance on the argument of every bisection.
    grid : int
        Sampling density for exported curves.
    oracle_grid : int
        Number of types used by the brute-force choice simulation.
    check_grid : int
        Grid used to validate the regularity assumptions.
    capacity_tol : float
        Residual allowed in the capacity equation.
    bracket_limit : float
        Largest shadow price tried while expanding a bracket.
    fd_step : float
        Step for derivatives that are filled in by central differences.
    ill_conditioned_density : float
        Densities below this value make the virtual valuation undefined.
    """

    quad_tol: float = 1e-10
    root_tol: float = 1e-10
    grid: int = 512
    oracle_grid: int = 100_000
    check_grid: int = 2048
    capacity_tol: float = 1e-8
    bracket_limit: float = 1e9
    fd_step: float = 1e-6
    ill_conditioned_density: float = 1e-12
    max_depth: int = field(default=50, repr=False)

    def __post_init__(self):
        for name in ("quad_tol", "root_tol", "capacity_tol", "bracket_limit",
                     "fd_step", "ill_conditioned_density"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.grid < 64:
            raise InvalidParameterError("grid must be at least 64")
        if self.oracle_grid < 1000:
            raise InvalidParameterError("oracle_grid must be at least 1000")
        if self.check_grid < 16:
            raise InvalidParameterError("check_grid must be at least 16")

    def with_(self, **changes) -> "NumericsConfig":
        return replace(self, **changes)


DEFAULT_NUMERICS = NumericsConfig()


def bisect(func, lo, hi, tol=1e-10, max_iter=400):
    """Find a sign change of a scalar monotone ``func`` on ``[lo, hi]``.

    Runs until the bracket is narrower than ``tol`` or cannot shrink any
    further in floating point. Returns the midpoint of the final bracket.
    """
    flo = func(lo)
    fhi = func(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NumericalFailure(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            break
        fmid = func(mid)
        if fmid == 0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _iterations(width, tol):
    # guard bits keep the bisection noise well below the quadrature tolerance
    return max(1, math.ceil(math.log2(max(width, tol) / tol))) + 10


def invert_increasing(func, y, lo, hi, tol=1e-10):
    """Vectorised inverse of a nondecreasing ``func`` on ``[lo, hi]``.

    Values of ``y`` outside ``[func(lo), func(hi)]`` are clamped to the
    corresponding endpoint.
    """
    y = np.asarray(y, dtype=float)
    a = np.full(y.shape, float(lo))
    b = np.full(y.shape, float(hi))
    for _ in range(_iterations(hi - lo, tol)):
        mid = 0.5 * (a + b)
        below = func(mid) < y
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


def invert_decreasing(func, y, lo, hi, tol=1e-10):
    """Vectorised inverse of a nonincreasing ``func`` on ``[lo, hi]``."""
    return invert_increasing(lambda x: -func(x), -np.asarray(y, dtype=float),
                             lo, hi, tol)


def integrate_segments(func, edges, tol=1e-10, max_depth=50):
    """Integrate ``func`` over each consecutive pair of ``edges``.

    Adaptive Simpson quadrature refined breadth-first, so each refinement
    pass makes a single vectorised call to ``func``. The absolute
    tolerance is shared between segments in proportion to their width.

    Returns an array with one integral per segment.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise InvalidParameterError("need at least two edges")
    a = edges[:-1].copy()
    b = edges[1:].copy()
    n = a.size
    total_width = float(np.sum(np.abs(b - a)))
    out = np.zeros(n)
    if total_width == 0.0:
        return out

    live = b != a
    owner = np.nonzero(live)[0]
    a, b = a[live], b[live]
    if a.size == 0:
        return out
    m = 0.5 * (a + b)
    vals = func(np.concatenate([a, m, b]))
    fa, fm, fb = np.split(vals, 3)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    seg_tol = tol * np.abs(b - a) / total_width

    for depth in range(max_depth + 1):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = np.split(func(np.concatenate([lm, rm])), 2)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        done = np.abs(delta) <= 15.0 * seg_tol
        if depth == max_depth:
            # jumps off the breakpoints stall refinement at width ~2**-50;
            # their residual contribution is below double precision
            done[:] = True
        np.add.at(out, owner[done], (left + right + delta / 15.0)[done])
        keep = ~done
        if not np.any(keep):
            break
        a, m, b = a[keep], m[keep], b[keep]
        fa, fm, fb = fa[keep], fm[keep], fb[keep]
        lm, rm, flm, frm = lm[keep], rm[keep], flm[keep], frm[keep]
        left, right = left[keep], right[keep]
        half_tol = 0.5 * seg_tol[keep]
        owner = owner[keep]
        a, m, b, fa, fm, fb, whole = (
            np.concatenate([a, m]), np.concatenate([lm, rm]), np.concatenate([m, b]),
            np.concatenate([fa, fm]), np.concatenate([flm, frm]),
            np.concatenate([fm, fb]), np.concatenate([left, right]),
        )
        seg_tol = np.concatenate([half_tol, half_tol])
        owner = np.concatenate([owner, owner])
        if a.size > 4_000_000:
            raise NumericalFailure("adaptive Simpson refinement exploded")
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("integrand is not finite on the integration range")
    return out


def integrate(func, lo, hi, tol=1e-10, breakpoints=(), cluster=True):
    """Integral of ``func`` over ``[lo, hi]``, split at ``breakpoints``.

    Breakpoints outside the open interval are ignored. Splitting at the
    kinks of a piecewise-smooth integrand restores fast convergence.
    With ``cluster`` each piece is mapped through a smoothstep so that
    square-root type behaviour at a piece's ends becomes smooth.
    """
    if hi <= lo:
        return 0.0
    inner = sorted({float(x) for x in breakpoints if lo < x < hi})
    edges = np.array([lo, *inner, hi])
    if cluster:
        return float(np.sum(integrate_clustered(func, edges, tol)))
    return float(np.sum(integrate_segments(func, edges, tol)))


def integrate_clustered(func, edges, tol=1e-10):
    """Per-segment integrals after the substitution ``x = a + (b-a) s(u)``.

    ``s(u) = 3u**2 - 2u**3`` has zero slope at both ends, so the
    transformed integrand vanishes there and ``func`` is never needed
    exactly at an edge.
    """
    edges = np.asarray(edges, dtype=float)
    a = edges[:-1]
    width = edges[1:] - edges[:-1]
    n = a.size

    def transformed(u):
        idx = np.minimum(np.floor(u).astype(int), n - 1)
        t = u - idx
        x = a[idx] + width[idx] * t * t * (3.0 - 2.0 * t)
        jac = width[idx] * 6.0 * t * (1.0 - t)
        out = np.zeros_like(u)
        live = jac > 0
        if np.any(live):
            out[live] = func(x[live]) * jac[live]
        return out

    return integrate_segments(transformed, np.arange(n + 1, dtype=float), tol)


def central_difference(func, step=1e-6):
    """Derivative of a function on ``[0, 1]`` by differencing.

    Central differences in the interior, one-sided within ``step`` of an
    endpoint so ``func`` is never evaluated outside its domain.
    """

    def derivative(x):
        x = np.asarray(x, dtype=float)
        lo = np.clip(x - step, 0.0, 1.0)
        hi = np.clip(x + step, 0.0, 1.0)
        return (func(hi) - func(lo)) / (hi - lo)

    return derivative
