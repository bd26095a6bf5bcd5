"""
Integration primitives.

 * :func:`.stieltjes_pl` - ``int f dZ`` against a piecewise linear path, exact to rounding
 * :func:`.wiener_grid_integral` - midpoint discretisation of a Wiener integral against a sampled Brownian path
 * :func:`.riemann_weighted_pl` - the time-inverted ``int d/dx f_s(1/u) u^-3 P(u) du`` term, exact per linear piece
 * :func:`.graded_time_quadrature` - ``int F(s) ds`` for integrands with an integrable power singularity at the
   left end, on a graded mesh with mesh doubling

The path integrators accept a scalar ``s`` or an array of evaluation times, together with per-``s`` limits
(e.g. the upper limit ``s`` of ``Y3``), and return a float or an array accordingly. Work arrays are built in
row chunks bounded by :attr:`privex.rosenblatt.settings.CHUNK_ELEMENTS`.
"""
import logging
from typing import Callable, Optional, Tuple, Union

import numpy as np

from privex.rosenblatt import settings
from privex.rosenblatt.exceptions import DomainError, NoConvergence
from privex.rosenblatt.kernels import hurst_of, pow_diff, segment_integral_weighted, HurstLike
from privex.rosenblatt.objects import QuadSpec
from privex.rosenblatt.paths import PiecewiseLinearPath

__all__ = [
    'stieltjes_pl', 'wiener_grid_integral', 'riemann_weighted_pl', 'graded_mesh', 'graded_nodes',
    'graded_time_quadrature'
]

log = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
_TOL = 1e-12


def _prepare(s, x0, x1) -> Tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    scalar = np.ndim(s) == 0 and np.ndim(x0) == 0 and np.ndim(x1) == 0
    s, x0, x1 = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float)) for v in (s, x0, x1)))
    return s.astype(float), x0.astype(float), x1.astype(float), scalar


def _ret(out: np.ndarray, scalar: bool):
    return float(out[0]) if scalar else out


def _check_cover(P: PiecewiseLinearPath, x0: np.ndarray, x1: np.ndarray, name: str):
    if len(x0) and not P.covers(float(x0.min()), float(x1.max()), tol=_TOL):
        log.warning("%s: [%s, %s] outside of path '%s' on [%s, %s]", name, x0.min(), x1.max(), P.label,
                    P.start, P.end)
        raise DomainError(f"{name}: interval [{x0.min()}, {x1.max()}] not inside the domain of '{P.label}'")


def _window(P: PiecewiseLinearPath, lo: float, hi: float) -> slice:
    """Slice of the segments of ``P`` that intersect ``[lo, hi]``"""
    i0 = max(int(np.searchsorted(P.times, lo, side='right')) - 1, 0)
    i1 = min(int(np.searchsorted(P.times, hi, side='left')), len(P.times) - 1)
    return slice(i0, max(i1, i0))


def _row_chunks(rows: int, cols: int):
    step = max(1, settings.CHUNK_ELEMENTS // max(cols, 1))
    for r in range(0, rows, step):
        yield slice(r, min(r + step, rows))


def _clipped(P: PiecewiseLinearPath, s, shift, x0, x1, name: str):
    """
    Common set-up of the path integrators: validated arrays, the live rows (non-empty intervals) and the
    segment window touched by any of them.
    """
    s, x0, x1, scalar = _prepare(s, x0, x1)
    live = x1 > x0
    x1 = np.where(live, x1, x0)
    top = s + shift
    if np.any(x1[live] > top[live] + _TOL * np.maximum(1.0, np.abs(top[live]))):
        raise DomainError(f"{name} requires x1 <= s + shift")
    _check_cover(P, x0[live], x1[live], name)
    win = _window(P, float(x0[live].min()), float(x1[live].max())) if live.any() else slice(0, 0)
    return s, x0, x1, top, scalar, win


def stieltjes_pl(s: ArrayLike, shift: float, Z: PiecewiseLinearPath, x0: ArrayLike, x1: ArrayLike,
                 p: HurstLike) -> ArrayLike:
    """
    ``int_{x0}^{x1} (s + shift - x) ** (H/2 - 1) dZ(x)`` for a piecewise linear ``Z``: the sum over the segments
    of ``slope * segment_integral_f``. An empty interval (``x1 <= x0``) gives 0.

    :raises DomainError: when ``x1 > s + shift`` or the interval leaves ``Z``'s domain
    """
    H = hurst_of(p)
    s, x0, x1, top, scalar, win = _clipped(Z, s, shift, x0, x1, 'stieltjes_pl')
    out = np.zeros_like(s)
    a, b = Z.times[win], Z.times[win.start + 1:win.stop + 1]
    m = Z.slopes[win]
    if not len(a):
        return _ret(out, scalar)
    for sl in _row_chunks(len(s), len(a)):
        lo = np.clip(a[None, :], x0[sl, None], x1[sl, None])
        hi = np.clip(b[None, :], x0[sl, None], x1[sl, None])
        base = np.maximum(top[sl, None] - hi, 0.0)
        out[sl] = (2.0 / H) * (pow_diff(base, hi - lo, H / 2) @ m)
    return _ret(out, scalar)


def wiener_grid_integral(s: ArrayLike, shift: float, B: PiecewiseLinearPath, x0: ArrayLike, x1: ArrayLike,
                         p: HurstLike, rule: str = 'midpoint') -> ArrayLike:
    """
    Discretised Wiener integral ``int_{x0}^{x1} (s + shift - x) ** (H/2 - 1) dB(x)``: the sum over the grid cells of
    ``f(midpoint) * dB``.

    Cells closer to the singularity ``s + shift`` than their own width use the exact cell average of ``f`` instead
    of the midpoint value. ``rule="exact"`` integrates against the linear interpolant of ``B``
    (same as :func:`.stieltjes_pl`).
    """
    if rule == 'exact':
        return stieltjes_pl(s, shift, B, x0, x1, p)
    if rule != 'midpoint':
        raise ValueError(f"unknown rule '{rule}' (expected 'midpoint' or 'exact')")
    H = hurst_of(p)
    s, x0, x1, top, scalar, win = _clipped(B, s, shift, x0, x1, 'wiener_grid_integral')
    out = np.zeros_like(s)
    a, b = B.times[win], B.times[win.start + 1:win.stop + 1]
    m = B.slopes[win]
    if not len(a):
        return _ret(out, scalar)
    h = H / 2 - 1
    for sl in _row_chunks(len(s), len(a)):
        lo = np.clip(a[None, :], x0[sl, None], x1[sl, None])
        hi = np.clip(b[None, :], x0[sl, None], x1[sl, None])
        width = hi - lo
        dist = np.maximum(top[sl, None] - hi, 0.0)
        near = dist < width
        with np.errstate(divide='ignore', invalid='ignore'):
            mid = np.where(near, 1.0, top[sl, None] - 0.5 * (lo + hi)) ** h * width
            avg = (2.0 / H) * pow_diff(dist, width, H / 2)
        out[sl] = np.where(near, avg, np.where(width > 0, mid, 0.0)) @ m
    return _ret(out, scalar)


def riemann_weighted_pl(s: ArrayLike, P: PiecewiseLinearPath, u0: ArrayLike, u1: ArrayLike,
                        p: HurstLike) -> ArrayLike:
    """
    ``int_{u0}^{u1} (1 - H/2) (s - 1/u) ** (H/2 - 2) u ** -3 P(u) du`` for a piecewise linear ``P`` and
    ``u0 <= u1 < 0``: the sum of :func:`.segment_integral_weighted` over the linear pieces of ``P``.

    :raises DomainError: when ``u1 >= 0``, ``s <= 0`` or the interval leaves ``P``'s domain
    """
    H = hurst_of(p)
    s, u0, u1, scalar = _prepare(s, u0, u1)
    live = u1 > u0
    if np.any(u1[live] >= 0) or np.any(u0 >= 0):
        raise DomainError("riemann_weighted_pl requires u0 <= u1 < 0")
    if np.any(s <= 0):
        raise DomainError("riemann_weighted_pl requires s > 0")
    u1 = np.where(live, u1, u0)
    _check_cover(P, u0[live], u1[live], 'riemann_weighted_pl')
    out = np.zeros_like(s)
    if not live.any():
        return _ret(out, scalar)
    win = _window(P, float(u0[live].min()), float(u1[live].max()))
    a, b = P.times[win], P.times[win.start + 1:win.stop + 1]
    m = P.slopes[win]
    c = P.values[win] - m * a
    if not len(a):
        return _ret(out, scalar)
    for sl in _row_chunks(len(s), len(a)):
        lo = np.clip(a[None, :], u0[sl, None], u1[sl, None])
        hi = np.clip(b[None, :], u0[sl, None], u1[sl, None])
        out[sl] = segment_integral_weighted(s[sl, None], lo, hi, c[None, :], m[None, :], H).sum(axis=1)
    return _ret(out, scalar)


def graded_mesh(t0: float, t1: float, J: int, kappa: float) -> np.ndarray:
    """
    Edges ``t0 + (t1 - t0) * (j / J) ** kappa``, ``j = 0..J``, clustered at ``t0`` for ``kappa > 1``.

        >>> graded_mesh(0.0, 1.0, 2, 2.0).tolist()
        [0.0, 0.25, 1.0]

    """
    w = np.arange(J + 1) / J
    return t0 + (t1 - t0) * w ** kappa


def graded_nodes(t0: float, t1: float, J: int, kappa: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights of the composite midpoint rule in the mapped variable ``w``, where
    ``s = t0 + (t1 - t0) * w ** kappa``.
    """
    w = (np.arange(J) + 0.5) / J
    nodes = t0 + (t1 - t0) * w ** kappa
    weights = (t1 - t0) * kappa * w ** (kappa - 1) / J
    return nodes, weights


def graded_time_quadrature(F: Callable[[np.ndarray], np.ndarray], t: float, spec: Optional[QuadSpec] = None,
                           singular_exponent: float = 0.0, t0: float = 0.0):
    """
    ``int_{t0}^{t} F(s) ds`` for ``F`` with ``F(s) ~ (s - t0) ** singular_exponent`` near ``t0``.

    ``F`` receives an array of nodes and returns one value per node, or a ``(nodes, k)`` array for ``k``
    integrands sharing the nodes. The mesh is graded with exponent ``spec.grading_exponent / (1 +
    singular_exponent)`` (ungraded when ``singular_exponent`` is 0) and doubled until the estimate changes by at
    most ``spec.target_rel_err`` relative to its largest component.

        >>> round(graded_time_quadrature(lambda s: s ** -0.25, 1.0, singular_exponent=-0.25), 3)
        1.333

    :raises DomainError: when ``singular_exponent <= -1`` or ``t < t0``
    :raises NoConvergence: when the node count would exceed ``spec.max_points``
    """
    spec = QuadSpec() if spec is None else spec
    if singular_exponent <= -1:
        raise DomainError(f"singular_exponent={singular_exponent} must be > -1 (integrable singularity)")
    t, t0 = float(t), float(t0)
    if t < t0:
        raise DomainError(f"graded_time_quadrature: t={t} < t0={t0}")
    if t == t0:
        return 0.0
    kappa = 1.0 if singular_exponent == 0 else spec.grading_exponent / (1.0 + singular_exponent)
    kappa = max(kappa, 1.0)

    def _rule(J):
        nodes, weights = graded_nodes(t0, t, J, kappa)
        vals = np.asarray(F(nodes), dtype=float)
        return weights @ vals

    J = spec.points
    prev = _rule(J)
    while 2 * J <= spec.max_points:
        J *= 2
        cur = _rule(J)
        scale = float(np.max(np.abs(cur)))
        change = float(np.max(np.abs(cur - prev)))
        if change <= spec.target_rel_err * scale or scale == 0.0:
            return float(cur) if np.ndim(cur) == 0 else cur
        prev = cur
    log.warning("graded_time_quadrature on [%s, %s] did not settle below %s with %d nodes", t0, t,
                spec.target_rel_err, J)
    raise NoConvergence(f"no convergence to {spec.target_rel_err} on [{t0}, {t}] within {spec.max_points} nodes")
