"""
Assembly of the Rosenblatt approximation and of its grid-Brownian reference.

The Rosenblatt process splits into three squared-integral components, ``X = X1 + 2*X2 + X3``:

 * ``X1 = cH * int_0^t (Y1_s)^2 ds`` with ``Y1_s = int_{-inf}^0 (s - x)^{H/2-1} dB(x)``, the past
 * ``X3 = cH * int_0^t (Y3_s)^2 ds`` with ``Y3_s = int_0^s (s + eps - x)^{H/2-1} dB1(x)``, the present
 * ``X2 = cH * int_0^t Y1_s Y3_s ds``, the cross term

The approximation replaces ``B1, B2, B3`` by transport paths ``Z1, Z2, Z3`` whose Stieltjes integrals are exact
(:mod:`privex.rosenblatt.integrate`), and ``Y1`` by its four-term transport form. The reference keeps the
Brownian drivers (six-term form of ``Y1``) with a much smaller shift ``eps_ref``.

The raw squares carry their expectation; :attr:`.RosenblattRun.trace` holds it so that
:attr:`.RosenblattRun.X_centered` is the centred double Wiener-Ito integral.

**Basic usage**:

    >>> from privex.rosenblatt import validate_params
    >>> from privex.rosenblatt.process import assemble_run
    >>> p = validate_params(H=0.75, beta=0.44, gamma=0.03, n=16, bm_mesh=256, output_grid_size=4)
    >>> run = assemble_run(None, p, seed=1)
    >>> float(run.X[0])
    0.0

"""
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from privex.helpers import DictObject
from scipy import integrate

from privex.rosenblatt import settings, streams
from privex.rosenblatt.exceptions import DomainError, IntensityError
from privex.rosenblatt.integrate import stieltjes_pl, wiener_grid_integral, riemann_weighted_pl, \
    graded_time_quadrature
from privex.rosenblatt.kernels import kernel_f, hurst_of, normalizing_constant
from privex.rosenblatt.objects import Params, QuadSpec, RosenblattRun
from privex.rosenblatt.paths import PiecewiseLinearPath, GridPath, DriverBundle, simulate_driver_bundle, \
    sup_distance
from privex.rosenblatt.transport import couple_transport, simulate_transport

__all__ = [
    'eval_Y1_approx', 'eval_Y1_reference', 'eval_Y3', 'build_components', 'build_reference', 'assemble_run',
    'y1_variance', 'y3_variance', 'far_past_variance', 'approx_trace', 'reference_trace', 'dropped_tail_bound',
    'weighted_sup_error', 'y3_sup_error', 'simulate_transports',
]

log = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _eps(p: Params, eps: Optional[float]) -> float:
    return p.epsilon if eps is None else float(eps)


def _ret(v):
    return float(v) if np.ndim(v) == 0 else np.asarray(v)


def eval_Y1_approx(s: ArrayLike, Z2: PiecewiseLinearPath, Z3: PiecewiseLinearPath, p: Params,
                   eps: Optional[float] = None) -> ArrayLike:
    """
    The transport approximation of ``Y1_s``::

        f_s(a) Z2(a) - int_{1/a}^{-eps} d/dx f_s(1/u) u^-3 Z3(u) du
                     + int_a^{-eps} f_s dZ2 + int_{-eps}^0 f_s(x - eps) dZ2

    Intervals that are empty for the given ``a`` and ``eps`` are clipped away.
    """
    e, a = _eps(p, eps), p.a
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainError("eval_Y1_approx requires s > 0")
    split = max(-e, a)
    r = kernel_f(s, a, p) * Z2(a)
    r = r - riemann_weighted_pl(s, Z3, 1.0 / a, max(-e, 1.0 / a), p)
    r = r + stieltjes_pl(s, 0.0, Z2, a, split, p)
    r = r + stieltjes_pl(s, e, Z2, split, 0.0, p)
    return _ret(r)


def eval_Y1_reference(s: ArrayLike, D: DriverBundle, p: Params, eps: Optional[float] = None,
                      rule: str = 'midpoint', terms: bool = False):
    """
    The grid-Brownian ``Y1_s`` in its six-term form: the four terms of :func:`.eval_Y1_approx` on ``(B2, B3)`` plus
    ``-int_{-eps}^{-delta} d/dx f_s(1/u) u^-3 B3(u) du`` and ``int_{-eps}^0 [f_s(x) - f_s(x - eps)] dB2(x)``.

    The remaining piece of the singular term on ``[-delta, 0]`` is dropped (see :func:`.dropped_tail_bound`).
    With ``terms=True`` the six terms are returned as rows of an array instead of their sum.
    """
    e, a, delta = _eps(p, eps), p.a, D.delta
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainError("eval_Y1_reference requires s > 0")
    split, inv_a = max(-e, a), 1.0 / p.a
    B2, B3 = D.B2, D.B3
    near_plain = wiener_grid_integral(s, 0.0, B2, split, 0.0, p, rule=rule)
    near_shifted = wiener_grid_integral(s, e, B2, split, 0.0, p, rule=rule)
    parts = [
        kernel_f(s, a, p) * B2(a),
        -riemann_weighted_pl(s, B3, inv_a, max(-e, inv_a), p),
        -riemann_weighted_pl(s, B3, max(-e, inv_a), max(-delta, -e, inv_a), p),
        wiener_grid_integral(s, 0.0, B2, a, split, p, rule=rule),
        near_plain - near_shifted,
        near_shifted,
    ]
    if terms:
        return np.array(parts)
    return _ret(np.sum(parts, axis=0))


def eval_Y3(s: ArrayLike, path: PiecewiseLinearPath, p: Params, lower: float = 0.0, primed: bool = False,
            eps: Optional[float] = None, rule: str = 'midpoint') -> ArrayLike:
    """
    ``int_lower^s (s + eps - x)^{H/2-1} dZ(x)``, or with ``primed=True`` the shift-free
    ``int_lower^{s - eps} (s - x)^{H/2-1} dZ(x)``.

    A :class:`.GridPath` (Brownian) is integrated with :func:`.wiener_grid_integral`, any other piecewise linear
    path exactly with :func:`.stieltjes_pl`. An empty interval gives 0.
    """
    e = _eps(p, eps)
    s = np.asarray(s, dtype=float)
    shift, upper = (0.0, s - e) if primed else (e, s)
    if isinstance(path, GridPath):
        return wiener_grid_integral(s, shift, path, lower, upper, p, rule=rule)
    return stieltjes_pl(s, shift, path, lower, upper, p)


def _check_grid(t_grid, p: Params) -> np.ndarray:
    t = np.asarray(p.t_grid if t_grid is None else t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise DomainError("t_grid must be strictly increasing, start at 0 and hold at least 2 points")
    if t[-1] > p.T * (1 + 1e-12):
        raise DomainError(f"t_grid ends at {t[-1]} beyond the horizon T={p.T}")
    return t


def _cumulative(F, edges, spec: QuadSpec, singular_exponent: float, start: float = 0.0,
                width: Optional[int] = None) -> np.ndarray:
    """``int_start^{edge_k} F(s) ds`` for each edge; the first cell is graded at ``start``"""
    acc = 0.0 if width is None else np.zeros(width)
    prev, out = start, []
    for edge in edges:
        edge = max(float(edge), start)
        if edge > prev:
            se = singular_exponent if prev == start else 0.0
            acc = acc + graded_time_quadrature(F, edge, spec, se, t0=prev)
            prev = edge
        out.append(np.array(acc, dtype=float))
    return np.array(out)


def build_components(t_grid, Z1: PiecewiseLinearPath, Z2: PiecewiseLinearPath, Z3: PiecewiseLinearPath, p: Params,
                     cH: float, primed: bool = False, quad: Optional[QuadSpec] = None,
                     eps: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ``(X1, X2, X3)`` of the transport approximation on ``t_grid``, each scaled by ``cH``.

    All three integrands share the quadrature nodes. The cross term uses ``Y3`` with the shift, or the primed
    variant with ``primed=True``.
    """
    t = _check_grid(t_grid, p)
    spec = QuadSpec(points=p.time_quad_points) if quad is None else quad
    e = _eps(p, eps)

    def F(s):
        y1 = eval_Y1_approx(s, Z2, Z3, p, eps=e)
        y3 = eval_Y3(s, Z1, p, eps=e)
        y3x = eval_Y3(s, Z1, p, eps=e, primed=True) if primed else y3
        return np.column_stack((y1 * y1, y1 * y3x, y3 * y3))

    acc = _cumulative(F, t, spec, p.H - 1, width=3) * cH
    return acc[:, 0], acc[:, 1], acc[:, 2]


def y1_variance(s: ArrayLike, p: Params, cut: float, shift: float = 0.0, split: Optional[float] = None) -> ArrayLike:
    """
    Variance of ``f_s(c) B(c) + int_c^{split} f_s dB + int_{split}^0 f_s(x - shift) dB(x)``, ``c = cut``, for a
    Brownian ``B`` vanishing at 0. This is ``E (Y1_s)^2`` for the Brownian counterpart of the approximation
    (``cut = -1/eps``, ``shift = split = -eps``) and for the reference (``cut = -1/delta``, ``shift = 0``).

    Writing ``B(c) = -int_c^0 dB`` the whole expression is one Wiener integral of ``g - f_s(c)``, whose squared norm
    has a closed form.
    """
    H = hurst_of(p)
    s = np.asarray(s, dtype=float)
    c, e = float(cut), float(shift)
    xs = -e if split is None else float(split)
    q1 = H - 1
    A1 = ((s - xs) ** q1 - (s - c) ** q1) / (1 - H)
    A2 = ((s + e) ** q1 - (s + e - xs) ** q1) / (1 - H)
    I1 = (2 / H) * ((s - c) ** (H / 2) - (s - xs) ** (H / 2))
    I2 = (2 / H) * ((s + e - xs) ** (H / 2) - (s + e) ** (H / 2))
    fc = (s - c) ** (H / 2 - 1)
    return _ret(A1 + A2 - 2 * fc * (I1 + I2) + fc * fc * abs(c))


def y3_variance(s: ArrayLike, p: Params, eps: float) -> ArrayLike:
    """``E (Y3_s)^2 = (eps^{H-1} - (s + eps)^{H-1}) / (1 - H)`` under a Brownian ``B1``"""
    H = hurst_of(p)
    s = np.asarray(s, dtype=float)
    return _ret((eps ** (H - 1) - (s + eps) ** (H - 1)) / (1 - H))


def far_past_variance(s: ArrayLike, p: Params, eps: Optional[float] = None) -> ArrayLike:
    """
    Variance of the part of ``Y1_s`` which the transport approximation drops, the past beyond ``x = -1/eps``:
    ``(s + 1/eps)^{H-1} / (1 - H) + (s + 1/eps)^{H-2} / eps``.
    """
    H, e = hurst_of(p), _eps(p, eps)
    r = np.asarray(s, dtype=float) + 1.0 / e
    return _ret(r ** (H - 1) / (1 - H) + r ** (H - 2) / e)


def dropped_tail_bound(p: Params, delta: float) -> float:
    """
    ``E|int_{-delta}^0 d/dx f_s(1/u) u^-3 B3(u) du| <= (1 - H/2) sqrt(2/pi) delta^{(1-H)/2} / ((1-H)/2)``, uniformly
    in ``s > 0``, the piece of the singular term not resolved by ``B3``.
    """
    H = hurst_of(p)
    return (1 - H / 2) * math.sqrt(2 / math.pi) * delta ** ((1 - H) / 2) / ((1 - H) / 2)


def _cumulative_quad(fn, edges, start: float = 0.0) -> np.ndarray:
    acc, prev, out = 0.0, start, []
    for edge in edges:
        edge = max(float(edge), start)
        if edge > prev:
            acc += integrate.quad(fn, prev, edge, limit=200)[0]
            prev = edge
        out.append(acc)
    return np.array(out)


def approx_trace(t_grid, p: Params, cH: float, eps: Optional[float] = None) -> np.ndarray:
    """Expectation of the raw approximation ``X1 + 2*X2 + X3`` when its transports are replaced by Brownian paths"""
    t = np.asarray(t_grid, dtype=float)
    e = _eps(p, eps)
    cut = min(-1.0 / e, p.a)
    split = max(-e, p.a)
    v1 = _cumulative_quad(lambda s: y1_variance(s, p, cut, shift=e, split=split), t)
    v3 = _cumulative_quad(lambda s: y3_variance(s, p, e), t)
    return cH * (v1 + v3)


def reference_trace(t_grid, p: Params, cH: float, eps_ref: float, delta: float) -> np.ndarray:
    """Expectation of the raw reference path built by :func:`.build_reference`"""
    t = np.asarray(t_grid, dtype=float)
    cut = min(-1.0 / delta, p.a)
    v1 = _cumulative_quad(lambda s: y1_variance(s, p, cut), t)
    v3 = _cumulative_quad(lambda s: y3_variance(s, p, eps_ref), np.maximum(t - eps_ref, 0.0))
    return cH * (v1 + v3)


def build_reference(t_grid, D: DriverBundle, p: Params, eps_ref: Optional[float] = None, cH: Optional[float] = None,
                    quad: Optional[QuadSpec] = None, rule: str = 'midpoint',
                    components: bool = False):
    """
    The reference path ``Xref = X1ref + 2*X2ref + X3ref`` on ``t_grid`` from the Brownian drivers of ``D``::

        X1ref = cH int_0^t (Y1_s)^2 ds
        X2ref = cH int_eps^t Y1_s Y3'_s ds
        X3ref = cH int_0^{t - eps} (Y3_s)^2 ds

    with ``eps = eps_ref`` (default ``eps_n / 8``). The remainder terms omitted by this decomposition are estimated
    separately by :func:`privex.rosenblatt.oracle.estimate_remainder`. With ``components=True`` the three
    components are returned as a tuple.

    :raises DomainError: when ``eps_ref > eps_n / 8``
    """
    t = _check_grid(t_grid, p)
    spec = QuadSpec(points=p.time_quad_points) if quad is None else quad
    e = p.epsilon / 8 if eps_ref is None else float(eps_ref)
    if e > p.epsilon / 8 * (1 + 1e-12) or e <= 0:
        raise DomainError(f"eps_ref={e} must be in (0, eps_n/8 = {p.epsilon / 8}]")
    cH = normalizing_constant(p).cH if cH is None else float(cH)

    def F1(s):
        y1 = eval_Y1_reference(s, D, p, eps=e, rule=rule)
        return y1 * y1

    def F2(s):
        return eval_Y1_reference(s, D, p, eps=e, rule=rule) * eval_Y3(s, D.B1, p, primed=True, eps=e, rule=rule)

    def F3(s):
        y3 = eval_Y3(s, D.B1, p, eps=e, rule=rule)
        return y3 * y3

    X1 = cH * _cumulative(F1, t, spec, p.H - 1)
    X2 = cH * _cumulative(F2, t, spec, 0.0, start=e)
    X3 = cH * _cumulative(F3, np.maximum(t - e, 0.0), spec, 0.0)
    if components:
        return X1, X2, X3
    return X1 + 2.0 * X2 + X3


def simulate_transports(D: DriverBundle, p: Params, seed: int, replicate: int = 0, coupled: bool = True,
                        block_mesh: Optional[float] = None) -> Tuple[PiecewiseLinearPath, ...]:
    """
    ``(Z1, Z2, Z3)`` for the drivers ``D``: coupled to ``(B1, B2, B3)`` by :func:`.couple_transport`, or independent
    transport paths on the same intervals when ``coupled=False``. ``Z2`` and ``Z3`` run backwards from 0.
    """
    n = p.n
    keys = [(s_id, replicate) for s_id in (streams.Z1, streams.Z2, streams.Z3)]
    if coupled:
        return (
            couple_transport(D.B1, n, block_mesh, seed, key=keys[0], label='Z1'),
            couple_transport(D.B2, n, block_mesh, seed, reverse=True, key=keys[1], label='Z2'),
            couple_transport(D.B3, n, block_mesh, seed, reverse=True, key=keys[2], label='Z3'),
        )
    return (
        simulate_transport(n, (D.B1.start, D.B1.end), seed, key=keys[0], label='Z1'),
        simulate_transport(n, (D.B2.start, D.B2.end), seed, reverse=True, key=keys[1], label='Z2'),
        simulate_transport(n, (D.B3.start, D.B3.end), seed, reverse=True, key=keys[2], label='Z3'),
    )


def assemble_run(t_grid, p: Params, seed: Optional[int] = None, with_reference: bool = False, replicate: int = 0,
                 coupled: bool = True, block_mesh: Optional[float] = None, eps_ref: Optional[float] = None,
                 primed: bool = False, quad: Optional[QuadSpec] = None, allow_large_n: bool = False,
                 remainder_reps: int = 0) -> RosenblattRun:
    """
    Full pipeline for one replicate: drivers, transports, components, assembly and (optionally) the reference.

    :param t_grid: output times starting at 0 (default: ``p.t_grid``)
    :param Params p: validated parameters
    :param int seed: master seed (default ``p.seed``)
    :param bool with_reference: also build the grid-Brownian reference from the same drivers
    :param int replicate: replicate index, part of every stream key
    :param bool coupled: couple the transports to the drivers (``False``: independent transports)
    :param float eps_ref: shift of the reference (default ``eps_n / 8``)
    :param bool primed: use the primed ``Y3`` in the cross term
    :param bool allow_large_n: lift the cap :attr:`.settings.MAX_INTENSITY` on ``n``
    :param int remainder_reps: when positive (and ``with_reference``), estimate the omitted remainder with this many
                               replicates and record it in the error budget
    :raises IntensityError: when ``n`` is above the cap
    """
    if p.n > settings.MAX_INTENSITY and not allow_large_n:
        raise IntensityError(f"n={p.n} exceeds the cap {settings.MAX_INTENSITY} (pass allow_large_n=True to lift it)")
    t = _check_grid(t_grid, p)
    seed = p.seed if seed is None else int(seed)
    kc = normalizing_constant(p)
    e_ref = p.epsilon / 8 if eps_ref is None else float(eps_ref)

    D = simulate_driver_bundle(p, seed=seed, replicate=replicate, delta=e_ref)
    Z1, Z2, Z3 = simulate_transports(D, p, seed, replicate, coupled=coupled, block_mesh=block_mesh)
    log.debug("replicate %d: drivers and transports ready (n=%d, switches=%d/%d/%d)", replicate, p.n,
              len(Z1.times) - 2, len(Z2.times) - 2, len(Z3.times) - 2)
    X1, X2, X3 = build_components(t, Z1, Z2, Z3, p, kc.cH, primed=primed, quad=quad)

    budget = DictObject(far_past_variance_T=far_past_variance(p.T, p))
    meta = DictObject(
        params=p.core(), seed=seed, replicate=replicate, coupled=coupled, primed=primed,
        epsilon=p.epsilon, alpha=p.alpha, alpha_hat=p.alpha_hat, cH=kc.cH, cH_rel_err=kc.cH_rel_err,
        block_mesh=block_mesh, seed_trace=[list(k) for k in D.seed_trace], error_budget=budget,
    )
    run = RosenblattRun(t_grid=t, X1=X1, X2=X2, X3=X3, trace=approx_trace(t, p, kc.cH), meta=meta)
    if not with_reference:
        return run

    Xref = build_reference(t, D, p, eps_ref=e_ref, cH=kc.cH, quad=quad)
    meta.update(eps_ref=e_ref, delta=D.delta)
    budget.y1_dropped_l1 = dropped_tail_bound(p, D.delta)
    if remainder_reps > 0:
        from privex.rosenblatt.oracle import estimate_remainder
        budget.remainder = dict(estimate_remainder(float(t[-1]), e_ref, p, reps=remainder_reps, seed=seed))
    return run.replace(Xref=Xref, ref_trace=reference_trace(t, p, kc.cH, e_ref, D.delta))


def weighted_sup_error(Z2: PiecewiseLinearPath, Z3: PiecewiseLinearPath, D: DriverBundle, p: Params,
                       s_grid=None, rule: str = 'midpoint') -> float:
    """``max_s s^{1-H/2} |Y1_s - Y1n_s|`` over ``s_grid`` (default: the positive points of ``p.t_grid``)"""
    s = np.asarray(p.t_grid[1:] if s_grid is None else s_grid, dtype=float)
    ref = eval_Y1_reference(s, D, p, eps=p.epsilon / 8, rule=rule)
    approx = eval_Y1_approx(s, Z2, Z3, p)
    return float(np.max(s ** (1 - p.H / 2) * np.abs(np.atleast_1d(ref - approx))))


def y3_sup_error(Z1: PiecewiseLinearPath, B1: GridPath, p: Params, s_grid=None,
                 rule: str = 'exact') -> Tuple[float, float]:
    """
    ``max_s |Y3_s(B1) - Y3_s(Z1)|`` over ``s_grid`` (both with the shift ``eps_n``), together with the pathwise
    bound ``2 * eps_n^{H/2-1} * sup|B1 - Z1|``.
    """
    s = np.asarray(p.t_grid[1:] if s_grid is None else s_grid, dtype=float)
    diff = eval_Y3(s, B1, p, rule=rule) - eval_Y3(s, Z1, p)
    bound = 2 * p.epsilon ** (p.H / 2 - 1) * sup_distance(B1, Z1, (0.0, float(s.max())))
    return float(np.max(np.abs(np.atleast_1d(diff)))), float(bound)
