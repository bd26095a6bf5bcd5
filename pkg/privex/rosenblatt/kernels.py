"""
Scalar parameters, deterministic kernels, tuning sequences and the closed-form antiderivatives used by every other
module of :mod:`privex.rosenblatt`.

All kernel functions accept numpy arrays and broadcast, so the integrators can evaluate many ``(s, segment)``
pairs in one call. The ``p`` argument of the kernel functions may be a :class:`.Params` instance or a bare Hurst
index, since the kernels only depend on ``H``.

**Basic usage**:

    >>> from privex.rosenblatt.kernels import validate_params, beta_range, normalizing_constant
    >>> beta_range(0.75)
    (0.4166666666666667, 0.5)
    >>> p = validate_params(H=0.75, beta=0.44, gamma=0.03, a=-1, T=1, n=64)
    >>> kc = normalizing_constant(p)
    >>> kc.cH_rel_err < 1e-4
    True

"""
import logging
import math
from typing import Union, Tuple, Mapping, Optional

import numpy as np
from scipy import integrate, special
from privex.helpers import empty, DictObject

from privex.rosenblatt import settings
from privex.rosenblatt.exceptions import HurstError, BetaError, GammaError, DomainError, IntensityError, \
    SingularKernel, DiagonalKernel, QuadBudgetExceeded, ParamError, MeshTooCoarse
from privex.rosenblatt.helpers import rs_cache
from privex.rosenblatt.objects import Params, KernelConstants

__all__ = [
    'HurstLike', 'hurst_of', 'validate_params', 'beta_range', 'epsilon_n', 'alpha_n', 'fbm_covariance', 'kernel_f',
    'pow_diff', 'segment_integral_f', 'segment_integral_weighted', 'rosenblatt_kernel_g',
    'rosenblatt_kernel_g_closed', 'kernel_increment', 'kernel_norm_sq', 'norm_tail_bound', 'normalizing_constant',
]

log = logging.getLogger(__name__)

HurstLike = Union[Params, float]

_PARAM_DEFAULTS = dict(a=-1.0, T=1.0, n=64, output_grid_size=16, time_quad_points=16, bm_mesh=2048, seed=0)


def hurst_of(p: HurstLike) -> float:
    """Extract the Hurst index from a :class:`.Params` or a plain number, checking ``1/2 < H < 1``"""
    H = float(p.H) if isinstance(p, Params) else float(p)
    if not (0.5 < H < 1.0):
        raise HurstError(f"H={H} violates 1/2 < H < 1")
    return H


def beta_range(H: HurstLike) -> Tuple[float, float]:
    """
    The admissible open interval for ``beta``: ``max((1-H/2)/(3-2H), (2-H)/(2+2H)) < beta < 1/2``.

        >>> beta_range(0.6)
        (0.4375, 0.5)

    """
    H = hurst_of(H)
    lo = max((1 - H / 2) / (3 - 2 * H), (2 - H) / (2 + 2 * H))
    return lo, 0.5


def validate_params(raw: Union[Mapping, Params] = None, **kwargs) -> Params:
    """
    Validate a candidate parameter set, returning a :class:`.Params` instance.

    Accepts a dict / :class:`.DictObject` / :class:`.Params`, keyword arguments, or both (keywords win)::

        >>> p = validate_params(dict(H=0.75, beta=0.44, gamma=0.03), n=32)
        >>> p.n
        32

    Keys which aren't parameters are kept in :attr:`.Params.raw_data`.

    :raises HurstError: ``H`` is outside ``(1/2, 1)``
    :raises BetaError: ``beta`` is outside the interval from :func:`.beta_range`
    :raises GammaError: ``gamma`` breaks ``0 < gamma < beta`` or ``beta + gamma < 1/2``
    :raises DomainError: ``a >= 0`` or ``T <= 0``
    :raises IntensityError: ``n < 1``
    :raises MeshTooCoarse: ``bm_mesh < 16``
    :raises ParamError: a required value is missing or a count is not positive
    """
    data = raw.core() if isinstance(raw, Params) else dict(raw if raw is not None else {})
    data.update(kwargs)
    missing = [k for k in ('H', 'beta', 'gamma') if empty(data.get(k))]
    if missing:
        raise ParamError(f"missing required parameter(s): {', '.join(missing)}")
    vals = {**_PARAM_DEFAULTS, **{k: v for k, v in data.items() if k in _PARAM_DEFAULTS and not empty(v)}}

    try:
        H, beta, gamma = float(data['H']), float(data['beta']), float(data['gamma'])
        a, T, n = float(vals['a']), float(vals['T']), int(vals['n'])
        ogs, tqp, mesh, seed = (int(vals[k]) for k in ('output_grid_size', 'time_quad_points', 'bm_mesh', 'seed'))
    except (TypeError, ValueError) as e:
        raise ParamError(f"parameter has the wrong type: {e}")

    hurst_of(H)
    lo, hi = beta_range(H)
    if not (lo < beta < hi):
        raise BetaError(f"beta={beta} is outside the admissible interval ({lo:.5f}, {hi}) for H={H}: "
                        f"beta must exceed the lower bound {lo:.5f}")
    if not (0 < gamma < beta):
        raise GammaError(f"gamma={gamma} violates 0 < gamma < beta={beta}")
    if not (beta + gamma < 0.5):
        raise GammaError(f"beta + gamma = {beta + gamma:.5f} violates beta + gamma < 1/2")
    if not a < 0:
        raise DomainError(f"a={a} violates a < 0")
    if not T > 0:
        raise DomainError(f"T={T} violates T > 0")
    if n < 1:
        raise IntensityError(f"n={n} violates n >= 1")
    if mesh < 16:
        raise MeshTooCoarse(f"bm_mesh={mesh} violates bm_mesh >= 16 (points per driver)")
    if ogs < 1:
        raise ParamError(f"output_grid_size={ogs} violates output_grid_size >= 1")
    if tqp < 16:
        raise ParamError(f"time_quad_points={tqp} violates time_quad_points >= 16")
    if not (0 <= seed < 2 ** 64):
        raise ParamError(f"seed={seed} violates 0 <= seed < 2**64")

    return Params(
        H=H, beta=beta, gamma=gamma, a=a, T=T, n=n, output_grid_size=ogs, time_quad_points=tqp, bm_mesh=mesh,
        seed=seed, raw_data=DictObject(data)
    )


def epsilon_n(n: int, p: Params) -> float:
    """The shift sequence ``eps_n = n ** (-beta / (1 - H/2))``, in ``(0, 1]``"""
    if n < 1:
        raise IntensityError(f"n={n} violates n >= 1")
    return float(n) ** (-p.beta / (1 - p.H / 2))


def alpha_n(n: int, p: Params, hat: bool = False) -> float:
    """
    The rate envelope ``alpha_n = n ** -(1/2 - beta) * ln(n) ** 2.5``. With ``hat=True``, ``beta`` is replaced by
    ``beta + gamma`` (the envelope of the assembled process).

    :raises IntensityError: when ``n < 2`` (the logarithm must be positive)
    """
    if n < 2:
        raise IntensityError(f"n={n} violates n >= 2 (alpha_n needs log(n) > 0)")
    b = p.beta + p.gamma if hat else p.beta
    return float(n) ** (-(0.5 - b)) * math.log(n) ** 2.5


def fbm_covariance(t, s, H: HurstLike):
    """Fractional Brownian motion covariance ``(t^2H + s^2H - |t-s|^2H) / 2``"""
    H = hurst_of(H)
    t, s = np.asarray(t, dtype=float), np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("fbm_covariance is defined for t, s >= 0")
    r = 0.5 * (t ** (2 * H) + s ** (2 * H) - np.abs(t - s) ** (2 * H))
    return float(r) if r.ndim == 0 else r


def kernel_f(s, x, p: HurstLike, deriv: bool = False):
    """
    The power kernel ``f_s(x) = (s - x) ** (H/2 - 1)``, or its x-derivative ``(1 - H/2) * (s - x) ** (H/2 - 2)``
    when ``deriv=True``.

    :raises SingularKernel: when any ``x >= s``
    """
    H = hurst_of(p)
    diff = np.asarray(s, dtype=float) - np.asarray(x, dtype=float)
    if np.any(diff <= 0):
        raise SingularKernel("kernel_f requires x < s")
    r = (1 - H / 2) * diff ** (H / 2 - 2) if deriv else diff ** (H / 2 - 1)
    return float(r) if r.ndim == 0 else r


def pow_diff(base, width, q: float):
    """
    ``(base + width) ** q - base ** q`` without cancellation, for ``base >= 0``, ``width >= 0``.

    Uses ``base ** q * expm1(q * log1p(width / base))`` whenever ``base > 0``, which stays accurate to rounding
    for the tiny segments of high-intensity transport paths.
    """
    base, width = np.asarray(base, dtype=float), np.asarray(width, dtype=float)
    pos = base > 0
    safe = np.where(pos, base, 1.0)
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        stable = safe ** q * np.expm1(q * np.log1p(width / safe))
        at_zero = np.where(width > 0, width, 1.0) ** q
    return np.where(pos, stable, np.where(width > 0, at_zero, 0.0))


def segment_integral_f(s, shift, x0, x1, p: HurstLike):
    """
    Exact ``int_{x0}^{x1} (s + shift - x) ** (H/2 - 1) dx = (2/H) [(s+shift-x0)^{H/2} - (s+shift-x1)^{H/2}]``.

    ``x1 = s + shift`` is allowed (integrable singularity).

    :raises DomainError: when ``x1 > s + shift`` or ``x0 > x1``
    """
    H = hurst_of(p)
    top = np.asarray(s, dtype=float) + np.asarray(shift, dtype=float)
    x0, x1 = np.asarray(x0, dtype=float), np.asarray(x1, dtype=float)
    base = top - x1
    if np.any(base < -1e-13 * np.maximum(1.0, np.abs(top))):
        raise DomainError("segment_integral_f requires x1 <= s + shift")
    width = x1 - x0
    if np.any(width < 0):
        raise DomainError("segment_integral_f requires x0 <= x1")
    r = (2.0 / H) * pow_diff(np.maximum(base, 0.0), width, H / 2)
    return float(r) if r.ndim == 0 else r


def segment_integral_weighted(s, u0, u1, c, m, p: HurstLike):
    """
    Exact ``int_{u0}^{u1} (1-H/2) (s - 1/u) ** (H/2-2) u ** -3 (c + m u) du`` over one linear piece
    ``P(u) = c + m u`` with ``u0 <= u1 < 0``.

    With ``x = 1/u`` this becomes ``int_{1/u1}^{1/u0} (1-H/2) (s-x)^{H/2-2} (c x + m) dx``, and writing
    ``c x + m = -c (s - x) + (c s + m)`` reduces it to the antiderivatives of ``(s-x)^{H/2-1}`` and ``(s-x)^{H/2-2}``.

    :raises DomainError: when ``u1 >= 0``, ``u0 > u1`` or ``s <= 0``
    """
    H = hurst_of(p)
    s, u0, u1 = np.asarray(s, dtype=float), np.asarray(u0, dtype=float), np.asarray(u1, dtype=float)
    c, m = np.asarray(c, dtype=float), np.asarray(m, dtype=float)
    if np.any(u1 >= 0):
        raise DomainError("segment_integral_weighted requires u1 < 0")
    if np.any(u0 > u1):
        raise DomainError("segment_integral_weighted requires u0 <= u1")
    if np.any(s <= 0):
        raise DomainError("segment_integral_weighted requires s > 0")
    base = s - 1.0 / u0
    width = (u1 - u0) / (u0 * u1)
    i_low = (2.0 / H) * pow_diff(base, width, H / 2)
    i_high = -pow_diff(base, width, H / 2 - 1) / (1 - H / 2)
    r = (1 - H / 2) * (-c * i_low + (c * s + m) * i_high)
    return float(r) if r.ndim == 0 else r


def rosenblatt_kernel_g(t: float, y1: float, y2: float, p: HurstLike, epsrel: float = 1e-8) -> float:
    """
    The Rosenblatt kernel ``g_t(y1, y2) = int_{max(0, y1 v y2)}^t (u - y1)^{H/2-1} (u - y2)^{H/2-1} du`` by adaptive
    quadrature.

    When ``y1 v y2 > 0`` the endpoint singularity is handled exactly by QUADPACK's algebraic weight
    ``(u - y1 v y2) ** (H/2 - 1)``; otherwise the integrand is bounded on ``[0, t]``.

    :raises DiagonalKernel: when ``y1 == y2``
    :raises QuadBudgetExceeded: when the quadrature error estimate is above ``100 * epsrel``
    """
    H = hurst_of(p)
    y1, y2, t = float(y1), float(y2), float(t)
    if y1 == y2:
        raise DiagonalKernel(f"g_t diverges on the diagonal (y1 = y2 = {y1})")
    hi, lo = max(y1, y2), min(y1, y2)
    start = max(hi, 0.0)
    if start >= t:
        return 0.0
    h = H / 2 - 1
    if hi >= 0:
        val, err = integrate.quad(lambda u: (u - lo) ** h, hi, t, weight='alg', wvar=(h, 0.0),
                                  epsabs=0.0, epsrel=epsrel, limit=200)
    else:
        val, err = integrate.quad(lambda u: ((u - lo) * (u - hi)) ** h, 0.0, t,
                                  epsabs=0.0, epsrel=epsrel, limit=200)
    if err > 100 * epsrel * abs(val):
        log.warning("rosenblatt_kernel_g(t=%s, y1=%s, y2=%s): error estimate %s too large", t, y1, y2, err)
        raise QuadBudgetExceeded(f"kernel quadrature reached error {err:.3g} for value {val:.6g}")
    return float(val)


def _kernel_reduced(L0, L1, d, H: float):
    """``g / d^{H-1}`` in the ``(L0, L1, d)`` coordinates of :func:`.rosenblatt_kernel_g_closed` (no checks)"""
    L0, L1, d = np.asarray(L0, dtype=float), np.asarray(L1, dtype=float), np.asarray(d, dtype=float)
    a, b = 1.0 - H, H / 2
    with np.errstate(divide='ignore', invalid='ignore'):
        # d / (L0 + d) is 1 whenever L0 == 0, which is also its limit at d == 0
        x0 = np.where(L0 == 0, 1.0, d / (L0 + d))
        x1 = d / (L1 + d)
        direct = special.betainc(a, b, x0) - special.betainc(a, b, x1)
        flipped = special.betainc(b, a, L1 / (L1 + d)) - special.betainc(b, a, L0 / (L0 + d))
    return special.beta(b, a) * np.where(x1 >= 0.5, flipped, direct)


def kernel_increment(t0, t1, y_hi, d, H: float):
    """
    ``int_{max(t0, 0, y_hi)}^{t1} (u - y_hi)^{H/2-1} (u - y_hi + d)^{H/2-1} du`` in closed form, vectorised.

    ``y_hi`` is the larger of the two arguments and ``d > 0`` their distance. ``kernel_increment(0, t, ...)`` is
    ``g_t``; for ``t0 < t1`` it is ``g_{t1} - g_{t0}``, used to grow kernel stacks along an output grid.
    """
    y_hi, d = np.asarray(y_hi, dtype=float), np.asarray(d, dtype=float)
    L0 = np.maximum(np.maximum(t0, 0.0), y_hi) - y_hi
    L1 = np.maximum(t1 - y_hi, L0)
    with np.errstate(divide='ignore', invalid='ignore'):
        r = np.where(L1 > L0, d ** (H - 1) * _kernel_reduced(L0, L1, d, H), 0.0)
    return r


def rosenblatt_kernel_g_closed(t, y1, y2, p: HurstLike):
    """
    The Rosenblatt kernel in closed form via regularised incomplete beta functions (vectorised).

    Substituting ``v = u - y1 v y2 = d r`` and ``z = r / (1 + r)`` turns the integral into an incomplete beta
    integral, so with ``d = |y1 - y2|``, ``L1 = t - y1 v y2`` and ``L0 = max(0, y1 v y2) - y1 v y2``::

        g_t = d^{H-1} B(H/2, 1-H) [ I(d/(L0+d); 1-H, H/2) - I(d/(L1+d); 1-H, H/2) ]

    This is the scheme used by the chaos-grid oracle; :func:`.rosenblatt_kernel_g` is the independent adaptive one.

    :raises DiagonalKernel: when ``y1 == y2`` for any pair with ``y1 v y2 < t``
    """
    H = hurst_of(p)
    y1, y2 = np.asarray(y1, dtype=float), np.asarray(y2, dtype=float)
    hi, d = np.maximum(y1, y2), np.abs(y1 - y2)
    if np.any((d == 0) & (np.maximum(hi, 0.0) < t)):
        raise DiagonalKernel("g_t diverges on the diagonal y1 == y2")
    r = kernel_increment(0.0, t, hi, d, H)
    return float(r) if r.ndim == 0 else r


def norm_tail_bound(H: HurstLike, M: float, t: float = 1.0) -> float:
    """
    Upper bound on ``||g_t 1_{min(y1, y2) < -M}||^2`` (for ``M >= t``), from ``g_1(y1, y2) <= |y2|^{H/2-1} k(y1)``
    with ``k <= 2/H`` on ``[-1, 1]`` and ``k(y) <= |y|^{H/2-1}`` below ``-1``, rescaled by self-similarity.

    It only decays like ``M^{H-1}``, which is why :func:`.kernel_norm_sq` integrates the infinite range directly
    instead of truncating; the bound is reported for information.
    """
    H = hurst_of(H)
    M1 = float(M) / t
    return t ** (2 * H) * 2 * M1 ** (H - 1) / (1 - H) * (8 / H ** 2 + 1 / (1 - H))


def _overlap_total(H: float, epsrel: float, limit: int) -> Tuple[float, float]:
    """
    ``kappa = int_0^inf w^{H/2-1} (w + 1)^{H/2-1} dw``, returning ``(value, abs_error)``.

    ``[0, 1]`` carries the algebraic weight ``w^{H/2-1}``; ``w = 1/x`` maps ``[1, inf)`` onto ``[0, 1]`` with the
    weight ``x^{-H}``.
    """
    h = H / 2 - 1
    head, e0 = integrate.quad(lambda w: (1.0 + w) ** h, 0.0, 1.0, weight='alg', wvar=(h, 0.0),
                              epsabs=0.0, epsrel=epsrel, limit=limit)
    tail, e1 = integrate.quad(lambda x: (1.0 + x) ** h, 0.0, 1.0, weight='alg', wvar=(-H, 0.0),
                              epsabs=0.0, epsrel=epsrel, limit=limit)
    return head + tail, e0 + e1


def _overlap_fraction(W, r, H: float):
    """
    ``int_0^W w^{H/2-1} (w + r)^{H/2-1} dw`` as a fraction of its value at ``W = inf`` (vectorised).

    With ``z = w / (w + r)`` it is the regularised incomplete beta ``I(W / (W + r); H/2, 1-H)``.
    """
    W, r = np.maximum(np.asarray(W, dtype=float), 0.0), np.asarray(r, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        z, zc = W / (W + r), r / (W + r)
        direct = special.betainc(H / 2, 1 - H, z)
        flipped = 1.0 - special.betainc(1 - H, H / 2, zc)
    return np.where(W <= 0, 0.0, np.where(z > 0.5, flipped, direct))


def kernel_norm_sq(H: HurstLike, t: float = 1.0, lower: float = -np.inf, epsrel: float = 1e-10,
                   limit: int = 200) -> Tuple[float, float]:
    """
    ``||g_t 1_{[lower, t]^2}||^2`` by nested adaptive quadrature, returning ``(value, abs_error)``.

    Exchanging the order of integration gives ``||g_t||^2 = int int_{[0,t]^2} K(u, v)^2 du dv``, where
    ``K(u, v) = int_lower^{u ^ v} (u - y)^{H/2-1} (v - y)^{H/2-1} dy``. With ``r = |u - v|`` and
    ``W = u ^ v - lower`` this is ``K = r^{H-1} kappa F(W / r)``:

    * ``kappa`` is the full overlap integral, by QUADPACK with algebraic endpoint weights
      (see :func:`._overlap_total`);
    * ``F`` is the retained fraction, 1 when ``lower = -inf``.

    The outer integral over ``r`` carries the weight ``r^{2H-2}``, handled by QUADPACK's algebraic weight.

        >>> v, err = kernel_norm_sq(0.75)
        >>> round(v, 3)
        95.714

    """
    H = hurst_of(H)
    t, lower = float(t), float(lower)
    kappa, kappa_err = _overlap_total(H, epsrel * 0.1, limit)
    if not np.isfinite(lower):
        # F = 1, so the u ^ v integral is just its length t - r
        outer, outer_err = integrate.quad(lambda r: 1.0, 0.0, t, weight='alg', wvar=(2 * H - 2, 1.0),
                                          epsabs=0.0, epsrel=epsrel, limit=limit)
    else:
        def retained(r):
            if r >= t:
                return 0.0
            v, _ = integrate.quad(lambda u: float(_overlap_fraction(u - lower, r, H)) ** 2, 0.0, t - r,
                                  epsabs=0.0, epsrel=epsrel * 0.1, limit=limit)
            return v

        outer, outer_err = integrate.quad(retained, 0.0, t, weight='alg', wvar=(2 * H - 2, 0.0),
                                          epsabs=0.0, epsrel=epsrel, limit=limit)
    value = 2.0 * kappa ** 2 * outer
    err = 2.0 * kappa ** 2 * outer_err + 4.0 * kappa * kappa_err * abs(outer)
    return value, err


@rs_cache(lambda H, quad_budget: f"rosen:cH:{H!r}:{quad_budget}")
def _normalizing_constant(H: float, quad_budget: int) -> KernelConstants:
    norm, err = kernel_norm_sq(H, 1.0, -np.inf, limit=quad_budget)
    rel = 0.5 * err / norm if norm > 0 else float('nan')
    log.debug("normalizing constant for H=%s: ||g_1||^2=%s (+/- %s)", H, norm, err)
    # NaN fails every comparison
    if not (np.isfinite(norm) and norm > 0) or not rel <= settings.QUAD_TOLERANCE:
        log.warning("normalizing constant for H=%s: ||g_1||^2=%s with relative error %s", H, norm, rel)
        raise QuadBudgetExceeded(
            f"cH relative error {rel:.3g} exceeds {settings.QUAD_TOLERANCE} with budget {quad_budget} "
            f"(||g_1||^2 = {norm})"
        )
    cH = (2.0 * norm) ** -0.5
    return KernelConstants(H=H, cH=cH, cH_rel_err=rel, norm_sq=norm, norm_abs_err=err)


def normalizing_constant(p: HurstLike, quad_budget: int = 200) -> KernelConstants:
    """
    The normalizing constant ``cH = (2 ||g_1||^2) ** -1/2`` making ``E(cH I_2(g_t))^2 = t^{2H}``, computed
    numerically (and cached per ``H``).

    :raises QuadBudgetExceeded: if the relative error of ``cH`` is above :attr:`.settings.QUAD_TOLERANCE`
    """
    return _normalizing_constant(hurst_of(p), int(quad_budget))
