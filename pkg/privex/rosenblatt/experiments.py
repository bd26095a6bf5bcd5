"""
Monte Carlo studies: the law suite, the coupling-rate and strong-rate studies, component rates, the oracle
self-consistency suite and the kernel constants check, plus the statistical helpers they share.

Every study is a pure function of ``(Params, seed, reps)``. Replicate ``r`` always draws from the streams keyed by
``r`` (see :mod:`privex.rosenblatt.streams`), and :func:`.fan_out` returns results in submission order, so reports
are identical whatever the number of worker threads.

Reports are :class:`privex.helpers.DictObject` instances holding a list of ``checks`` (each with ``name``, ``value``,
``target``, ``tolerance`` and ``passed``) and an overall ``passed`` flag, ready to be serialised by the CLI.

**Basic usage**:

    >>> from privex.rosenblatt.experiments import fit_loglog
    >>> fit = fit_loglog([8, 16, 32, 64], [8 ** -0.5, 16 ** -0.5, 32 ** -0.5, 64 ** -0.5])
    >>> round(fit.slope, 6), round(fit.r2, 6)
    (-0.5, 1.0)

"""
import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
from privex.helpers import DictObject, empty
from scipy import stats

from privex.rosenblatt import settings, streams
from privex.rosenblatt.exceptions import DomainError, InvalidInput
from privex.rosenblatt.helpers import config_hash
from privex.rosenblatt.kernels import alpha_n, beta_range, epsilon_n, kernel_norm_sq, normalizing_constant, \
    rosenblatt_kernel_g, rosenblatt_kernel_g_closed
from privex.rosenblatt.objects import ChaosGridSpec, McSummary, Params, RateFit
from privex.rosenblatt.oracle import discrete_variance, simulate_chaos_grid, truncated_variance
from privex.rosenblatt.paths import simulate_driver_bundle, sup_distance
from privex.rosenblatt.process import assemble_run, simulate_transports, weighted_sup_error, y3_sup_error
from privex.rosenblatt.transport import couple_transport, simulate_transport

__all__ = [
    'KSResult', 'fit_loglog', 'ks_two_sample', 'fan_out', 'mostly_decreasing', 'variance_with_se', 'make_check',
    'run_coupling_rate', 'run_strong_rate', 'run_law_suite', 'run_component_rates', 'run_oracle_suite',
    'run_constants', 'long_memory_target'
]

log = logging.getLogger(__name__)

SCHEMA = 1
FAMILY_LEVEL = 0.05
KS_LEVEL = 0.01
COUPLING_SLOPE_RANGE = (-0.7, -0.3)
CONTROL_SLOPE_MIN = -0.1
ENVELOPE_SLACK = 2.0
LAW_ALLOWANCE = 0.1
SKEW_REL_TOL = 0.5


class KSResult(NamedTuple):
    statistic: float
    passed: bool
    pvalue: float


def fit_loglog(xs: Sequence[float], ys: Sequence[float], subtract_log_correction: bool = False,
               theoretical_slope: Optional[float] = None) -> RateFit:
    """
    Least squares fit of ``log(y) = intercept + slope * log(x)``.

    With ``subtract_log_correction=True``, ``(5/2) * log(log(x))`` is removed from ``log(y)`` first, so a
    sequence ``c * x^q * log(x)^{5/2}`` fits to slope ``q``.

    :raises InvalidInput: fewer than 3 points, mismatched lengths, non-positive values, or ``x <= 1`` with the
                          log correction
    """
    x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise InvalidInput("fit_loglog needs at least 3 (x, y) pairs of matching length")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise InvalidInput("fit_loglog needs strictly positive, finite x and y values")
    if subtract_log_correction and np.any(x <= 1):
        raise InvalidInput("the log(log(x)) correction needs every x > 1")
    lx, ly = np.log(x), np.log(y)
    if subtract_log_correction:
        ly = ly - 2.5 * np.log(lx)
    if np.ptp(ly) == 0:
        slope, intercept, r2 = 0.0, float(ly[0]), 1.0
    else:
        res = stats.linregress(lx, ly)
        slope, intercept, r2 = float(res.slope), float(res.intercept), float(min(max(res.rvalue ** 2, 0.0), 1.0))
    return RateFit(
        ns=[int(v) if float(v).is_integer() else float(v) for v in x], medians=[float(v) for v in y],
        slope=slope, intercept=intercept, r2=r2, theoretical_slope=theoretical_slope,
        log_correction_used=bool(subtract_log_correction)
    )


def ks_two_sample(A: Sequence[float], B: Sequence[float], level: float = KS_LEVEL) -> KSResult:
    """
    Two-sample Kolmogorov-Smirnov test (:func:`scipy.stats.ks_2samp`), passing when the p-value is at least
    ``level``.

    :raises InvalidInput: when either sample holds fewer than 50 values
    """
    a, b = np.asarray(A, dtype=float).ravel(), np.asarray(B, dtype=float).ravel()
    if len(a) < 50 or len(b) < 50:
        raise InvalidInput(f"ks_two_sample needs at least 50 values per sample (got {len(a)} and {len(b)})")
    res = stats.ks_2samp(a, b)
    return KSResult(statistic=float(res.statistic), passed=bool(res.pvalue >= level), pvalue=float(res.pvalue))


def fan_out(fn: Callable, items: Iterable, threads: Optional[int] = None) -> list:
    """``[fn(i) for i in items]``, spread over a thread pool when ``threads > 1``; results keep submission order"""
    threads = settings.THREADS if empty(threads) else int(threads)
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def mostly_decreasing(values: Sequence[float], inversions: int = 1) -> bool:
    """True when at most ``inversions`` consecutive pairs fail to decrease"""
    v = np.asarray(values, dtype=float)
    return int(np.sum(np.diff(v) >= 0)) <= inversions


def variance_with_se(x: np.ndarray) -> tuple:
    """Sample variance of ``x`` (known mean 0 not assumed) and its standard error ``sqrt((m4 - s^4) / n)``"""
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    var = float(np.mean(c * c))
    m4 = float(np.mean(c ** 4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / len(x))


def make_check(name: str, value: float, target: float, tolerance: float, passed: Optional[bool] = None,
               **extra) -> DictObject:
    """One entry of a report's ``checks`` list; ``passed`` defaults to ``|value - target| <= tolerance``"""
    if passed is None:
        passed = abs(value - target) <= tolerance
    return DictObject(name=name, value=value, target=target, tolerance=tolerance, passed=bool(passed), **extra)


def _report(suite: str, p: Params, seed: int, reps: int, checks: List[DictObject], **extra) -> DictObject:
    kc = normalizing_constant(p)
    cfg = dict(suite=suite, params=p.core(), seed=seed, reps=reps)
    rep = DictObject(
        schema=SCHEMA, suite=suite, config_hash=config_hash(cfg), params=p.core(), seed=seed, reps=reps,
        epsilon=p.epsilon, alpha=p.alpha, alpha_hat=p.alpha_hat, cH=kc.cH, cH_rel_err=kc.cH_rel_err,
        checks=checks, passed=bool(all(c.passed for c in checks)),
    )
    rep.update(extra)
    return rep


def _need_unit_horizon(p: Params):
    if p.T < 1:
        raise DomainError(f"this study evaluates X at t=1 and needs T >= 1 (got T={p.T})")


def _law_replicate(r: int, p: Params, seed: int, t_grid: np.ndarray) -> np.ndarray:
    log.debug("law suite replicate %d", r)
    return assemble_run(t_grid, p, seed=seed, replicate=r).X_centered


def run_law_suite(p: Params, reps: int = 500, seed: int = 0, threads: Optional[int] = None,
                  oracle_spec: Optional[ChaosGridSpec] = None) -> DictObject:
    """
    Law checks of the centred approximation ``X^{H,n}`` at ``t in {0.5, 1}`` over ``reps`` replicates:

     * ``Var(X_0.5)`` against ``0.5^{2H}`` and ``Var(X_1)`` against 1
     * ``Cov(X_1, X_0.5)`` against 0.5
     * two-sample KS of ``X_1`` against the chaos-grid oracle
     * skewness of ``X_1`` against the oracle's: same sign, relative difference at most 50 %

    Moment checks pass within ``3 * std_err + 0.1 * |target|``; the KS level is Bonferroni-corrected for a family
    level of 5 %.
    """
    _need_unit_horizon(p)
    if reps < 50:
        raise InvalidInput(f"the law suite needs reps >= 50 (got {reps})")
    t_grid = np.array([0.0, 0.5, 1.0])
    X = np.vstack(fan_out(functools.partial(_law_replicate, p=p, seed=seed, t_grid=t_grid), range(reps), threads))
    spec = oracle_spec
    if spec is None:
        spec = ChaosGridSpec(t_grid=(0.5, 1.0), x_min=min(ChaosGridSpec.x_min, 4 * p.a))
    O = simulate_chaos_grid(spec, p, seed=seed, reps=reps)
    o1 = O[:, list(spec.t_grid).index(1.0)]

    x_half, x_one = X[:, 1], X[:, 2]
    checks = []
    for label, x, target in (('var_X_0.5', x_half, 0.5 ** (2 * p.H)), ('var_X_1', x_one, 1.0)):
        var, se = variance_with_se(x)
        checks.append(make_check(label, var, target, 3 * se + LAW_ALLOWANCE * target, std_err=se))
    prod = (x_one - x_one.mean()) * (x_half - x_half.mean())
    cov, cov_se = float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(reps))
    checks.append(make_check('cov_X_1_X_0.5', cov, 0.5, 3 * cov_se + LAW_ALLOWANCE * 0.5, std_err=cov_se))

    level = FAMILY_LEVEL / 5
    ks = ks_two_sample(x_one, o1, level=level)
    checks.append(make_check('ks_X_1_vs_oracle', ks.statistic, 0.0, level, passed=ks.passed, pvalue=ks.pvalue))
    sk, sk_o = float(stats.skew(x_one)), float(stats.skew(o1))
    sk_ok = np.sign(sk) == np.sign(sk_o) and abs(sk - sk_o) <= SKEW_REL_TOL * abs(sk_o)
    checks.append(make_check('skew_X_1_vs_oracle', sk, sk_o, SKEW_REL_TOL * abs(sk_o), passed=sk_ok))

    return _report(
        'law', p, seed, reps, checks, ks_level=level, oracle=dict(spec),
        summaries=[dict(McSummary.from_samples('X_1', x_one)), dict(McSummary.from_samples('oracle_X_1', o1))]
    )


def _coupling_replicate(r: int, p: Params, n: int, seed: int, horizon: float, control: bool) -> tuple:
    B = simulate_driver_bundle(p, seed=seed, replicate=r).B1.restrict(0.0, horizon)
    Z = couple_transport(B, n, seed=seed, key=(streams.Z1, r), label='Z1')
    err = sup_distance(B, Z, (0.0, horizon))
    if not control:
        return err, None
    Zi = simulate_transport(n, (0.0, horizon), seed, key=(streams.INDEPENDENT, r), label='Z1_independent')
    return err, sup_distance(B, Zi, (0.0, horizon))


def run_coupling_rate(p: Params, ns: Sequence[int], reps: int = 200, seed: int = 0, threads: Optional[int] = None,
                      subtract_log_correction: bool = False, control: bool = True) -> RateFit:
    """
    Median of ``sup_{[0,1]} |B - Z^{(n)}|`` over coupled pairs for each ``n``, fitted in log-log coordinates.

    The same Brownian paths are reused across ``ns``. With ``control=True`` an independent transport path is
    compared to the same ``B`` as well; its medians must not decay (``control_slope >= -0.1``). ``passed`` requires
    the coupled slope in ``[-0.7, -0.3]``, the control check, and medians decreasing with at most one inversion.
    """
    ns = sorted(int(n) for n in ns)
    if len(ns) < 3:
        raise InvalidInput("the coupling-rate study needs at least 3 intensities")
    horizon = min(1.0, p.T)
    med, ctl = [], []
    for n in ns:
        res = fan_out(functools.partial(_coupling_replicate, p=p, n=n, seed=seed, horizon=horizon, control=control),
                      range(reps), threads)
        med.append(float(np.median([e for e, _ in res])))
        if control:
            ctl.append(float(np.median([c for _, c in res])))
        log.info("coupling rate: n=%d median sup|B - Z| = %.5g", n, med[-1])
    fit = fit_loglog(ns, med, subtract_log_correction, theoretical_slope=-0.5)
    fit.monotone_ok = mostly_decreasing(med)
    if control:
        fit.control_slope = fit_loglog(ns, ctl).slope
    lo, hi = COUPLING_SLOPE_RANGE
    fit.passed = bool(lo <= fit.slope <= hi and fit.monotone_ok and
                      (not control or fit.control_slope >= CONTROL_SLOPE_MIN))
    return fit


def _strong_replicate(r: int, p: Params, seed: int, eps_ref: float) -> float:
    log.debug("strong rate: n=%d replicate %d", p.n, r)
    return assemble_run(None, p, seed=seed, with_reference=True, replicate=r, eps_ref=eps_ref).sup_error()


def run_strong_rate(p: Params, ns: Sequence[int], reps: int = 100, seed: int = 0,
                    threads: Optional[int] = None) -> RateFit:
    """
    Median of ``sup_t |X^{H,n}_t - Xref_t|`` (centred, on ``p.t_grid``) for each ``n``, with the reference built from
    the same drivers.

    One reference shift ``eps_ref = eps_{max n} / 8`` serves every ``n``, so each replicate is compared against the
    same reference path across the study. The envelope constant ``C`` is calibrated at the smallest ``n``;
    ``passed`` requires the medians to stay under ``2 * C * alpha_hat_n`` and to decrease with at most one
    inversion. The fitted slope is recorded next to the theoretical ``-(1/2 - beta - gamma)`` but not tested.
    """
    ns = sorted(int(n) for n in ns)
    if len(ns) < 3 or ns[0] < 2:
        raise InvalidInput("the strong-rate study needs at least 3 intensities, all >= 2")
    eps_ref = epsilon_n(ns[-1], p) / 8
    med = []
    for n in ns:
        pn = p.replace(n=n)
        errs = fan_out(functools.partial(_strong_replicate, p=pn, seed=seed, eps_ref=eps_ref), range(reps), threads)
        med.append(float(np.median(errs)))
        log.info("strong rate: n=%d median sup|X - Xref| = %.5g", n, med[-1])
    fit = fit_loglog(ns, med, theoretical_slope=-(0.5 - p.beta - p.gamma))
    envelope = np.array([alpha_n(n, p, hat=True) for n in ns])
    fit.envelope_C = med[0] / envelope[0]
    fit.envelope_ok = bool(np.all(np.asarray(med[1:]) <= ENVELOPE_SLACK * fit.envelope_C * envelope[1:]))
    fit.monotone_ok = mostly_decreasing(med)
    fit.passed = bool(fit.envelope_ok and fit.monotone_ok)
    return fit


def _component_replicate(r: int, p: Params, seed: int) -> tuple:
    D = simulate_driver_bundle(p, seed=seed, replicate=r)
    Z1, Z2, Z3 = simulate_transports(D, p, seed, replicate=r)
    y3, bound = y3_sup_error(Z1, D.B1, p)
    return weighted_sup_error(Z2, Z3, D, p), y3, bound


def run_component_rates(p: Params, ns: Sequence[int], reps: int = 100, seed: int = 0,
                        threads: Optional[int] = None) -> DictObject:
    """
    Per-component diagnostics across ``ns``: medians of the weighted ``Y1`` error ``max_s s^{1-H/2}|Y1 - Y1n|`` and
    of ``max_s |Y3 - Y3n|``, with the pathwise bound ``2 * n^beta * sup|B1 - Z1|`` checked on every replicate.
    """
    ns = sorted(int(n) for n in ns)
    if len(ns) < 3:
        raise InvalidInput("the component-rate study needs at least 3 intensities")
    y1_med, y3_med, violations = [], [], 0
    for n in ns:
        pn = p.replace(n=n)
        res = fan_out(functools.partial(_component_replicate, p=pn, seed=seed), range(reps), threads)
        y1_med.append(float(np.median([w for w, _, _ in res])))
        y3_med.append(float(np.median([y for _, y, _ in res])))
        violations += sum(1 for _, y, b in res if y > b * (1 + 1e-9))
    checks = [
        make_check('y3_bound_violations', float(violations), 0.0, 0.0),
        make_check('y1_medians_decreasing', float(mostly_decreasing(y1_med)), 1.0, 0.0),
        make_check('y3_medians_decreasing', float(mostly_decreasing(y3_med)), 1.0, 0.0),
    ]
    return _report(
        'components', p, seed, reps, checks, ns=ns,
        y1_fit=dict(fit_loglog(ns, y1_med, theoretical_slope=-(0.5 - p.beta))),
        y3_fit=dict(fit_loglog(ns, y3_med, theoretical_slope=-(0.5 - p.beta))),
    )


def long_memory_target(H: float, k: int, exact: bool = False) -> float:
    """
    Correlation of unit increments at lag ``k``: the asymptotic ``H(2H-1)k^{2H-2}``, or with ``exact=True``
    ``((k+1)^{2H} - 2k^{2H} + (k-1)^{2H}) / 2``.
    """
    if exact:
        return 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + (k - 1) ** (2 * H))
    return H * (2 * H - 1) * k ** (2 * H - 2)


def run_oracle_suite(p: Params, reps: int = 500, seed: int = 0, spec: Optional[ChaosGridSpec] = None,
                     lags: Sequence[int] = (5, 10, 20), steps: int = 48, memory_reps: Optional[int] = None,
                     memory_tol: float = 0.3, threads: Optional[int] = None) -> DictObject:
    """
    Self-consistency of the chaos-grid oracle:

     * exact discrete ``Var(X_1)`` changes by at most 5 % when the mesh is halved
     * sample ``Var(X_1)`` against 1 within ``3 * std_err + 10 %``
     * self-similarity: ``2^{-H} X_2`` against ``X_1`` (two-sample KS at 1 %)
     * stationary increments: ``X_1.5 - X_0.5`` against ``X_1`` (two-sample KS at 1 %)
     * long memory: lag correlations of ``steps`` equal increments of ``[0, 1]`` against ``H(2H-1)k^{2H-2}``
       within ``memory_tol`` relative. Increments of length ``1/steps`` have the correlations of unit increments
       by self-similarity.

    The two samples of each KS test come from disjoint replicate blocks. The sample blocks are simulated on
    ``threads`` workers; every replicate has its own stream, so the report does not depend on ``threads``.
    """
    base = ChaosGridSpec(x_min=min(ChaosGridSpec.x_min, 4 * p.a)) if spec is None else spec
    checks = []

    halved = ChaosGridSpec(t_grid=(1.0,), x_min=base.x_min, mesh=base.mesh / 2, growth=base.growth)
    coarse = ChaosGridSpec(t_grid=(1.0,), x_min=base.x_min, mesh=base.mesh, growth=base.growth)
    v0, v1 = float(discrete_variance(coarse, p)[0]), float(discrete_variance(halved, p)[0])
    checks.append(make_check('mesh_halving_var_change', abs(v1 - v0) / v1, 0.0, 0.05))

    grid = ChaosGridSpec(t_grid=(0.5, 1.0, 1.5, 2.0), x_min=base.x_min, mesh=base.mesh, growth=base.growth)
    # (spec, reps, first replicate)
    jobs = [(grid, reps, 0), (grid, reps, reps)]
    lags = [int(k) for k in lags if 0 < int(k) < steps]
    if lags:
        mem = ChaosGridSpec(
            t_grid=tuple(j / steps for j in range(1, steps + 1)), x_min=base.x_min,
            mesh=min(base.mesh, 1.0 / (4 * steps)), growth=base.growth
        )
        jobs.append((mem, reps if memory_reps is None else int(memory_reps), 2 * reps))
    samples = fan_out(
        lambda job: np.atleast_2d(simulate_chaos_grid(job[0], p, seed=seed, reps=job[1], first_replicate=job[2])),
        jobs, threads
    )
    A, B = samples[0], samples[1]

    var, se = variance_with_se(A[:, 1])
    checks.append(make_check('var_X_1', var, 1.0, 3 * se + LAW_ALLOWANCE, std_err=se))
    ks = ks_two_sample(A[:, 1], 2 ** -p.H * B[:, 3])
    checks.append(make_check('self_similarity_ks', ks.statistic, 0.0, KS_LEVEL, passed=ks.passed, pvalue=ks.pvalue))
    ks = ks_two_sample(A[:, 1], B[:, 2] - B[:, 0])
    checks.append(make_check('stationary_increments_ks', ks.statistic, 0.0, KS_LEVEL, passed=ks.passed,
                             pvalue=ks.pvalue))

    if lags:
        path = samples[2]
        inc = np.diff(np.column_stack((np.zeros(len(path)), path)), axis=1)
        denom = float(np.mean(inc * inc))
        for k in lags:
            rho = float(np.mean(inc[:, :-k] * inc[:, k:])) / denom
            target = long_memory_target(p.H, k)
            checks.append(make_check(
                f'long_memory_lag_{k}', rho, target, memory_tol * target, exact_target=long_memory_target(p.H, k, True),
                samples=int(inc[:, k:].size)
            ))

    return _report(
        'oracle', p, seed, reps, checks, oracle=dict(base),
        discrete_var_X_1=v0, truncated_var_X_1=float(truncated_variance(coarse, p)[0]),
    )


def run_constants(p: Params, points: Sequence[tuple] = ((1.0, 0.3, -0.4), (1.0, -2.0, -0.5), (0.7, 0.5, 0.1))
                  ) -> DictObject:
    """
    The deterministic constants of ``p``: ``cH`` (relative error at most 1e-4), the admissible ``beta`` interval,
    ``eps_n``, ``alpha_n``, the scaling ``2 cH^2 ||g_2||^2 = 2^{2H}`` (1e-6 relative), and agreement (1e-6 relative)
    of the adaptive and closed-form kernel schemes at ``points`` given as ``(t, y1, y2)``.
    """
    kc = normalizing_constant(p)
    checks = [make_check('cH_rel_err', kc.cH_rel_err, 0.0, 1e-4)]
    # E(X_2)^2 = 2^{2H} from the norm of g_2 alone
    scaled = 2 * kc.cH ** 2 * kernel_norm_sq(p, 2.0)[0]
    checks.append(make_check('variance_scaling_t2', scaled, 2 ** (2 * p.H), 1e-6 * 2 ** (2 * p.H)))
    for t, y1, y2 in points:
        g_a, g_c = rosenblatt_kernel_g(t, y1, y2, p), rosenblatt_kernel_g_closed(t, y1, y2, p)
        checks.append(make_check(f'kernel_schemes_{t}_{y1}_{y2}', abs(g_a - g_c) / abs(g_c), 0.0, 1e-6))
    return _report('constants', p, p.seed, 0, checks, beta_range=list(beta_range(p)), norm_sq=kc.norm_sq)
