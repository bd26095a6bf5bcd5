"""
Independent ground truth for the Rosenblatt process.

:func:`.simulate_chaos_grid` samples ``X_t = cH * I2(g_t)`` straight from its double Wiener-Ito integral
representation: the past and present are cut into cells (uniform of width ``mesh`` on ``[-1, max t]``, growing
geometrically down to ``x_min``), and the double integral becomes the off-diagonal double sum
``sum_{i != j} g_t(x_i, x_j) dB_i dB_j`` over the cell midpoints. Optionally each diagonal block contributes
the exact double integral of its cell-averaged kernel, ``gbar_ii (dB_i^2 - dx_i)``, which keeps the estimator
centred and recovers most of the variance of the diagonal strip.

Kernel matrices are built once per ``(grid, H)`` from the closed-form kernel, growing them along the output times
by the increments ``g_t - g_{t_prev}``, and cached.

**Basic usage**:

    >>> from privex.rosenblatt import validate_params
    >>> from privex.rosenblatt.objects import ChaosGridSpec
    >>> from privex.rosenblatt.oracle import simulate_chaos_grid
    >>> p = validate_params(H=0.75, beta=0.44, gamma=0.03)
    >>> X = simulate_chaos_grid(ChaosGridSpec(t_grid=(0.0, 0.5, 1.0), mesh=1/32, growth=1.2), p, seed=4, reps=8)
    >>> X.shape
    (8, 3)

"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from privex.helpers import DictDataClass
from scipy import special

from privex.rosenblatt import settings, streams
from privex.rosenblatt.exceptions import BudgetExceeded, DomainError, InvalidInput
from privex.rosenblatt.helpers import rs_cache, config_hash
from privex.rosenblatt.kernels import hurst_of, kernel_increment, kernel_norm_sq, normalizing_constant, HurstLike
from privex.rosenblatt.objects import ChaosGridSpec, Params, McSummary
from privex.rosenblatt.paths import PiecewiseLinearPath

__all__ = [
    'chaos_grid', 'ChaosGridKernel', 'chaos_kernels', 'simulate_chaos_grid', 'grid_double_sum', 'quadratic_forms',
    'estimate_remainder', 'discrete_variance', 'truncated_variance', 'check_spec'
]

log = logging.getLogger(__name__)

DIAGONAL_RULES = ('project', 'exclude')


def check_spec(spec: ChaosGridSpec, p: Optional[Params] = None):
    """
    Enforce ``mesh <= |x_min| / 100``, ``growth >= 1``, sorted non-negative output times and, given ``p``,
    ``x_min <= 4 * a``.

    :raises DomainError: on any violation
    """
    if not spec.x_min < 0:
        raise DomainError(f"x_min={spec.x_min} violates x_min < 0")
    if not 0 < spec.mesh <= abs(spec.x_min) / 100:
        raise DomainError(f"mesh={spec.mesh} violates 0 < mesh <= |x_min|/100 = {abs(spec.x_min) / 100}")
    if spec.growth < 1:
        raise DomainError(f"growth={spec.growth} violates growth >= 1")
    t = np.asarray(spec.t_grid)
    if len(t) == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise DomainError("ChaosGridSpec.t_grid must be non-empty, non-negative and strictly increasing")
    if p is not None and not spec.x_min <= 4 * p.a:
        raise DomainError(f"x_min={spec.x_min} violates x_min <= 4*a = {4 * p.a}")


def _uniform_edges(breaks: Sequence[float], mesh: float) -> np.ndarray:
    parts = [np.array([breaks[0]])]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        k = max(1, int(math.ceil((hi - lo) / mesh - 1e-9)))
        parts.append(np.linspace(lo, hi, k + 1)[1:])
    return np.concatenate(parts)


def chaos_grid(spec: ChaosGridSpec) -> np.ndarray:
    """
    Cell edges of the chaos grid: uniform (at most ``mesh`` wide, with every output time on an edge) on
    ``[-1, max t]``, then widths ``mesh * growth^k`` from ``-1`` down to ``x_min``.

    :raises BudgetExceeded: when the grid has more than :attr:`.settings.MAX_CELLS` cells
    """
    check_spec(spec)
    t_max = max(spec.t_grid)
    breaks = sorted({-1.0, 0.0, *(t for t in spec.t_grid if t > 0)} | ({t_max} if t_max > 0 else set()))
    near = _uniform_edges(breaks, spec.mesh)
    far, x, w = [], -1.0, spec.mesh
    while x - w > spec.x_min + 0.5 * w:
        x -= w
        far.append(x)
        w *= spec.growth
        if len(far) > settings.MAX_CELLS:
            break
    if spec.x_min < -1:
        edges = np.concatenate(([spec.x_min], far[::-1], near))
    else:
        edges = np.concatenate(([spec.x_min], near[near > spec.x_min]))
    if len(edges) - 1 > settings.MAX_CELLS:
        log.warning("chaos grid would have %d cells (limit %d)", len(edges) - 1, settings.MAX_CELLS)
        raise BudgetExceeded(f"chaos grid needs {len(edges) - 1} cells, above the limit {settings.MAX_CELLS}")
    return edges


def _cell_average_increment(lo: float, hi: float, t0: float, t1: float, H: float, order: int = 8) -> float:
    """
    Average of ``g_{t1} - g_{t0}`` over the square ``[lo, hi]^2``: Gauss-Jacobi (weight ``d^{H-1}``) in the distance
    ``d`` and Gauss-Legendre in the larger coordinate ``m``.
    """
    xm, wm = special.roots_legendre(order)
    xd, wd = special.roots_jacobi(order, 0.0, H - 1)
    w = hi - lo
    m = lo + 0.5 * w * (xm + 1)
    total = 0.0
    for mk, wk in zip(m, wm):
        D = mk - lo
        if D <= 0:
            continue
        d = 0.5 * D * (xd + 1)
        with np.errstate(divide='ignore', invalid='ignore'):
            reduced = np.where(d > 0, kernel_increment(t0, t1, mk, d, H) * d ** (1 - H), 0.0)
        total += wk * 0.5 * w * (0.5 * D) ** H * float(np.dot(wd, reduced))
    return 2.0 * total / (w * w)


@dataclass(eq=False)
class ChaosGridKernel(DictDataClass):
    """Cells of a chaos grid and the kernel matrices ``g_t(x_i, x_j)`` (zero diagonal) for each output time"""
    H: float
    t_grid: np.ndarray
    edges: np.ndarray
    mids: np.ndarray
    widths: np.ndarray
    stack: np.ndarray
    """``(len(t_grid), cells, cells)`` off-diagonal kernel values at the cell midpoints"""
    diag: np.ndarray
    """``(len(t_grid), cells)`` cell averages of ``g_t`` over the diagonal squares"""

    @property
    def cells(self) -> int:
        return len(self.mids)


@rs_cache(lambda key, H, spec=None: f"rosen:chaos:{key}:{H!r}")
def _chaos_kernels(key: str, H: float, spec: ChaosGridSpec = None) -> ChaosGridKernel:
    edges = chaos_grid(spec)
    mids, widths = 0.5 * (edges[:-1] + edges[1:]), np.diff(edges)
    hi = np.maximum(mids[:, None], mids[None, :])
    d = np.abs(mids[:, None] - mids[None, :])
    off = ~np.eye(len(mids), dtype=bool)
    ts = np.asarray(spec.t_grid, dtype=float)
    stack = np.zeros((len(ts), len(mids), len(mids)))
    diag = np.zeros((len(ts), len(mids)))
    K = np.zeros_like(hi)
    g = np.zeros(len(mids))
    prev = 0.0
    for k, t in enumerate(ts):
        if t > prev:
            inc = np.zeros_like(hi)
            inc[off] = kernel_increment(prev, t, hi[off], d[off], H)
            K = K + inc
            live = edges[:-1] < t
            g = g + np.array([
                _cell_average_increment(edges[i], edges[i + 1], prev, t, H) if live[i] else 0.0
                for i in range(len(mids))
            ])
            prev = t
        stack[k], diag[k] = K, g
    log.debug("built chaos kernel stack: %d cells, %d output times, H=%s", len(mids), len(ts), H)
    return ChaosGridKernel(H=H, t_grid=ts, edges=edges, mids=mids, widths=widths, stack=stack, diag=diag)


def chaos_kernels(spec: ChaosGridSpec, p: HurstLike) -> ChaosGridKernel:
    """The (cached) kernel stack of ``spec`` for the Hurst index of ``p``"""
    H = hurst_of(p)
    check_spec(spec)
    return _chaos_kernels(spec.key(), H, spec=spec)


def quadratic_forms(K: np.ndarray, dB: np.ndarray) -> np.ndarray:
    """``dB_r^T K dB_r`` for every row ``r`` of ``dB``"""
    dB = np.atleast_2d(dB)
    return np.einsum('ri,ri->r', dB @ K, dB)


def _increments(gen_key: Tuple[int, ...], widths: np.ndarray, reps: int, first: int = 0) -> np.ndarray:
    """Brownian cell increments, one row per replicate, replicate ``r`` from the stream ``(*gen_key, first + r)``"""
    root = np.sqrt(widths)
    return np.vstack([streams.normals(streams.stream(*gen_key, first + r), len(widths)) * root for r in range(reps)])


def simulate_chaos_grid(spec: ChaosGridSpec, p: Params, cH: Optional[float] = None, seed: int = 0, reps: int = 1,
                        diagonal: str = 'project', first_replicate: int = 0) -> np.ndarray:
    """
    Sample ``X_t = cH * I2(g_t)`` on ``spec.t_grid`` from the chaos-grid double sum.

    Returns an array of shape ``(len(t_grid),)`` for ``reps=1``, else ``(reps, len(t_grid))``. Replicate ``r`` uses
    the stream ``(seed, CHAOS, first_replicate + r)``.

    :param str diagonal: ``project`` adds the cell-averaged diagonal blocks ``gbar_ii (dB_i^2 - dx_i)``,
                         ``exclude`` is the plain off-diagonal sum
    :raises BudgetExceeded: when the grid has too many cells
    """
    if diagonal not in DIAGONAL_RULES:
        raise InvalidInput(f"diagonal must be one of {DIAGONAL_RULES} (got '{diagonal}')")
    check_spec(spec, p)
    cH = normalizing_constant(p).cH if cH is None else float(cH)
    ck = chaos_kernels(spec, p)
    dB = _increments((seed, streams.CHAOS), ck.widths, reps, first_replicate)
    out = np.empty((reps, len(ck.t_grid)))
    centred_sq = dB * dB - ck.widths
    for k in range(len(ck.t_grid)):
        out[:, k] = quadratic_forms(ck.stack[k], dB)
        if diagonal == 'project':
            out[:, k] += centred_sq @ ck.diag[k]
    out *= cH
    return out[0] if reps == 1 else out


def discrete_variance(spec: ChaosGridSpec, p: Params, cH: Optional[float] = None,
                      diagonal: str = 'project') -> np.ndarray:
    """
    Exact variance of the chaos-grid estimator at each output time:
    ``2 cH^2 [sum_{i != j} K_ij^2 dx_i dx_j + sum_i gbar_ii^2 dx_i^2]`` (the diagonal sum only with ``project``).
    """
    cH = normalizing_constant(p).cH if cH is None else float(cH)
    ck = chaos_kernels(spec, p)
    w = ck.widths
    out = np.array([w @ (K * K) @ w for K in ck.stack])
    if diagonal == 'project':
        out = out + (ck.diag ** 2) @ (w * w)
    return 2.0 * cH ** 2 * out


def truncated_variance(spec: ChaosGridSpec, p: Params, cH: Optional[float] = None) -> np.ndarray:
    """``2 cH^2 ||g_t 1_{[x_min, t]^2}||^2`` for each output time: the variance kept by cutting the past at ``x_min``"""
    cH = normalizing_constant(p).cH if cH is None else float(cH)
    H = hurst_of(p)
    return np.array([2.0 * cH ** 2 * kernel_norm_sq(H, t, spec.x_min)[0] if t > 0 else 0.0 for t in spec.t_grid])


def grid_double_sum(kernel: Callable, B: PiecewiseLinearPath, region: Optional[Sequence[float]] = None) -> float:
    """
    ``sum_{i != j} kernel(x_i, x_j) dB_i dB_j`` over the cells of ``B``'s grid inside ``region`` (default: all of
    them), with ``x_i`` the cell midpoints. ``kernel`` is called once with the arrays of all off-diagonal pairs.

    :raises BudgetExceeded: when the region holds more than :attr:`.settings.MAX_CELLS` cells
    """
    lo, hi = (B.start, B.end) if region is None else (float(region[0]), float(region[1]))
    if not B.covers(lo, hi):
        raise DomainError(f"region [{lo}, {hi}] is not inside the grid of '{B.label}'")
    if hi <= lo:
        return 0.0
    t = B.times[(B.times > lo) & (B.times < hi)]
    edges = np.concatenate(([lo], t, [hi]))
    if len(edges) - 1 > settings.MAX_CELLS:
        raise BudgetExceeded(f"region holds {len(edges) - 1} cells, above the limit {settings.MAX_CELLS}")
    mids = 0.5 * (edges[:-1] + edges[1:])
    dB = np.diff(B(edges))
    I, J = np.nonzero(~np.eye(len(mids), dtype=bool))
    vals = np.asarray(kernel(mids[I], mids[J]), dtype=float)
    return float(np.sum(vals * dB[I] * dB[J]))


@rs_cache(lambda t, eps, H, reps, seed, cells: f"rosen:remainder:{t!r}:{eps!r}:{H!r}:{reps}:{seed}:{cells}")
def _estimate_remainder(t: float, eps: float, H: float, reps: int, seed: int, cells: int) -> McSummary:
    edges = np.linspace(0.0, t, cells + 1)
    mids, widths = 0.5 * (edges[:-1] + edges[1:]), np.diff(edges)
    hi = np.maximum(mids[:, None], mids[None, :])
    d = np.abs(mids[:, None] - mids[None, :])
    off = ~np.eye(cells, dtype=bool)
    K = np.zeros((cells, cells))
    K[off] = kernel_increment(0.0, np.minimum(hi[off] + eps, t), hi[off], d[off], H)
    dB = _increments((seed, streams.REMAINDER), widths, reps)
    cH = normalizing_constant(H).cH
    samples = cH * np.abs(quadratic_forms(K, dB))
    return McSummary.from_samples(
        'remainder_G', samples, config_hash(dict(t=t, eps=eps, H=H, reps=reps, seed=seed, cells=cells))
    )


def estimate_remainder(t: float, eps: float, p: HurstLike, reps: int = 64, seed: int = 0,
                       mesh: Optional[float] = None) -> McSummary:
    """
    Monte Carlo summary of ``cH * |G_t|``, the remainder left out when the present part of the Rosenblatt process is
    shifted by ``eps``::

        G_t = I2( (x1, x2) -> int_{x1 v x2}^{(x1 v x2 + eps) ^ t} (s - x1)^{H/2-1} (s - x2)^{H/2-1} ds )

    over ``[0, t]^2``, evaluated by the off-diagonal grid double sum on a uniform grid of ``[0, t]`` with mesh at most
    ``eps / 4`` (the inner integral in closed form). ``t <= 0`` gives an all-zero summary.

    :raises DomainError: when ``eps <= 0``
    """
    H = hurst_of(p)
    if eps <= 0:
        raise DomainError(f"eps={eps} violates eps > 0")
    if reps < 2:
        raise InvalidInput(f"estimate_remainder needs reps >= 2 (got {reps})")
    if t <= 0:
        return McSummary.from_samples('remainder_G', np.zeros(reps))
    mesh = min(eps / 4, t / 16) if mesh is None else min(float(mesh), eps / 4)
    cells = int(math.ceil(t / mesh - 1e-9))
    if cells > settings.MAX_CELLS:
        raise BudgetExceeded(f"remainder grid needs {cells} cells, above the limit {settings.MAX_CELLS}")
    return _estimate_remainder(float(t), float(eps), H, int(reps), int(seed), cells)
