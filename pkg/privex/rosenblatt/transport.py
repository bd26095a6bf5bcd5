"""
Uniform transport processes and their coupling to Brownian paths.

A transport process of intensity ``n`` moves with speed ``n``, starts in a random direction and flips direction
at the points of a Poisson process of rate ``n ** 2``. Its paths are piecewise linear, which the integrators
in :mod:`privex.rosenblatt.integrate` exploit to integrate kernels against them exactly.

:func:`.couple_transport` builds a transport path which is a transport process in law while following a given
Brownian path block by block. On a block of length ``h`` the fraction of time spent moving in the initial
direction has an explicit law (a Poisson mixture of Beta laws, with an atom at 1 when no switch happens).
The fraction is drawn comonotonically from the Brownian increment over the block through a tabulated
quantile function. The number of switches and their positions are then filled in from their exact conditional
laws, so the skeleton inside the block is the one of a genuine transport process.

**Basic usage**:

    >>> from privex.rosenblatt.transport import simulate_transport, extract_gaps
    >>> Z = simulate_transport(16, (0.0, 1.0), seed=5)
    >>> float(Z(0.0))
    0.0
    >>> len(extract_gaps(Z)) == len(Z.switch_times)
    True

"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple, Sequence, Optional

import numpy as np
from privex.helpers import DictDataClass
from scipy import special, stats

from privex.rosenblatt import settings, streams
from privex.rosenblatt.exceptions import MeshTooCoarse, IntensityError, DomainError
from privex.rosenblatt.helpers import rs_cache
from privex.rosenblatt.paths import TransportPath, PiecewiseLinearPath

__all__ = [
    'simulate_transport', 'couple_transport', 'extract_gaps', 'block_anchor_errors', 'default_block',
    'increment_table', 'IncrementTable', 'transport_variance'
]

log = logging.getLogger(__name__)


def transport_variance(n: int, t: float) -> float:
    """``Var Z(t) = t - (1 - exp(-2 n^2 t)) / (2 n^2)`` for a transport process of intensity ``n``"""
    lam = 2.0 * n * n
    return t + math.expm1(-lam * t) / lam


def _drop_collisions(tau: np.ndarray) -> np.ndarray:
    """Remove pairs of switches that coincide in floating point (a zero length segment)"""
    if len(tau) < 2 or np.all(np.diff(tau) > 0):
        return tau
    kept = []
    for x in tau:
        if kept and x <= kept[-1]:
            kept.pop()
            continue
        kept.append(x)
    log.debug("dropped %d coinciding switch times", len(tau) - len(kept))
    return np.asarray(kept, dtype=float)


def _path_from_switches(n: int, sigma0: int, tau: np.ndarray, x0: float, x1: float, reverse: bool,
                        label: str) -> TransportPath:
    """
    Assemble a :class:`.TransportPath` from switch positions ``tau`` measured in travel time from the start
    (``x0`` forwards, ``x1`` when ``reverse``).
    """
    tau = np.asarray(tau, dtype=float)
    sw = np.sort(x1 - tau) if reverse else x0 + tau
    sw = _drop_collisions(sw)
    sw = sw[(sw > x0) & (sw < x1)]
    times = np.concatenate(([x0], sw, [x1]))
    # physical slope of the first segment; a backwards path ends (in physical time) on its first segment
    first = -sigma0 * n * (-1) ** len(sw) if reverse else sigma0 * n
    slopes = first * np.where(np.arange(len(sw) + 1) % 2 == 0, 1.0, -1.0)
    values = np.concatenate(([0.0], np.cumsum(slopes * np.diff(times))))
    if reverse:
        values = values - values[-1]
        values[-1] = 0.0
    return TransportPath(
        times, values, label=label, n=int(n), sigma0=int(sigma0), switch_times=sw,
        direction=-1 if reverse else 1, origin=x1 if reverse else x0
    )


def simulate_transport(n: int, interval: Sequence[float], seed: int = 0, reverse: bool = False,
                       key: Tuple[int, ...] = (), label: str = 'Z') -> TransportPath:
    """
    Simulate a transport path of intensity ``n`` on ``interval``.

    The initial direction is drawn first (one uniform), then the gaps between switches, i.i.d. ``Exp(n ** 2)``,
    in batches until the interval is exhausted. With ``reverse=True`` the path starts from 0 at the right end of the
    interval and runs backwards in time.

    :param int n: intensity, ``n >= 1``
    :param interval: ``(x0, x1)`` with ``x0 < x1``
    :param int seed: master seed
    :param bool reverse: start at ``x1`` and run backwards
    :param tuple key: stream key, e.g. ``(streams.Z1, replicate)``
    :raises IntensityError: when ``n < 1``
    :raises DomainError: for an empty interval
    """
    x0, x1 = float(interval[0]), float(interval[1])
    if n < 1:
        raise IntensityError(f"n={n} violates n >= 1")
    if not x1 > x0:
        raise DomainError(f"transport interval [{x0}, {x1}] is empty")
    gen = streams.stream(seed, *key)
    sigma0 = int(streams.signs(gen))
    rate, L = float(n) ** 2, x1 - x0
    mean = rate * L
    batch = int(mean + 10 * math.sqrt(mean) + 16)
    chunks, total = [], 0.0
    while total < L:
        gaps = streams.exponentials(gen, batch, rate)
        pos = total + np.cumsum(gaps)
        chunks.append(pos)
        total = pos[-1]
    tau = np.concatenate(chunks)
    tau = tau[tau < L]
    return _path_from_switches(n, sigma0, tau, x0, x1, reverse, label)


@dataclass(eq=False)
class IncrementTable(DictDataClass):
    """
    CDF of the fraction of a block of length ``h`` spent moving in the block's initial direction, for a
    transport process of intensity ``n``, tabulated on an even grid of ``[0, 1]``.
    """
    n: int
    h: float
    lam: float
    """Expected number of switches per block, ``n ** 2 * h``"""
    grid: np.ndarray
    cdf: np.ndarray
    """Continuous part of the CDF on :attr:`.grid`, reaching ``1 - atom`` at 1"""
    atom: float
    """Probability of no switch in the block (fraction exactly 1)"""
    kmax: int
    """Largest switch count included in the mixture"""

    @property
    def continuous_mass(self) -> float:
        return 1.0 - self.atom

    def quantile(self, v):
        """Fraction at level ``v`` of the CDF (``1`` on the atom, i.e. for ``v > 1 - atom``)"""
        v = np.asarray(v, dtype=float)
        c = self.cdf
        i = np.clip(np.searchsorted(c, v, side='left'), 1, len(c) - 1)
        lo, hi = c[i - 1], c[i]
        w = np.where(hi > lo, (v - lo) / np.where(hi > lo, hi - lo, 1.0), 1.0)
        x = self.grid[i - 1] + np.clip(w, 0.0, 1.0) * (self.grid[i] - self.grid[i - 1])
        r = np.where(v > self.continuous_mass, 1.0, x)
        return float(r) if r.ndim == 0 else r

    def switch_posterior(self, frac: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Possible switch counts ``k >= 1`` and their probabilities given the fraction ``frac < 1``:
        ``P(K = k | F = frac)`` is proportional to ``Poisson(k; lam) * Beta-pdf(frac; ceil((k+1)/2), floor((k+1)/2))``.
        """
        k = np.arange(1, self.kmax + 1)
        p_, q_ = _beta_shape(k)
        f = min(max(frac, 1e-300), 1.0 - 1e-16)
        logw = stats.poisson.logpmf(k, self.lam) + stats.beta.logpdf(f, p_, q_)
        logw = np.where(np.isfinite(logw), logw, -np.inf)
        return k, np.exp(logw - special.logsumexp(logw))


def _beta_shape(k) -> Tuple[np.ndarray, np.ndarray]:
    """Numbers of segments moving in the initial / opposite direction for ``k`` switches"""
    k = np.asarray(k)
    return (k + 2) // 2, (k + 1) // 2


@rs_cache(lambda n, h, size: f"rosen:qtable:{n}:{h!r}:{size}")
def _increment_table(n: int, h: float, size: int) -> IncrementTable:
    lam = float(n) ** 2 * h
    kmax = int(math.ceil(lam + 10 * math.sqrt(lam) + 20))
    grid = np.linspace(0.0, 1.0, size)
    k = np.arange(1, kmax + 1)
    p_, q_ = _beta_shape(k)
    w = stats.poisson.pmf(k, lam)
    cdf = w @ special.betainc(p_[:, None], q_[:, None], grid[None, :])
    cdf = np.maximum.accumulate(cdf)
    atom = math.exp(-lam)
    log.debug("built increment table n=%s h=%s lam=%s kmax=%s mass=%s", n, h, lam, kmax, cdf[-1] + atom)
    return IncrementTable(n=int(n), h=float(h), lam=lam, grid=grid, cdf=cdf, atom=atom, kmax=kmax)


def increment_table(n: int, h: float, size: Optional[int] = None) -> IncrementTable:
    """The (cached) block-increment quantile table for intensity ``n`` and block length ``h``"""
    return _increment_table(int(n), float(h), int(settings.QTABLE_SIZE if size is None else size))


def default_block(n: int) -> float:
    """Default coupling block length ``max(1/n, 8/n^2)``"""
    return max(1.0 / n, 8.0 / n ** 2)


def _blocks(n: int, length: float, block_mesh: Optional[float]) -> Tuple[int, float]:
    h = default_block(n) if block_mesh is None else float(block_mesh)
    if h < 8.0 / n ** 2 * (1 - 1e-12):
        raise MeshTooCoarse(f"block_mesh={h} violates block_mesh >= 8/n^2 = {8.0 / n ** 2} for n={n}")
    N = max(1, int(math.floor(length / h + 1e-9)))
    return N, length / N


def couple_transport(B: PiecewiseLinearPath, n: int, block_mesh: Optional[float] = None, seed: int = 0,
                     reverse: bool = False, key: Tuple[int, ...] = (), label: str = 'Z') -> TransportPath:
    """
    A transport path of intensity ``n`` on the domain of ``B``, anchored to ``B`` at block boundaries.

    The domain is split into ``N`` equal blocks of length ``h`` close to ``block_mesh`` (default
    ``max(1/n, 8/n^2)``). On each block the time fraction spent in the current direction is taken at the level
    ``Phi(dB / sqrt(h))`` of its quantile table (mirrored when the current direction is negative), so the
    transport increment over the block is an increasing function of the Brownian one. The switch count and the
    segment lengths inside the block follow from their exact conditional laws.

    With ``reverse=True`` the path starts from 0 at the right end of ``B``'s domain and the blocks are traversed
    backwards, matching a Brownian motion in reversed time such as ``B2`` / ``B3``.

    :raises MeshTooCoarse: when ``block_mesh < 8 / n ** 2``
    """
    if n < 1:
        raise IntensityError(f"n={n} violates n >= 1")
    x0, x1 = B.start, B.end
    N, h = _blocks(n, x1 - x0, block_mesh)
    table = increment_table(n, h)

    bounds = np.arange(N + 1) * h
    phys = x1 - bounds if reverse else x0 + bounds
    phys[-1] = x0 if reverse else x1
    dB = np.diff(B(phys))
    u = special.ndtr(dB / math.sqrt(h))

    gen = streams.stream(seed, *key)
    sigma0 = int(streams.signs(gen))
    w = streams.uniforms(gen, N)

    sigma, counts, fracs = sigma0, np.zeros(N, dtype=int), np.ones(N)
    for j in range(N):
        v = u[j] if sigma > 0 else 1.0 - u[j]
        if v > table.continuous_mass:
            continue
        f = float(table.quantile(v))
        k, post = table.switch_posterior(f)
        idx = min(int(np.searchsorted(np.cumsum(post), w[j], side='right')), len(k) - 1)
        counts[j], fracs[j] = int(k[idx]), f
        if counts[j] % 2:
            sigma = -sigma

    expo = streams.exponentials(gen, int(np.sum(counts + 1)))
    tau, pos = [], 0
    for j in range(N):
        k = counts[j]
        if k == 0:
            continue
        p_, q_ = _beta_shape(k)
        e = expo[pos:pos + k + 1]
        pos += k + 1
        seg = np.empty(k + 1)
        seg[0::2] = fracs[j] * h * e[:p_] / e[:p_].sum()
        seg[1::2] = (1.0 - fracs[j]) * h * e[p_:] / e[p_:].sum()
        tau.append(bounds[j] + np.cumsum(seg[:-1]))
    tau = np.concatenate(tau) if tau else np.empty(0)
    log.debug("coupled %s: n=%s blocks=%s h=%s switches=%s", label, n, N, h, len(tau))
    Z = _path_from_switches(n, sigma0, tau, x0, x1, reverse, label)
    return Z


def extract_gaps(Z: TransportPath) -> np.ndarray:
    """
    Gaps between consecutive switches in the order they happened, starting from the path's origin. The first
    gap runs from the origin to the first switch, so there is one gap per switch.
    """
    sw = np.asarray(Z.switch_times, dtype=float)
    if len(sw) == 0:
        return np.empty(0)
    pos = Z.origin - sw[::-1] if Z.direction < 0 else sw - Z.origin
    return np.diff(np.concatenate(([0.0], pos)))


def block_anchor_errors(Z: TransportPath, B: PiecewiseLinearPath, block_mesh: Optional[float] = None) -> np.ndarray:
    """``|Z - B|`` at the interior block boundaries used by :func:`.couple_transport` for ``Z``'s intensity"""
    x0, x1 = max(Z.start, B.start), min(Z.end, B.end)
    N, h = _blocks(Z.n, x1 - x0, block_mesh)
    t = x0 + np.arange(1, N) * h
    if len(t) == 0:
        t = np.array([x1])
    return np.abs(Z(t) - B(t))
