"""
Path containers and the Brownian drivers.

Three Brownian motions are consumed by the construction, all built from one two-sided Brownian motion ``B``:

 * ``B1`` - ``B`` itself on ``[0, T]``
 * ``B2`` - ``B`` on ``[a, 0]``, i.e. a Brownian motion in reversed time ``tau = -s`` started at 0
 * ``B3`` - the time inversion ``s * B(1/s)`` on ``[1/a, 0]``, which folds the far past ``(-inf, a]`` into a
   bounded interval

``B2`` and ``B3`` share the underlying ``B``: the far past is extended backwards from ``B2(a)``, so
``a * B3(1/a) == B2(a)``.

**Basic usage**:

    >>> from privex.rosenblatt import validate_params
    >>> from privex.rosenblatt.paths import simulate_driver_bundle
    >>> p = validate_params(H=0.75, beta=0.44, gamma=0.03, n=64, bm_mesh=512)
    >>> d = simulate_driver_bundle(p, seed=3)
    >>> float(d.B1(0.0)), float(d.B3(0.0))
    (0.0, 0.0)

"""
import logging
from dataclasses import dataclass, field
from typing import Union, Optional, Tuple, List, Iterable, Sequence

import numpy as np
from privex.helpers import DictDataClass, DictObject, empty
from scipy import stats

from privex.rosenblatt import streams
from privex.rosenblatt.exceptions import InvalidInput, DomainError, MeshTooCoarse
from privex.rosenblatt.helpers import write_csv
from privex.rosenblatt.objects import Params

__all__ = [
    'PiecewiseLinearPath', 'GridPath', 'TransportPath', 'DriverBundle', 'simulate_driver_bundle', 'sup_distance',
    'anderson_increments', 'AnyPath'
]

log = logging.getLogger(__name__)


@dataclass(eq=False)
class PiecewiseLinearPath(DictDataClass):
    """
    A continuous path given by its values at strictly increasing knots, linear in between.

        >>> P = PiecewiseLinearPath([0.0, 1.0, 2.0], [0.0, 2.0, 1.0])
        >>> float(P(0.5)), list(P.slopes)
        (1.0, [2.0, -1.0])

    """
    times: np.ndarray
    """Knot times, strictly increasing"""
    values: np.ndarray
    """Path values at the knots"""
    label: str = ''
    """Name of the path (e.g. ``B1`` or ``Z2``) used in CSV headers and log messages"""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise InvalidInput(f"path '{self.label}': times and values must be 1-D and of equal length")
        if len(self.times) < 2:
            raise InvalidInput(f"path '{self.label}' needs at least 2 knots")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidInput(f"path '{self.label}': knot times must be strictly increasing")

    def __call__(self, x):
        r = np.interp(np.asarray(x, dtype=float), self.times, self.values)
        return float(r) if np.ndim(r) == 0 else r

    def __len__(self):
        return len(self.times)

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def slopes(self) -> np.ndarray:
        return self.increments / self.widths

    def covers(self, x0: float, x1: float, tol: float = 1e-12) -> bool:
        span = max(1.0, abs(self.start), abs(self.end))
        return x0 >= self.start - tol * span and x1 <= self.end + tol * span

    def restrict(self, x0: float, x1: float) -> "PiecewiseLinearPath":
        """
        The same path on ``[x0, x1]``: the interior knots plus interpolated end knots. Returns a plain
        :class:`.PiecewiseLinearPath`.

        :raises DomainError: when ``[x0, x1]`` is empty or not inside the path's domain
        """
        if not x1 > x0 or not self.covers(x0, x1):
            raise DomainError(f"cannot restrict '{self.label}' on [{self.start}, {self.end}] to [{x0}, {x1}]")
        inner = self.times[(self.times > x0) & (self.times < x1)]
        t = np.concatenate(([x0], inner, [x1]))
        return PiecewiseLinearPath(t, np.interp(t, self.times, self.values), label=self.label)

    def scaled(self, lam: float) -> "PiecewiseLinearPath":
        return PiecewiseLinearPath(self.times.copy(), self.values * float(lam), label=self.label)

    def plus(self, other: "PiecewiseLinearPath") -> "PiecewiseLinearPath":
        """Pointwise sum of two paths on the intersection of their domains (merged knot set)"""
        lo, hi = max(self.start, other.start), min(self.end, other.end)
        if not hi > lo:
            raise DomainError(f"paths '{self.label}' and '{other.label}' do not overlap")
        t = np.union1d(self.times, other.times)
        t = t[(t >= lo) & (t <= hi)]
        return PiecewiseLinearPath(t, self(t) + other(t), label=f"{self.label}+{other.label}")

    @property
    def csv_header(self) -> List[str]:
        return ['t', self.label or 'value']

    def csv_rows(self) -> Iterable[list]:
        return ([t, v] for t, v in zip(self.times, self.values))

    def to_csv(self, filename: str, seed: Optional[int] = None):
        """Write the knots as ``(t, value)`` rows. The value column is named after the path and ``seed``."""
        header = list(self.csv_header)
        if seed is not None:
            header[-1] = f"{header[-1]}[seed={seed}]"
        write_csv(filename, header, self.csv_rows())


@dataclass(eq=False)
class GridPath(PiecewiseLinearPath):
    """A sampled Brownian path, linear between the knots of its (uniform or geometric) grid"""


@dataclass(eq=False)
class TransportPath(PiecewiseLinearPath):
    """
    A uniform transport path: speed ``n`` with direction flips at the switch times.

    The knots are the two ends of the interval plus every switch, so consecutive slopes alternate in sign.
    ``direction=-1`` marks a path that runs backwards from the right end of its interval (the past drivers
    ``Z2``, ``Z3``), in which case ``sigma0`` is the initial velocity in reversed time.
    """
    n: int = 1
    """Intensity: speed ``n``, switching rate ``n ** 2``"""
    sigma0: int = 1
    """Initial direction of travel (``+1`` / ``-1``), counted in the direction the path was generated"""
    switch_times: np.ndarray = None
    """Switch times in physical time, increasing"""
    direction: int = 1
    """``+1`` when generated forwards from :attr:`.origin`, ``-1`` when generated backwards"""
    origin: float = 0.0
    """The time the path was started from (where it takes the value 0)"""

    def __post_init__(self):
        super().__post_init__()
        self.switch_times = self.times[1:-1].copy() if self.switch_times is None else \
            np.asarray(self.switch_times, dtype=float)

    @property
    def csv_header(self) -> List[str]:
        return ['segment_start', 'segment_end', 'slope']

    def csv_rows(self) -> Iterable[list]:
        return ([a, b, m] for a, b, m in zip(self.times[:-1], self.times[1:], self.slopes))


AnyPath = Union[PiecewiseLinearPath, GridPath, TransportPath]


@dataclass(eq=False)
class DriverBundle(DictDataClass):
    """The jointly simulated Brownian drivers of one replicate"""
    B1: GridPath
    """``B`` on ``[0, T]``"""
    B2: GridPath
    """``B`` on ``[a, 0]``"""
    B3: GridPath
    """``s * B(1/s)`` on ``[1/a, 0]``, geometric grid down to ``-delta`` then 0"""
    delta: float
    """Smallest ``|s|`` resolved by ``B3`` before its anchored value at 0"""
    seed_trace: Tuple[tuple, ...] = ()
    """The stream keys consumed, in generation order"""
    meta: Union[dict, DictObject] = field(default_factory=DictObject)

    def scaled(self, lam: float) -> "DriverBundle":
        return DriverBundle(
            B1=GridPath(self.B1.times, self.B1.values * lam, self.B1.label),
            B2=GridPath(self.B2.times, self.B2.values * lam, self.B2.label),
            B3=GridPath(self.B3.times, self.B3.values * lam, self.B3.label),
            delta=self.delta, seed_trace=self.seed_trace, meta=self.meta
        )


def _brownian_from(start_value: float, steps: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Values of a Brownian motion started at ``start_value`` after the (positive) time steps ``steps``"""
    inc = streams.normals(gen, len(steps)) * np.sqrt(steps)
    return np.concatenate(([start_value], start_value + np.cumsum(inc)))


def simulate_driver_bundle(p: Params, mesh: Optional[int] = None, seed: Optional[int] = None, replicate: int = 0,
                           delta: Optional[float] = None) -> DriverBundle:
    """
    Simulate ``(B1, B2, B3)`` for one replicate.

    Generation order: ``B1`` forwards from 0 on a uniform grid of ``[0, T]``; ``B2`` backwards from 0 on a uniform
    grid of ``[a, 0]``; then ``B`` on ``(-inf, a]`` continued backwards from ``B2(a)`` at the times ``1/s`` of a
    geometric ``s``-grid from ``1/a`` to ``-delta``; finally ``B3(s) = s * B(1/s)`` with ``B3(0) = 0`` appended.

    :param Params p: validated parameters
    :param int mesh: knots per driver (default: ``p.bm_mesh``)
    :param int seed: master seed (default: ``p.seed``)
    :param int replicate: replicate index, part of every stream key
    :param float delta: smallest resolved ``|s|`` of ``B3`` (default ``eps_n / 8``); a value not below ``|1/a|``
                        is replaced by ``|1/a| / 16`` with a warning
    :raises MeshTooCoarse: when ``mesh < 16``
    :raises DomainError: when ``delta <= 0``
    """
    mesh = p.bm_mesh if empty(mesh) else int(mesh)
    seed = p.seed if seed is None else int(seed)
    if mesh < 16:
        raise MeshTooCoarse(f"driver mesh {mesh} violates mesh >= 16 (points per driver)")
    inv_a = 1.0 / p.a
    delta = p.epsilon / 8 if delta is None else float(delta)
    if not delta > 0:
        raise DomainError(f"delta={delta} violates delta > 0")
    if delta >= abs(inv_a):
        # B3 must still carry a few knots left of -delta
        clamped = abs(inv_a) / 16
        log.warning("delta=%s is not below |1/a|=%s, resolving B3 down to %s instead", delta, abs(inv_a), clamped)
        delta = clamped

    keys = tuple(streams.key_trace(seed, sid, replicate) for sid in (streams.B1, streams.B2, streams.B3))

    t1 = np.linspace(0.0, p.T, mesh)
    b1 = _brownian_from(0.0, np.diff(t1), streams.stream(*keys[0]))
    b1[0] = 0.0

    # B2 in reversed time tau = -s, from tau = 0 to tau = -a
    tau = np.linspace(0.0, -p.a, mesh)
    b2_rev = _brownian_from(0.0, np.diff(tau), streams.stream(*keys[1]))
    t2, b2 = -tau[::-1], b2_rev[::-1]
    t2[0], t2[-1] = p.a, 0.0

    s3 = inv_a * (delta / abs(inv_a)) ** np.linspace(0.0, 1.0, mesh - 1)
    u = 1.0 / s3
    u[0] = p.a
    far = _brownian_from(b2[0], u[:-1] - u[1:], streams.stream(*keys[2]))
    b3 = np.concatenate((far / u, [0.0]))
    b3[0] = b2[0] / p.a
    t3 = np.concatenate((s3, [0.0]))

    return DriverBundle(
        B1=GridPath(t1, b1, 'B1'), B2=GridPath(t2, b2, 'B2'), B3=GridPath(t3, b3, 'B3'),
        delta=delta, seed_trace=keys, meta=DictObject(mesh=mesh, seed=seed, replicate=replicate)
    )


def sup_distance(P: AnyPath, Q: AnyPath, interval: Optional[Sequence[float]] = None) -> float:
    """
    ``max |P - Q|`` over ``interval`` (default: the common domain). Both paths are piecewise linear, so the
    maximum over the merged knot set is exact.

        >>> P = PiecewiseLinearPath([0.0, 1.0], [0.0, 0.0])
        >>> Q = PiecewiseLinearPath([0.0, 1.0], [0.0, -3.0])
        >>> sup_distance(P, Q)
        3.0

    :raises DomainError: when the interval is empty or not covered by both paths
    """
    if interval is None:
        interval = (max(P.start, Q.start), min(P.end, Q.end))
    x0, x1 = float(interval[0]), float(interval[1])
    if x1 < x0 or not P.covers(x0, x1) or not Q.covers(x0, x1):
        raise DomainError(f"sup_distance: [{x0}, {x1}] is not covered by both '{P.label}' and '{Q.label}'")
    t = np.union1d(P.times, Q.times)
    t = np.concatenate(([x0], t[(t > x0) & (t < x1)], [x1]))
    return float(np.max(np.abs(np.interp(t, P.times, P.values) - np.interp(t, Q.times, Q.values))))


def anderson_increments(bundles: Sequence[DriverBundle], parts: int = 4) -> DictObject:
    """
    Batch normality / independence check of the ``B1`` increments over ``parts`` disjoint intervals of ``[0, T]``.

    Each increment is standardised by the square root of its interval length. The pooled standardised increments
    are tested against the normal law with :func:`scipy.stats.anderson`. Sums of neighbouring increment pairs
    (divided by ``sqrt(2)``) have unit variance only when the increments are uncorrelated, so their variance is
    checked too. ``passed`` requires both Anderson-Darling statistics below the 1 % critical value and both
    variances within 4 standard errors of 1.
    """
    if len(bundles) < 8:
        raise InvalidInput("anderson_increments needs at least 8 bundles")
    if parts < 2 or parts % 2:
        raise InvalidInput(f"anderson_increments needs an even number of parts (got {parts})")
    B = np.vstack([b.B1.values for b in bundles])
    times = bundles[0].B1.times
    idx = np.linspace(0, len(times) - 1, parts + 1).round().astype(int)
    z = np.diff(B[:, idx], axis=1) / np.sqrt(np.diff(times[idx]))
    pooled = z.ravel()
    pairs = ((z[:, 0::2] + z[:, 1::2]) / np.sqrt(2)).ravel()

    def _ad(x):
        res = stats.anderson(x, dist='norm')
        crit = float(res.critical_values[list(res.significance_level).index(1.0)])
        return float(res.statistic), crit

    def _var(x):
        return float(np.var(x, ddof=1)), float(np.sqrt(2.0 / (len(x) - 1)))

    stat, crit = _ad(pooled)
    pstat, pcrit = _ad(pairs)
    (var, var_se), (pvar, pvar_se) = _var(pooled), _var(pairs)
    return DictObject(
        statistic=stat, critical_1pct=crit, pair_statistic=pstat, pair_critical_1pct=pcrit,
        variance=var, variance_se=var_se, pair_variance=pvar, pair_variance_se=pvar_se,
        passed=bool(stat < crit and pstat < pcrit and abs(var - 1.0) <= 4 * var_se and
                    abs(pvar - 1.0) <= 4 * pvar_se)
    )
