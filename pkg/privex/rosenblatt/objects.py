"""
This file contains the data classes used to pass validated parameters, numerical settings and results between the
modules of :mod:`privex.rosenblatt`. They're all :class:`privex.helpers.DictDataClass` based, which gives them::

 * IDE attribute assistance (aka IntelliSense),
 * dict-style access ``obj['H']`` and conversion via ``dict(obj)`` (used when writing JSON sidecars),
 * construction from plain dictionaries via ``Params.from_dict(some_dict)``, with unknown keys kept in ``raw_data``.

"""
import logging
from dataclasses import field, dataclass, replace as dc_replace
from typing import Union, List, Optional, Dict, Tuple

import numpy as np
from privex.helpers import DictObject, DictDataClass

from privex.rosenblatt.exceptions import InvalidInput

__all__ = [
    'Params', 'KernelConstants', 'QuadSpec', 'ChaosGridSpec', 'McSummary', 'RateFit', 'RunConfig', 'RosenblattRun',
    'QUANTILE_LEVELS'
]

log = logging.getLogger(__name__)

QUANTILE_LEVELS = (5, 25, 50, 75, 95)


@dataclass
class Params(DictDataClass):
    """
    The validated parameter tuple governing every simulation run.

    Don't construct this directly unless you've already checked the constraints - use
    :func:`privex.rosenblatt.kernels.validate_params` which enforces them and raises a descriptive
    :class:`.ParamError` subclass on failure::

        >>> from privex.rosenblatt import validate_params
        >>> p = validate_params(H=0.75, beta=0.44, gamma=0.03, a=-1, T=1, n=64)
        >>> round(p.epsilon, 5)
        0.05351

    """
    H: float
    """Hurst index, strictly between 1/2 and 1"""
    beta: float
    """Rate parameter, inside the open interval returned by :func:`.beta_range`"""
    gamma: float
    """Rate-loss parameter, with ``0 < gamma < beta`` and ``beta + gamma < 1/2``"""
    a: float = -1.0
    """Left truncation point of the past (negative)"""
    T: float = 1.0
    """Simulation horizon (positive)"""
    n: int = 64
    """Transport process intensity (speed ``n``, switching rate ``n**2``)"""
    output_grid_size: int = 16
    """Number of cells in the output time grid ``[0, T]``"""
    time_quad_points: int = 16
    """Initial number of midpoint nodes per output cell for the time integrals"""
    bm_mesh: int = 2048
    """Number of knots per Brownian driver"""
    seed: int = 0
    """Unsigned 64-bit master seed"""
    raw_data: Union[dict, DictObject] = field(default_factory=DictObject, repr=False)
    """The raw, unmodified data that was passed as kwargs, as a dictionary"""

    def __post_init__(self):
        self.H, self.beta, self.gamma = float(self.H), float(self.beta), float(self.gamma)
        self.a, self.T = float(self.a), float(self.T)
        self.n, self.seed = int(self.n), int(self.seed)
        self.output_grid_size, self.time_quad_points = int(self.output_grid_size), int(self.time_quad_points)
        self.bm_mesh = int(self.bm_mesh)

    @property
    def epsilon(self) -> float:
        """The shift ``eps_n = n ** (-beta / (1 - H/2))`` for this parameter set's ``n``"""
        from privex.rosenblatt.kernels import epsilon_n
        return epsilon_n(self.n, self)

    @property
    def alpha(self) -> Optional[float]:
        """The rate envelope ``alpha_n``, or ``None`` when ``n < 2``"""
        from privex.rosenblatt.kernels import alpha_n
        return alpha_n(self.n, self) if self.n >= 2 else None

    @property
    def alpha_hat(self) -> Optional[float]:
        """The rate envelope ``alpha_hat_n`` (uses ``beta + gamma``), or ``None`` when ``n < 2``"""
        from privex.rosenblatt.kernels import alpha_n
        return alpha_n(self.n, self, hat=True) if self.n >= 2 else None

    @property
    def lo_beta(self) -> float:
        from privex.rosenblatt.kernels import beta_range
        return beta_range(self.H)[0]

    @property
    def t_grid(self) -> np.ndarray:
        """The default output grid: ``output_grid_size`` equal cells on ``[0, T]``"""
        return np.linspace(0.0, self.T, self.output_grid_size + 1)

    def core(self) -> dict:
        """The parameter values as a plain dict (no ``raw_data``), used for hashing and JSON sidecars"""
        return dict(
            H=self.H, beta=self.beta, gamma=self.gamma, a=self.a, T=self.T, n=self.n,
            output_grid_size=self.output_grid_size, time_quad_points=self.time_quad_points,
            bm_mesh=self.bm_mesh, seed=self.seed
        )

    def replace(self, **changes) -> "Params":
        """Return a re-validated copy of this parameter set with ``changes`` applied"""
        from privex.rosenblatt.kernels import validate_params
        return validate_params({**self.core(), **changes})


@dataclass
class KernelConstants(DictDataClass):
    """
    The normalizing constant ``cH`` of the Rosenblatt process, which ensures ``E(X_t)^2 = t^{2H}``,
    along with the quadrature error it was computed with.
    """
    H: float
    """The Hurst index these constants belong to"""
    cH: float
    """The normalizing constant ``(2 * ||g_1||^2) ** -0.5``"""
    cH_rel_err: float
    """Estimated relative error of ``cH``"""
    norm_sq: float = 0.0
    """The squared L2 norm of the kernel ``g_1`` over ``(-inf, 1]^2``"""
    norm_abs_err: float = 0.0
    """Absolute error estimate of :attr:`.norm_sq` reported by the quadrature"""


@dataclass
class QuadSpec(DictDataClass):
    """
    Settings for :func:`privex.rosenblatt.integrate.graded_time_quadrature`.

    The effective grading of the mesh is ``grading_exponent / (1 + singular_exponent)`` - which is ``2 / H`` for
    integrands behaving like ``s ** (H - 1)`` near zero.
    """
    points: int = 16
    """Initial number of midpoint nodes (doubled until the estimate settles)"""
    grading_exponent: float = 2.0
    """Grading strength, before division by ``1 + singular_exponent``"""
    target_rel_err: float = 1e-3
    """Accept once doubling the nodes changes the estimate by at most this relative amount"""
    max_points: int = 4096
    """Give up (raising :class:`.NoConvergence`) once the node count would pass this"""

    def __post_init__(self):
        if int(self.points) < 16:
            raise InvalidInput(f"QuadSpec.points must be >= 16 (got {self.points})")
        if not (0 < float(self.target_rel_err) <= 1e-2):
            raise InvalidInput(f"QuadSpec.target_rel_err must be in (0, 1e-2] (got {self.target_rel_err})")
        if float(self.grading_exponent) <= 0:
            raise InvalidInput(f"QuadSpec.grading_exponent must be positive (got {self.grading_exponent})")
        self.points, self.max_points = int(self.points), int(self.max_points)


@dataclass
class ChaosGridSpec(DictDataClass):
    """
    Grid for the chaos-grid oracle: cells of width ``mesh`` on ``[-1, max(t_grid)]`` and geometrically growing
    cells (ratio ``growth``) from ``-1`` down to ``x_min``.
    """
    t_grid: Tuple[float, ...] = (0.0, 0.5, 1.0)
    """Output times (sorted, non-negative)"""
    x_min: float = -1e4
    """Truncation point of the past. The variance lost beyond it decays only like ``|x_min|^{H-1}``."""
    mesh: float = 1.0 / 128
    """Cell width near the present, ``[-1, max(t_grid)]``"""
    growth: float = 1.08
    """Ratio between consecutive cell widths in ``[x_min, -1]``"""

    def __post_init__(self):
        self.t_grid = tuple(float(t) for t in self.t_grid)
        self.x_min, self.mesh, self.growth = float(self.x_min), float(self.mesh), float(self.growth)

    def key(self) -> str:
        return f"{self.x_min!r}:{self.mesh!r}:{self.growth!r}:{','.join(repr(t) for t in self.t_grid)}"


@dataclass
class McSummary(DictDataClass):
    """A Monte Carlo summary of one estimator over independent replicates"""
    name: str
    """Name of the estimator, e.g. ``remainder_G``"""
    reps: int
    """Number of replicates summarised"""
    mean: float
    """Sample mean"""
    std_err: float
    """Standard error of the mean"""
    std: float = 0.0
    """Sample standard deviation"""
    quantiles: Dict[str, float] = field(default_factory=dict)
    """Sample quantiles at 5/25/50/75/95 %, keyed by the percentage as a string"""
    config_hash: str = ''
    """Hash of the configuration which produced the samples"""

    @classmethod
    def from_samples(cls, name: str, samples, config_hash: str = '') -> "McSummary":
        x = np.asarray(samples, dtype=float).ravel()
        if x.size < 2:
            raise InvalidInput(f"McSummary needs at least 2 replicates (got {x.size})")
        qs = np.percentile(x, QUANTILE_LEVELS)
        std = float(np.std(x, ddof=1))
        return cls(
            name=name, reps=int(x.size), mean=float(np.mean(x)), std_err=std / np.sqrt(x.size), std=std,
            quantiles={str(k): float(v) for k, v in zip(QUANTILE_LEVELS, qs)}, config_hash=config_hash
        )


@dataclass
class RateFit(DictDataClass):
    """
    Result of a log-log rate fit ``log(median) ~ intercept + slope * log(n)``, plus the acceptance checks
    performed by the rate studies in :mod:`privex.rosenblatt.experiments`.
    """
    ns: List[int]
    """The intensities (or generic x values) the medians were measured at"""
    medians: List[float]
    """Median error per ``n``"""
    slope: float
    """Fitted log-log slope"""
    intercept: float
    """Fitted intercept (in log coordinates)"""
    r2: float
    """Coefficient of determination of the fit, in ``[0, 1]``"""
    theoretical_slope: Optional[float] = None
    """The exponent predicted by theory, when one exists"""
    log_correction_used: bool = False
    """Whether ``(5/2) * log(log(n))`` was subtracted before fitting"""
    control_slope: Optional[float] = None
    """Slope of the uncoupled control study (coupling-rate study only)"""
    envelope_C: Optional[float] = None
    """Envelope constant calibrated at the smallest ``n`` (strong-rate study only)"""
    envelope_ok: Optional[bool] = None
    """Whether every larger ``n`` stayed under ``2 * C * alpha_hat_n``"""
    monotone_ok: Optional[bool] = None
    """Whether the medians decrease (one inversion allowed)"""
    passed: Optional[bool] = None
    """Overall verdict of the study"""

    def __post_init__(self):
        if len(self.ns) != len(self.medians) or len(self.ns) < 3:
            raise InvalidInput("RateFit needs at least 3 (n, median) pairs of matching length")


@dataclass
class RunConfig(DictDataClass):
    """
    A run configuration as read from a JSON file and/or command line flags. Unknown keys are rejected
    by :func:`privex.rosenblatt.cli.load_config`.
    """
    H: float = 0.75
    beta: float = 0.44
    gamma: float = 0.03
    a: float = -1.0
    T: float = 1.0
    n: int = 64
    reps: int = 200
    """Monte Carlo replicates per study"""
    seed: int = 0
    bm_mesh: int = 2048
    output_grid_size: int = 16
    time_quad_points: int = 16
    block_mesh: Optional[float] = None
    """Transport coupling block length (``None``: automatic, ``max(1/n, 8/n^2)``)"""
    ns: List[int] = field(default_factory=lambda: [8, 16, 32, 64, 128])
    """Intensities for the rate studies"""
    out: str = 'rosen_output'
    """Output directory - nothing is written outside of it"""
    experiment: str = 'simulate'
    """Experiment selector: ``simulate`` or one of the ``verify`` suites"""
    with_reference: bool = False
    """Also build the grid-Brownian reference path in ``simulate``"""
    raw_data: Union[dict, DictObject] = field(default_factory=DictObject, repr=False)
    """The raw, unmodified data that was passed as kwargs, as a dictionary"""

    def params_dict(self) -> dict:
        return dict(
            H=self.H, beta=self.beta, gamma=self.gamma, a=self.a, T=self.T, n=self.n, seed=self.seed,
            bm_mesh=self.bm_mesh, output_grid_size=self.output_grid_size, time_quad_points=self.time_quad_points,
        )

    def effective(self) -> dict:
        """Every setting except ``raw_data`` - echoed into each output's meta"""
        d = self.params_dict()
        d.update(reps=self.reps, block_mesh=self.block_mesh, ns=list(self.ns), out=self.out,
                 experiment=self.experiment, with_reference=self.with_reference)
        return d


@dataclass(eq=False)
class RosenblattRun(DictDataClass):
    """
    One simulated path of the transport approximation ``X = X1 + 2*X2 + X3`` on an output grid, optionally
    alongside the grid-Brownian reference built from the same drivers.

    ``X`` is the raw assembly of the squared-integral components, which carries the deterministic trace
    :attr:`.trace`; :attr:`.X_centered` removes it, giving the centred (double Wiener-Ito) version.
    """
    t_grid: np.ndarray
    """Output times, starting at 0"""
    X1: np.ndarray
    """First component ``cH * int (Y1)^2``"""
    X2: np.ndarray
    """Cross component ``cH * int Y1*Y3``"""
    X3: np.ndarray
    """Third component ``cH * int (Y3)^2``"""
    X: np.ndarray = None
    """Assembly ``X1 + 2*X2 + X3``"""
    trace: np.ndarray = None
    """Expected value of the raw assembly under Brownian drivers"""
    Xref: Optional[np.ndarray] = None
    """Reference path built from the Brownian drivers (only with ``with_reference=True``)"""
    ref_trace: Optional[np.ndarray] = None
    """Expected value of the raw reference path"""
    meta: Union[dict, DictObject] = field(default_factory=DictObject)
    """Parameters, seeds, tuning sequences, ``cH`` and the error budget"""

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.X1, self.X2, self.X3 = (np.asarray(v, dtype=float) for v in (self.X1, self.X2, self.X3))
        if self.X is None:
            self.X = self.X1 + 2.0 * self.X2 + self.X3
        if self.trace is None:
            self.trace = np.zeros_like(self.t_grid)
        if not (len(self.t_grid) == len(self.X1) == len(self.X2) == len(self.X3) == len(self.X)):
            raise InvalidInput("RosenblattRun sequences must all have the same length as t_grid")

    @property
    def X_centered(self) -> np.ndarray:
        return self.X - self.trace

    @property
    def Xref_centered(self) -> Optional[np.ndarray]:
        if self.Xref is None:
            return None
        return self.Xref - (0.0 if self.ref_trace is None else self.ref_trace)

    def sup_error(self) -> float:
        """``sup_t |X_centered - Xref_centered|`` over the output grid"""
        if self.Xref is None:
            raise InvalidInput("sup_error requires a run assembled with_reference=True")
        return float(np.max(np.abs(self.X_centered - self.Xref_centered)))

    def rows(self) -> List[list]:
        cols = [self.t_grid, self.X1, self.X2, self.X3, self.X]
        if self.Xref is not None:
            cols.append(self.Xref)
        return [list(r) for r in zip(*cols)]

    @property
    def header(self) -> List[str]:
        return ['t', 'X1', 'X2', 'X3', 'X'] + (['Xref'] if self.Xref is not None else [])

    def replace(self, **changes) -> "RosenblattRun":
        return dc_replace(self, **changes)
