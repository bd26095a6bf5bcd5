"""
Exception classes used throughout :mod:`privex.rosenblatt`.

Every exception carries a short machine readable :attr:`.RosenblattException.code`, which the command line
front end (:mod:`privex.rosenblatt.cli`) echoes to stderr and maps onto an exit code.

Copyright::

    +===================================================+
    |                 © 2020 Privex Inc.                |
    |               https://www.privex.io               |
    +===================================================+
    |                                                   |
    |        Python Rosenblatt Approximation library    |
    |        License: X11/MIT                           |
    |                                                   |
    +===================================================+

"""


class RosenblattException(Exception):
    """Base exception for all :mod:`privex.rosenblatt` exceptions"""
    code = 'ERR'


class ParamError(RosenblattException):
    """A simulation parameter violates one of its constraints"""
    code = 'ERR_PARAM'


class HurstError(ParamError):
    """The Hurst index is outside of the open interval (1/2, 1)"""
    code = 'ERR_HURST'


class BetaError(ParamError):
    """The rate parameter ``beta`` is outside of its admissible open interval"""
    code = 'ERR_BETA'


class GammaError(ParamError):
    """The rate-loss parameter ``gamma`` breaks ``0 < gamma < beta`` or ``beta + gamma < 1/2``"""
    code = 'ERR_GAMMA'


class DomainError(RosenblattException):
    """An argument lies outside of the domain where the operation is defined"""
    code = 'ERR_DOMAIN'


class IntensityError(RosenblattException):
    """The transport intensity ``n`` is too small (or too large) for the requested operation"""
    code = 'ERR_N'


class SingularKernel(DomainError):
    """The power kernel was evaluated on (or past) its singularity"""
    code = 'ERR_SINGULAR'


class DiagonalKernel(DomainError):
    """The Rosenblatt kernel was evaluated on the diagonal ``y1 == y2``, where it diverges"""
    code = 'ERR_DIAGONAL'


class QuadBudgetExceeded(RosenblattException):
    """Adaptive quadrature could not reach the requested error within its subdivision budget"""
    code = 'ERR_QUAD_BUDGET'


class MeshTooCoarse(RosenblattException):
    """A time grid or block mesh is too coarse for the operation"""
    code = 'ERR_MESH'


class NoConvergence(RosenblattException):
    """Mesh doubling did not settle within the maximum number of quadrature points"""
    code = 'ERR_NO_CONVERGENCE'


class BudgetExceeded(RosenblattException):
    """The requested grid would exceed the configured cell budget"""
    code = 'ERR_BUDGET'


class InvalidInput(RosenblattException):
    """Input data for a statistical routine is unusable (too few points, non-positive values...)"""
    code = 'ERR_INPUT'


class ConfigError(RosenblattException):
    """A run configuration file or flag could not be parsed, or contains unknown keys"""
    code = 'ERR_CONFIG'
