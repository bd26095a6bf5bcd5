"""
Default configuration for :mod:`privex.rosenblatt`.

Each setting can be overridden through an environment variable of the same name prefixed with ``ROSEN_``, e.g.::

    ROSEN_THREADS=8 ROSEN_CACHE=false rosenblatt verify law --H 0.75

Settings are plain module attributes, so they may also be changed at runtime::

    >>> from privex.rosenblatt import settings
    >>> settings.CACHE = False

"""
from os import getenv as env
from privex.helpers import env_bool

THREADS = int(env('ROSEN_THREADS', 1))
"""Default number of worker threads used to fan out Monte Carlo replicates (``--threads`` overrides it)"""

CACHE = env_bool('ROSEN_CACHE', True)
"""Global cache switch for :func:`privex.rosenblatt.helpers.rs_cache`"""

CACHE_TIME = int(env('ROSEN_CACHE_TIME', 86400))
"""How long (seconds) cached kernel constants / quantile tables stay valid"""

MAX_INTENSITY = int(env('ROSEN_MAX_INTENSITY', 256))
"""Largest transport intensity ``n`` accepted by run assembly unless ``allow_large_n=True`` is passed"""

MAX_CELLS = int(env('ROSEN_MAX_CELLS', 4000))
"""Largest number of grid cells allowed for the chaos-grid oracle and grid double sums"""

QTABLE_SIZE = int(env('ROSEN_QTABLE_SIZE', 8193))
"""Number of grid points in each transport block-increment quantile table"""

CHUNK_ELEMENTS = int(env('ROSEN_CHUNK_ELEMENTS', 2_000_000))
"""Upper bound on the size of the (evaluation point x segment) work arrays built by the integrators"""

LOG_LEVEL = env('ROSEN_LOG_LEVEL', 'WARNING')
"""Log level for the package's default console handler"""

QUAD_TOLERANCE = float(env('ROSEN_QUAD_TOLERANCE', 1e-4))
"""Relative error accepted for the normalizing constant ``cH``"""
