import math
import unittest

import numpy as np

from privex.rosenblatt import validate_params, Params
from privex.rosenblatt import streams
from privex.rosenblatt.paths import GridPath

__all__ = [
    'P75', 'P60', 'SMALL', 'params', 'small_params', 'brownian_grid', 'RosenBase', 'np', 'math'
]

P75 = dict(H=0.75, beta=0.44, gamma=0.03)
P60 = dict(H=0.6, beta=0.45, gamma=0.03)
# cheap settings for tests which run the whole pipeline
SMALL = dict(n=16, bm_mesh=256, output_grid_size=4, time_quad_points=16)


def params(**kwargs) -> Params:
    return validate_params({**P75, **kwargs})


def small_params(**kwargs) -> Params:
    return validate_params({**P75, **SMALL, **kwargs})


def brownian_grid(x0: float, x1: float, cells: int, seed: int, *key: int, label: str = 'B') -> GridPath:
    """A Brownian path on a uniform grid of ``[x0, x1]`` started from 0 at ``x0``"""
    t = np.linspace(x0, x1, cells + 1)
    inc = streams.normals(streams.stream(seed, *key), cells) * np.sqrt(np.diff(t))
    return GridPath(t, np.concatenate(([0.0], np.cumsum(inc))), label)


class RosenBase(unittest.TestCase):
    def assertWithinSE(self, value: float, target: float, se: float, k: float = 4.0, allowance: float = 0.0):
        """``|value - target| <= k * se + allowance``"""
        tol = k * se + allowance
        self.assertLessEqual(abs(value - target), tol, f"{value} differs from {target} by more than {tol}")

    def assertRelClose(self, value: float, target: float, rel: float):
        self.assertLessEqual(abs(value - target), rel * abs(target), f"{value} vs {target} (rel {rel})")
