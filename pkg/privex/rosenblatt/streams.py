"""
Counter-based random streams.

Every random quantity in :mod:`privex.rosenblatt` is drawn from a stream identified by ``(seed, *key)``, where the
key names the driver / purpose and the replicate index. Streams are independent of the order in which they are
created, so replicates give identical results whether they run serially or spread over many threads::

    >>> from privex.rosenblatt.streams import stream, normals, B1
    >>> z = normals(stream(7, B1, 0), 4)
    >>> bool((z == normals(stream(7, B1, 0), 4)).all())
    True

Gaussian and exponential variates are produced by inverting their CDFs on the stream's uniforms.
"""
import logging
from typing import Tuple

import numpy as np
from scipy import special

__all__ = [
    'B1', 'B2', 'B3', 'Z1', 'Z2', 'Z3', 'INDEPENDENT', 'CHAOS', 'REMAINDER', 'COUPLING_B',
    'stream', 'uniforms', 'normals', 'exponentials', 'signs', 'key_trace'
]

log = logging.getLogger(__name__)

B1, B2, B3 = 1, 2, 3
Z1, Z2, Z3 = 11, 12, 13
INDEPENDENT = 14
CHAOS = 21
REMAINDER = 22
COUPLING_B = 31

_TINY = np.finfo(float).tiny


def stream(seed: int, *key: int) -> np.random.Generator:
    """A Philox generator for ``(seed, *key)``. Equal arguments always give the same sequence."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def uniforms(gen: np.random.Generator, size) -> np.ndarray:
    """Uniforms in the open interval ``(0, 1)``"""
    u = gen.random(size)
    return np.clip(u, _TINY, 1.0 - 2 ** -53)


def normals(gen: np.random.Generator, size) -> np.ndarray:
    """Standard normals by inverse CDF"""
    return special.ndtri(uniforms(gen, size))


def exponentials(gen: np.random.Generator, size, rate: float = 1.0) -> np.ndarray:
    """Exponential variates with the given rate (mean ``1/rate``) by inverse CDF"""
    return -np.log(uniforms(gen, size)) / float(rate)


def signs(gen: np.random.Generator, size=None) -> np.ndarray:
    """Fair ``+1 / -1`` signs, one uniform each"""
    u = gen.random(size)
    return np.where(u < 0.5, 1, -1)


def key_trace(seed: int, *key: int) -> Tuple[int, ...]:
    """The ``(seed, *key)`` tuple of a stream as plain ints, as recorded in run metadata"""
    return (int(seed),) + tuple(int(k) for k in key)
