"""
Small helper functions shared by the simulation modules: a switchable caching decorator, config hashing
and conversion of numpy-heavy objects into JSON / CSV friendly values.
"""
import csv
import functools
import hashlib
import json
import logging
import math
from typing import Union, Any, Iterable, Sequence

import numpy as np
from privex.helpers import r_cache, empty

from privex.rosenblatt import settings

log = logging.getLogger(__name__)

__all__ = ['rs_cache', 'config_hash', 'jsonable', 'dumps_json', 'fmt_num', 'write_csv']


def rs_cache(cache_key: Union[str, callable], cache_time=None, *c_args, **c_kwargs):
    """
    Wrapper around :func:`privex.helpers.r_cache` which can be switched off globally by setting
    :attr:`privex.rosenblatt.settings.CACHE` to ``False`` (or ``ROSEN_CACHE=false`` in the environment).

    Only deterministic, expensive artefacts are cached (normalizing constants, quantile tables, kernel stacks),
    and the cached objects are never mutated by their consumers.

        >>> @rs_cache(lambda H: f"rosen:demo:{H!r}")
        ... def slow_constant(H: float) -> float:
        ...     return H * 2

    """
    cache_time = settings.CACHE_TIME if empty(cache_time) else cache_time

    def _decorator(f):
        @functools.wraps(f)
        def wrapper(*args, **kwargs):
            if settings.CACHE:
                log.debug("caching enabled! wrapped func '%s' - accessing cache via r_cache", f.__name__)
                return r_cache(cache_key, cache_time, *c_args, **c_kwargs)(f)(*args, **kwargs)
            log.debug("caching disabled! calling '%s' directly", f.__name__)
            return f(*args, **kwargs)
        return wrapper
    return _decorator


def jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars / arrays, tuples and dict-like objects into plain JSON types"""
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, '__dataclass_fields__'):
        return jsonable(dict(obj))
    return obj


def dumps_json(obj: Any) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline. Identical input gives identical bytes."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, separators=(',', ': ')) + "\n"


def config_hash(obj: Any, length: int = 12) -> str:
    """First ``length`` hex digits of the sha256 of the canonical JSON form of ``obj``"""
    raw = json.dumps(jsonable(obj), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(raw.encode('utf-8')).hexdigest()[:length]


def fmt_num(v: Union[float, int]) -> str:
    """Format a number with 17 significant digits, which round-trips any IEEE double"""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return '%.17g' % float(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    """Write an RFC-4180 style CSV (``\\r\\n`` line endings), formatting floats via :func:`.fmt_num`"""
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\r\n')
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_num(v) if isinstance(v, (float, int, np.floating, np.integer)) else v for v in row])
