#!/usr/bin/env python
# coding=utf-8
# Filename: utils.py

"""
Utility code for transmonkit.
"""

import os
from concurrent.futures import ThreadPoolExecutor
import numpy as np

from transmonkit.exceptions import ParameterError

#: Environment variable that caps the number of worker threads.
MAX_WORKERS_ENV = 'TRANSMONKIT_MAX_WORKERS'


def get_max_workers(requested=None):
    """
    Number of worker threads to use for parallel sweeps.

    Parameters
    ----------
    requested : int or None
        Number of workers asked for by the caller. None means as many as
        there are cpus.

    Returns
    -------
    n_workers : int
        At least 1, and never more than the value of the
        ``TRANSMONKIT_MAX_WORKERS`` environment variable if that is set.

    """
    n_workers = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(MAX_WORKERS_ENV)
    if cap not in (None, ''):
        try:
            cap = int(cap)
        except ValueError:
            raise ParameterError('{} must be an integer, got {!r}'.format(MAX_WORKERS_ENV, cap))
        if cap < 1:
            raise ParameterError('{} must be >= 1, got {}'.format(MAX_WORKERS_ENV, cap))
        n_workers = min(n_workers, cap)
    return max(1, int(n_workers))


def parallel_map(func, items, n_workers=None):
    """
    Apply func to every item, possibly in worker threads.

    The result list has the order of items, independent of the thread count.

    """
    items = list(items)
    n_workers = min(get_max_workers(n_workers), max(len(items), 1))
    if n_workers == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_workers) as executor:
        return list(executor.map(func, items))


def check_grid(grid, name, minimum=None, allow_equal=False):
    """
    Sanity check of a sweep grid.

    Parameters
    ----------
    grid : sequence of float
        The grid values.
    name : str
        Name of the grid, used in error messages.
    minimum : float or None
        Lower bound of all grid values.
    allow_equal : bool
        If True, values equal to the minimum are accepted.

    Returns
    -------
    grid : ndarray(ndim=1)
        The grid as a float array.

    Raises
    ------
    ParameterError
        If the grid is empty, not strictly ascending or below the minimum.

    """
    grid = np.atleast_1d(np.asarray(grid, dtype=np.float64))
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError('The {} must be a non-empty list of numbers'.format(name))
    if not np.all(np.isfinite(grid)):
        raise ParameterError('The {} contains non-finite values'.format(name))
    if np.any(np.diff(grid) <= 0):
        raise ParameterError('The {} must be strictly ascending, got {}'.format(name, grid.tolist()))
    if minimum is not None:
        too_small = grid < minimum if allow_equal else grid <= minimum
        if np.any(too_small):
            relation = '>=' if allow_equal else '>'
            raise ParameterError('All values of the {} must be {} {}, got {}'.format(
                name, relation, minimum, grid.tolist()))
    return grid
