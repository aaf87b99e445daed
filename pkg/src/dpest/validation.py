"""Input validation helpers in the style of ``sklearn.utils.validation``."""
from __future__ import annotations

import numbers

import numpy as np

from .exceptions import DomainError, ShapeError
from .model import ChallengeObservation

COUNT_COLUMNS = ("n0", "n1", "x", "y")


def check_counts(X, ids=None) -> list[ChallengeObservation]:
    """Convert count data to a list of observations.

    Parameters
    ----------
    X : array-like of shape (n, 4) or sequence of ChallengeObservation
        Columns are ``n0, n1, x, y``. An empty input means no data.
    ids : sequence of str, optional
        Record labels; defaults to the row index.
    """
    if isinstance(X, ChallengeObservation):
        return [X]
    if isinstance(X, (list, tuple)) and X and all(isinstance(o, ChallengeObservation) for o in X):
        return list(X)
    arr = np.asarray(X)
    if arr.size == 0:
        return []
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ShapeError(f"counts must have shape (n, 4) with columns {COUNT_COLUMNS}, got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.number):
        raise DomainError("counts must be numeric")
    if np.any(arr != np.round(arr)):
        raise DomainError("counts must be integers")
    arr = arr.astype(np.int64)
    if ids is None:
        ids = [str(i) for i in range(len(arr))]
    elif len(ids) != len(arr):
        raise ShapeError(f"{len(ids)} ids for {len(arr)} rows")
    return [ChallengeObservation(str(i), *map(int, row)) for i, row in zip(ids, arr)]


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise DomainError(f"seed must be an integer, got {seed!r}")
    if not 0 <= seed < 2**64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    return int(seed)
