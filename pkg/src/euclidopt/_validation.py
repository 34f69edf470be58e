"""Input validation helpers shared by the solvers and estimators."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

# Relative slack used by every inequality check.
REL_TOL = 1e-9


def check_cloud(X, *, name="X", min_points=1, unit_cube=True):
    """Validate a point cloud and return it as a C-contiguous float64 array.

    Parameters
    ----------
    X : array-like of shape (n_points, dim)
        Point coordinates. A 1-D input is read as ``n`` points in ``d = 1``.
    name : str
        Used in error messages.
    min_points : int
        Minimum number of rows.
    unit_cube : bool
        If True every coordinate must lie in the closed cube ``[0, 1]``.

    Returns
    -------
    X : ndarray of shape (n_points, dim)
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(
        X,
        dtype=np.float64,
        order="C",
        ensure_min_samples=min_points,
        input_name=name,
    )
    if unit_cube and (X.min() < 0.0 or X.max() > 1.0):
        raise ValueError(f"{name} has coordinates outside [0, 1]")
    return X


def check_pair(X, Y, *, min_points=1, unit_cube=True):
    """Validate two clouds of equal size and dimension."""
    X = check_cloud(X, name="X", min_points=min_points, unit_cube=unit_cube)
    Y = check_cloud(Y, name="Y", min_points=min_points, unit_cube=unit_cube)
    if X.shape != Y.shape:
        raise ValueError(
            f"X and Y must have the same shape, got {X.shape} and {Y.shape}"
        )
    return X, Y


def check_exponent(p, *, name="p", strict=False):
    """Check ``p >= 1`` (or ``p > 1`` when ``strict``) and return it as float."""
    if not isinstance(p, numbers.Real) or not np.isfinite(p):
        raise ValueError(f"{name} must be a finite real, got {p!r}")
    p = float(p)
    if strict and p <= 1.0:
        raise ValueError(f"{name} must be > 1, got {p}")
    if p < 1.0:
        raise ValueError(f"{name} must be >= 1, got {p}")
    return p


def check_permutation(sigma, n=None, *, name="sigma"):
    """Return ``sigma`` as an int64 array after checking it is a bijection."""
    sigma = np.asarray(sigma)
    if sigma.ndim != 1 or (sigma.size and not np.issubdtype(sigma.dtype, np.integer)):
        raise ValueError(f"{name} must be a 1-D integer sequence")
    sigma = sigma.astype(np.int64)
    if n is not None and sigma.size != n:
        raise ValueError(f"{name} has length {sigma.size}, expected {n}")
    if not np.array_equal(np.sort(sigma), np.arange(sigma.size)):
        raise ValueError(f"{name} is not a permutation of 0..{sigma.size - 1}")
    return sigma


def violated(lhs, rhs):
    """True when ``lhs <= rhs`` fails beyond the shared relative slack."""
    return lhs > rhs + REL_TOL * (1.0 + abs(lhs))
