"""Input validation for complex lattice states.

``sklearn.utils.check_array`` rejects complex input, so states get their own
checks here.
"""

import numpy as np

__all__ = ["check_state", "check_states", "check_band"]


def check_state(x, n_sites: int, name: str = "state") -> np.ndarray:
    """Return ``x`` as a finite complex 1-D array of length ``n_sites``."""
    arr = np.asarray(x)
    if arr.dtype.kind not in "biufc":
        raise TypeError(f"{name} must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(complex)
    if arr.shape != (n_sites,):
        raise ValueError(f"{name} must have shape ({n_sites},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinity")
    return arr


def check_states(X, n_sites: int, name: str = "X") -> np.ndarray:
    """Return ``X`` as a finite complex array of shape ``(n_samples, n_sites)``.

    A single 1-D state is promoted to one row.
    """
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (n_samples, n_sites), got {arr.ndim}-D")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} has no samples")
    if arr.dtype.kind not in "biufc":
        raise TypeError(f"{name} must be numeric, got dtype {arr.dtype}")
    if arr.shape[1] != n_sites:
        raise ValueError(f"{name} has {arr.shape[1]} sites per sample, expected {n_sites}")
    arr = arr.astype(complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinity")
    return arr


def check_band(band) -> int:
    if band in (1, "+", "upper", "plus"):
        return 1
    if band in (-1, "-", "lower", "minus"):
        return -1
    raise ValueError(f"band must be +1/-1 (or 'upper'/'lower'), got {band!r}")
