"""Input validation helpers shared by the estimators and pipeline functions."""
import numpy as np

from .exceptions import InvalidInput, NotFittedError, ShapeError


def check_matrix(x, name="X", n_cols=None, min_rows=1, dtype=np.float64):
    """Return ``x`` as a finite 2-D float array, raising on bad input."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise InvalidInput(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ShapeError(f"{name} must have {n_cols} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite values")
    return arr


def check_sequences(x, name="X", n_cols=None, dtype=np.float64):
    """Accept one sequence (L, C) or a batch (B, L, C); always return 3-D.

    The second return value tells the caller whether the input was a single
    sequence so the output can be squeezed back.
    """
    arr = np.asarray(x, dtype=dtype)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"{name} must be (L, C) or (B, L, C), got shape {arr.shape}")
    if n_cols is not None and arr.shape[2] != n_cols:
        raise ShapeError(f"{name} must have {n_cols} features, got {arr.shape[2]}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInput(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite values")
    return arr, single


def check_same_shape(a, b, names=("pred", "gt")):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} shape {a.shape} != {names[1]} shape {b.shape}")
    return a, b


def check_is_fitted(estimator, attributes):
    if isinstance(attributes, str):
        attributes = [attributes]
    if not all(getattr(estimator, a, None) is not None for a in attributes):
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; call fit first."
        )
