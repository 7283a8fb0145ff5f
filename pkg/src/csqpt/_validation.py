"""Input-validation helpers shared by the domain types and the estimators."""

from __future__ import annotations

import numpy as np

# Numerical slacks used by the domain-type invariants.
STATE_PSD_TOL = 1e-9
STATE_TRACE_TOL = 1e-6
CHOI_PSD_TOL = 1e-6
POVM_PSD_TOL = 1e-10


def as_complex_matrix(entries, name: str = "entries") -> np.ndarray:
    """Copy input into a square complex128 matrix, or raise ValueError."""
    arr = np.array(entries, dtype=np.complex128, copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_hermitian(arr: np.ndarray, name: str = "matrix") -> None:
    """Require exact (bitwise) Hermiticity."""
    if not np.array_equal(arr, arr.conj().T):
        raise ValueError(f"{name} must be exactly Hermitian")


def check_psd(arr: np.ndarray, tol: float, name: str = "matrix") -> None:
    lo = float(np.linalg.eigvalsh(arr)[0])
    if lo < -tol:
        raise ValueError(f"{name} is not positive semidefinite: min eigenvalue {lo:.3e} < -{tol:.0e}")


def check_unit_trace(arr: np.ndarray, tol: float, name: str = "matrix") -> None:
    tr = float(np.real(np.trace(arr)))
    if abs(tr - 1.0) > tol:
        raise ValueError(f"{name} trace {tr!r} deviates from 1 by more than {tol:.0e}")


def hermitized(arr: np.ndarray) -> np.ndarray:
    """(A + A^dag)/2, exactly Hermitian in IEEE arithmetic."""
    return (arr + arr.conj().T) / 2.0


def freeze(arr: np.ndarray) -> np.ndarray:
    """Mark an array read-only so frozen dataclasses stay immutable."""
    arr.setflags(write=False)
    return arr


def as_sample_array(X, name: str = "X") -> np.ndarray:
    """Coerce dataset-like input to an (n, 2) float array of (theta, x) rows.

    Accepts anything with a ``samples`` attribute (e.g. QuadratureDataset) or
    an array-like of shape (n, 2).
    """
    arr = np.asarray(getattr(X, "samples", X), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a nonempty (n, 2) array of (theta, x) rows, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    theta = arr[:, 0]
    if np.any(theta < 0.0) or np.any(theta >= 2.0 * np.pi):
        raise ValueError(f"{name} phases must lie in [0, 2*pi)")
    return arr
