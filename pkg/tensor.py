# v1.0.0 - Work Package 1: Third-Order Tensor Algebra
"""
Dense 3-way arrays and the matricizations used by the coupled CPD solver.

Index convention (first mode fastest):
    unfold(X, 1)[j + k*I2, i] = X[i, j, k]    so  unfold(Y, 1) = (C ⊙ B) diag(λ) Aᵀ
    unfold(X, 2)[i + k*I1, j] = X[i, j, k]    so  unfold(Y, 2) = (C ⊙ A) diag(λ) Bᵀ
    unfold(X, 3)[i + j*I1, k] = X[i, j, k]    so  unfold(Y, 3) = (B ⊙ A) diag(λ) Cᵀ
    vectorize(X)[i + j*I1 + k*I1*I2] = X[i, j, k]   so  vectorize(Y) = (C ⊙ B ⊙ A) λ
    khatri_rao(B, A)[i2*I1 + i1, r] = B[i2, r] * A[i1, r]
"""
from typing import Tuple

import numpy as np

from errors import DimensionMismatchError, InvalidArgumentError, InvalidModeError

KL_FLOOR = 1e-12

# Tensor3 and FactorMatrix are plain float ndarrays of shape (I1, I2, I3) and (I, R).
Tensor3 = np.ndarray
FactorMatrix = np.ndarray


def _as_factor(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a matrix, got shape {M.shape}")
    return M


def _as_tensor(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 3:
        raise InvalidArgumentError(f"{name} must be a third-order tensor, got shape {X.shape}")
    return X


def reconstruct(lam, A, B, C) -> Tensor3:
    """Y[i,j,k] = sum_r lam[r] A[i,r] B[j,r] C[k,r]."""
    lam = np.asarray(lam, dtype=float).ravel()
    A = _as_factor(A, "A")
    B = _as_factor(B, "B")
    C = _as_factor(C, "C")
    R = lam.shape[0]
    if not (A.shape[1] == B.shape[1] == C.shape[1] == R):
        raise DimensionMismatchError(
            f"Rank mismatch: lambda has {R} entries, factors have "
            f"{A.shape[1]}, {B.shape[1]}, {C.shape[1]} columns"
        )
    return np.einsum("r,ir,jr,kr->ijk", lam, A, B, C)


def _mode_order(mode: int) -> Tuple[int, int, int]:
    if mode not in (1, 2, 3):
        raise InvalidModeError(f"Mode must be 1, 2 or 3, got {mode!r}")
    m = mode - 1
    rest = [a for a in (0, 1, 2) if a != m]
    # slowest axis first for a C-order reshape
    return (rest[1], rest[0], m)


def unfold(X, mode: int) -> np.ndarray:
    """Mode-n unfolding, shape (prod of the other dims) x I_mode."""
    X = _as_tensor(X, "X")
    order = _mode_order(mode)
    return X.transpose(order).reshape(-1, X.shape[mode - 1])


def refold(M, mode: int, dims) -> Tensor3:
    """Exact inverse of unfold."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise InvalidArgumentError(f"dims must have three entries, got {dims}")
    order = _mode_order(mode)
    M = np.asarray(M, dtype=float)
    if M.shape != (dims[order[0]] * dims[order[1]], dims[order[2]]):
        raise DimensionMismatchError(f"Matrix of shape {M.shape} cannot refold into {dims} along mode {mode}")
    permuted = M.reshape(dims[order[0]], dims[order[1]], dims[order[2]])
    return permuted.transpose(np.argsort(order))


def vectorize(X) -> np.ndarray:
    """First index fastest, matching khatri_rao(C, khatri_rao(B, A)) row order."""
    X = _as_tensor(X, "X")
    return X.transpose(2, 1, 0).reshape(-1)


def khatri_rao(B, A) -> np.ndarray:
    """Columnwise Kronecker product: column r is kron(B[:, r], A[:, r])."""
    B = _as_factor(B, "B")
    A = _as_factor(A, "A")
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(f"Column mismatch in Khatri-Rao product: {B.shape[1]} vs {A.shape[1]}")
    return (B[:, None, :] * A[None, :, :]).reshape(B.shape[0] * A.shape[0], A.shape[1])


def _check_pair(X, Y) -> Tuple[np.ndarray, np.ndarray]:
    X = _as_tensor(X, "X")
    Y = _as_tensor(Y, "Y")
    if X.shape != Y.shape:
        raise DimensionMismatchError(f"Tensor shapes differ: {X.shape} vs {Y.shape}")
    return X, Y


def kl_div(X, Y) -> float:
    """sum X log(X / Y) with 0 log 0 = 0 and Y clamped from below at KL_FLOOR."""
    X, Y = _check_pair(X, Y)
    mask = X > 0
    x = X[mask]
    y = np.maximum(Y[mask], KL_FLOOR)
    return float(np.sum(x * (np.log(x) - np.log(y))))


def fro_div(X, Y) -> float:
    X, Y = _check_pair(X, Y)
    return float(np.sum((X - Y) ** 2))
