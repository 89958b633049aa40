"""Dense complex-matrix kernel and exact dyadic helpers.

Matrices are plain ``numpy`` complex arrays. Dyadic rationals are
``fractions.Fraction`` values whose denominator is a power of two; integers
(``int``) serve as arbitrary-precision naturals.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-12


# ---------------------------------------------------------------- dyadics

def dyadic(numerator: int, exponent: int = 0) -> Fraction:
    if exponent < 0:
        raise ValueError(f"exponent must be non-negative, got {exponent}")
    return Fraction(numerator, 1 << exponent)


def as_dyadic(x) -> Fraction:
    """Coerce ``x`` to a Fraction, rejecting non-dyadic values."""
    if isinstance(x, float):
        x = Fraction(x)  # exact: every finite double is dyadic
    x = Fraction(x)
    d = x.denominator
    if d & (d - 1):
        raise ValueError(f"{x} is not a dyadic rational")
    return x


def dyadic_parts(x) -> tuple[int, int]:
    """Canonical ``(numerator, exponent)``: numerator odd or zero."""
    x = as_dyadic(x)
    return x.numerator, x.denominator.bit_length() - 1


def dyadic_to_json(x) -> dict:
    num, exp = dyadic_parts(x)
    return {"num": num, "exp": exp}


def dyadic_from_json(obj) -> Fraction:
    if isinstance(obj, dict):
        return dyadic(int(obj["num"]), int(obj["exp"]))
    return as_dyadic(obj)


# ---------------------------------------------------------------- matrices

def _check_finite(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return float(np.max(np.abs(a - a.conj().T), initial=0.0)) <= tol * scale


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value."""
    a = _check_finite(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_eigenvalues(a: np.ndarray) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix."""
    a = _check_finite(a)
    if not is_hermitian(a):
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigvalsh(a)


def block_diag(blocks) -> np.ndarray:
    blocks = [np.atleast_2d(np.asarray(b)) for b in blocks]
    if not blocks:
        raise ValueError("empty block list")
    for b in blocks:
        if b.shape[0] != b.shape[1]:
            raise ValueError(f"block of shape {b.shape} is not square")
    return scipy.linalg.block_diag(*blocks).astype(np.result_type(*blocks, complex))


def kron_identity(a: np.ndarray, m: int) -> np.ndarray:
    """``a ⊗ 1_m``: m copies of ``a`` down the diagonal.

    out[u*n + s, v*n + t] = a[s, t] * delta(u, v). This block-diagonal
    ordering is used everywhere in the package.
    """
    if m < 1:
        raise ValueError(f"multiplicity must be positive, got {m}")
    a = np.asarray(a)
    return np.kron(np.eye(m, dtype=a.dtype), a)


def tensor(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``x ⊗ y`` in the package ordering (x is the inner factor)."""
    return np.kron(np.asarray(y), np.asarray(x))
