"""Truncated GNS spaces H_i = M_{n_i} with the normalized-trace inner product.

Vectors are numpy arrays whose last two axes are the n_i x n_i matrix; any
leading axes are treated as a batch. A level-j matrix sits inside level i as
l_j^i diagonal copies (``numerics.kron_identity``), so the block view
v^{j,i}_{k,l} is the contiguous partition into n_j x n_j blocks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import hermitian_eigenvalues, is_hermitian

DEFAULT_MAX_DIM = 64


class BudgetExceeded(MemoryError):
    pass


@dataclass(frozen=True)
class GnsOperator:
    """Operator on H_level in the orthonormal basis {sqrt(n) e_st}."""

    level: int
    matrix: np.ndarray

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        return is_hermitian(self.matrix, tol)

    def idempotency_residual(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m @ m - m), initial=0.0))

    def rank(self) -> int:
        """Eigenvalues >= 1/2 (meaningful for projections)."""
        return int(np.sum(hermitian_eigenvalues(self.matrix) >= 0.5))

    def eigenvalues(self) -> np.ndarray:
        return hermitian_eigenvalues(self.matrix)


class GnsTower:
    """The nested spaces H_0 ⊂ H_1 ⊂ ... ⊂ H_d for a dimension sequence."""

    def __init__(self, dims, max_dim: int = DEFAULT_MAX_DIM):
        self.dims = tuple(int(d) for d in dims)
        self.max_dim = max_dim

    @classmethod
    def of(cls, system, **kw) -> "GnsTower":
        return cls(system.dims, **kw)

    @property
    def depth(self) -> int:
        return len(self.dims) - 1

    def ratio(self, j: int, i: int) -> int:
        return self.dims[i] // self.dims[j]

    def _level(self, v: np.ndarray, i: int) -> np.ndarray:
        v = np.asarray(v)
        n = self.dims[i]
        if v.shape[-2:] != (n, n):
            raise ValueError(f"expected trailing shape ({n}, {n}) at level {i}, got {v.shape}")
        return v

    # basic geometry ---------------------------------------------------

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        """tau(a* b) with tau the normalized trace."""
        a, b = np.asarray(a), np.asarray(b)
        return complex(np.sum(np.conj(a) * b) / a.shape[-1])

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(abs(self.inner(a, a))))

    def embed(self, v: np.ndarray, l: int, m: int) -> np.ndarray:
        """H_l -> H_m, v -> v ⊗ 1_{n_m/n_l}."""
        if l > m:
            raise ValueError(f"cannot embed level {l} into lower level {m}")
        v = self._level(v, l)
        r = self.ratio(l, m)
        if r == 1:
            return v.copy()
        out = np.einsum("uw,...ab->...uawb", np.eye(r), v)
        return out.reshape(v.shape[:-2] + (self.dims[m], self.dims[m]))

    def partial_trace_proj(self, v: np.ndarray, i: int, j: int) -> np.ndarray:
        """P_{i,j}: average of the diagonal n_j-blocks."""
        if j > i:
            raise ValueError(f"P_{{{i},{j}}} needs j <= i")
        v = self._level(v, i)
        r, nj = self.ratio(j, i), self.dims[j]
        blocks = v.reshape(v.shape[:-2] + (r, nj, r, nj))
        return np.einsum("...kakb->...ab", blocks) / r

    def r_proj(self, w: np.ndarray, j: int) -> np.ndarray:
        """R_j: projection of H_j onto H_j ⊖ H_{j-1}."""
        if j < 1:
            raise ValueError("R_j needs j >= 1; use q0_proj for level 0")
        return w - self.embed(self.partial_trace_proj(w, j, j - 1), j - 1, j)

    def q_proj(self, v: np.ndarray, i: int, n: int) -> np.ndarray:
        """Q_n applied to v in H_i, as a level-n vector in K_n."""
        if n > i:
            raise ValueError(f"Q_{n} of a level-{i} vector needs n <= i")
        if n == 0:
            return self.q0_proj(v, i)
        return self.r_proj(self.partial_trace_proj(v, i, n), n)

    def q0_proj(self, v: np.ndarray, i: int) -> np.ndarray:
        return self.partial_trace_proj(v, i, 0)

    # operators on a fixed level ---------------------------------------

    def e_op(self, v: np.ndarray, i: int, n: int) -> np.ndarray:
        """Orthogonal projection of H_i onto (the image of) H_n."""
        return self.embed(self.partial_trace_proj(v, i, n), n, i)

    def q_op(self, v: np.ndarray, i: int, n: int) -> np.ndarray:
        """Orthogonal projection of H_i onto (the image of) K_n."""
        return self.embed(self.q_proj(v, i, n), n, i)

    def check_budget(self, level: int):
        if self.dims[level] > self.max_dim:
            raise BudgetExceeded(
                f"n_{level} = {self.dims[level]} exceeds the materialization budget "
                f"n <= {self.max_dim}")

    def materialize(self, op, level: int) -> GnsOperator:
        """Matrix of a linear map H_level -> H_level given in apply form.

        ``op`` must accept a batch of level-``level`` vectors. In the basis
        {sqrt(n) e_st} the coordinates of v are vec(v)/sqrt(n), so the matrix
        coincides with the action on row-major vec(v).
        """
        self.check_budget(level)
        n = self.dims[level]
        basis = np.eye(n * n, dtype=complex).reshape(n * n, n, n)
        images = np.asarray(op(basis)).reshape(n * n, n * n)
        return GnsOperator(level, images.T.copy())

    def q_matrix(self, level: int, n: int) -> GnsOperator:
        return self.materialize(lambda v: self.q_op(v, level, n), level)

    # explicit component formula ----------------------------------------

    def q_components(self, v: np.ndarray, i: int, n: int) -> np.ndarray:
        """Q_n(v) from its (s, t) block components, written out index by index.

        Independent of ``q_proj``; used to cross-check it.
        """
        if not 1 <= n <= i:
            raise ValueError("component formula needs 1 <= n <= i")
        v = self._level(v, i)
        nn, nlow = self.dims[n], self.dims[n - 1]
        l_ni, l_low_n = self.ratio(n, i), self.ratio(n - 1, n)
        l_low_i = self.ratio(n - 1, i)

        def blk(a, size, k, m):
            return a[k * size:(k + 1) * size, m * size:(m + 1) * size]

        diag_blocks = [blk(v, nn, k, k) for k in range(l_ni)]
        out = np.zeros((nn, nn), dtype=complex)
        trace_part = np.zeros((nlow, nlow), dtype=complex)
        for t in range(l_low_n):
            for b in diag_blocks:
                trace_part += blk(b, nlow, t, t)
        trace_part /= l_low_i
        for s in range(l_low_n):
            for t in range(l_low_n):
                acc = np.zeros((nlow, nlow), dtype=complex)
                for b in diag_blocks:
                    acc += blk(b, nlow, s, t)
                acc /= l_ni
                if s == t:
                    acc -= trace_part
                out[s * nlow:(s + 1) * nlow, t * nlow:(t + 1) * nlow] = acc
        return out
