"""Dirac operators D = sum_n alpha_n Q_n and commutator estimates.

Two routes compute finite-section commutator norms on H_M:

* dense materialization (``dirac_matrix``, ``action_matrix``), limited by
  the GNS memory budget;
* structure-reduced exact computations that never form H_M. Writing
  H_M = ⊗_k (C^{l_k} ⊗ C^{l_k}) ⊗ M_{n_i} over the outer digit pairs of the
  tower, each Q_n only touches digit pairs through the maximally entangled
  vector, and left multiplication by the level-M image of f is diagonal in
  the outer row digits. Each outer pair then splits into a "diagonal" sector
  (|d d>) and copies of an "off-diagonal" sector (|d e>, d != e) that
  D and f both preserve.

Finite sections are corrected by rigorous tails built from the exact path
oscillations, giving two-sided estimates.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .gns import GnsOperator, GnsTower
from .matfun import LipschitzClass, PLMatrixFunction
from .numerics import spectral_norm
from .system import InductiveSystem, block_values

BOUND_SLACK = 1e-12  # relative, absorbs double rounding in bound comparisons
DENSE_LIMIT = 1024


class ClassViolation(ValueError):
    pass


@dataclass(frozen=True)
class DiracSpec:
    """Eigenvalue rule alpha_0 = 0, |alpha_n| <= beta^(2(n-1)).

    With ``alphas`` unset the default alpha_n = beta^(2(n-1)) is used.
    Beyond an explicit list, tail bounds fall back to the rule's ceiling.
    """

    beta: float
    alphas: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 1 < self.beta < 2:
            raise ValueError(f"beta must lie in (1, 2), got {self.beta}")
        if self.alphas is not None:
            a = tuple(float(x) for x in self.alphas)
            object.__setattr__(self, "alphas", a)
            if not a or a[0] != 0:
                raise ValueError("alpha_0 must be 0")
            for n, x in enumerate(a[1:], start=1):
                if abs(x) > self.ceiling(n) * (1 + BOUND_SLACK):
                    raise ValueError(f"|alpha_{n}| = {abs(x)} exceeds beta^{2 * (n - 1)}")

    def ceiling(self, n: int) -> float:
        return 0.0 if n == 0 else self.beta ** (2 * (n - 1))

    def alpha(self, n: int) -> float:
        if n == 0:
            return 0.0
        if self.alphas is None:
            return self.ceiling(n)
        if n >= len(self.alphas):
            raise IndexError(f"alpha_{n} not supplied (list has {len(self.alphas)} entries)")
        return self.alphas[n]

    def alpha_or_ceiling(self, n: int) -> float:
        if self.alphas is not None and n < len(self.alphas):
            return abs(self.alphas[n])
        return self.ceiling(n)

    def upto(self, m: int) -> np.ndarray:
        return np.array([self.alpha(n) for n in range(m + 1)])


@dataclass(frozen=True)
class CommutatorEstimate:
    lower: float     # finite-section norm at level M
    upper: float     # lower + rigorous tail
    tail_level: int

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "tail_level": self.tail_level}


# ---------------------------------------------------------------- dense route

def dirac_matrix(sys: InductiveSystem, spec: DiracSpec, M: int,
                 tower: GnsTower | None = None) -> GnsOperator:
    tower = tower or GnsTower.of(sys)
    alphas = spec.upto(M)

    def apply(v):
        out = np.zeros_like(v)
        for n, a in enumerate(alphas):
            if a:
                out += a * tower.q_op(v, M, n)
        return out

    return tower.materialize(apply, M)


def action_matrix(sys: InductiveSystem, f: PLMatrixFunction, i: int, M: int,
                  tower: GnsTower | None = None) -> GnsOperator:
    """Left multiplication by the level-M image of f."""
    from .system import af_image
    tower = tower or GnsTower.of(sys)
    tower.check_budget(M)
    F = af_image(sys, f, i, M)
    return GnsOperator(M, np.kron(F, np.eye(sys.dims[M])))


def dense_commutator_norm(A: np.ndarray, B: np.ndarray) -> float:
    return spectral_norm(A @ B - B @ A)


# ---------------------------------------------------------------- tails

def tail_sum(sys: InductiveSystem, i: int, M: int) -> Fraction:
    """sum_{m >= M} (max oscillation of composite paths i -> m), exactly."""
    if M < i:
        raise ValueError("tail needs M >= i")
    c = sys.stage_contraction
    if c >= 1:
        raise ValueError("stage contraction must be < 1 for a convergent tail")
    h = max(M, sys.depth)
    finite = sum((sys.oscillation_profile(i, m) for m in range(M, h)), Fraction(0))
    return finite + sys.oscillation_profile(i, h) / (1 - c)


def tail_bound(sys: InductiveSystem, lipschitz: float, i: int, M: int) -> float:
    """Bound on ||pi(f) - (level-M image of f)|| for L_f = ``lipschitz``."""
    if lipschitz == 0:
        return 0.0
    return lipschitz * float(tail_sum(sys, i, M))


def unseen_levels_bound(sys: InductiveSystem, spec: DiracSpec, lipschitz: float,
                        i: int, M: int) -> float:
    """Bound on sum_{n > M} |alpha_n| ||[Q_n, pi(f)]||.

    E_n and E_{n-1} commute with the level-(n-1) image of f, so
    ||[Q_n, pi(f)]|| <= tail_bound(i, n-1).
    """
    if lipschitz == 0:
        return 0.0
    c = sys.stage_contraction
    h = max(M, sys.depth, len(spec.alphas or ()))
    total = sum(spec.alpha_or_ceiling(n) * tail_bound(sys, lipschitz, i, n - 1)
                for n in range(M + 1, h + 1))
    ratio = spec.beta ** 2 * float(c)
    if ratio >= 1:
        return math.inf
    # n - 1 = m >= h: |alpha_n| <= beta^(2m), tail(i, m) = L osc(i, h) c^(m-h) / (1-c)
    head = lipschitz * float(sys.oscillation_profile(i, h) / (1 - c))
    total += head * spec.beta ** (2 * h) / (1 - ratio)
    return total


# ---------------------------------------------------------------- structure

def _digit_shape(sys: InductiveSystem, i: int, M: int) -> tuple[int, ...]:
    """Outer digit sizes (l_M, ..., l_{i+1}) of the level-M block index."""
    return tuple(sys.ratio(k - 1, k) for k in range(M, i, -1))


def _blocks(sys, f, i, M):
    blocks = block_values(sys, f, i, M)
    ni = sys.dims[i]
    return blocks.reshape(_digit_shape(sys, i, M) + (ni, ni))


def _adj(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _compression_gap(G: np.ndarray, H: np.ndarray) -> float:
    """max over label/sector of lambda_max(Pi H Pi - Pi G* Pi G Pi).

    G, H: shape (labels, l, ni, ni), block-diagonal over l. Pi removes the
    uniform component of the l-digit in the diagonal sector; it is the
    identity in the off-diagonal sector (present when l >= 2).
    """
    lab, l, ni, _ = G.shape
    eye = np.eye(l)
    big_g = np.einsum("uw,zuab->zuawb", eye, G).reshape(lab, l * ni, l * ni)
    big_h = np.einsum("uw,zuab->zuawb", eye, H).reshape(lab, l * ni, l * ni)
    pi = np.kron(eye - np.full((l, l), 1.0 / l), np.eye(ni))
    pg = pi @ big_g @ pi
    gap = pi @ big_h @ pi - _adj(pg) @ pg
    best = float(np.max(np.linalg.eigvalsh((gap + _adj(gap)) / 2)))
    if l >= 2:
        off = H - _adj(G) @ G
        best = max(best, float(np.max(np.linalg.eigvalsh((off + _adj(off)) / 2))))
    return best


def level_commutator_norm(sys: InductiveSystem, f: PLMatrixFunction, i: int, n: int,
                          M: int, tower: GnsTower | None = None) -> float:
    """||[Q_n, L_F]|| on H_M, F the level-M image of f (no alpha factor).

    Uses ||[Q, X]|| = max(||(1-Q) X Q||, ||(1-Q) X* Q||) and
    ||(1-Q) X Q||^2 = lambda_max(Q X*X Q - Q X* Q X Q), compressed through the
    outer digit structure.
    """
    if not (0 <= n <= M and i <= M):
        raise ValueError(f"need 0 <= n <= M and i <= M (n={n}, i={i}, M={M})")
    F = _blocks(sys, f, i, M)
    ni = sys.dims[i]
    best = 0.0
    for X in (F, _adj(F)):
        XhX = _adj(X) @ X
        if n > i:
            axes = tuple(range(M - n))
            G = X.mean(axis=axes) if axes else X
            H = XhX.mean(axis=axes) if axes else XhX
            l = sys.ratio(n - 1, n)
            G = np.moveaxis(G.reshape(l, -1, ni, ni), 1, 0)
            H = np.moveaxis(H.reshape(l, -1, ni, ni), 1, 0)
            best = max(best, _compression_gap(G, H))
        else:
            tower = tower or GnsTower.of(sys)
            axes = tuple(range(M - i))
            G = X.mean(axis=axes) if axes else X
            H = XhX.mean(axis=axes) if axes else XhX
            Q = tower.q_matrix(i, n).matrix
            eye = np.eye(ni)
            LG, LH = np.kron(G, eye), np.kron(H, eye)
            qg = Q @ LG @ Q
            gap = Q @ LH @ Q - _adj(qg) @ qg
            best = max(best, float(np.max(np.linalg.eigvalsh((gap + _adj(gap)) / 2))))
    return math.sqrt(max(best, 0.0))


def _mean_bcast(v: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    if not axes:
        return v
    return np.broadcast_to(v.mean(axis=axes, keepdims=True), v.shape)


class _SectorProblem:
    """[D, L_F] restricted to one family of identical sectors.

    ``low`` is the largest outer digit in the off-diagonal sector (projections
    E_n with n < low vanish there); ``low = None`` is the all-diagonal sector,
    which keeps the full inner matrix.
    """

    def __init__(self, F, alphas, i, M, low, tower):
        self.F, self.Fh = F, _adj(F)
        self.alphas, self.i, self.M, self.low, self.tower = alphas, i, M, low, tower
        digits = F.shape[:-2]
        ni = F.shape[-1]
        self.shape = digits + ((ni, ni) if low is None else (ni, 1))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def _apply_d(self, v):
        # v has one leading batch axis
        i, M = self.i, self.M
        start = 0 if self.low is None else self.low
        out = np.zeros_like(v)
        prev = np.zeros_like(v)
        for n in range(start, M + 1):
            if n >= i:
                cur = _mean_bcast(v, tuple(range(1, 1 + M - n)))
            else:
                w = v.mean(axis=tuple(range(1, 1 + M - i)), keepdims=True)
                cur = np.broadcast_to(self.tower.e_op(w, i, n), v.shape)
            a = self.alphas[n]
            if a:
                out = out + a * (cur - prev)
            prev = cur
        return out

    def apply(self, v, adjoint=False):
        F = self.Fh if adjoint else self.F
        dv = self._apply_d(v)
        if adjoint:
            return F @ dv - self._apply_d(F @ v)
        return self._apply_d(F @ v) - F @ dv

    def norm(self) -> float:
        N = self.size
        if N <= DENSE_LIMIT:
            basis = np.eye(N, dtype=complex).reshape((N,) + self.shape)
            mat = self.apply(basis).reshape(N, N).T
            return spectral_norm(mat)

        def gram(x):
            v = x.reshape((1,) + self.shape).astype(complex)
            return self.apply(self.apply(v), adjoint=True).reshape(-1)

        op = LinearOperator((N, N), matvec=gram, dtype=complex)
        v0 = np.cos(np.arange(N) * 0.7) + 1.0 + 0j
        probes = np.random.default_rng(0).standard_normal((3, N))
        if all(not np.any(gram(x)) for x in (v0, *probes)):
            return 0.0  # Krylov space collapses: the commutator vanishes
        lam = eigsh(op, k=1, which="LA", v0=v0, tol=1e-13, maxiter=20 * N,
                    return_eigenvectors=False)
        return math.sqrt(max(float(lam[0]), 0.0))


def dirac_commutator_norm(sys: InductiveSystem, spec: DiracSpec, f: PLMatrixFunction,
                          i: int, M: int, tower: GnsTower | None = None) -> float:
    """||[D_M, L_F]|| on H_M without materializing H_M."""
    tower = tower or GnsTower.of(sys)
    F = _blocks(sys, f, i, M)
    alphas = spec.upto(M)
    best = 0.0
    for low in [None] + list(range(i + 1, M)):
        best = max(best, _SectorProblem(F, alphas, i, M, low, tower).norm())
    return best


# ---------------------------------------------------------------- estimates

def per_level_bound(spec: DiracSpec, lipschitz: float, i: int, n: int) -> float:
    """|alpha_n| (1 + 2^(2i+1) L_f) / 2^(2(n-1))."""
    return spec.alpha_or_ceiling(n) * (1 + 2 ** (2 * i + 1) * lipschitz) / 4 ** (n - 1)


def split_bound(spec: DiracSpec, f: PLMatrixFunction, i: int) -> float:
    """2||f|| sum_{n<=i}|alpha_n| + (1 + 2^(2i+1) L_f) sum_{n>i} (beta/2)^(2(n-1))."""
    head = 2 * f.sup_norm * sum(spec.alpha_or_ceiling(n) for n in range(1, i + 1))
    r = (spec.beta / 2) ** 2
    return head + (1 + 2 ** (2 * i + 1) * f.lipschitz_constant) * r ** i / (1 - r)


def _require_reindexed(sys: InductiveSystem):
    if not sys.reindexed:
        warnings.warn("system is not reindexed; the 2^(2(n-1)) decay constants assume "
                      "the i -> 2i convention", stacklevel=3)


def _check_class(f: PLMatrixFunction, cls: LipschitzClass | None):
    if cls is not None and not cls.contains(f):
        raise ClassViolation(f"L_f = {f.lipschitz_constant:.6g} is not below {cls.bound:.6g}")


def commutator_per_level(sys: InductiveSystem, spec: DiracSpec, f: PLMatrixFunction,
                         i: int, n: int, M: int, tower: GnsTower | None = None
                         ) -> CommutatorEstimate:
    """Two-sided estimate of ||[alpha_n Q_n, pi(f)]||."""
    if not 1 <= n <= M or not i <= M:
        raise ValueError(f"need 1 <= n <= M and i <= M (n={n}, i={i}, M={M})")
    a = abs(spec.alpha(n))
    lower = a * level_commutator_norm(sys, f, i, n, M, tower)
    return CommutatorEstimate(lower, lower + a * tail_bound(sys, f.lipschitz_constant, i, M), M)


@dataclass(frozen=True)
class FullCommutatorReport:
    estimate: CommutatorEstimate
    formula_bound: float
    per_level: tuple[tuple[int, CommutatorEstimate, float | None], ...]

    @property
    def ok(self) -> bool:
        levels_ok = all(b is None or est.upper <= b * (1 + BOUND_SLACK)
                        for _, est, b in self.per_level)
        return levels_ok and self.estimate.upper <= self.formula_bound * (1 + BOUND_SLACK)


def full_commutator_bound(sys: InductiveSystem, spec: DiracSpec, f: PLMatrixFunction,
                          i: int, M: int, cls: LipschitzClass | None = None,
                          tower: GnsTower | None = None) -> FullCommutatorReport:
    """Finite-section norm of [D_M, f] with tail correction, next to the
    closed-form split bound. Per-level bounds are only claimed for n > i."""
    _check_class(f, cls)
    _require_reindexed(sys)
    tower = tower or GnsTower.of(sys)
    L = f.lipschitz_constant
    alphas = spec.upto(M)
    lower = dirac_commutator_norm(sys, spec, f, i, M, tower)
    spread = float(np.max(alphas) - np.min(alphas))
    upper = (lower + spread * tail_bound(sys, L, i, M)
             + unseen_levels_bound(sys, spec, L, i, M))
    levels = tuple(
        (n, commutator_per_level(sys, spec, f, i, n, M, tower),
         per_level_bound(spec, L, i, n) if n > i else None)
        for n in range(1, M + 1))
    return FullCommutatorReport(CommutatorEstimate(lower, upper, M), split_bound(spec, f, i),
                                levels)
