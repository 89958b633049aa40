"""Piecewise-linear matrix-valued functions on [0, 1].

A ``PLMatrixFunction`` stores exact dyadic breakpoints and one matrix per
breakpoint; values in between are linear interpolants. The class is closed
under composition with dyadic paths, and its Lipschitz constant and sup norm
are computed exactly from the breakpoint data.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .numerics import as_dyadic, dyadic_from_json, dyadic_to_json, tensor
from .paths import Affine, Constant, DyadicPath

DROP_TOL = 1e-12


def _batched_norm(mats: np.ndarray) -> np.ndarray:
    if mats.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.norm(mats, ord=2, axis=(-2, -1))


@dataclass(frozen=True, eq=False)
class PLMatrixFunction:
    breakpoints: tuple[Fraction, ...]
    values: np.ndarray
    approx_error: float = 0.0  # sup-distance to the exact function it stands for

    def __post_init__(self):
        bps = tuple(as_dyadic(b) for b in self.breakpoints)
        vals = np.array(self.values, dtype=complex)
        if len(bps) < 2 or bps[0] != 0 or bps[-1] != 1:
            raise ValueError("breakpoints must start at 0, end at 1, and number >= 2")
        if any(a >= b for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if vals.ndim != 3 or vals.shape[0] != len(bps) or vals.shape[1] != vals.shape[2]:
            raise ValueError(f"values of shape {vals.shape} do not match {len(bps)} breakpoints")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite matrix values")
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    # construction -----------------------------------------------------

    @classmethod
    def constant(cls, a) -> "PLMatrixFunction":
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        return cls((Fraction(0), Fraction(1)), np.stack([a, a]))

    @classmethod
    def linear(cls, a, b) -> "PLMatrixFunction":
        """x -> (1 - x) a + x b."""
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        b = np.atleast_2d(np.asarray(b, dtype=complex))
        return cls((Fraction(0), Fraction(1)), np.stack([a, b]))

    @property
    def n(self) -> int:
        return self.values.shape[1]

    # evaluation -------------------------------------------------------

    def __call__(self, x) -> np.ndarray:
        x = as_dyadic(x)
        if not 0 <= x <= 1:
            raise ValueError(f"point {x} outside [0, 1]")
        k = bisect.bisect_right(self.breakpoints, x) - 1
        if self.breakpoints[k] == x:
            return self.values[k].copy()
        x0, x1 = self.breakpoints[k], self.breakpoints[k + 1]
        t = float((x - x0) / (x1 - x0))
        return (1 - t) * self.values[k] + t * self.values[k + 1]

    def evaluate(self, x) -> np.ndarray:
        return self(x)

    # exact quantities -------------------------------------------------

    @cached_property
    def segment_slopes(self) -> np.ndarray:
        dx = np.array([float(b - a) for a, b in zip(self.breakpoints, self.breakpoints[1:])])
        return _batched_norm(np.diff(self.values, axis=0)) / dx

    @cached_property
    def lipschitz_constant(self) -> float:
        return float(np.max(self.segment_slopes))

    @cached_property
    def sup_norm(self) -> float:
        # ||(1-t)A + tB|| is convex in t, so each segment peaks at an endpoint.
        return float(np.max(_batched_norm(self.values))) + self.approx_error

    # algebra ----------------------------------------------------------

    def adjoint(self) -> "PLMatrixFunction":
        return PLMatrixFunction(self.breakpoints, np.conj(np.swapaxes(self.values, 1, 2)),
                                self.approx_error)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.values - np.conj(np.swapaxes(self.values, 1, 2)))) <= tol)

    def refine(self, breakpoints) -> "PLMatrixFunction":
        bps = sorted(set(self.breakpoints) | {as_dyadic(b) for b in breakpoints})
        return PLMatrixFunction(tuple(bps), np.stack([self(b) for b in bps]), self.approx_error)

    def __add__(self, other: "PLMatrixFunction") -> "PLMatrixFunction":
        grid = sorted(set(self.breakpoints) | set(other.breakpoints))
        vals = np.stack([self(b) + other(b) for b in grid])
        return PLMatrixFunction(tuple(grid), vals, self.approx_error + other.approx_error)

    def scale(self, c: complex) -> "PLMatrixFunction":
        return PLMatrixFunction(self.breakpoints, c * self.values, abs(c) * self.approx_error)

    def __matmul__(self, other: "PLMatrixFunction") -> "PLMatrixFunction":
        """Pointwise product, re-interpolated on the union grid.

        On a segment the exact product is quadratic in t with leading term
        t(1-t) dA dB, so the interpolation error is at most ||dA dB|| / 4.
        """
        f, g = self.refine(other.breakpoints), other.refine(self.breakpoints)
        vals = f.values @ g.values
        da, db = np.diff(f.values, axis=0), np.diff(g.values, axis=0)
        interp = float(np.max(_batched_norm(da @ db), initial=0.0)) / 4
        err = (interp + self.approx_error * (g.sup_norm - g.approx_error)
               + other.approx_error * (f.sup_norm - f.approx_error)
               + self.approx_error * other.approx_error)
        return PLMatrixFunction(f.breakpoints, vals, err)

    # serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "breakpoints": [dyadic_to_json(b) for b in self.breakpoints],
            "values": [[[[float(z.real), float(z.imag)] for z in row] for row in m]
                       for m in self.values],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PLMatrixFunction":
        vals = np.array(obj["values"], dtype=float)
        f = cls(tuple(dyadic_from_json(b) for b in obj["breakpoints"]),
                vals[..., 0] + 1j * vals[..., 1])
        if f.n != obj["n"]:
            raise ValueError(f"declared n={obj['n']} but values are {f.n}x{f.n}")
        return f


def evaluate_fn(f: PLMatrixFunction, x) -> np.ndarray:
    return f(x)


def lipschitz_constant(f: PLMatrixFunction) -> float:
    return f.lipschitz_constant


def sup_norm(f: PLMatrixFunction) -> float:
    return f.sup_norm


def compose_with_path(f: PLMatrixFunction, path: DyadicPath) -> PLMatrixFunction:
    """The PL function x -> f(path(x))."""
    if isinstance(path, Constant):
        return PLMatrixFunction.constant(f(path.value))
    lo = Fraction(path.r, 1 << path.l)
    width = Fraction(1, 1 << path.l)
    inner = [b for b in f.breakpoints if lo < b < lo + width]
    xs = [Fraction(0)] + [(b - lo) / width for b in inner] + [Fraction(1)]
    vals = np.stack([f(lo)] + [f(b) for b in inner] + [f(lo + width)])
    return PLMatrixFunction(tuple(xs), vals, f.approx_error)


@dataclass(frozen=True)
class LipschitzClass:
    """Functions at level ``level`` with Lipschitz constant < gamma**level."""

    gamma: float
    level: int

    def __post_init__(self):
        if not 1 < self.gamma < 2:
            raise ValueError(f"gamma must lie in (1, 2), got {self.gamma}")
        if self.level < 0:
            raise ValueError("level must be non-negative")

    @property
    def bound(self) -> float:
        return self.gamma ** self.level

    def contains(self, f: PLMatrixFunction) -> bool:
        return f.lipschitz_constant < self.bound


def random_lipschitz(n: int, cls: LipschitzClass, seed: int, *, hermitian: bool = False,
                     resolution: int = 3) -> PLMatrixFunction:
    """Seeded random PL function on the grid k/2**resolution with L_f < gamma**level.

    The Lipschitz constant is rescaled to a random fraction in [0.2, 0.9) of
    the class bound, and ||f(0)|| <= 1.
    """
    rng = np.random.default_rng(seed)
    k = 1 << resolution

    def draw(shape):
        z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        if hermitian:
            z = (z + np.conj(np.swapaxes(z, -1, -2))) / 2
        return z

    start = draw((n, n))
    start /= max(1.0, np.linalg.norm(start, 2))
    steps = draw((k, n, n))
    target = cls.bound * rng.uniform(0.2, 0.9)
    slopes = _batched_norm(steps) * k
    steps *= target / float(np.max(slopes))
    vals = np.concatenate([start[None], start[None] + np.cumsum(steps, axis=0)])
    bps = tuple(Fraction(j, k) for j in range(k + 1))
    return PLMatrixFunction(bps, vals)


def _project_inner(a: np.ndarray, p: int, q: int) -> np.ndarray:
    """Orthogonal projection of a onto {a' ⊗ 1_q : a' in M_p}."""
    blocks = a.reshape(q, p, q, p)
    avg = np.einsum("kakb->ab", blocks) / q
    return tensor(avg, np.eye(q))


def _project_outer(a: np.ndarray, p: int, q: int) -> np.ndarray:
    """Orthogonal projection of a onto {1_p ⊗ b : b in M_q}."""
    blocks = a.reshape(q, p, q, p)
    b = np.einsum("jaka->jk", blocks) / p
    return tensor(np.eye(p), b)


def dimension_drop_membership(f: PLMatrixFunction, p: int, q: int,
                              tol: float = DROP_TOL) -> bool:
    """f(0) in M_p ⊗ 1_q and f(1) in 1_p ⊗ M_q (package tensor ordering)."""
    if f.n != p * q:
        raise ValueError(f"n={f.n} is not p*q={p * q}")
    a0, a1 = f(0), f(1)
    r0 = np.linalg.norm(a0 - _project_inner(a0, p, q))
    r1 = np.linalg.norm(a1 - _project_outer(a1, p, q))
    scale = max(1.0, np.linalg.norm(a0), np.linalg.norm(a1))
    return bool(max(r0, r1) <= tol * scale)
