"""Inductive systems of matrix-valued function algebras.

Stage k maps level k-1 into level k. Its connecting morphism (with the
unitaries dropped) sends f to the block-diagonal function
``diag(f∘ξ_1 ⊗ 1_{N_1}, ..., f∘ξ_r ⊗ 1_{N_r})``. Composite morphisms list
the later stage's blocks outermost, each expanded into the earlier stage's
blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .matfun import LipschitzClass, PLMatrixFunction, compose_with_path
from .numerics import block_diag
from .paths import (HALF_LEFT, HALF_RIGHT, IDENTITY, MIDPOINT, Affine, Constant,
                    PathList, compose, merge_runs)


class InvalidSystem(ValueError):
    """Invalid stage or system data."""


class JiangSuSearchError(RuntimeError):
    pass


EXPANSION_LIMIT = 1_000_000


@dataclass(frozen=True)
class Stage:
    """One connecting morphism. A composed stage whose block sequence is too
    long to list keeps its factors in ``parts`` instead."""

    from_dim: int
    to_dim: int
    paths: PathList | None = None
    span: int = 1  # number of elementary stages folded into this one
    parts: tuple["Stage", ...] = ()

    def __post_init__(self):
        if self.from_dim < 1 or self.to_dim < 1:
            raise InvalidSystem("dimensions must be positive")
        if self.paths is None and not self.parts:
            raise InvalidSystem("a stage needs paths or parts")
        total = self.paths.total if self.paths is not None else math.prod(
            s.ratio for s in self.parts)
        if self.to_dim != self.from_dim * total:
            raise InvalidSystem(
                f"multiplicities sum to {total} but "
                f"{self.to_dim}/{self.from_dim} is not that ratio")

    @property
    def ratio(self) -> int:
        return self.to_dim // self.from_dim

    @property
    def path_list(self) -> PathList:
        if self.paths is None:
            raise InvalidSystem(
                f"block sequence {self.from_dim}->{self.to_dim} is too long to expand")
        return self.paths

    @cached_property
    def distinct_paths(self) -> frozenset:
        if self.paths is not None:
            return frozenset(self.paths.distinct)
        paths = {IDENTITY}
        for st in self.parts:
            paths = {compose(p, q) for p in paths for q in st.distinct_paths}
        return frozenset(paths)

    @property
    def max_oscillation(self) -> Fraction:
        return max(p.oscillation for p in self.distinct_paths)

    def to_json(self) -> dict:
        out = {"from_dim": self.from_dim, "to_dim": self.to_dim, "span": self.span}
        if self.paths is None:
            out["parts"] = [s.to_json() for s in self.parts]
        else:
            out["paths"] = self.paths.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Stage":
        if "parts" in obj:
            parts = [cls.from_json(o) for o in obj["parts"]]
            st = parts[0]
            for nxt in parts[1:]:
                st = compose_stages(st, nxt)
            return st
        return cls(int(obj["from_dim"]), int(obj["to_dim"]), PathList.from_json(obj["paths"]),
                   int(obj.get("span", 1)))


def compose_stages(s1: Stage, s2: Stage) -> Stage:
    """Stage for ``φ_{s2} ∘ φ_{s1}`` (s1 applied first)."""
    if s1.to_dim != s2.from_dim:
        raise InvalidSystem(f"cannot compose: {s1.to_dim} != {s2.from_dim}")
    span = s1.span + s2.span
    if (s1.paths is None or s2.paths is None
            or s2.paths.total * len(s1.paths) > EXPANSION_LIMIT):
        return Stage(s1.from_dim, s2.to_dim, None, span, (s1, s2))
    entries = []
    for outer, n_outer in s2.paths:
        block = [(compose(inner, outer), n_inner) for inner, n_inner in s1.paths]
        entries.extend(block * n_outer)
    return Stage(s1.from_dim, s2.to_dim, merge_runs(entries), span)


@dataclass(frozen=True)
class InductiveSystem:
    dims: tuple[int, ...]
    stages: tuple[Stage, ...]
    name: str = "custom"
    reindexed: bool = False
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.dims or self.dims[0] != 1:
            raise InvalidSystem("systems start at n_0 = 1")
        if len(self.dims) != len(self.stages) + 1:
            raise InvalidSystem("need exactly one stage per consecutive level pair")
        for k, st in enumerate(self.stages, start=1):
            if (st.from_dim, st.to_dim) != (self.dims[k - 1], self.dims[k]):
                raise InvalidSystem(f"stage {k} maps {st.from_dim}->{st.to_dim}, "
                                   f"expected {self.dims[k - 1]}->{self.dims[k]}")

    @property
    def depth(self) -> int:
        return len(self.stages)

    def ratio(self, j: int, i: int) -> int:
        """l_j^i = n_i / n_j."""
        return self.dims[i] // self.dims[j]

    @cached_property
    def _cache(self) -> dict:
        return {}

    def composite(self, i: int, m: int) -> PathList:
        """Paths of the composite morphism from level i to level m."""
        self._check_levels(i, m)
        key = ("composite", i, m)
        if key not in self._cache:
            if m == i:
                pl = PathList.of((IDENTITY, 1))
            else:
                st = self.stages[i]
                for k in range(i + 1, m):
                    st = compose_stages(st, self.stages[k])
                pl = st.path_list
            self._cache[key] = pl
        return self._cache[key]

    def distinct_composites(self, i: int, m: int) -> frozenset:
        """Distinct composite paths from i to m (cheap even for huge multiplicities)."""
        self._check_levels(i, m)
        key = ("distinct", i, m)
        if key not in self._cache:
            paths = {IDENTITY}
            for k in range(i, m):
                paths = {compose(p, q) for p in paths for q in self.stages[k].distinct_paths}
            self._cache[key] = frozenset(paths)
        return self._cache[key]

    def max_oscillation(self, i: int, m: int) -> Fraction:
        return max(p.oscillation for p in self.distinct_composites(i, m))

    @property
    def stage_contraction(self) -> Fraction:
        """Largest single-stage oscillation of the last stage; the tower is
        assumed to repeat it beyond ``depth``."""
        return self.stages[-1].max_oscillation if self.stages else Fraction(1, 2)

    def oscillation_profile(self, i: int, m: int) -> Fraction:
        """Exact max composite oscillation for any m >= i, extending past the
        last level by the stage contraction."""
        if m <= self.depth:
            return self.max_oscillation(i, m)
        base = self.max_oscillation(i, self.depth) if i <= self.depth else Fraction(1)
        return base * self.stage_contraction ** (m - max(i, self.depth))

    def _check_levels(self, i: int, m: int):
        if not 0 <= i <= m <= self.depth:
            raise InvalidSystem(f"need 0 <= {i} <= {m} <= depth {self.depth}")

    def to_json(self) -> dict:
        return {"name": self.name, "dims": list(self.dims), "reindexed": self.reindexed,
                "stages": [s.to_json() for s in self.stages],
                "metadata": self.metadata}


def custom_system(stages: list[Stage], name: str = "custom") -> InductiveSystem:
    dims = [1] + [s.to_dim for s in stages]
    return InductiveSystem(tuple(dims), tuple(stages), name=name)


# ---------------------------------------------------------------- presets

def toy_preset(name: str, depth: int) -> InductiveSystem:
    if name == "doubling":
        pl = PathList.of((HALF_LEFT, 1), (HALF_RIGHT, 1))
    elif name == "tripling":
        pl = PathList.of((HALF_LEFT, 1), (MIDPOINT, 1), (HALF_RIGHT, 1))
    else:
        raise ValueError(f"unknown toy preset {name!r}")
    b = pl.total
    stages = [Stage(b ** k, b ** (k + 1), pl) for k in range(depth)]
    return InductiveSystem(tuple(b ** k for k in range(depth + 1)), tuple(stages),
                           name=f"toy-{name}")


def _split_multiplicities(k0: int, k1: int, p: int, q: int) -> tuple[int, int, int]:
    """Counts (a, b, c) of (x/2, 1/2, (x+1)/2) keeping dimension-drop boundaries.

    With p' = k0 p and q' = k1 q the image of f(0) is in M_p' ⊗ 1_q' iff
    k1 | a and q' | b + c; the image of f(1) is in 1_p' ⊗ M_q' iff k0 | c and
    p' | a + b.
    """
    alpha = (k0 - 1) % q + 1   # alpha ≡ k0 (mod q), 1 <= alpha <= q
    gamma = (k1 - 1) % p + 1   # gamma ≡ k1 (mod p), 1 <= gamma <= p
    a, c = k1 * alpha, k0 * gamma
    b = k0 * k1 - a - c
    if b < 1:
        raise JiangSuSearchError(f"no admissible split for k0={k0}, k1={k1}")
    assert (b + c) % (k1 * q) == 0 and (a + b) % (k0 * p) == 0
    return a, b, c


def _search_factors(p: int, q: int, bound: int) -> tuple[int, int]:
    best = None
    for k0 in range(2 * q + 1, 2 * q + 1 + bound):
        for k1 in range(2 * p + 1, 2 * p + 1 + bound):
            if best is not None and k0 * k1 >= best[0] * best[1]:
                break
            if math.gcd(k0 * p, k1 * q) == 1:
                best = (k0, k1)
                break
    if best is None:
        raise JiangSuSearchError(f"no coprime pair within bound {bound}")
    return best


def jiang_su_preset(depth: int, seed: tuple[int, int] = (2, 3),
                    search_bound: int = 1000) -> InductiveSystem:
    """Dimension-drop tower Z_{p_1,q_1} -> Z_{p_2,q_2} -> ... with the three
    paths x/2, 1/2, (x+1)/2.

    Level 1 is Z_{2,3}. Afterwards p' = k0 p and q' = k1 q with k0 > 2q,
    k1 > 2p, gcd(p', q') = 1 and k0*k1 minimal (ties: smaller k0).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    p, q = 1, 1
    dims, stages, levels = [1], [], [{"p": 1, "q": 1}]
    for level in range(1, depth + 1):
        if level == 1:
            k0, k1 = seed
        else:
            try:
                k0, k1 = _search_factors(p, q, search_bound)
            except JiangSuSearchError as exc:
                raise JiangSuSearchError(f"level {level}: {exc}") from None
        try:
            a, b, c = _split_multiplicities(k0, k1, p, q)
        except JiangSuSearchError as exc:
            raise JiangSuSearchError(f"level {level}: {exc}") from None
        p, q = k0 * p, k1 * q
        pl = PathList.of((HALF_LEFT, a), (MIDPOINT, b), (HALF_RIGHT, c))
        stages.append(Stage(dims[-1], p * q, pl))
        dims.append(p * q)
        levels.append({"p": p, "q": q, "k0": k0, "k1": k1, "mult": [a, b, c]})
    meta = {"levels": levels, "search_bound": search_bound, "seed": list(seed)}
    return InductiveSystem(tuple(dims), tuple(stages), name="jiang-su", metadata=meta)


def reindex(sys: InductiveSystem) -> InductiveSystem:
    """Keep the even levels: new stage j composes old stages 2j-1 and 2j."""
    stages = [compose_stages(sys.stages[2 * j], sys.stages[2 * j + 1])
              for j in range(sys.depth // 2)]
    dims = sys.dims[: 2 * len(stages) + 1: 2]
    meta = dict(sys.metadata)
    if "levels" in meta:
        meta["levels"] = meta["levels"][: 2 * len(stages) + 1: 2]
    meta["reindexed_from_depth"] = sys.depth
    return InductiveSystem(dims, tuple(stages), name=sys.name, reindexed=True, metadata=meta)


# ---------------------------------------------------------------- validation

def validate_system(sys: InductiveSystem) -> list[str]:
    """Violations of the class conditions; empty when the system is admissible."""
    problems = []
    for k, st in enumerate(sys.stages, start=1):
        limit = Fraction(1, 2 ** st.span)
        for path in sorted(st.distinct_paths, key=str):
            if path.oscillation > limit:
                problems.append(
                    f"stage {k}: path {path} has oscillation {path.oscillation}, "
                    f"exceeding the per-stage contraction bound {limit}")
    if sys.name == "jiang-su":
        for lv, info in enumerate(sys.metadata.get("levels", [])[1:], start=1):
            if math.gcd(info["p"], info["q"]) != 1:
                problems.append(f"level {lv}: p={info['p']}, q={info['q']} not coprime")
        for k, st in enumerate(sys.stages, start=1):
            for path in sorted(st.distinct_paths, key=str):
                if isinstance(path, Constant):
                    s = path.value * 2 ** st.span
                    if s.denominator != 1 or not 1 <= s <= 2 ** st.span - 1:
                        problems.append(f"stage {k}: constant path {path} is not interior")
    return problems


def stage_bound_report(sys: InductiveSystem) -> list[dict]:
    """Per-stage check of oscillation <= 1/2^i for the stage leaving level i."""
    rows = []
    for i, st in enumerate(sys.stages):
        osc = st.max_oscillation
        rows.append({"level": i, "oscillation": str(osc), "limit": str(Fraction(1, 2 ** i)),
                     "ok": osc <= Fraction(1, 2 ** i)})
    return rows


# ---------------------------------------------------------------- morphisms

def _check_fn(sys: InductiveSystem, f: PLMatrixFunction, i: int):
    if f.n != sys.dims[i]:
        raise InvalidSystem(f"function is {f.n}x{f.n} but level {i} has n={sys.dims[i]}")


def apply_connecting(sys: InductiveSystem, f: PLMatrixFunction, i: int,
                     m: int) -> PLMatrixFunction:
    """Unitary-free connecting morphism from level i to level m."""
    _check_fn(sys, f, i)
    if m == i:
        return f
    pl = sys.composite(i, m)
    pieces = {p: compose_with_path(f, p) for p in pl.distinct}
    grid = sorted(set().union(*(g.breakpoints for g in pieces.values())))
    per_point = []
    for x in grid:
        at_x = {p: g(x) for p, g in pieces.items()}
        per_point.append(block_diag([at_x[p] for p in pl.expand()]))
    return PLMatrixFunction(tuple(grid), np.stack(per_point), f.approx_error)


def block_values(sys: InductiveSystem, f: PLMatrixFunction, i: int, m: int,
                 x=0) -> np.ndarray:
    """Diagonal blocks of the level-m image of f at x, shape (n_m/n_i, n_i, n_i)."""
    _check_fn(sys, f, i)
    pl = sys.composite(i, m)
    cache = {p: f(p(x)) for p in pl.distinct}
    return np.stack([cache[p] for p in pl.expand()])


def af_image(sys: InductiveSystem, f: PLMatrixFunction, i: int, m: int) -> np.ndarray:
    """Level-m matrix approximation of the AF-embedding image of f."""
    return block_diag(list(block_values(sys, f, i, m)))


def intertwining_defect(sys: InductiveSystem, f: PLMatrixFunction, i: int,
                        cls: LipschitzClass | None = None) -> float:
    """sup_x ||af_image(f, i+1) - connecting(f)(x)|| for one stage."""
    if cls is not None and not cls.contains(f):
        raise InvalidSystem(f"L_f = {f.lipschitz_constant} is not below {cls.bound}")
    g = apply_connecting(sys, f, i, i + 1)
    const = af_image(sys, f, i, i + 1)
    return float(np.max(np.linalg.norm(g.values - const[None], ord=2, axis=(1, 2))))
