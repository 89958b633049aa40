"""Dyadic contraction paths of [0, 1] and their composition.

Two shapes occur: ``Affine(r, l)`` is x -> (x + r) / 2**l and
``Constant(c)`` is x -> c. Both are closed under composition, so every
multi-stage path of a connecting morphism stays in one of the two forms.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

from .numerics import as_dyadic, dyadic_from_json, dyadic_to_json


@dataclass(frozen=True)
class Affine:
    r: int
    l: int

    def __post_init__(self):
        if self.l < 0:
            raise ValueError(f"level must be non-negative, got {self.l}")
        if not 0 <= self.r <= (1 << self.l) - 1:
            raise ValueError(f"offset r={self.r} outside [0, 2^{self.l} - 1]")

    def __call__(self, x) -> Fraction:
        x = _check_unit(x)
        return (x + self.r) / (1 << self.l)

    @property
    def oscillation(self) -> Fraction:
        return Fraction(1, 1 << self.l)

    def __str__(self):
        if self.l == 0:
            return "x"
        return f"(x+{self.r})/{1 << self.l}" if self.r else f"x/{1 << self.l}"


@dataclass(frozen=True)
class Constant:
    value: Fraction

    def __post_init__(self):
        v = as_dyadic(self.value)
        if not 0 <= v <= 1:
            raise ValueError(f"constant {v} outside [0, 1]")
        object.__setattr__(self, "value", v)

    def __call__(self, x) -> Fraction:
        _check_unit(x)
        return self.value

    @property
    def oscillation(self) -> Fraction:
        return Fraction(0)

    def __str__(self):
        return str(self.value)


DyadicPath = Union[Affine, Constant]

IDENTITY = Affine(0, 0)
HALF_LEFT = Affine(0, 1)     # x/2
MIDPOINT = Constant(Fraction(1, 2))
HALF_RIGHT = Affine(1, 1)    # (x+1)/2


def _check_unit(x) -> Fraction:
    x = as_dyadic(x)
    if not 0 <= x <= 1:
        raise ValueError(f"point {x} outside [0, 1]")
    return x


def compose(inner: DyadicPath, outer: DyadicPath) -> DyadicPath:
    """The path x -> inner(outer(x))."""
    if isinstance(inner, Constant):
        return inner
    if isinstance(outer, Constant):
        return Constant(inner(outer.value))
    return Affine(outer.r + (inner.r << outer.l), inner.l + outer.l)


def evaluate(path: DyadicPath, x) -> Fraction:
    return path(x)


def oscillation(path: DyadicPath) -> Fraction:
    return path.oscillation


def path_to_json(path: DyadicPath) -> dict:
    if isinstance(path, Affine):
        return {"affine": {"r": path.r, "l": path.l}}
    return {"constant": dyadic_to_json(path.value)}


def path_from_json(obj: dict) -> DyadicPath:
    if set(obj) == {"affine"}:
        a = obj["affine"]
        return Affine(int(a["r"]), int(a["l"]))
    if set(obj) == {"constant"}:
        return Constant(dyadic_from_json(obj["constant"]))
    raise ValueError(f"unrecognised path object {obj!r}")


@dataclass(frozen=True)
class PathList:
    """Run-length list of (path, multiplicity); expanding it gives the
    block sequence of a connecting morphism."""

    entries: tuple[tuple[DyadicPath, int], ...]

    def __post_init__(self):
        entries = tuple((p, int(n)) for p, n in self.entries)
        for _, n in entries:
            if n < 1:
                raise ValueError(f"multiplicity must be >= 1, got {n}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, *entries) -> "PathList":
        return cls(tuple(entries))

    @property
    def total(self) -> int:
        return sum(n for _, n in self.entries)

    @property
    def distinct(self) -> tuple[DyadicPath, ...]:
        return tuple(dict.fromkeys(p for p, _ in self.entries))

    @property
    def max_oscillation(self) -> Fraction:
        return max((p.oscillation for p, _ in self.entries), default=Fraction(0))

    def __iter__(self) -> Iterator[tuple[DyadicPath, int]]:
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def expand(self) -> list[DyadicPath]:
        return expand_bar(self)

    def to_json(self) -> list:
        return [{"path": path_to_json(p), "mult": n} for p, n in self.entries]

    @classmethod
    def from_json(cls, obj: list) -> "PathList":
        return cls(tuple((path_from_json(e["path"]), int(e["mult"])) for e in obj))


def expand_bar(pl: PathList) -> list[DyadicPath]:
    """Each path repeated by its multiplicity, in block order."""
    out = []
    for p, n in pl.entries:
        out.extend([p] * n)
    return out


def merge_runs(entries) -> PathList:
    merged: list[list] = []
    for p, n in entries:
        if merged and merged[-1][0] == p:
            merged[-1][1] += n
        else:
            merged.append([p, n])
    return PathList(tuple((p, n) for p, n in merged))
