"""Trace sums Tr((1+D^2)^(-p/2)) and Tr exp(-D^2) over the K_i decomposition.

D acts on K_i = H_i ⊖ H_{i-1} as alpha_i, so each trace is an exact series
1 + sum_i w(alpha_i) (n_i^2 - n_{i-1}^2). Dimensions stay Python ints and the
weights are evaluated with mpmath at ``PRECISION`` significant digits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

from .dirac import DiracSpec

PRECISION = 60
VERDICTS = ("converging-trend", "diverging-trend", "inconclusive")


def _mpf(x) -> mpmath.mpf:
    return mpmath.mpf(str(x)) if isinstance(x, float) else mpmath.mpf(x)


def _alpha_mp(spec: DiracSpec, n: int) -> mpmath.mpf:
    """alpha_n in high precision; the default rule uses the decimal beta exactly."""
    if n == 0:
        return mpmath.mpf(0)
    if spec.alphas is None:
        return _mpf(spec.beta) ** (2 * (n - 1))
    return _mpf(spec.alpha(n))


def increments(dims, depth: int) -> list[int]:
    if depth > len(dims) - 1:
        raise ValueError(f"depth {depth} exceeds the {len(dims) - 1} available levels")
    return [dims[i] ** 2 - dims[i - 1] ** 2 for i in range(1, depth + 1)]


def _fmt(x: mpmath.mpf, digits: int = 20) -> str:
    return mpmath.nstr(x, digits)


@dataclass(frozen=True)
class SeriesRow:
    level: int
    n: int
    increment: int
    alpha: mpmath.mpf
    term: mpmath.mpf
    partial_sum: mpmath.mpf

    def to_json(self) -> dict:
        return {"i": self.level, "n_i": str(self.n), "increment": str(self.increment),
                "alpha": _fmt(self.alpha), "term": _fmt(self.term),
                "partial_sum": _fmt(self.partial_sum)}


def _rows(dims, spec, depth, weight) -> tuple[SeriesRow, ...]:
    rows, total = [], mpmath.mpf(1)
    for i, inc in enumerate(increments(dims, depth), start=1):
        a = _alpha_mp(spec, i)
        term = weight(a) * inc
        total += term
        rows.append(SeriesRow(i, dims[i], inc, a, term, total))
    return tuple(rows)


def _ratios(rows) -> list[mpmath.mpf]:
    return [b.term / a.term if a.term else mpmath.inf for a, b in zip(rows, rows[1:])]


def trend_verdict(rows) -> str:
    """diverging if term ratios are >= 1 over the last ceil(depth/2) levels,
    converging if they are all < 1 there, inconclusive otherwise."""
    ratios = _ratios(rows)
    window = ratios[-math.ceil(len(rows) / 2):] if ratios else []
    if not window:
        return "inconclusive"
    if all(r >= 1 for r in window):
        return "diverging-trend"
    if all(r < 1 for r in window):
        return "converging-trend"
    return "inconclusive"


def strictly_increasing(xs) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


@dataclass(frozen=True)
class SummabilityReport:
    p: float
    rows: tuple[SeriesRow, ...]
    verdict: str

    @property
    def terms(self):
        return [r.term for r in self.rows]

    @property
    def partial_sums(self):
        return [r.partial_sum for r in self.rows]

    @property
    def term_ratios(self):
        return _ratios(self.rows)

    @property
    def total(self) -> mpmath.mpf:
        return self.rows[-1].partial_sum if self.rows else mpmath.mpf(1)

    def to_json(self) -> dict:
        return {"p": self.p, "verdict": self.verdict, "total": _fmt(self.total),
                "rows": [r.to_json() for r in self.rows],
                "term_ratios": [_fmt(r) for r in self.term_ratios]}


@dataclass(frozen=True)
class ThetaReport:
    rows: tuple[SeriesRow, ...]

    @property
    def terms(self):
        return [r.term for r in self.rows]

    @property
    def partial_sums(self):
        return [r.partial_sum for r in self.rows]

    @property
    def total(self) -> mpmath.mpf:
        return self.rows[-1].partial_sum if self.rows else mpmath.mpf(1)

    @property
    def terms_increasing(self) -> bool:
        return strictly_increasing(self.terms)

    def to_json(self) -> dict:
        return {"total": _fmt(self.total), "terms_increasing": self.terms_increasing,
                "rows": [r.to_json() for r in self.rows]}


def trace_sum(dims, spec: DiracSpec, p: float, depth: int) -> SummabilityReport:
    """1 + sum_{i<=depth} (1 + alpha_i^2)^(-p/2) (n_i^2 - n_{i-1}^2)."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    with mpmath.workdps(PRECISION):
        half_p = _mpf(p) / 2
        rows = _rows(dims, spec, depth, lambda a: (1 + a * a) ** (-half_p))
        return SummabilityReport(p, rows, trend_verdict(rows))


def theta_sum(dims, spec: DiracSpec, depth: int) -> ThetaReport:
    """1 + sum_{i<=depth} exp(-alpha_i^2) (n_i^2 - n_{i-1}^2)."""
    with mpmath.workdps(PRECISION):
        return ThetaReport(_rows(dims, spec, depth, lambda a: mpmath.exp(-a * a)))


def find_p_summable(dims, spec: DiracSpec, p_grid, depth: int | None = None
                    ) -> list[tuple[float, str]]:
    depth = len(dims) - 1 if depth is None else depth
    return [(p, trace_sum(dims, spec, p, depth).verdict) for p in p_grid]


def doubling_threshold(beta: float) -> float:
    """p* = ln 4 / (2 ln beta): for n_i = 2^i the term ratio tends to 4 beta^(-2p)."""
    return math.log(4) / (2 * math.log(beta))


def doubling_dims(depth: int) -> tuple[int, ...]:
    return tuple(2 ** i for i in range(depth + 1))


CSV_HEADER = ("i", "n_i", "increment", "alpha", "term", "partial_sum")


def csv_rows(rows) -> list[list[str]]:
    return [[str(r.level), str(r.n), str(r.increment), _fmt(r.alpha), _fmt(r.term),
             _fmt(r.partial_sum)] for r in rows]
