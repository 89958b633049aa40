"""Acceptance gate: each test checks one criterion at its stated tolerance
and records a single pass/fail line (shown in the terminal summary)."""
import itertools
import json
import math
import time

import numpy as np
import pytest

from acceptance_log import record
from aftriple.cli import main
from aftriple.dirac import (BOUND_SLACK, DiracSpec, commutator_per_level, dirac_matrix,
                            full_commutator_bound, per_level_bound)
from aftriple.gns import GnsTower
from aftriple.matfun import LipschitzClass, random_lipschitz
from aftriple.summability import (doubling_dims, doubling_threshold, find_p_summable,
                                  strictly_increasing, theta_sum, trace_sum)
from aftriple.system import intertwining_defect, jiang_su_preset, reindex, toy_preset
from oracles import random_complex

GAMMA = 1.5
REIDX = reindex(toy_preset("doubling", 12))  # reindexed doubling, levels 0..6


def test_criterion_01_projection_suite():
    t0 = time.perf_counter()
    sys_ = toy_preset("doubling", 4)
    tower = GnsTower.of(sys_)
    qs = [tower.q_matrix(4, n).matrix for n in range(5)]
    sa = max(np.max(np.abs(q - q.conj().T)) for q in qs)
    idem = max(np.max(np.abs(q @ q - q)) for q in qs)
    orth = max(np.max(np.abs(qs[a] @ qs[b])) for a, b in itertools.combinations(range(5), 2))
    comp = np.linalg.norm(sum(qs) - np.eye(256), 2)
    ranks = [int(np.sum(np.linalg.eigvalsh(q) >= 0.5)) for q in qs]
    expect = [1] + [sys_.dims[n] ** 2 - sys_.dims[n - 1] ** 2 for n in range(1, 5)]
    dt = time.perf_counter() - t0
    ok = (sa <= 1e-12 and idem <= 1e-10 and orth <= 1e-10 and comp <= 1e-10
          and ranks == expect and dt < 10)
    assert record(1, ok, f"self-adjoint {sa:.1e}, idempotent {idem:.1e}, orthogonal {orth:.1e}, "
                         f"complete {comp:.1e}, ranks {ranks}, {dt:.2f}s")


def test_criterion_02_adjointness():
    tower = GnsTower.of(toy_preset("doubling", 4))
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(5):
        for j in range(i + 1):
            ni, nj = tower.dims[i], tower.dims[j]
            for _ in range(100):
                v, w = random_complex(rng, (ni, ni)), random_complex(rng, (nj, nj))
                lhs = tower.inner(v, tower.embed(w, j, i))
                rhs = tower.inner(tower.partial_trace_proj(v, i, j), w)
                worst = max(worst, abs(lhs - rhs))
    assert record(2, worst <= 1e-12, f"max |<v, embed w> - <P v, w>| = {worst:.1e} "
                                     f"over 15 level pairs x 100")


def _end_points(sys_, l, top):
    """zeta(0) for every composite path zeta from level l to any m in [l, top]."""
    return sorted({p(0) for m in range(l, top + 1) for p in sys_.distinct_composites(l, m)})


def _max_pairwise(vals):
    """Largest spectral-norm distance among a stack of matrices. Frobenius
    distances prefilter; pairs that could be the max get the exact norm."""
    flat = vals.reshape(len(vals), -1)
    sq = np.sum(np.abs(flat) ** 2, axis=1)
    fro = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * np.real(flat @ flat.conj().T), 0))
    a, b = np.triu_indices(len(vals), 1)
    if len(a) == 0:
        return 0.0
    order = np.argsort(-fro[a, b])
    best = 0.0
    for k in order:
        if fro[a[k], b[k]] * (1 + 1e-9) + 1e-15 <= best:
            break
        best = max(best, np.linalg.norm(vals[a[k]] - vals[b[k]], 2))
    return best


def test_criterion_03_lipschitz_paths():
    top = 6
    systems = [toy_preset("doubling", top), toy_preset("tripling", top)]
    violations, worst, count, seed = 0, 0.0, 0, 0
    for i in (1, 2):
        cls = LipschitzClass(GAMMA, i)
        for sys_ in systems:
            points = {l: _end_points(sys_, l, top) for l in range(i, top + 1)}
            for _ in range(50):
                f = random_lipschitz(sys_.dims[i], cls, seed=seed)
                seed += 1
                count += 1
                for l in range(i, top + 1):
                    bound = 2 ** i * f.lipschitz_constant / 2 ** l
                    for eta in sys_.distinct_composites(i, l):
                        vals = np.stack([f(eta(x)) for x in points[l]])
                        d = _max_pairwise(vals)
                        worst = max(worst, d / bound)
                        violations += d > bound * (1 + BOUND_SLACK)
    assert record(3, violations == 0 and count == 200,
                  f"{count} functions, {violations} violations, max ratio to bound {worst:.4f}")


def test_criterion_04_commutator_bounds():
    t0 = time.perf_counter()
    spec = DiracSpec(1.9)
    level_bad, total_bad, worst_level, worst_total, count = 0, 0, 0.0, 0.0, 0
    for i in (1, 2):
        cls = LipschitzClass(GAMMA, i)
        for s in range(50):
            f = random_lipschitz(REIDX.dims[i], cls, seed=1000 * i + s)
            rep = full_commutator_bound(REIDX, spec, f, i, 6, cls)
            count += 1
            for n, est, bound in rep.per_level:
                if n > i:
                    worst_level = max(worst_level, est.upper / bound)
                    level_bad += est.upper > bound * (1 + BOUND_SLACK)
            worst_total = max(worst_total, rep.estimate.upper / rep.formula_bound)
            total_bad += rep.estimate.upper > rep.formula_bound * (1 + BOUND_SLACK)
    dt = time.perf_counter() - t0
    ok = level_bad == 0 and total_bad == 0 and dt < 120
    assert record(4, ok, f"{count} functions at M=6: per-level violations {level_bad} "
                         f"(max ratio {worst_level:.3f}), total violations {total_bad} "
                         f"(max ratio {worst_total:.3f}), {dt:.1f}s")


def test_criterion_05_width_convergence():
    spec = DiracSpec(1.9)
    worst, full_ratios = 0.0, []
    for i, n in ((1, 2), (1, 3), (2, 3)):
        f = random_lipschitz(REIDX.dims[i], LipschitzClass(GAMMA, i), seed=50 + n + i)
        widths = [commutator_per_level(REIDX, spec, f, i, n, M).width for M in range(3, 7)]
        worst = max(worst, max(b / a for a, b in zip(widths, widths[1:])))
    f = random_lipschitz(REIDX.dims[1], LipschitzClass(GAMMA, 1), seed=5)
    fw = [full_commutator_bound(REIDX, spec, f, 1, M).estimate.width for M in range(3, 7)]
    full_ratios = [b / a for a, b in zip(fw, fw[1:])]
    assert record(5, worst <= 0.26,
                  f"per-level width ratio max {worst:.6f} (M=3..6); full-estimate width "
                  f"ratios {', '.join(f'{r:.3f}' for r in full_ratios)} (reported only)")


def test_criterion_06_trace_identity():
    sys_ = toy_preset("doubling", 4)
    spec = DiracSpec(1.9)
    ev = dirac_matrix(sys_, spec, 4).eigenvalues()
    errs = {}
    for p in (1, 2, 4):
        dense = np.sum((1 + ev ** 2) ** (-p / 2))
        closed = float(trace_sum(sys_.dims, spec, p, 4).total)
        errs[f"p={p}"] = abs(dense - closed) / closed
    closed = float(theta_sum(sys_.dims, spec, 4).total)
    errs["theta"] = abs(np.sum(np.exp(-ev ** 2)) - closed) / closed
    ok = all(e <= 1e-8 for e in errs.values())
    assert record(6, ok, ", ".join(f"{k} rel {v:.1e}" for k, v in errs.items()))


def test_criterion_07_summability_threshold():
    step = 0.25
    grid = [step * k for k in range(1, 49)]
    dims = doubling_dims(60)
    details, ok = [], True
    for beta in (1.2, 1.5, 1.9):
        pstar = doubling_threshold(beta)
        verdicts = dict(find_p_summable(dims, DiracSpec(beta), grid))
        div = [p for p, v in verdicts.items() if v == "diverging-trend"]
        conv = [p for p, v in verdicts.items() if v == "converging-trend"]
        flip_ok = (div and conv and max(div) < min(conv)
                   and pstar - step <= max(div) and min(conv) <= pstar + step)
        ok &= bool(flip_ok)
        details.append(f"beta={beta}: p*={pstar:.3f}, flip {max(div)}->{min(conv)}")
    assert record(7, ok, "; ".join(details))


def test_criterion_08_jiang_su_trend():
    js = jiang_su_preset(6)
    spec = DiracSpec(1.9)
    parts, ok = [], True
    for p in (1, 2, 4, 8):
        terms = trace_sum(js.dims, spec, p, js.depth).terms
        inc = strictly_increasing(terms)
        ok &= inc
        parts.append(f"p={p} {'increasing' if inc else 'NOT increasing'}")
    th = theta_sum(js.dims, spec, js.depth)
    ok &= th.terms_increasing
    parts.append(f"theta {'increasing' if th.terms_increasing else 'NOT increasing'}")
    t8 = trace_sum(js.dims, spec, 8, js.depth).terms
    detail = (", ".join(parts) + f"; p=8 terms {float(t8[0]):.4g}, {float(t8[1]):.4g}; "
              f"theta terms {', '.join(f'{float(t):.3g}' for t in th.terms[:3])}, ...")
    assert record(8, ok, detail)


def test_criterion_09_intertwining_defect():
    systems = [reindex(toy_preset("doubling", 6)), reindex(toy_preset("tripling", 6))]
    violations, worst, count = 0, 0.0, 0
    for i in (1, 2):
        cls = LipschitzClass(GAMMA, i)
        bound = GAMMA ** i / 2 ** i
        for k in range(50):
            sys_ = systems[k % 2]
            f = random_lipschitz(sys_.dims[i], cls, seed=7000 + 100 * i + k)
            d = intertwining_defect(sys_, f, i, cls)
            count += 1
            worst = max(worst, d / bound)
            violations += not d < bound
    assert record(9, violations == 0 and count == 100,
                  f"{count} functions, {violations} violations, max defect/bound {worst:.3f}")


CONFIGS = {
    "validate": {"system": {"preset": "jiang-su", "depth": 3}},
    "qcheck": {"system": {"preset": "toy-doubling", "depth": 4}},
    "commutator": {"system": {"preset": "toy-doubling", "depth": 12, "reindex": True},
                   "functions": {"level": 1, "count": 3}, "commutator": {"M": 6}},
    "summability": {"system": {"preset": "toy-doubling", "depth": 6}},
}


def test_criterion_10_determinism(tmp_path):
    same, codes = [], {}
    for cmd, cfg in CONFIGS.items():
        path = tmp_path / f"{cmd}.json"
        path.write_text(json.dumps(cfg))
        blobs = []
        out = tmp_path / "out"  # same directory: the echoed config includes it
        for _ in range(2):
            codes[cmd] = main([cmd, "--config", str(path), "--out", str(out), "--seed", "42",
                               "--no-timestamp"])
            blobs.append(((out / f"{cmd}.json").read_bytes(), (out / f"{cmd}.csv").read_bytes()))
        same.append(blobs[0] == blobs[1])
    ok = all(same) and all(c == 0 for c in codes.values())
    assert record(10, ok, f"byte-identical: {dict(zip(CONFIGS, same))}; exit codes {codes}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
