"""Command line entry point: aftriple <validate|qcheck|commutator|summability>."""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import summability as summ
from .config import RunConfig, resolved
from .dirac import ClassViolation, dirac_matrix, full_commutator_bound
from .gns import BudgetExceeded, GnsTower
from .matfun import LipschitzClass, PLMatrixFunction, random_lipschitz
from .system import (InductiveSystem, InvalidSystem, JiangSuSearchError,
                     stage_bound_report, reindex, validate_system)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3
MAX_BLOCKS = 1 << 16  # diagonal blocks of a level-M image handled by commutator


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def load_config(path: str, seed: int | None = None, out: str | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        lines = [f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}"
                 for e in exc.errors()]
        raise ConfigError(f"{path}: invalid config\n  " + "\n  ".join(lines)) from None
    if seed is not None:
        cfg.functions.seed = seed
    if out is not None:
        cfg.output.dir = out
    return RunConfig.model_validate(cfg.model_dump())


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


def write_report(cfg: RunConfig, command: str, report: dict, header, rows,
                 timestamp: bool) -> Path:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    body = {"command": command, "config": resolved(cfg), **report}
    if timestamp:
        body["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    path = out / f"{command}.json"
    path.write_text(json.dumps(_clean(body), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(out / f"{command}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(_clean(rows))
    return path


# ---------------------------------------------------------------- validate

def _system_summary(sys_: InductiveSystem) -> dict:
    out = {"name": sys_.name, "reindexed": sys_.reindexed, "dims": [str(d) for d in sys_.dims],
           "stage_max_oscillation": [str(st.max_oscillation) for st in sys_.stages]}
    if "levels" in sys_.metadata and not sys_.reindexed:  # composed stages have no single split
        levels = sys_.metadata["levels"][1:]
        out["factors"] = [[lv.get("k0"), lv.get("k1")] for lv in levels]
        out["multiplicities"] = [lv.get("mult") for lv in levels]
    return out


def cmd_validate(cfg: RunConfig) -> tuple[int, dict, tuple, list]:
    raw = cfg.system.build_raw()
    systems = [raw] + ([reindex(raw)] if raw.depth >= 2 else [])
    checks, rows, failed = [], [], False
    for s in systems:
        problems = validate_system(s)
        failed |= bool(problems)
        checks.append({**_system_summary(s), "problems": problems,
                       "stage_bound_by_level": stage_bound_report(s)})
        rows.append([s.name, s.reindexed, s.depth, len(problems), "fail" if problems else "pass"])
    report = {"status": "fail" if failed else "pass", "systems": checks}
    return (EXIT_FAIL if failed else EXIT_OK), report, \
        ("system", "reindexed", "depth", "problems", "status"), rows


# ---------------------------------------------------------------- qcheck

def projection_suite(sys_: InductiveSystem, cfg, rng, inject_fault=False) -> dict:
    """Residuals of the GNS projection identities on every level of the tower."""
    tower = GnsTower.of(sys_, max_dim=cfg.max_dim)
    top = sys_.depth
    tower.check_budget(top)
    N = sys_.dims[top] ** 2
    qs = [tower.q_matrix(top, n).matrix for n in range(top + 1)]
    if inject_fault and top >= 1:
        qs[1] = qs[1] * 1.001
    eye = np.eye(N)
    per_level = []
    for n, q in enumerate(qs):
        expect = 1 if n == 0 else sys_.dims[n] ** 2 - sys_.dims[n - 1] ** 2
        eig = np.linalg.eigvalsh((q + q.conj().T) / 2)
        per_level.append({
            "n": n,
            "self_adjoint": float(np.max(np.abs(q - q.conj().T))),
            "idempotent": float(np.max(np.abs(q @ q - q))),
            "rank": int(np.sum(eig >= 0.5)),
            "expected_rank": expect,
        })
    ortho = max((float(np.max(np.abs(qs[a] @ qs[b])))
                 for a in range(len(qs)) for b in range(a + 1, len(qs))), default=0.0)
    complete = float(np.linalg.norm(sum(qs) - eye, 2))

    adj, comp, kn = 0.0, 0.0, 0.0
    for i in range(top + 1):
        ni = sys_.dims[i]
        for j in range(i + 1):
            nj = sys_.dims[j]
            for _ in range(cfg.pairs):
                v = rng.standard_normal((ni, ni)) + 1j * rng.standard_normal((ni, ni))
                w = rng.standard_normal((nj, nj)) + 1j * rng.standard_normal((nj, nj))
                lhs = tower.inner(v, tower.embed(w, j, i))
                rhs = tower.inner(tower.partial_trace_proj(v, i, j), w)
                adj = max(adj, abs(lhs - rhs) / max(1.0, abs(lhs)))
        for n in range(1, i + 1):
            v = rng.standard_normal((ni, ni)) + 1j * rng.standard_normal((ni, ni))
            qv = tower.q_proj(v, i, n)
            comp = max(comp, float(np.max(np.abs(qv - tower.q_components(v, i, n)))))
            kn = max(kn, float(np.max(np.abs(tower.partial_trace_proj(qv, n, n - 1)))))
    t = cfg
    checks = {
        "self_adjoint": (max(r["self_adjoint"] for r in per_level), t.self_adjoint_tol),
        "idempotent": (max(r["idempotent"] for r in per_level), t.idempotent_tol),
        "orthogonal": (ortho, t.orthogonal_tol),
        "complete": (complete, t.complete_tol),
        "adjointness": (adj, t.adjointness_tol),
        "component_formula": (comp, t.idempotent_tol),
        "range_in_complement": (kn, t.idempotent_tol),
    }
    out = {k: {"residual": r, "tol": tol, "pass": r <= tol} for k, (r, tol) in checks.items()}
    out["rank"] = {"pass": all(r["rank"] == r["expected_rank"] for r in per_level)}
    return {"levels": per_level, "checks": out,
            "pass": all(c["pass"] for c in out.values())}


def cmd_qcheck(cfg: RunConfig):
    sys_ = cfg.system.build()
    rng = np.random.default_rng(cfg.functions.seed)
    suite = projection_suite(sys_, cfg.qcheck, rng, cfg.qcheck.inject_fault)
    rows = [[k, c.get("residual", ""), c.get("tol", ""), "pass" if c["pass"] else "fail"]
            for k, c in suite["checks"].items()]
    report = {"status": "pass" if suite["pass"] else "fail", "system": _system_summary(sys_),
              **suite}
    return (EXIT_OK if suite["pass"] else EXIT_FAIL), report, \
        ("check", "residual", "tol", "status"), rows


# ---------------------------------------------------------------- commutator

def sample_functions(cfg: RunConfig, n: int) -> list[tuple[str, PLMatrixFunction]]:
    fc = cfg.functions
    cls = LipschitzClass(fc.gamma, fc.level)
    seeds = np.random.SeedSequence(fc.seed).spawn(fc.count + 1)
    out = [(f"random-{k}", random_lipschitz(n, cls, int(s.generate_state(1)[0]),
                                           hermitian=fc.hermitian, resolution=fc.resolution))
           for k, s in enumerate(seeds[:-1])]
    if fc.include_constant:
        # scalar: the only constants commuting with every Q_n, including n <= level
        z = complex(*np.random.default_rng(seeds[-1]).standard_normal(2))
        out.append(("constant", PLMatrixFunction.constant(z * np.eye(n))))
    if fc.include_unit:
        out.append(("unit", PLMatrixFunction.constant(np.eye(n))))
    return out


def cmd_commutator(cfg: RunConfig):
    if not cfg.system.reindex:
        raise ConfigError("commutator needs system.reindex = true: the per-level constants "
                          "2^(2(n-1)) assume every stage contracts oscillation by 1/4")
    sys_ = cfg.system.build()
    i, M = cfg.functions.level, cfg.commutator.M
    if not i <= M <= sys_.depth:
        raise ConfigError(f"need functions.level <= commutator.M <= reindexed depth "
                          f"{sys_.depth} (level={i}, M={M})")
    if sys_.ratio(i, M) > MAX_BLOCKS:
        raise BudgetExceeded(f"level-{M} image has n_{M}/n_{i} = {sys_.ratio(i, M)} blocks, "
                             f"above the limit {MAX_BLOCKS}")
    spec = cfg.dirac.build()
    cls = LipschitzClass(cfg.functions.gamma, i)
    tower = GnsTower.of(sys_)
    tower.check_budget(i)
    results, rows, failed = [], [], False
    for name, f in sample_functions(cfg, sys_.dims[i]):
        rep = full_commutator_bound(sys_, spec, f, i, M, cls, tower)
        failed |= not rep.ok
        est = rep.estimate
        levels = []
        for n, e, bound in rep.per_level:
            margin = None if bound is None else bound - e.upper
            levels.append({"n": n, **e.to_json(), "bound": bound, "margin": margin})
            rows.append([name, n, e.lower, e.upper, "" if bound is None else bound,
                         "" if margin is None else margin])
        rows.append([name, "total", est.lower, est.upper, rep.formula_bound,
                     rep.formula_bound - est.upper])
        results.append({"function": name, "lipschitz": f.lipschitz_constant,
                        "sup_norm": f.sup_norm, **est.to_json(),
                        "formula_bound": rep.formula_bound,
                        "margin": rep.formula_bound - est.upper, "pass": rep.ok,
                        "per_level": levels})
    report = {"status": "fail" if failed else "pass", "system": _system_summary(sys_),
              "level": i, "M": M, "results": results}
    return (EXIT_FAIL if failed else EXIT_OK), report, \
        ("function", "n", "lower", "upper", "bound", "margin"), rows


# ---------------------------------------------------------------- summability

def trace_cross_check(sys_, spec, ps, max_dim: int):
    """Closed-form partial sums against eigenvalues of a materialized D_M."""
    levels = [m for m in range(sys_.depth + 1) if sys_.dims[m] <= max_dim]
    M = max(levels)
    eig = dirac_matrix(sys_, spec, M, GnsTower.of(sys_, max_dim=max_dim)).eigenvalues()
    out = []
    for p in ps:
        dense = float(np.sum((1 + eig ** 2) ** (-p / 2)))
        closed = float(summ.trace_sum(sys_.dims, spec, p, M).total) if M else 1.0
        out.append({"kind": f"p={p}", "dense": dense, "closed": closed,
                    "rel_err": abs(dense - closed) / abs(closed)})
    dense = float(np.sum(np.exp(-eig ** 2)))
    closed = float(summ.theta_sum(sys_.dims, spec, M).total) if M else 1.0
    out.append({"kind": "theta", "dense": dense, "closed": closed,
                "rel_err": abs(dense - closed) / abs(closed)})
    return M, out


def cmd_summability(cfg: RunConfig):
    sys_ = cfg.system.build()
    spec = cfg.dirac.build()
    sc = cfg.summability
    depth = sys_.depth if sc.depth is None else sc.depth
    if depth > sys_.depth:
        raise ConfigError(f"summability.depth = {depth} exceeds system depth {sys_.depth}")
    if depth < 1:
        raise ConfigError("summability needs a system of depth >= 1")
    reports = [summ.trace_sum(sys_.dims, spec, p, depth) for p in sc.p_grid]
    theta = summ.theta_sum(sys_.dims, spec, depth)
    M, cross = trace_cross_check(sys_, spec, sc.p_grid, sc.cross_check_max_dim)
    cross_ok = all(c["rel_err"] <= sc.cross_check_tol for c in cross)
    rows = []
    for r in reports:
        rows += [[f"p={r.p}"] + row for row in summ.csv_rows(r.rows)]
    rows += [["theta"] + row for row in summ.csv_rows(theta.rows)]
    report = {
        "status": "pass" if cross_ok else "fail",
        "system": _system_summary(sys_), "depth": depth,
        "p_summability": [{**r.to_json(),
                           "terms_strictly_increasing": summ.strictly_increasing(r.terms)}
                          for r in reports],
        "verdicts": [[p, v] for p, v in ((r.p, r.verdict) for r in reports)],
        "theta": theta.to_json(),
        "cross_check": {"level": M, "tol": sc.cross_check_tol, "rows": cross, "pass": cross_ok},
    }
    return (EXIT_OK if cross_ok else EXIT_FAIL), report, ("series",) + summ.CSV_HEADER, rows


# ---------------------------------------------------------------- entry point

COMMANDS = {"validate": cmd_validate, "qcheck": cmd_qcheck,
            "commutator": cmd_commutator, "summability": cmd_summability}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aftriple",
                                 description="Finite-level checks for spectral triples on AF "
                                             "and dimension-drop inductive limits.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="report directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="overrides functions.seed")
    ap.add_argument("--no-timestamp", action="store_true", help="omit the report timestamp")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = load_config(args.config, args.seed, args.out)
        if args.no_timestamp:
            cfg.output.timestamp = False
        code, report, header, rows = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidSystem, JiangSuSearchError, ClassViolation, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceeded, MemoryError) as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    path = write_report(cfg, args.command, report, header, rows, cfg.output.timestamp)
    print(f"{args.command}: {report['status']} -> {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
