"""Command-line frontend: ``khinchin <command> --f <dsl|builtin> [options]``.

Exit codes: 0 on success (verdicts are data), 1 when ``verify`` has a failed
check, 2 on usage, parse or compile errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction

import mpmath
import numpy as np

from . import asymptotics, diagnostics, sampler, verify
from .builtins import REGISTRY, by_name
from .dsl import CompileConfig, CompileError, DslError, compile_source
from .family import KhinchinFamily
from .genfunc import EvaluationError, NotInClassK

SCHEMA_VERSION = "1"


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    f: str | None
    n_trunc: int = 200
    precision: str = "standard"
    grid: str | None = None
    tol: float | None = None
    seed: int = 0
    format: str = "json"
    out: str | None = None
    n: str | None = None
    count: int = 10_000
    suite: str = "default"
    t: str | None = None
    eps: float | None = None

    def __post_init__(self):
        for name in ("n_trunc", "count"):
            if getattr(self, name) <= 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if self.tol is not None and not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.seed < 0:
            raise UsageError("--seed must be nonnegative")


# --- inputs -----------------------------------------------------------------


def load_family(cfg: RunConfig) -> KhinchinFamily:
    if not cfg.f:
        raise UsageError("--f is required")
    if cfg.f in REGISTRY:
        return KhinchinFamily(by_name(cfg.f))
    rep = compile_source(cfg.f, CompileConfig(n_trunc=cfg.n_trunc))
    return KhinchinFamily(rep.genfunction)


def parse_grid(spec: str | None, fam: KhinchinFamily) -> np.ndarray:
    """Grid of ``t`` values: ``geo:R:steps``, ``list:t1,t2,...`` or ``lin:a:b:steps``.

    ``geo`` gives ``2^j`` (j < steps) for ``R = inf`` and ``R(1 - 2^-j)`` (j = 1..steps)
    otherwise; ``R`` may be ``auto`` for the inferred radius. Every point must lie in ``[0, R)``.
    """
    radius = fam.radius
    if spec is None:
        if radius.kind == "unknown":
            raise UsageError("radius unknown: supply --grid")
        ts = np.exp(diagnostics.default_log_grid(radius))
    else:
        kind, _, rest = spec.partition(":")
        parts = rest.split(":") if rest else []
        try:
            if kind == "geo" and len(parts) == 2:
                r = radius.r if parts[0] in ("auto", "R") else float(parts[0])
                steps = int(parts[1])
                if steps <= 0:
                    raise UsageError("grid steps must be positive")
                if math.isinf(r):
                    ts = 2.0 ** np.arange(steps)
                else:
                    ts = r * (1 - 2.0 ** -np.arange(1, steps + 1, dtype=float))
            elif kind == "list" and len(parts) == 1:
                ts = np.array([float(x) for x in parts[0].split(",") if x])
            elif kind == "lin" and len(parts) == 3:
                ts = np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
            else:
                raise UsageError(f"bad grid spec {spec!r}; expected geo:R:steps, list:..., lin:a:b:steps")
        except ValueError as exc:
            raise UsageError(f"bad grid spec {spec!r}: {exc}") from None
    ts = np.asarray(ts, dtype=float)
    if ts.size == 0:
        raise UsageError("empty grid")
    if np.any(ts < 0) or (radius.kind == "finite" and np.any(ts >= radius.r)):
        raise UsageError(f"grid leaves [0, R) with R = {radius}")
    return ts


def _grid(cfg: RunConfig, fam: KhinchinFamily) -> np.ndarray:
    return parse_grid(f"list:{cfg.t}" if cfg.t is not None and cfg.grid is None else cfg.grid, fam)


def _ints(s: str | None, default) -> list[int]:
    if s is None:
        return list(default)
    try:
        return [int(x) for x in s.split(",") if x]
    except ValueError:
        raise UsageError(f"bad integer list {s!r}") from None


# --- serialization ------------------------------------------------------------


def _enc(v, decimal: bool):
    if isinstance(v, mpmath.mpf):
        return mpmath.nstr(v, 30) if decimal else float(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if decimal or not math.isfinite(v):
            return repr(v)
        return v
    if isinstance(v, (np.ndarray, list, tuple)):
        return [_enc(x, decimal) for x in v]
    if isinstance(v, dict):
        return {str(k): _enc(x, decimal) for k, x in v.items()}
    return v


def render(cfg: RunConfig, rows: list[dict], extra: dict | None = None) -> str:
    decimal = cfg.precision == "high"
    if cfg.format == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": cfg.command,
            "config": {k: v for k, v in asdict(cfg).items() if k not in ("command",)},
            **({k: _enc(v, decimal) for k, v in extra.items()} if extra else {}),
            "results": [_enc(r, decimal) for r in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_cell(r.get(k, ""), decimal) for k in keys})
    return buf.getvalue()


def _csv_cell(v, decimal):
    v = _enc(v, decimal)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v)
    return v


# --- commands ---------------------------------------------------------------


def cmd_describe(cfg: RunConfig):
    fam = load_family(cfg)
    f = fam.f
    mf = fam.classify_Mf()
    row = {
        "name": f.name,
        "class_k": "yes" if f.class_k.kind == "verified" else str(f.class_k),
        "class_k_status": str(f.class_k),
        "radius": str(f.radius),
        "M_f": "inf" if mf.kind == "infinite" else (mf.value if mf.kind == "finite" else "unknown"),
        "M_f_source": mf.source,
    }
    try:
        g = diagnostics.gap_stats(f, n_max=min(4096, cfg.n_trunc if f.meta.get("dsl") else 4096))
        row.update(gap=g.gap_observed, gapbar=g.gapbar_observed, Gbar=g.Gbar_observed, gap_n_max=g.n_max)
    except ValueError as exc:
        row.update(gap="", gap_note=str(exc))
    n = min(12, (f.degree + 1) if f.degree is not None else 12)
    if f.exact is not None:
        coeffs = [f.exact(k) for k in range(n)]
    else:
        coeffs = [float(np.exp(v)) for v in f.log_coeffs(np.arange(n))]
    row["coefficients"] = [str(c) if isinstance(c, (int, Fraction)) else c for c in coeffs]
    return [row], None, 0


def cmd_stats(cfg: RunConfig):
    fam = load_family(cfg)
    rows = []
    for t in _grid(cfg, fam):
        row = {"t": float(t)}
        try:
            st = fam.stats(t)
            row.update(log_f=st.log_f.log_magnitude, mean=st.mean, var=st.var, sigma_over_m=st.ratio, L_f=st.L_f,
                       quotient=st.second_moment_quotient, flag="")
            if cfg.precision == "high" and t > 0:
                try:
                    m, v = fam.stats_hp(t)
                    row.update(mean=m, var=v)
                except EvaluationError as exc:
                    row.update(flag=f"standard precision: {exc}")
        except (EvaluationError, ValueError, ArithmeticError) as exc:
            row.update(log_f="", mean="", var="", sigma_over_m="", L_f="", quotient="", flag=f"error: {exc}")
        rows.append(row)
    return rows, None, 0


def cmd_clan(cfg: RunConfig):
    fam = load_family(cfg)
    lg = np.log(_grid(cfg, fam)) if (cfg.grid or cfg.t) else None
    kw = {"threshold": cfg.tol} if cfg.tol else {}
    v = diagnostics.clan_diagnose(fam, lg, **kw)
    rows = [dict(r, verdict=v.verdict) for r in v.rows()]
    extra = {"verdict": v.verdict, "limit_estimate": v.limit_estimate, "conditional": v.conditional,
             "trimmed": [str(x) for x in v.trimmed], "notes": list(v.notes)}
    return rows, extra, 0


def cmd_order(cfg: RunConfig):
    fam = load_family(cfg)
    lg = np.log(_grid(cfg, fam)) if (cfg.grid or cfg.t) else None
    o = diagnostics.order_estimate(fam, lg)
    return list(o.rows()), {"summary": o.summary}, 0


def cmd_verify(cfg: RunConfig):
    checks = None if cfg.suite in ("default", "all") else [c for c in cfg.suite.split(",") if c]
    if checks:
        bad = [c for c in checks if c not in verify.CHECKS]
        if bad:
            raise UsageError(f"unknown check(s) {bad}; known: {', '.join(verify.CHECKS)}")
    corpus = None
    if cfg.f:
        full = verify.default_corpus()
        if cfg.f in full:
            corpus = {cfg.f: full[cfg.f]}
        else:
            fam = load_family(cfg)
            corpus = {cfg.f: lambda: fam}
    reports = verify.run_suite(corpus, checks)
    rows = [r.as_dict(decimal_strings=cfg.precision == "high") for r in reports]
    failed = sum(1 for r in reports if not r.passed)
    return rows, {"passed": failed == 0, "failed": failed, "total": len(reports)}, 1 if failed else 0


def cmd_estimate(cfg: RunConfig):
    fam = load_family(cfg)
    rows = []
    for n in _ints(cfg.n, (10, 100)):
        if n <= 0:
            raise UsageError("--n must be positive")
        e = asymptotics.hayman_estimate(fam, n)
        rows.append({"n": n, "t_n": e.t_n, "log_estimate": e.log_estimate, "log_exact": e.log_exact,
                     "ratio": e.ratio, "mean_residual": e.mean_residual, "caveat": e.caveat})
    return rows, None, 0


def cmd_sample(cfg: RunConfig):
    fam = load_family(cfg)
    ts = _grid(cfg, fam) if (cfg.grid or cfg.t) else None
    if ts is None:
        raise UsageError("sample needs --t or --grid")
    if cfg.eps is not None:
        rep = sampler.concentration_test(fam, ts, cfg.eps, cfg.count, cfg.seed)
        rows = [dict(asdict(r), consistent=r.consistent) for r in rep.rows]
        return rows, {"eps": cfg.eps, "algorithm": "PCG64", "consistent": rep.consistent}, 0
    if ts.size != 1:
        raise UsageError("sample takes a single t (use --eps for a concentration test over a grid)")
    b = sampler.sample(fam, float(ts[0]), cfg.count, cfg.seed)
    rows = [{"index": i, "x": int(x)} for i, x in enumerate(b.samples)]
    extra = {"t": b.t, "count": b.count, "algorithm": b.algorithm, "truncation_tail_mass": b.truncation_tail_mass,
             "empirical_mean": float(np.mean(b.samples)) if b.count else math.nan}
    return rows, extra, 0


def cmd_clt(cfg: RunConfig):
    fam = load_family(cfg)
    rows = []
    for t in _grid(cfg, fam):
        try:
            d = asymptotics.local_clt_deviation(fam, float(t))
        except EvaluationError as exc:
            rows.append({"t": float(t), "mean": "", "sigma": "", "deviation": "", "argmax": "", "outside_bound": "",
                         "stride": "", "flag": f"error: {exc}"})
            continue
        rows.append({"t": d.t, "mean": d.mean, "sigma": d.sigma, "deviation": d.deviation, "argmax": d.argmax,
                     "outside_bound": d.outside_bound, "stride": d.stride, "flag": ""})
    return rows, None, 0


COMMANDS = {
    "describe": cmd_describe,
    "stats": cmd_stats,
    "clan": cmd_clan,
    "order": cmd_order,
    "verify": cmd_verify,
    "estimate": cmd_estimate,
    "sample": cmd_sample,
    "clt": cmd_clt,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--f", help="DSL expression or built-in name")
    common.add_argument("--n-trunc", type=int, default=200, help="series truncation for DSL input")
    common.add_argument("--precision", choices=("standard", "high"), default="standard")
    common.add_argument("--grid", help="geo:R:steps | list:t1,t2,... | lin:a:b:steps")
    common.add_argument("--t", help="comma-separated t values (shorthand for list:...)")
    common.add_argument("--tol", type=float, help="clan threshold for the final sigma/m (default 0.05)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--out", help="output path (default stdout)")
    p = argparse.ArgumentParser(prog="khinchin", description="Khinchin families of power series.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "estimate":
            sp.add_argument("--n", help="comma-separated coefficient indices")
        if name == "sample":
            sp.add_argument("--count", type=int, default=10_000)
            sp.add_argument("--eps", type=float, help="run a concentration test over the grid")
        if name == "verify":
            sp.add_argument("--suite", default="default", help="'default' or comma-separated check names")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        cfg = RunConfig(**{k: v for k, v in vars(ns).items() if v is not None or k in ("f", "grid", "t")})
        rows, extra, code = COMMANDS[cfg.command](cfg)
    except (UsageError, DslError, CompileError, NotInClassK, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except EvaluationError as exc:
        # a computation that cannot be carried out is a failure, not a usage error
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = render(cfg, rows, extra)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
