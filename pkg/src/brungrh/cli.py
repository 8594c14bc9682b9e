"""Command line: ``brungrh {tables,solve,report,query}``.

Exit codes: 0 success, 2 configuration or usage error, 3 data/table error,
4 constraint violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from . import rint
from .bounds import LogPoint
from .brun import (
    GridSpec,
    covering_cells,
    load_external_counts,
    query_range,
    read_results,
    total_bound,
    write_results,
)
from .errors import ConfigError, ConstraintError, DataError, DomainError, OutOfRange
from .optimize import optimize_all
from .sieve import (
    PROP3_THRESHOLD,
    SieveConfig,
    build_q_table,
    build_v_table,
    load_q_table,
    load_v_table,
    save_q_table,
    save_v_table,
)

log = logging.getLogger("brungrh")

EXIT_CONFIG, EXIT_DATA, EXIT_CONSTRAINT = 2, 3, 4

REFERENCE_BLOCKS = [("4e18", "20"), ("20", "25"), ("25", "30"), ("30", "40"),
                ("40", "50"), ("50", "100"), ("100", "2000")]


@dataclass(frozen=True)
class RunConfig:
    L1: int = 10**8
    L2: int = 10**10
    L3: int = 10**7
    grid_start_exponent: str = "19.0"
    grid_end_exponent: str = "2000.0"
    grid_step: str = "0.2"
    include_4e18_node: bool = True
    mantissa_bits: int = 128
    thread_count: int = 1
    table_dir: str = "tables/paper"
    results_path: str = "results/paper.jsonl"

    def __post_init__(self):
        if Fraction(self.grid_step) <= 0:
            raise ConfigError("grid_step must be positive")
        if self.L3 < PROP3_THRESHOLD:
            raise ConfigError(f"L3 must be >= {PROP3_THRESHOLD}")
        rint.Precision(self.mantissa_bits)
        self.grid()
        self.sieve()

    def grid(self) -> GridSpec:
        try:
            return GridSpec(Fraction(self.grid_start_exponent), Fraction(self.grid_end_exponent),
                            Fraction(self.grid_step), self.include_4e18_node)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def sieve(self) -> SieveConfig:
        return SieveConfig(L1=self.L1, L2=self.L2, L3=self.L3, thread_count=self.thread_count)


PRESETS = {
    "paper": RunConfig(),
    "desk": RunConfig(L1=10**7, L2=10**8, L3=PROP3_THRESHOLD,
                      table_dir="tables/desk", results_path="results/desk.jsonl"),
}


def resolve_config(preset: str = "paper", config_file: str | None = None,
                   **overrides) -> RunConfig:
    """Preset, then values from the JSON config file, then flag overrides."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r} (choose from {sorted(PRESETS)})")
    values = asdict(PRESETS[preset])
    if config_file:
        p = Path(config_file)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        unknown = set(data) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    for k in ("grid_start_exponent", "grid_end_exponent", "grid_step"):
        values[k] = str(values[k])
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _table_paths(cfg: RunConfig) -> tuple[Path, Path]:
    d = Path(cfg.table_dir)
    return d / "vtable.txt", d / "qtable.bin"


def load_tables(cfg: RunConfig):
    vpath, qpath = _table_paths(cfg)
    missing = [str(p) for p in (vpath, qpath) if not p.exists()]
    if missing:
        raise DataError(f"missing table files {missing}; run `brungrh tables` with the same "
                        f"preset/config first")
    sc = cfg.sieve()
    return load_v_table(vpath, sc), load_q_table(qpath, sc)


# -- commands ------------------------------------------------------------------


def cmd_tables(cfg: RunConfig, force: bool = False) -> tuple[Path, Path]:
    vpath, qpath = _table_paths(cfg)
    vpath.parent.mkdir(parents=True, exist_ok=True)
    sc = cfg.sieve()
    if not force and vpath.exists() and qpath.exists():
        # raises DataError naming the file if either is corrupt
        load_v_table(vpath, sc)
        load_q_table(qpath, sc)
        print(f"tables in {vpath.parent} are up to date")
        return vpath, qpath
    t0 = time.time()
    if force or not qpath.exists():
        save_q_table(build_q_table(sc), qpath, sc)
    if force or not vpath.exists():
        vt = build_v_table(sc, progress_path=vpath.with_name("vtable.progress.npz"))
        save_v_table(vt, vpath, sc)
    print(f"built tables in {vpath.parent} ({time.time() - t0:.1f}s)")
    return vpath, qpath


def cmd_solve(cfg: RunConfig, out: str | None = None):
    vt, qt = load_tables(cfg)
    ext = load_external_counts()
    results = Path(out or cfg.results_path)
    results.parent.mkdir(parents=True, exist_ok=True)
    points = cfg.grid().points()
    t0 = time.time()
    zs = optimize_all(points, vt, qt, trace_path=results.with_suffix(".trace.jsonl"))
    log.info("optimized %d cells in %.1fs", len(zs), time.time() - t0)
    res = total_bound(points, zs, vt, qt, ext, thread_count=cfg.thread_count)
    header = asdict(cfg)
    write_results(res, results, header)
    summary = render_summary(res)
    results.with_suffix(".summary.txt").write_text(summary)
    print(summary, end="")
    print(f"results written to {results}")
    return res


def _dec(iv) -> str:
    return f"[{float(iv.lo):.10f}, {float(iv.hi):.10f}]"


def render_summary(res) -> str:
    lines = [
        f"B(2, 4e18) bound     {_dec(res.initial)}",
        f"sum of {len(res.contributions)} cells  {_dec(res.contribution_sum())}",
        f"tail                 {_dec(res.tail)}",
        f"2 pi_2(m_1)/m_1      {_dec(res.pi2_m1_term)}",
        f"total                {_dec(res.total)}",
        f"B < {round_up(res.total.hi_fraction(), 6)}",
    ]
    return "\n".join(lines) + "\n"


def round_up(x: Fraction, sig: int = 4) -> str:
    """Decimal string of x rounded toward +inf to ``sig`` significant figures."""
    x = Fraction(x)
    if x == 0:
        return "0"
    k = math.floor(math.log10(abs(x)))
    if Fraction(10) ** k > abs(x):
        k -= 1
    elif Fraction(10) ** (k + 1) <= abs(x):
        k += 1
    scale = Fraction(10) ** (sig - 1 - k)
    n = math.ceil(x * scale)
    digits = sig - 1 - k
    if digits <= 0:
        return str(n * 10 ** (-digits))
    s = f"{abs(n):0{digits + 1}d}"
    return ("-" if n < 0 else "") + s[:-digits] + "." + s[-digits:]


def _fmt_z(z: int) -> str:
    if z < 10**6:
        return str(z)
    s = str(z)
    return f"{s[0]}.{s[1:3]}e{len(s) - 1}"


def report_rows(res, blocks) -> list[dict]:
    grid_labels = {r.mi.label for r in res.contributions} | {res.contributions[-1].mi1.label}
    rows = []
    for a, b in blocks:
        pa, pb = LogPoint.parse(a), LogPoint.parse(b)
        if pa.label not in grid_labels or pb.label not in grid_labels:
            raise DomainError(f"block [{a}, {b}] does not start and end on grid points")
        cells = covering_cells(pa, pb, res)
        s = query_range(pa, pb, res)
        zs = [c.z for c in cells]
        rows.append({"a": pa.label, "b": pb.label, "cells": len(cells),
                     "sum_hi": round_up(s.hi_fraction(), 4), "sum": list(s.to_hex()),
                     "z_min": str(min(zs)), "z_max": str(max(zs))})
    return rows


def render_report(rows) -> str:
    out = [f"{'interval':<24}{'B(m_i,m_j) <':>14}  range of z_i"]
    for r in rows:
        a = "4e18" if r["a"] == "4e18" else f"1e{r['a'].removesuffix('.0')}"
        b = f"1e{r['b'].removesuffix('.0')}"
        out.append(f"{'[' + a + ', ' + b + ']':<24}{r['sum_hi']:>14}  "
                   f"[{_fmt_z(int(r['z_min']))}, {_fmt_z(int(r['z_max']))}]")
    return "\n".join(out) + "\n"


def cmd_report(results_path, blocks=None, out: str | None = None) -> str:
    res = read_results(results_path)
    rows = report_rows(res, blocks or REFERENCE_BLOCKS)
    text = render_report(rows)
    dest = Path(out) if out else Path(results_path).with_suffix(".report.json")
    dest.write_text(json.dumps(rows, indent=1, sort_keys=True) + "\n")
    print(text, end="")
    return text


def cmd_query(results_path, a: str, b: str):
    res = read_results(results_path)
    s = query_range(LogPoint.parse(a), LogPoint.parse(b), res)
    lo, hi = s.to_hex()
    print(f"B({a}, {b}) <= {round_up(s.hi_fraction(), 6)}   enclosure {_dec(s)}   hex [{lo}, {hi}]")
    return s


# -- argument parsing ------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--preset", default="paper", help="paper (default) or desk")
    common.add_argument("--table-dir")
    common.add_argument("--threads", type=int)
    common.add_argument("--mantissa-bits", type=int)
    common.add_argument("--out", help="output path (results file or report JSON)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="brungrh", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("tables", parents=[common], help="build and persist the V and Q tables")
    t.add_argument("--force", action="store_true", help="rebuild even if valid tables exist")
    sub.add_parser("solve", parents=[common], help="optimize z per cell and assemble the bound")
    r = sub.add_parser("report", parents=[common], help="block sums from a results file")
    r.add_argument("--results", help="results file (default: the config's results_path)")
    r.add_argument("--block", action="append", metavar="A:B",
                   help="block endpoints, e.g. 25:30 or 4e18:20 (repeatable)")
    q = sub.add_parser("query", parents=[common], help="bound on B(10^a, 10^b)")
    q.add_argument("a", help="decimal exponent or the literal 4e18")
    q.add_argument("b", help="decimal exponent")
    q.add_argument("--results")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.preset, args.config, table_dir=args.table_dir,
                             thread_count=args.threads, mantissa_bits=args.mantissa_bits)
        rint.set_precision(cfg.mantissa_bits)
        if args.command == "tables":
            cmd_tables(cfg, force=args.force)
        elif args.command == "solve":
            cmd_solve(cfg, out=args.out)
        elif args.command == "report":
            blocks = None
            if args.block:
                blocks = [tuple(b.split(":", 1)) for b in args.block]
                if any(len(b) != 2 for b in blocks):
                    raise ConfigError("--block takes A:B")
            cmd_report(args.results or cfg.results_path, blocks, out=args.out)
        elif args.command == "query":
            cmd_query(args.results or cfg.results_path, args.a, args.b)
    except (ConfigError, DomainError) as exc:
        print(f"brungrh: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OutOfRange) as exc:
        print(f"brungrh: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConstraintError as exc:
        print(f"brungrh: constraint violated: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    return 0


if __name__ == "__main__":
    sys.exit(main())
