"""Assembly of the Brun constant upper bound from per-cell contributions.

The bound is

    B <= B(2, 4e18) + sum_i 2 (c1_i / V(z_i) + c_pi(m_i) r(z_i)^2 c2_i)
           + 32 Pi_2 / log m_k + 8 / sqrt(m_k) - 2 pi_2(m_1) / m_1

with every term an :class:`~brungrh.rint.Interval`; the upper endpoint of
the total is the rigorous bound.
"""

from __future__ import annotations

import contextvars
import hashlib
import json
from bisect import bisect_left, bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import rint
from .bounds import (
    FOUR_E18,
    Branch,
    LogPoint,
    c1,
    c2,
    c_pi,
    check_z,
    r_upper,
    v_lower,
)
from .errors import BrunError, DataError, DomainError, with_context
from .rint import Interval, const_twin_prime, sqrt
from .sieve import QTable, VTable

INITIAL_BOUND = "1.840518"
UNCONDITIONAL_BOUND = "2.28851"
RESULTS_FORMAT = "brungrh-results/1"


def initial_bound() -> Interval:
    """B(2, 4e18) <= 1.840518, widened one further unit outward."""
    iv = Interval(INITIAL_BOUND)
    q = rint.get_precision()
    return Interval._raw(iv.lo_raw, rint._nudge(iv.hi_raw, q, down=False))


# -- grid ----------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Grid {4e18} U {10**e : e = start, start + step, ..., end}."""

    start: Fraction = Fraction(19)
    end: Fraction = Fraction(2000)
    step: Fraction = Fraction(1, 5)
    include_4e18: bool = True

    def __post_init__(self):
        for name in ("start", "end", "step"):
            object.__setattr__(self, name, Fraction(str(getattr(self, name))))
        if self.step <= 0:
            raise DomainError("grid step must be positive")
        n = (self.end - self.start) / self.step
        if n.denominator != 1 or n < 0:
            raise DomainError("grid end is not reached by whole steps from start")
        if self.include_4e18 and self.start <= Fraction(18602, 1000):
            raise DomainError("grid start must lie above 4e18")

    def exponents(self) -> list[Fraction]:
        n = int((self.end - self.start) / self.step)
        return [self.start + k * self.step for k in range(n + 1)]

    def points(self) -> list[LogPoint]:
        pts = [LogPoint.from_exponent(e) for e in self.exponents()]
        if self.include_4e18:
            pts.insert(0, FOUR_E18())
        return pts

    def __len__(self) -> int:
        return len(self.exponents()) + (1 if self.include_4e18 else 0)


# -- external data -----------------------------------------------------------


@dataclass(frozen=True)
class ExternalCounts:
    pi2_at_4e18: int

    def __post_init__(self):
        if self.pi2_at_4e18 <= 0:
            raise DataError("twin prime count must be positive")


def load_external_counts(path: str | Path | None = None) -> ExternalCounts:
    """Read the vendored pi_2(4e18) record and verify its checksum line."""
    if path is None:
        text = resources.files("brungrh").joinpath("data/pi2_4e18.txt").read_text()
        where = "packaged pi2_4e18.txt"
    else:
        path = Path(path)
        if not path.exists():
            raise DataError(f"external count file {path} is missing")
        text = path.read_text()
        where = str(path)
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if len(lines) != 2 or not lines[1].startswith("sha256 "):
        raise DataError(f"{where}: expected a count line and a sha256 line")
    count, digest = lines[0], lines[1].split()[1]
    if hashlib.sha256(count.encode()).hexdigest() != digest:
        raise DataError(f"{where}: checksum mismatch")
    if not count.isdigit():
        raise DataError(f"{where}: count is not a decimal integer")
    return ExternalCounts(int(count))


# -- per-cell contribution -----------------------------------------------------


@dataclass
class IntervalReport:
    mi: LogPoint
    mi1: LogPoint
    z: int
    contribution: Interval
    v_branch: Branch
    r_branch: Branch


@dataclass
class CellTerms:
    """z-independent factors of one grid cell."""

    c1: Interval
    c2: Interval
    c_pi: Interval


def cell_terms(mi: LogPoint, mi1: LogPoint) -> CellTerms:
    return CellTerms(c1(mi, mi1), c2(mi, mi1), c_pi(mi))


def interval_contribution(mi: LogPoint, mi1: LogPoint, z: int, vt: VTable,
                          qt: QTable, terms: CellTerms | None = None) -> IntervalReport:
    """2 (c1 / V(z) + c_pi(m_i) r(z)^2 c2) with V at its lower and r at its upper bound."""
    if z < 3:
        raise DomainError(f"z must be >= 3, got {z}")
    check_z(mi, z)
    t = terms or cell_terms(mi, mi1)
    zi = Interval(z)
    v, vb = v_lower(zi, vt)
    r, rb = r_upper(zi, qt)
    contrib = 2 * (t.c1 / v.lo_interval() + t.c_pi * r.hi_interval().square() * t.c2)
    return IntervalReport(mi, mi1, z, contrib, vb, rb)


def tail_bound(mk: LogPoint) -> Interval:
    """32 Pi_2 / log m_k + 8 / sqrt(m_k).

    Some statements of this estimate print 16 Pi_2; the partial-summation
    argument yields 32 Pi_2, which is also the conservative choice.
    """
    if not mk.m.certainly_ge(4 * 10**18):
        raise DomainError("tail_bound needs m_k >= 4e18")
    return 32 * const_twin_prime() / mk.log_m + 8 / sqrt(mk.m)


def pi2_term(ext: ExternalCounts) -> Interval:
    return Interval(Fraction(2 * ext.pi2_at_4e18, 4 * 10**18))


# -- assembly ------------------------------------------------------------------


@dataclass
class BoundResult:
    initial: Interval
    contributions: list[IntervalReport]
    tail: Interval
    pi2_m1_term: Interval
    total: Interval
    meta: dict = field(default_factory=dict)

    def contribution_sum(self, i: int = 0, j: int | None = None) -> Interval:
        acc = Interval(0)
        for rep in self.contributions[i:j]:
            acc = acc + rep.contribution
        return acc


def total_bound(grid: GridSpec | list[LogPoint], zs: list[int], vt: VTable, qt: QTable,
                ext: ExternalCounts, subtract_pi2: bool = True,
                thread_count: int = 1) -> BoundResult:
    points = grid.points() if isinstance(grid, GridSpec) else list(grid)
    if points[0].label != "4e18":
        raise DomainError("the grid must start at 4e18")
    if len(zs) != len(points) - 1:
        raise DomainError(f"need {len(points) - 1} z values, got {len(zs)}")

    ctx = contextvars.copy_context()

    def one(i):
        try:
            return interval_contribution(points[i], points[i + 1], zs[i], vt, qt)
        except BrunError as exc:
            cell = f"cell {i} [{points[i].label}, {points[i + 1].label}]"
            raise with_context(exc, cell) from exc

    # worker threads must see the caller's working precision
    with ThreadPoolExecutor(max_workers=thread_count) as pool:
        reps = list(pool.map(lambda i: ctx.copy().run(one, i), range(len(zs))))
    return assemble(reps, points[-1], ext, subtract_pi2)


def assemble(reps: list[IntervalReport], mk: LogPoint, ext: ExternalCounts,
             subtract_pi2: bool = True) -> BoundResult:
    init = initial_bound()
    tail = tail_bound(mk)
    p2 = pi2_term(ext) if subtract_pi2 else Interval(0)
    acc = init
    for rep in reps:
        acc = acc + rep.contribution
    total = acc + tail - p2
    return BoundResult(init, reps, tail, p2, total)


def _cover(result: BoundResult, a: LogPoint, b: LogPoint) -> tuple[int, int]:
    reps = result.contributions
    lefts = [r.mi.sort_key() for r in reps]
    ka, kb = a.sort_key(), b.sort_key()
    first, last = lefts[0], reps[-1].mi1.sort_key()
    if not (first <= ka < kb <= last):
        raise DomainError(f"query [{a.label}, {b.label}] outside the grid")
    i = bisect_right(lefts, ka) - 1
    rights = [r.mi1.sort_key() for r in reps]
    j = bisect_left(rights, kb)
    return i, j + 1


def query_range(a: LogPoint, b: LogPoint, result: BoundResult) -> Interval:
    """Sum of the contributions over the smallest run of cells covering [a, b]."""
    i, j = _cover(result, a, b)
    return result.contribution_sum(i, j)


def covering_cells(a: LogPoint, b: LogPoint, result: BoundResult) -> list[IntervalReport]:
    i, j = _cover(result, a, b)
    return result.contributions[i:j]


# -- results file --------------------------------------------------------------


def _iv(iv: Interval) -> list[str]:
    return list(iv.to_hex())


def write_results(result: BoundResult, path: str | Path, header: dict | None = None) -> None:
    """One JSON record per line: header, one per grid cell, then the summary."""
    path = Path(path)
    recs = [{"format": RESULTS_FORMAT, "precision": rint.get_precision(),
             "config": header or {}}]
    for rep in result.contributions:
        recs.append({"a": rep.mi.label, "b": rep.mi1.label, "z": str(rep.z),
                     "contribution": _iv(rep.contribution),
                     "v_branch": rep.v_branch.value, "r_branch": rep.r_branch.value})
    recs.append({"summary": {"initial": _iv(result.initial), "tail": _iv(result.tail),
                             "pi2_m1_term": _iv(result.pi2_m1_term),
                             "total": _iv(result.total)}})
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in recs)
    path.write_text(text)


def read_results(path: str | Path) -> BoundResult:
    path = Path(path)
    if not path.exists():
        raise DataError(f"results file {path} is missing")
    lines = path.read_text().splitlines()
    try:
        recs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise DataError(f"results file {path} is not valid JSON lines") from exc
    if not recs or recs[0].get("format") != RESULTS_FORMAT or "summary" not in recs[-1]:
        raise DataError(f"results file {path} has the wrong format")
    points: dict[str, LogPoint] = {}

    def pt(label):
        if label not in points:
            points[label] = LogPoint.parse(label)
        return points[label]

    with rint.precision(recs[0]["precision"]):
        reps = [
            IntervalReport(pt(r["a"]), pt(r["b"]), int(r["z"]),
                           Interval.from_hex(*r["contribution"]),
                           Branch(r["v_branch"]), Branch(r["r_branch"]))
            for r in recs[1:-1]
        ]
    s = recs[-1]["summary"]
    return BoundResult(Interval.from_hex(*s["initial"]), reps, Interval.from_hex(*s["tail"]),
                       Interval.from_hex(*s["pi2_m1_term"]), Interval.from_hex(*s["total"]),
                       meta=recs[0])
