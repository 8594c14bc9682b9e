"""Choice of the sieve level z for each grid cell.

The search runs on a double-precision model of the cell contribution that
is evaluated entirely in terms of ``log m`` and ``log z`` (so ``m = 10**2000``
and ``z ~ 10**500`` never overflow).  The model is only a guide: the z values
it returns are re-evaluated rigorously by :mod:`brungrh.brun`, and any
feasible z gives a valid bound.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .bounds import C_D, C_LI, C_R_QUART, C_R_SQRT, LogPoint, z_ceiling
from .errors import BrunError, ConstraintError, with_context
from .rint import LI2_LO, TWIN_PRIME_LO
from .sieve import QTable, VTable

log = logging.getLogger(__name__)

_PI = math.pi
_LI2 = float(LI2_LO)
_PI2 = float(TWIN_PRIME_LO)
_D = float(C_D)
_R1, _R2, _LI = float(C_R_SQRT), float(C_R_QUART), float(C_LI)

COARSE_POINTS = 32
GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class SearchWindow:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 3 or self.lo > self.hi:
            raise ConstraintError(f"empty or infeasible search window [{self.lo}, {self.hi}]")


@dataclass
class CellModel:
    """Double-precision factors of one cell: c1, log c2 and log c_pi."""

    c1: float
    log_c2: float
    log_cpi: float
    zmax: int

    @classmethod
    def build(cls, mi: LogPoint, mi1: LogPoint) -> CellModel:
        L0, L1 = mi.log_float(), mi1.log_float()
        dL = (mi1.log_m - mi.log_m).mid()
        up0 = (1 + 1 / L0 + 2 / L0**2 + _LI / L0**3) / L0 + L0 * math.exp(-L0 / 2) / (8 * _PI)
        low1 = (1 + 1 / L1 + 2 / L1**2) / L1 - L1 * math.exp(-L1 / 2) / (8 * _PI) \
            - 2 * _LI2 * math.exp(-L1)
        c1 = math.log1p(dL / L0) - low1 + up0
        inner = (2 * L0 + 4) - (2 * L1 + 4) * math.exp(-dL / 2)
        log_c2 = -L0 / 2 + math.log(inner) if inner > 0 else -math.inf
        cpi = 3 / (8 * _PI) + (6 + 1 / _PI) / (4 * L0) + 6 / L0**2 \
            + _LI2 * math.exp(-L0 / 2) / L0
        return cls(c1, log_c2, math.log(cpi), z_ceiling(mi))


def _v_float(z: int, vt: VTable) -> float:
    if z <= vt.checkpoint_limit:
        return vt.value_float(z)
    lz, lL2 = math.log(z), math.log(vt.checkpoint_limit)
    vl2 = vt.value_float(vt.checkpoint_limit)
    return vl2 + (lz - lL2) / (2 * _PI2) + _D * (3 * math.exp(-lz / 2) - 9 / math.sqrt(vt.checkpoint_limit))


def _log_r(z: int, qt: QTable) -> float:
    if z <= qt.limit:
        return math.log(qt(z))
    lz = math.log(z)
    return lz + math.log(4 / _PI**2 + _R1 * math.exp(-lz / 2) + _R2 * math.exp(-0.75 * lz))


def model_value(cell: CellModel, z: int, vt: VTable, qt: QTable) -> float:
    if not 3 <= z <= cell.zmax:
        raise ConstraintError(f"z = {z} infeasible (must lie in [3, {cell.zmax}])")
    err = math.exp(cell.log_cpi + 2 * _log_r(z, qt) + cell.log_c2) if cell.log_c2 > -math.inf else 0.0
    return 2 * (cell.c1 / _v_float(z, vt) + err)


def objective(mi: LogPoint, mi1: LogPoint, z: int, vt: VTable, qt: QTable) -> float:
    """Point estimate of the cell contribution at z (not rigorous)."""
    return model_value(CellModel.build(mi, mi1), z, vt, qt)


def _z_of(t: float) -> int:
    if t < 700:
        return int(round(math.exp(t)))
    # beyond double range: exp(t) = 2**k * exp(t - k log 2)
    k = int(t / math.log(2)) - 60
    return int(round(math.exp(t - k * math.log(2)))) << k


class _Search:
    def __init__(self, cell: CellModel, window: SearchWindow, vt: VTable, qt: QTable):
        self.cell, self.window, self.vt, self.qt = cell, window, vt, qt
        self.cache: dict[int, float] = {}

    def snap(self, z: int) -> int:
        w, vt = self.window, self.vt
        z = min(max(z, w.lo), w.hi)
        # V is constant between checkpoints and r only grows, so the left end is best
        if vt.dense_limit <= z <= vt.checkpoint_limit:
            k = vt.dense_limit + (z - vt.dense_limit) // vt.checkpoint_step * vt.checkpoint_step
            if k >= w.lo:
                z = k
        return z

    def f(self, z: int) -> float:
        v = self.cache.get(z)
        if v is None:
            v = self.cache[z] = model_value(self.cell, z, self.vt, self.qt)
        return v

    def ft(self, t: float) -> tuple[float, int]:
        z = self.snap(_z_of(t))
        return self.f(z), z

    def best(self, zs) -> int:
        return min(zs, key=lambda z: (self.f(z), z))

    def run(self) -> int:
        w = self.window
        if w.hi - w.lo <= 2 * COARSE_POINTS:
            return self.best(range(w.lo, w.hi + 1))
        t0, t1 = math.log(w.lo), math.log(w.hi)
        ts = [t0 + (t1 - t0) * k / (COARSE_POINTS - 1) for k in range(COARSE_POINTS)]
        vals = [self.ft(t) for t in ts]
        k = min(range(len(ts)), key=lambda i: (vals[i][0], vals[i][1]))
        a, b = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
        c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        fc, fd = self.ft(c), self.ft(d)
        for _ in range(200):
            if _z_of(b) - _z_of(a) <= 2 or b - a <= 1e-13 * max(1.0, abs(b)):
                break
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = self.ft(c)
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = self.ft(d)
        cands = {vals[k][1], fc[1], fd[1], self.snap(_z_of(a)), self.snap(_z_of(b))}
        z = self.best(cands)
        return self.best({n for n in (z - 1, z, z + 1) if w.lo <= n <= w.hi})


def search_z(mi: LogPoint, mi1: LogPoint, window: SearchWindow, vt: VTable, qt: QTable,
             cell: CellModel | None = None, stats: dict | None = None) -> int:
    """Best z found in ``window`` by a log-spaced scan and golden-section refinement."""
    cell = cell or CellModel.build(mi, mi1)
    if window.hi > cell.zmax:
        raise ConstraintError(f"window upper end {window.hi} exceeds z < m^(1/4) ({cell.zmax})")
    s = _Search(cell, window, vt, qt)
    z = s.run()
    if stats is not None:
        stats["evaluations"] = len(s.cache)
        stats["value"] = s.f(z)
    return z


def _optimize_cell(mi: LogPoint, mi1: LogPoint, prev: int, warm_start: bool, vt: VTable,
                   qt: QTable) -> tuple[int, int, dict, bool]:
    cell = CellModel.build(mi, mi1)
    lo = prev if warm_start and prev <= cell.zmax else 3
    stats: dict = {}
    z = search_z(mi, mi1, SearchWindow(lo, cell.zmax), vt, qt, cell, stats)
    fallback = False
    if warm_start and lo > 3 and z <= lo + 1:
        # optimum pinned at the warm-start edge: retry on the full window
        full: dict = {}
        z2 = search_z(mi, mi1, SearchWindow(3, cell.zmax), vt, qt, cell, full)
        if full["value"] < stats["value"]:
            z, stats, fallback = z2, full, True
    stats["zmax"] = cell.zmax
    return z, lo, stats, fallback


def optimize_all(points: list[LogPoint], vt: VTable, qt: QTable, warm_start: bool = True,
                 trace_path: str | Path | None = None) -> list[int]:
    """One z per cell, with the window for cell i+1 starting at z_i."""
    zs: list[int] = []
    trace = open(trace_path, "w") if trace_path else None
    try:
        prev = 3
        for i in range(len(points) - 1):
            try:
                z, lo, stats, fallback = _optimize_cell(points[i], points[i + 1], prev,
                                                        warm_start, vt, qt)
            except BrunError as exc:
                cell = f"cell {i} [{points[i].label}, {points[i + 1].label}]"
                raise with_context(exc, cell) from exc
            zs.append(z)
            prev = z
            if trace:
                trace.write(json.dumps({"cell": i, "a": points[i].label, "b": points[i + 1].label,
                                        "window": [str(lo), str(stats["zmax"])],
                                        "evaluations": stats["evaluations"],
                                        "fallback": fallback, "z": str(z)}) + "\n")
    finally:
        if trace:
            trace.close()
    return zs
