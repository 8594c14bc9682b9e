"""Exact sieve sums over odd squarefree integers.

Two sums are tabulated:

* ``V(z) = sum_{d <= z, d odd squarefree} 1 / prod_{p | d} (p - 2)``
* ``Q(z) = #{d <= z : d odd squarefree}``

Both come from one segmented sieve over odd integers.  Each segment marks
multiples of every odd prime ``p <= sqrt(segment end)``, accumulating the
radical and ``prod (p - 2)``; the cofactor left after dividing out the
radical is a single prime above the sieving bound (or 1).

V is accumulated in exact fixed point: each term ``1/g`` contributes
``floor(2**62 / g)`` units of ``2**-62``, so a sum of ``n`` terms with integer
numerator ``S`` satisfies ``S / 2**62 <= V < (S + n) / 2**62``.  Integer
accumulation makes the table independent of segment size, thread count and
reduction order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DomainError, OutOfRange, ResourceError
from .rint import Interval, mpf_from_hex, mpf_to_hex

log = logging.getLogger(__name__)

FRAC_BITS = 62
FRAC_ONE = 1 << FRAC_BITS
_SPLIT = 31
_LOW_MASK = (1 << _SPLIT) - 1

PROP3_THRESHOLD = 2768896
ORACLE_LIMIT = 10**6
V_FORMAT = "brungrh-vtable/1"
Q_FORMAT = "brungrh-qtable/1"


@dataclass(frozen=True)
class SieveConfig:
    L1: int = 10**8
    L2: int = 10**10
    L3: int = 10**7
    segment_size: int = 1 << 22
    thread_count: int = 1
    checkpoint_step: int = 10**4
    dense_stride: int = 1024

    def __post_init__(self):
        for name in ("L1", "L2", "L3", "segment_size", "thread_count",
                     "checkpoint_step", "dense_stride"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.L3 < PROP3_THRESHOLD:
            raise ConfigError(f"L3 must be >= {PROP3_THRESHOLD}, got {self.L3}")
        if self.L1 > self.L2:
            raise ConfigError("L1 must not exceed L2")
        if (self.L2 - self.L1) % self.checkpoint_step:
            raise ConfigError("checkpoint_step must divide L2 - L1")
        if self.dense_stride % 2:
            raise ConfigError("dense_stride must be even")
        if self.segment_size % 2 or self.segment_size < 2:
            raise ConfigError("segment_size must be even")

    def echo(self) -> dict:
        d = asdict(self)
        # tables do not depend on how the work was split
        d.pop("segment_size")
        d.pop("thread_count")
        return d


# -- primes and the segment kernel -------------------------------------------


def odd_primes_upto(n: int) -> np.ndarray:
    """Odd primes ``<= n`` by a plain Eratosthenes sieve."""
    if n < 3:
        return np.zeros(0, dtype=np.int64)
    is_p = np.ones(n + 1, dtype=bool)
    is_p[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if is_p[p]:
            is_p[p * p :: p] = False
    ps = np.flatnonzero(is_p).astype(np.int64)
    return ps[1:]


def factor_odd_window(start: int, count: int, primes: np.ndarray):
    """Squarefree flags and ``prod_{p|d}(p-2)`` for ``d = start + 2i``.

    ``start`` must be odd and ``primes`` must contain every odd prime up to
    ``sqrt(start + 2*(count-1))``.  Returns ``(d, sqf, g)`` as int64/bool
    arrays; ``g`` is only meaningful where ``sqf`` is set.
    """
    if start % 2 == 0:
        raise DomainError("window start must be odd")
    try:
        d = start + 2 * np.arange(count, dtype=np.int64)
        g = np.ones(count, dtype=np.int64)
        rad = np.ones(count, dtype=np.int64)
        sqf = np.ones(count, dtype=bool)
    except MemoryError as exc:
        raise ResourceError(f"cannot allocate a sieve window of {count} entries") from exc
    end = start + 2 * (count - 1)
    primes = primes[primes * primes <= end]
    if primes.size:
        # index of the first odd multiple of p: start + 2i = 0 (mod p)
        inv2 = (primes + 1) // 2
        first = ((primes - start % primes) % primes) * inv2 % primes
        small = primes < count
        for p, i0 in zip(primes[small].tolist(), first[small].tolist()):
            g[i0::p] *= p - 2
            rad[i0::p] *= p
        big = ~small
        hit = big.copy()
        hit[big] = first[big] < count
        if hit.any():
            idx, ps = first[hit], primes[hit]
            np.multiply.at(g, idx, ps - 2)
            np.multiply.at(rad, idx, ps)
        sq = primes[primes * primes <= end]
        sq2 = sq * sq
        sfirst = ((sq2 - start % sq2) % sq2) * ((sq2 + 1) // 2) % sq2
        for p2, j0 in zip(sq2.tolist(), sfirst.tolist()):
            if j0 < count:
                sqf[j0::p2] = False
    cof = d // rad
    big_prime = sqf & (cof > 1)
    g[big_prime] *= cof[big_prime] - 2
    return d, sqf, g


def _fixed_terms(sqf: np.ndarray, g: np.ndarray) -> np.ndarray:
    t = np.zeros(g.shape, dtype=np.int64)
    np.floor_divide(FRAC_ONE, g, out=t, where=sqf)
    return t


def _split_cumsum(t: np.ndarray):
    """Cumulative sums of int64 terms < 2**63, as (high, low) int64 parts."""
    hi = np.cumsum(t >> _SPLIT)
    lo = np.cumsum(t & _LOW_MASK)
    return hi, lo


def _join(hi: int, lo: int) -> int:
    return (int(hi) << _SPLIT) + int(lo)


def window_v_sum(lo_excl: int, hi_incl: int, primes: np.ndarray) -> tuple[int, int]:
    """Fixed-point numerator and term count of V over odd d in (lo_excl, hi_incl]."""
    first = lo_excl + 1 if lo_excl % 2 == 0 else lo_excl + 2
    if first > hi_incl:
        return 0, 0
    count = (hi_incl - first) // 2 + 1
    _, sqf, g = factor_odd_window(first, count, primes)
    t = _fixed_terms(sqf, g)
    return _join((t >> _SPLIT).sum(), (t & _LOW_MASK).sum()), int(sqf.sum())


# -- V table -----------------------------------------------------------------


def _v_interval(s: int, n: int) -> Interval:
    return Interval(Fraction(s, FRAC_ONE), Fraction(s + n, FRAC_ONE))


@dataclass
class VTable:
    """Checkpointed enclosures of V.

    Below ``dense_limit`` entries sit every ``dense_stride`` integers and any
    integer argument is answered exactly by recounting the residual window.
    From ``dense_limit`` to ``checkpoint_limit`` entries sit every
    ``checkpoint_step``.
    """

    dense_limit: int
    checkpoint_step: int
    checkpoint_limit: int
    dense_stride: int
    keys: np.ndarray
    num_hi: np.ndarray
    num_lo: np.ndarray
    counts: np.ndarray
    _primes: np.ndarray = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self._primes is None:
            self._primes = odd_primes_upto(math.isqrt(self.checkpoint_limit) + 1)

    def __len__(self) -> int:
        return len(self.keys)

    def numerator(self, i: int) -> tuple[int, int]:
        return _join(self.num_hi[i], self.num_lo[i]), int(self.counts[i])

    def entry(self, z: int) -> Interval:
        """Stored enclosure at an exact checkpoint ``z``."""
        i = int(np.searchsorted(self.keys, z))
        if i == len(self.keys) or self.keys[i] != z:
            raise KeyError(z)
        return _v_interval(*self.numerator(i))

    def items(self):
        for i, z in enumerate(self.keys.tolist()):
            yield z, _v_interval(*self.numerator(i))

    def checkpoint_keys(self) -> np.ndarray:
        return self.keys[self.keys >= self.dense_limit]

    def exact_numerator(self, z: int) -> tuple[int, int]:
        """Fixed-point numerator of V(z) for integer ``0 <= z < dense_limit``."""
        if not 0 <= z < self.dense_limit:
            raise OutOfRange(f"z={z} outside the dense region [0, {self.dense_limit})")
        hit = self._cache.get(z)
        if hit is not None:
            return hit
        i = bisect_right(self.keys, z) - 1
        key = int(self.keys[i])
        s, n = self.numerator(i)
        ds, dn = window_v_sum(key, z, self._primes)
        out = (s + ds, n + dn)
        if len(self._cache) > 1 << 16:
            self._cache.clear()
        self._cache[z] = out
        return out

    def value(self, z: int) -> Interval:
        """Enclosure of V at integer ``z`` (dense region) or the checkpoint floor."""
        if z < self.dense_limit:
            return _v_interval(*self.exact_numerator(z))
        if z > self.checkpoint_limit:
            raise OutOfRange(f"z={z} beyond the table limit {self.checkpoint_limit}")
        key = self.dense_limit + (z - self.dense_limit) // self.checkpoint_step * self.checkpoint_step
        return self.entry(key)

    def value_float(self, z: int) -> float:
        """Nearest-double lower value of :meth:`value` for search heuristics."""
        if z < self.dense_limit:
            s, _ = self.exact_numerator(z)
        else:
            if z > self.checkpoint_limit:
                raise OutOfRange(z)
            key = self.dense_limit + (z - self.dense_limit) // self.checkpoint_step * self.checkpoint_step
            s, _ = self.numerator(int(np.searchsorted(self.keys, key)))
        return s / FRAC_ONE

    @property
    def v_at_limit(self) -> Interval:
        return self.entry(self.checkpoint_limit)


def _v_keys(cfg: SieveConfig) -> np.ndarray:
    dense = np.arange(0, cfg.L1, cfg.dense_stride, dtype=np.int64)
    ck = np.arange(cfg.L1, cfg.L2 + 1, cfg.checkpoint_step, dtype=np.int64)
    return np.concatenate([dense, ck])


def _v_segment(args):
    start, count, keys, primes = args
    _, sqf, g = factor_odd_window(start, count, primes)
    t = _fixed_terms(sqf, g)
    hi, lo = _split_cumsum(t)
    c = np.cumsum(sqf, dtype=np.int64)
    # number of odd d <= key inside this window
    pos = np.clip((keys - start) // 2 + 1, 0, count)
    take = pos - 1
    safe = np.maximum(take, 0)
    zero = take < 0
    khi = np.where(zero, 0, hi[safe])
    klo = np.where(zero, 0, lo[safe])
    kc = np.where(zero, 0, c[safe])
    return khi, klo, kc, int(hi[-1]), int(lo[-1]), int(c[-1])


def _segments(limit: int, cfg: SieveConfig, begin: int = 1):
    """Yield (start, count) odd windows covering [begin, limit]."""
    half = cfg.segment_size // 2
    start = begin
    while start <= limit:
        count = min(half, (limit - start) // 2 + 1)
        yield start, count
        start += 2 * count


class _Progress:
    """Resume state for long table builds, rewritten atomically as one npz file."""

    def __init__(self, path, cfg: SieveConfig):
        self.path = Path(path) if path else None
        self.cfg = cfg

    def load(self):
        if not self.path or not self.path.exists():
            return None
        with np.load(self.path, allow_pickle=False) as z:
            state = {k: z[k] for k in z.files}
        if json.loads(str(state["cfg"])) != self.cfg.echo():
            raise DataError(f"progress file {self.path} was written for a different config")
        return state

    def save(self, next_start, s, n, hi, lo, c):
        if not self.path:
            return
        tmp = self.path.with_name(self.path.name + ".tmp.npz")
        np.savez(tmp, cfg=json.dumps(self.cfg.echo()), next_start=next_start,
                 s=str(s), n=str(n), hi=hi, lo=lo, c=c)
        os.replace(tmp, self.path)

    def clear(self):
        if self.path and self.path.exists():
            self.path.unlink()


def build_v_table(cfg: SieveConfig, progress_path: str | Path | None = None,
                  save_every: int = 64) -> VTable:
    """Sieve V up to ``cfg.L2`` and return the checkpoint table.

    With ``progress_path`` the running state is saved every ``save_every``
    segments and a rerun resumes from the last saved segment boundary.
    """
    keys = _v_keys(cfg)
    primes = odd_primes_upto(math.isqrt(cfg.L2) + 1)
    out_hi = np.zeros(len(keys), dtype=np.int64)
    out_lo = np.zeros(len(keys), dtype=np.int64)
    out_c = np.zeros(len(keys), dtype=np.int64)
    run_s, run_n, begin = 0, 0, 1

    progress = _Progress(progress_path, cfg)
    state = progress.load()
    if state is not None:
        begin = int(state["next_start"])
        run_s, run_n = int(str(state["s"])), int(str(state["n"]))
        out_hi[:], out_lo[:], out_c[:] = state["hi"], state["lo"], state["c"]
        log.info("resuming V sieve at %d", begin)

    def work():
        for start, count in _segments(cfg.L2, cfg, begin):
            end = start + 2 * (count - 1)
            # window covers the integers start-1 .. end+1 as far as "odd d <= key" goes
            lo_k = int(np.searchsorted(keys, start - 1, side="left"))
            hi_k = int(np.searchsorted(keys, end + 1, side="right"))
            yield start, count, lo_k, hi_k

    def run(item):
        start, count, lo_k, hi_k = item
        return item, _v_segment((start, count, keys[lo_k:hi_k], primes))

    with ThreadPoolExecutor(max_workers=cfg.thread_count) as pool:
        for nseg, (item, res) in enumerate(_ordered(pool, run, work(), cfg.thread_count)):
            start, count, lo_k, hi_k = item
            khi, klo, kc, thi, tlo, tc = res
            for j, k in enumerate(range(lo_k, hi_k)):
                s = run_s + _join(khi[j], klo[j])
                out_hi[k], out_lo[k] = s >> _SPLIT, s & _LOW_MASK
                out_c[k] = run_n + int(kc[j])
            run_s += _join(thi, tlo)
            run_n += tc
            if (nseg + 1) % save_every == 0:
                progress.save(start + 2 * count, run_s, run_n, out_hi, out_lo, out_c)
                log.info("V sieve checkpoint at %d", start + 2 * count)
    progress.clear()
    return VTable(cfg.L1, cfg.checkpoint_step, cfg.L2, cfg.dense_stride, keys,
                  out_hi, out_lo, out_c, _primes=primes)


def _ordered(pool, fn, items, width):
    """Map ``fn`` over ``items`` with at most ``width + 1`` in flight, in order."""
    pending = []
    for it in items:
        pending.append(pool.submit(fn, it))
        if len(pending) > width:
            yield pending.pop(0).result()
    for f in pending:
        yield f.result()


# -- Q table -----------------------------------------------------------------


@dataclass
class QTable:
    """Exact counts of odd squarefree d <= z for every integer z <= limit."""

    limit: int
    cum: np.ndarray  # cum[k] = Q(2k + 1)

    def q(self, z: int) -> int:
        if z < 0 or z > self.limit:
            raise OutOfRange(f"z={z} outside [0, {self.limit}]")
        if z < 1:
            return 0
        return int(self.cum[(z - 1) // 2])

    __call__ = q


def build_q_table(cfg: SieveConfig) -> QTable:
    limit = cfg.L3
    primes = odd_primes_upto(math.isqrt(limit) + 1)
    parts, run = [], 0
    for start, count in _segments(limit, cfg):
        _, sqf, _ = factor_odd_window(start, count, primes)
        c = np.cumsum(sqf, dtype=np.int64) + run
        run = int(c[-1])
        parts.append(c.astype(np.uint32))
    return QTable(limit, np.concatenate(parts))


# -- oracles (trial division, no shared code with the sieve) -----------------


def _trial_primes(n: int) -> list[int]:
    ps = []
    for k in range(3, n + 1, 2):
        if all(k % p for p in ps if p * p <= k):
            ps.append(k)
    return ps


def _factor(d: int, ps: list[int]):
    """Distinct odd prime factors of odd ``d``, or None if d is not squarefree."""
    out = []
    for p in ps:
        if p * p > d:
            break
        if d % p == 0:
            d //= p
            if d % p == 0:
                return None
            out.append(p)
    if d > 1:
        out.append(d)
    return out


def _oracle_check(z: int):
    if not isinstance(z, int) or z > ORACLE_LIMIT:
        raise DomainError(f"oracle limited to integers <= {ORACLE_LIMIT}, got {z!r}")


def oracle_v_many(zs) -> dict[int, Fraction]:
    """Exact V(z) for each z in ``zs`` by trial factorization of every odd d."""
    zs = sorted(set(zs))
    for z in zs:
        _oracle_check(z)
    if not zs:
        return {}
    top = zs[-1]
    ps = _trial_primes(math.isqrt(top) + 1)
    # every g = prod(p-2) < d <= top divides lcm(1..top)
    den = 1
    for p in [2] + _trial_primes(top):
        q = p
        while q * p <= top:
            q *= p
        den *= q
    out, acc, j = {}, 0, 0
    for z in zs:
        if z < 1:
            out[z] = Fraction(0)
    zs = [z for z in zs if z >= 1]
    for d in range(1, top + 1, 2):
        f = _factor(d, ps)
        if f is not None:
            g = 1
            for p in f:
                g *= p - 2
            acc += den // g
        while j < len(zs) and zs[j] < d + 2:
            out[zs[j]] = Fraction(acc, den)
            j += 1
    return out


def oracle_v(z: int) -> Fraction:
    return oracle_v_many([z])[z]


def oracle_q(z: int) -> int:
    _oracle_check(z)
    ps = _trial_primes(math.isqrt(max(z, 1)) + 1)
    return sum(1 for d in range(1, z + 1, 2) if _factor(d, ps) is not None)


def squarefree_coprime_count(z: int, p: int) -> int:
    """Brute-force count of squarefree d <= z with gcd(d, p) = 1 (p prime).

    A numpy Mobius-free sieve: clear multiples of every prime square, then
    drop multiples of ``p``.
    """
    sqf = np.ones(z + 1, dtype=bool)
    sqf[0] = False
    r = math.isqrt(z)
    is_p = np.ones(r + 1, dtype=bool)
    is_p[:2] = False
    for q in range(2, r + 1):
        if is_p[q]:
            is_p[q * q :: q] = False
            sqf[q * q :: q * q] = False
    sqf[::p] = False
    return int(sqf.sum())


# -- persistence -------------------------------------------------------------


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_v_table(vt: VTable, path: str | Path, cfg: SieveConfig) -> None:
    lines = []
    for i, z in enumerate(vt.keys.tolist()):
        s, n = vt.numerator(i)
        iv = _v_interval(s, n)
        lo, hi = iv.to_hex()
        lines.append(f"{z} {lo} {hi}\n")
    body = "".join(lines).encode()
    header = {"format": V_FORMAT, "cfg": cfg.echo(), "entries": len(lines),
              "frac_bits": FRAC_BITS, "sha256": _sha256(body)}
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(body)
    os.replace(tmp, path)


def _read_header(path: Path, fmt: str):
    if not path.exists():
        raise DataError(f"table file {path} is missing")
    with open(path, "rb") as fh:
        first = fh.readline()
        body = fh.read()
    try:
        header = json.loads(first)
    except json.JSONDecodeError as exc:
        raise DataError(f"table file {path} has a corrupt header") from exc
    if header.get("format") != fmt:
        raise DataError(f"table file {path}: expected format {fmt}, got {header.get('format')}")
    if "sha256" not in header or _sha256(body) != header["sha256"]:
        raise DataError(f"table file {path} fails its checksum")
    return header, body


def _dyadic_numerator(hexs: str) -> int:
    _, man, e, _ = mpf_from_hex(hexs)
    shift = e + FRAC_BITS
    if shift < 0:
        raise DataError("table entry is not a multiple of 2**-62")
    return man << shift


def load_v_table(path: str | Path, cfg: SieveConfig | None = None) -> VTable:
    path = Path(path)
    header, body = _read_header(path, V_FORMAT)
    c = header["cfg"]
    if cfg is not None and c != cfg.echo():
        raise DataError(f"table file {path} was built for {c}, not {cfg.echo()}")
    n = header["entries"]
    keys = np.zeros(n, dtype=np.int64)
    nh = np.zeros(n, dtype=np.int64)
    nl = np.zeros(n, dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    for i, line in enumerate(body.decode().splitlines()):
        z, lo, hi = line.split()
        s = _dyadic_numerator(lo) if lo != "0x0p+0" else 0
        t = _dyadic_numerator(hi) if hi != "0x0p+0" else 0
        keys[i] = int(z)
        nh[i], nl[i] = s >> _SPLIT, s & _LOW_MASK
        cnt[i] = t - s
    return VTable(c["L1"], c["checkpoint_step"], c["L2"], c["dense_stride"], keys, nh, nl, cnt)


def save_q_table(qt: QTable, path: str | Path, cfg: SieveConfig) -> None:
    body = qt.cum.astype("<u4").tobytes()
    header = {"format": Q_FORMAT, "limit": qt.limit, "cfg": cfg.echo(),
              "sha256": _sha256(body)}
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(body)
    os.replace(tmp, path)


def load_q_table(path: str | Path, cfg: SieveConfig | None = None) -> QTable:
    path = Path(path)
    header, body = _read_header(path, Q_FORMAT)
    if cfg is not None and header["limit"] != cfg.L3:
        raise DataError(f"table file {path} covers L3={header['limit']}, need {cfg.L3}")
    return QTable(header["limit"], np.frombuffer(body, dtype="<u4").copy())


def lookup_v_floor(table: VTable, z: Interval) -> Interval:
    """Enclosure of V at the largest tabulated argument ``<= z.lo``.

    V is nondecreasing, so the result's lower endpoint bounds V(z) from below
    for every z in the interval.
    """
    z = Interval(z)
    if not z.certainly_ge(3):
        raise DomainError(f"z must be >= 3, got {z!r}")
    zl = int(z.lo_fraction() // 1)
    if zl > table.checkpoint_limit:
        raise OutOfRange(f"z={zl} > L2={table.checkpoint_limit}; use the analytic branch")
    return table.value(zl)
