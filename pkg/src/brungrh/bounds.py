"""Closed-form interval bounds used in the twin-prime sieve estimate.

All inputs and outputs are :class:`~brungrh.rint.Interval`.  Grid points
``m = 10**e`` are carried as :class:`LogPoint`, which keeps the exact decimal
exponent alongside enclosures of ``log m`` and ``m`` itself.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

from . import rint
from .errors import ConstraintError, DomainError
from .rint import Interval, const_li2, const_pi, const_twin_prime, log, root4, sqrt
from .sieve import PROP3_THRESHOLD, QTable, VTable

# published constants, kept as exact decimal strings
C_D = "12.6244"
C_R_SQRT = "3.038"
C_R_QUART = "5.744"
C_LI = "7.32"
C_PROP3 = "3.12"

C_PI_FLOOR = 4 * 10**18
LI_FLOOR = 4 * 10**9


class Branch(enum.Enum):
    """Which case of a piecewise bound was used."""

    EXACT = "Exact"
    CHECKPOINT = "Checkpoint"
    ANALYTIC = "Analytic"


@dataclass(frozen=True)
class LogPoint:
    """A point ``m`` together with ``log10 m`` and ``log m``.

    ``exponent`` is the exact decimal exponent when ``m = 10**exponent``
    (None otherwise); ``label`` is the text form used in result files.
    """

    e10: Interval
    log_m: Interval
    m: Interval
    exponent: Fraction | None = None
    label: str = ""

    @classmethod
    def from_exponent(cls, e) -> LogPoint:
        e = Fraction(e) if not isinstance(e, str) else Fraction(e.strip())
        e10 = Interval(e)
        return cls(e10, e10 * rint.const_ln10(), rint.pow10(e10), e, _exp_label(e))

    @classmethod
    def from_int(cls, n: int, label: str | None = None) -> LogPoint:
        if n < 2:
            raise DomainError("LogPoint needs m >= 2")
        m = Interval(n)
        lm = log(m)
        return cls(lm / rint.const_ln10(), lm, m, None, label or str(n))

    @classmethod
    def from_log(cls, log_m, label: str = "") -> LogPoint:
        lm = Interval(log_m)
        return cls(lm / rint.const_ln10(), lm, rint.exp(lm), None, label)

    @classmethod
    def parse(cls, text: str) -> LogPoint:
        """``"4e18"`` is the literal 4*10**18; anything else is a decimal exponent."""
        t = text.strip().lower()
        if t == "4e18":
            return FOUR_E18()
        return cls.from_exponent(t)

    def sort_key(self) -> Fraction:
        if self.exponent is not None:
            return self.exponent
        return Fraction(self.e10.mid())

    def log_float(self) -> float:
        """``log m`` as a double, for search heuristics."""
        return self.log_m.mid()


def FOUR_E18() -> LogPoint:
    return LogPoint.from_int(4 * 10**18, label="4e18")


def _exp_label(e: Fraction) -> str:
    if e.denominator == 1:
        return f"{e.numerator}.0"
    q = e * 10**6
    if q.denominator != 1:
        return f"{e.numerator}/{e.denominator}"
    s = f"{abs(q.numerator) // 10**6}.{abs(q.numerator) % 10**6:06d}".rstrip("0")
    return ("-" if e < 0 else "") + s


def _floor_check(x: LogPoint, floor: int, what: str):
    if not x.m.certainly_ge(floor):
        raise DomainError(f"{what} requires x >= {floor:.0e}, got m = {x.m!r}")


def _order_check(mi: LogPoint, mi1: LogPoint):
    if mi.m.certainly_gt(mi1.m):
        raise DomainError("reversed endpoints: m_i > m_{i+1}")


# -- GRH error constant ------------------------------------------------------


def c_pi(x: LogPoint) -> Interval:
    """3/(8 pi) + (6 + 1/pi)/(4 log x) + 6/log^2 x + li_2/(sqrt(x) log x)."""
    _floor_check(x, C_PI_FLOOR, "c_pi")
    pi = const_pi()
    lx = x.log_m
    return (
        Interval(3) / (8 * pi)
        + (6 + 1 / pi) / (4 * lx)
        + Interval(6) / lx.square()
        + const_li2() / (sqrt(x.m) * lx)
    )


# -- logarithmic integral bounds ---------------------------------------------


def _li_main(x: LogPoint, with_732: bool) -> Interval:
    lx = x.log_m
    inv = 1 / lx
    s = 1 + inv + 2 * inv.square()
    if with_732:
        s = s + Interval(C_LI) * inv**3
    return x.m / lx * s


def li_up(x: LogPoint) -> Interval:
    _floor_check(x, LI_FLOOR, "li_up")
    pi = const_pi()
    return _li_main(x, True) + sqrt(x.m) * x.log_m / (8 * pi) + const_li2()


def li_low(x: LogPoint) -> Interval:
    _floor_check(x, LI_FLOOR, "li_low")
    pi = const_pi()
    return _li_main(x, False) - sqrt(x.m) * x.log_m / (8 * pi) - const_li2()


def c1(mi: LogPoint, mi1: LogPoint) -> Interval:
    """Upper bound on the integral of li(t)/t**2 over [m_i, m_{i+1}]."""
    _order_check(mi, mi1)
    _floor_check(mi, C_PI_FLOOR, "c1")
    _floor_check(mi1, C_PI_FLOOR, "c1")
    li2 = const_li2()
    right = log(mi1.log_m) - (li_low(mi1) - li2) / mi1.m
    left = log(mi.log_m) - (li_up(mi) - li2) / mi.m
    return right - left


def c2(mi: LogPoint, mi1: LogPoint) -> Interval:
    """Integral of sqrt(t) log t / t**2 over [m_i, m_{i+1}], via -(2 log t + 4)/sqrt(t)."""
    _order_check(mi, mi1)
    right = (-2 * mi1.log_m - 4) / sqrt(mi1.m)
    left = (-2 * mi.log_m - 4) / sqrt(mi.m)
    return right - left


# -- V lower bound -----------------------------------------------------------


def _floor_int(z: Interval) -> int:
    return int(math.floor(z.lo_fraction()))


def _ceil_int(z: Interval) -> int:
    return int(math.ceil(z.hi_fraction()))


def v_analytic(z: Interval, vt: VTable) -> Interval:
    """V(L2) + (log z - log L2)/(2 Pi_2) + 12.6244 (3/sqrt z - 9/sqrt L2), at z.lo."""
    zl = z.lo_interval()
    L2 = Interval(vt.checkpoint_limit)
    d = Interval(C_D) * (3 / sqrt(zl) - 9 / sqrt(L2))
    return vt.v_at_limit + (log(zl) - log(L2)) / (2 * const_twin_prime()) + d


def v_lower(z, vt: VTable) -> tuple[Interval, Branch]:
    """Interval whose lower endpoint is a lower bound for V(z)."""
    z = Interval(z)
    if not z.certainly_ge(3):
        raise DomainError(f"v_lower needs z >= 3, got {z!r}")
    zl = _floor_int(z)
    if zl < vt.dense_limit:
        return vt.value(zl), Branch.EXACT
    if zl <= vt.checkpoint_limit:
        return vt.value(zl), Branch.CHECKPOINT
    return v_analytic(z, vt), Branch.ANALYTIC


# -- squarefree counts -------------------------------------------------------


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % q for q in range(2, math.isqrt(p) + 1))


def prop3_bound(p: int, z) -> Interval:
    """Upper bound on #{d <= z squarefree, gcd(d, p) = 1} for z >= 2768896."""
    if not _is_prime(p):
        raise DomainError(f"{p} is not prime")
    z = Interval(z)
    if not z.certainly_ge(PROP3_THRESHOLD):
        raise DomainError(f"prop3_bound needs z >= {PROP3_THRESHOLD}, got {z!r}")
    zh = z.hi_interval()
    six_pi2 = 6 / const_pi().square()
    P = Interval(p)
    a = P / (P + 1) * six_pi2
    b = six_pi2 * (1 + 1 / sqrt(P)) + 2
    c = Interval(C_PROP3) * (1 + 1 / root4(P))
    return a * zh + b * sqrt(zh) + c * root4(zh)


def r_analytic(z: Interval) -> Interval:
    """4/pi^2 z + 3.038 sqrt z + 5.744 z^(1/4), at z.hi."""
    zh = z.hi_interval()
    return (
        4 / const_pi().square() * zh
        + Interval(C_R_SQRT) * sqrt(zh)
        + Interval(C_R_QUART) * root4(zh)
    )


def r_upper(z, qt: QTable) -> tuple[Interval, Branch]:
    """Upper bound on the number of odd squarefree d <= z."""
    z = Interval(z)
    if not z.certainly_ge(1):
        raise DomainError(f"r_upper needs z >= 1, got {z!r}")
    zc = _ceil_int(z)
    if zc <= qt.limit:
        return Interval(qt(zc)), Branch.EXACT
    return r_analytic(z), Branch.ANALYTIC


# -- GRH error term ------------------------------------------------------------


def z_ceiling(x: LogPoint) -> int:
    """Largest integer z with z < x**(1/4), using a downward-rounded root."""
    r = root4(x.m).lo_fraction()
    z = math.ceil(r) - 1
    return int(z)


def check_z(x: LogPoint, z) -> None:
    z = Interval(z)
    if not z.certainly_lt(root4(x.m).lo_interval()):
        raise ConstraintError(f"z = {z!r} violates z < x^(1/4) for x = {x.label or x.m!r}")


def r_bound(x: LogPoint, z, qt: QTable) -> Interval:
    """r(z)^2 c_pi(x) sqrt(x) log x, an upper bound on the sieve remainder."""
    _floor_check(x, C_PI_FLOOR, "r_bound")
    check_z(x, z)
    r, _ = r_upper(z, qt)
    return r.hi_interval().square() * c_pi(x) * sqrt(x.m) * x.log_m
