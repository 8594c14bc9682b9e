"""Outward-rounded interval arithmetic on arbitrary-precision binary floats.

Endpoints are raw mpmath ``mpf`` tuples ``(sign, man, exp, bc)``.  The
exponent is an unbounded Python integer, so magnitudes such as ``10**2000``
or ``10**-1000`` are represented without overflow or underflow.  Every
operation rounds the lower endpoint toward -inf and the upper endpoint toward
+inf at the current working precision (see :func:`precision`).

Add, sub, mul, div and sqrt are correctly rounded by mpmath.  For log and exp
we evaluate with ``GUARD_BITS`` extra bits and step one further unit outward
before the final rounding, so the enclosure does not depend on mpmath's
transcendental routines being correctly rounded.
"""

from __future__ import annotations

import contextlib
import contextvars
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import mpmath
from mpmath.libmp import (
    finf,
    fnan,
    fninf,
    fone,
    from_float,
    from_int,
    from_man_exp,
    from_rational,
    fzero,
    mpf_add,
    mpf_cmp,
    mpf_div,
    mpf_exp,
    mpf_ln10,
    mpf_log,
    mpf_mul,
    mpf_neg,
    mpf_pi,
    mpf_sqrt,
    mpf_sub,
    round_ceiling,
    round_floor,
    to_float,
)
from mpmath.libmp import normalize as _normalize

from .errors import ConfigError, DomainError

__all__ = [
    "Interval",
    "Precision",
    "const_li2",
    "const_pi",
    "const_twin_prime",
    "exp",
    "get_precision",
    "log",
    "pow10",
    "precision",
    "root4",
    "set_precision",
    "sqrt",
]

DEFAULT_BITS = 128
GUARD_BITS = 12

_prec: contextvars.ContextVar[int] = contextvars.ContextVar(
    "brungrh_precision", default=DEFAULT_BITS
)


@dataclass(frozen=True)
class Precision:
    """Working precision in mantissa bits."""

    mantissa_bits: int = DEFAULT_BITS

    def __post_init__(self):
        if not isinstance(self.mantissa_bits, int) or self.mantissa_bits < 53:
            raise ConfigError(
                f"mantissa_bits must be an integer >= 53, got {self.mantissa_bits!r}"
            )


def get_precision() -> int:
    return _prec.get()


def set_precision(bits: int | Precision) -> None:
    """Set the working precision for the current context."""
    p = bits if isinstance(bits, Precision) else Precision(bits)
    _prec.set(p.mantissa_bits)


@contextlib.contextmanager
def precision(bits: int | Precision):
    """Temporarily evaluate with ``bits`` of mantissa."""
    p = bits if isinstance(bits, Precision) else Precision(bits)
    token = _prec.set(p.mantissa_bits)
    try:
        yield p
    finally:
        _prec.reset(token)


# -- raw mpf helpers ---------------------------------------------------------


def _exact_mpf(x, rnd, prec):
    """Convert an exact number to an mpf tuple rounded in direction ``rnd``."""
    if isinstance(x, tuple):
        return _normalize(x[0], x[1], x[2], x[3], prec, rnd) if x[1] else x
    if isinstance(x, bool):
        x = int(x)
    if isinstance(x, int):
        return from_int(x, prec, rnd)
    if isinstance(x, mpmath.mpf):
        return _exact_mpf(x._mpf_, rnd, prec)
    if isinstance(x, float):
        if x != x:
            raise DomainError("NaN cannot be an interval endpoint")
        if x in (float("inf"), float("-inf")):
            return finf if x > 0 else fninf
        x = Fraction(x)
    elif isinstance(x, str):
        x = Fraction(x.strip())
    if isinstance(x, Rational):
        return from_rational(int(x.numerator), int(x.denominator), prec, rnd)
    raise TypeError(f"cannot convert {type(x).__name__} to an interval endpoint")


def _nudge(x, q, down):
    """Step ``x`` one unit of ``q``-bit precision outward (away from the enclosed set)."""
    if x in (fzero, finf, fninf):
        return x
    _, _, e, bc = x
    u = from_man_exp(1, e + bc - q)
    if down:
        return mpf_sub(x, u, q, round_floor)
    return mpf_add(x, u, q, round_ceiling)


def _fix_nan(a, b):
    if a == fnan:
        a = fninf
    if b == fnan:
        b = finf
    return a, b


def _mpf_to_fraction(x) -> Fraction:
    sign, man, e, _ = x
    if x in (finf, fninf, fnan):
        raise DomainError("non-finite endpoint has no exact rational value")
    v = Fraction(man) * (Fraction(2) ** e)
    return -v if sign else v


# -- hex serialization -------------------------------------------------------

_HEX_RE = re.compile(r"^(-?)0x([0-9a-f]+)p([+-]?\d+)$")


def mpf_to_hex(x) -> str:
    """Bit-exact text form ``[-]0x<mantissa>p<exp>`` of a raw mpf tuple."""
    if x == finf:
        return "inf"
    if x == fninf:
        return "-inf"
    if x == fnan:
        raise DomainError("NaN cannot be serialized")
    sign, man, e, _ = x
    return f"{'-' if sign else ''}0x{man:x}p{e:+d}"


def mpf_from_hex(s: str):
    s = s.strip().lower()
    if s == "inf":
        return finf
    if s == "-inf":
        return fninf
    m = _HEX_RE.match(s)
    if not m:
        raise ValueError(f"malformed hex float {s!r}")
    man = int(m.group(2), 16)
    if man == 0:
        return fzero
    x = from_man_exp(man, int(m.group(3)))
    return mpf_neg(x) if m.group(1) else x


# -- the interval type -------------------------------------------------------


class Interval:
    """Closed interval ``[lo, hi]`` with outward-rounded arithmetic.

    ``Interval(a)`` is the tightest interval at the working precision that
    contains the exact number ``a`` (int, float, Fraction, decimal string or
    mpf).  ``Interval(a, b)`` contains ``[a, b]``.
    """

    __slots__ = ("_lo", "_hi")

    def __init__(self, lo, hi=None):
        prec = _prec.get()
        if isinstance(lo, Interval):
            if hi is not None:
                raise TypeError("Interval(Interval, ...) takes no second argument")
            self._lo, self._hi = lo._lo, lo._hi
            return
        a = _exact_mpf(lo, round_floor, prec)
        b = _exact_mpf(lo if hi is None else hi, round_ceiling, prec)
        if mpf_cmp(a, b) > 0:
            raise DomainError(f"empty interval: lo > hi ({lo!r}, {hi!r})")
        self._lo, self._hi = a, b

    @classmethod
    def _raw(cls, a, b) -> Interval:
        iv = object.__new__(cls)
        iv._lo, iv._hi = a, b
        return iv

    @classmethod
    def from_hex(cls, lo: str, hi: str) -> Interval:
        a, b = mpf_from_hex(lo), mpf_from_hex(hi)
        if mpf_cmp(a, b) > 0:
            raise DomainError("empty interval in hex input")
        return cls._raw(a, b)

    def to_hex(self) -> tuple[str, str]:
        return mpf_to_hex(self._lo), mpf_to_hex(self._hi)

    # endpoint access
    @property
    def lo(self) -> mpmath.mpf:
        # make_mpf wraps the endpoint exactly; mpmath.mpf() would round to mp.prec
        return mpmath.mp.make_mpf(self._lo)

    @property
    def hi(self) -> mpmath.mpf:
        return mpmath.mp.make_mpf(self._hi)

    @property
    def lo_raw(self):
        return self._lo

    @property
    def hi_raw(self):
        return self._hi

    def lo_interval(self) -> Interval:
        """The degenerate interval at the lower endpoint."""
        return Interval._raw(self._lo, self._lo)

    def hi_interval(self) -> Interval:
        return Interval._raw(self._hi, self._hi)

    def lo_fraction(self) -> Fraction:
        return _mpf_to_fraction(self._lo)

    def hi_fraction(self) -> Fraction:
        return _mpf_to_fraction(self._hi)

    def mid(self) -> float:
        """Nearest-double midpoint (non-rigorous, for reporting)."""
        return (to_float(self._lo) + to_float(self._hi)) / 2

    def width(self) -> mpmath.mpf:
        prec = _prec.get()
        return mpmath.mpf(mpf_sub(self._hi, self._lo, prec, round_ceiling))

    def is_point(self) -> bool:
        return self._lo == self._hi

    def __float__(self) -> float:
        return self.mid()

    def __repr__(self) -> str:
        return (
            f"Interval({mpmath.nstr(self.lo, 17)}, {mpmath.nstr(self.hi, 17)})"
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        return self._lo == other._lo and self._hi == other._hi

    def __hash__(self) -> int:
        return hash((self._lo, self._hi))

    def __contains__(self, x) -> bool:
        if isinstance(x, Interval):
            return mpf_cmp(self._lo, x._lo) <= 0 and mpf_cmp(x._hi, self._hi) <= 0
        if isinstance(x, float):
            if x != x:
                return False
            x = from_float(x)
        elif isinstance(x, mpmath.mpf):
            x = x._mpf_
        if isinstance(x, tuple):
            return mpf_cmp(self._lo, x) <= 0 and mpf_cmp(x, self._hi) <= 0
        v = Fraction(x)
        lo_ok = self._lo == fninf or _mpf_to_fraction(self._lo) <= v
        hi_ok = self._hi == finf or v <= _mpf_to_fraction(self._hi)
        return lo_ok and hi_ok

    # certain-order predicates
    def certainly_lt(self, other) -> bool:
        o = as_interval(other)
        return mpf_cmp(self._hi, o._lo) < 0

    def certainly_le(self, other) -> bool:
        o = as_interval(other)
        return mpf_cmp(self._hi, o._lo) <= 0

    def certainly_gt(self, other) -> bool:
        return as_interval(other).certainly_lt(self)

    def certainly_ge(self, other) -> bool:
        return as_interval(other).certainly_le(self)

    def contains_zero(self) -> bool:
        return mpf_cmp(self._lo, fzero) <= 0 <= mpf_cmp(self._hi, fzero)

    def hull(self, other) -> Interval:
        o = as_interval(other)
        a = self._lo if mpf_cmp(self._lo, o._lo) <= 0 else o._lo
        b = self._hi if mpf_cmp(self._hi, o._hi) >= 0 else o._hi
        return Interval._raw(a, b)

    # arithmetic
    def __neg__(self) -> Interval:
        return Interval._raw(mpf_neg(self._hi), mpf_neg(self._lo))

    def __pos__(self) -> Interval:
        return self

    def __add__(self, other) -> Interval:
        o = as_interval(other)
        prec = _prec.get()
        return Interval._raw(
            *_fix_nan(
                mpf_add(self._lo, o._lo, prec, round_floor),
                mpf_add(self._hi, o._hi, prec, round_ceiling),
            )
        )

    __radd__ = __add__

    def __sub__(self, other) -> Interval:
        o = as_interval(other)
        prec = _prec.get()
        return Interval._raw(
            *_fix_nan(
                mpf_sub(self._lo, o._hi, prec, round_floor),
                mpf_sub(self._hi, o._lo, prec, round_ceiling),
            )
        )

    def __rsub__(self, other) -> Interval:
        return as_interval(other) - self

    def __mul__(self, other) -> Interval:
        o = as_interval(other)
        prec = _prec.get()
        a, b, c, d = self._lo, self._hi, o._lo, o._hi
        if mpf_cmp(a, fzero) >= 0 and mpf_cmp(c, fzero) >= 0:
            return Interval._raw(
                mpf_mul(a, c, prec, round_floor), mpf_mul(b, d, prec, round_ceiling)
            )
        pairs = ((a, c), (a, d), (b, c), (b, d))
        los = [_mul0(x, y, prec, round_floor) for x, y in pairs]
        his = [_mul0(x, y, prec, round_ceiling) for x, y in pairs]
        return Interval._raw(_mpf_min(los), _mpf_max(his))

    __rmul__ = __mul__

    def __truediv__(self, other) -> Interval:
        o = as_interval(other)
        if o.contains_zero():
            raise DomainError(f"division by an interval containing zero: {o!r}")
        prec = _prec.get()
        a, b, c, d = self._lo, self._hi, o._lo, o._hi
        if mpf_cmp(a, fzero) >= 0 and mpf_cmp(c, fzero) > 0:
            return Interval._raw(
                mpf_div(a, d, prec, round_floor), mpf_div(b, c, prec, round_ceiling)
            )
        pairs = ((a, c), (a, d), (b, c), (b, d))
        los = [mpf_div(x, y, prec, round_floor) for x, y in pairs]
        his = [mpf_div(x, y, prec, round_ceiling) for x, y in pairs]
        return Interval._raw(*_fix_nan(_mpf_min(los), _mpf_max(his)))

    def __rtruediv__(self, other) -> Interval:
        return as_interval(other) / self

    def square(self) -> Interval:
        """Tight enclosure of ``{x*x}`` (never negative, unlike ``self * self``)."""
        prec = _prec.get()
        a, b = self._lo, self._hi
        if mpf_cmp(a, fzero) >= 0:
            return Interval._raw(
                mpf_mul(a, a, prec, round_floor), mpf_mul(b, b, prec, round_ceiling)
            )
        if mpf_cmp(b, fzero) <= 0:
            return Interval._raw(
                mpf_mul(b, b, prec, round_floor), mpf_mul(a, a, prec, round_ceiling)
            )
        m = a if mpf_cmp(mpf_neg(a), b) > 0 else b
        return Interval._raw(fzero, mpf_mul(m, m, prec, round_ceiling))

    def __pow__(self, n: int) -> Interval:
        if not isinstance(n, int) or n < 0:
            raise DomainError("only nonnegative integer powers are supported")
        if n == 0:
            return Interval(1)
        if n == 2:
            return self.square()
        half = self ** (n // 2)
        r = half.square()
        return r * self if n % 2 else r


def _mul0(x, y, prec, rnd):
    # 0 * inf is taken as 0 (the product of point zero with a huge bound)
    if x == fzero or y == fzero:
        return fzero
    return mpf_mul(x, y, prec, rnd)


def _mpf_min(xs):
    m = xs[0]
    for x in xs[1:]:
        if mpf_cmp(x, m) < 0:
            m = x
    return m


def _mpf_max(xs):
    m = xs[0]
    for x in xs[1:]:
        if mpf_cmp(x, m) > 0:
            m = x
    return m


def as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval(x)


# -- elementary functions ----------------------------------------------------


def _guarded(fn, x, down):
    prec = _prec.get()
    q = prec + GUARD_BITS
    r = fn(x, q, round_floor if down else round_ceiling)
    r = _nudge(r, q, down)
    return _normalize(r[0], r[1], r[2], r[3], prec, round_floor if down else round_ceiling) if r[1] else r


def log(a) -> Interval:
    a = as_interval(a)
    if mpf_cmp(a._lo, fzero) <= 0:
        raise DomainError(f"log of a nonpositive argument: {a!r}")
    lo = fzero if a._lo == fone else _guarded(mpf_log, a._lo, True)
    hi = fzero if a._hi == fone else _guarded(mpf_log, a._hi, False)
    return Interval._raw(lo, hi)


def exp(a) -> Interval:
    a = as_interval(a)
    lo = fone if a._lo == fzero else _guarded(mpf_exp, a._lo, True)
    hi = fone if a._hi == fzero else _guarded(mpf_exp, a._hi, False)
    if mpf_cmp(lo, fzero) < 0:
        lo = fzero
    return Interval._raw(lo, hi)


def sqrt(a) -> Interval:
    a = as_interval(a)
    if mpf_cmp(a._lo, fzero) < 0:
        raise DomainError(f"sqrt of a negative argument: {a!r}")
    prec = _prec.get()
    return Interval._raw(
        mpf_sqrt(a._lo, prec, round_floor), mpf_sqrt(a._hi, prec, round_ceiling)
    )


def root4(a) -> Interval:
    """Fourth root, as two outward-rounded square roots."""
    return sqrt(sqrt(a))


def _ln10(down: bool):
    prec = _prec.get()
    q = prec + GUARD_BITS
    r = _nudge(mpf_ln10(q, round_floor if down else round_ceiling), q, down)
    return _normalize(r[0], r[1], r[2], r[3], prec, round_floor if down else round_ceiling)


def const_ln10() -> Interval:
    return Interval._raw(_ln10(True), _ln10(False))


def pow10(e) -> Interval:
    """Enclosure of ``10**e``; exact integer powers are computed exactly."""
    if isinstance(e, int):
        return Interval(10**e) if e >= 0 else Interval(Fraction(1, 10 ** (-e)))
    e = as_interval(e)
    if e.is_point():
        f = e.lo_fraction()
        if f.denominator == 1:
            return pow10(int(f))
    return exp(e * const_ln10())


def const_pi() -> Interval:
    prec = _prec.get()
    q = prec + GUARD_BITS
    lo = _nudge(mpf_pi(q, round_floor), q, True)
    hi = _nudge(mpf_pi(q, round_ceiling), q, False)
    return Interval._raw(
        _normalize(lo[0], lo[1], lo[2], lo[3], prec, round_floor),
        _normalize(hi[0], hi[1], hi[2], hi[3], prec, round_ceiling),
    )


# li(2) = Ei(log 2) and the twin prime constant, to 45 significant digits.
# tests/test_rint.py re-derives both with independent oracles (power series
# for Ei, and a prime product with a rigorous tail bound).
LI2_LO = "1.04516378011749278484458888919461313652261557"
LI2_HI = "1.04516378011749278484458888919461313652261558"
TWIN_PRIME_LO = "0.660161815846869573927812110014555778432623360"
TWIN_PRIME_HI = "0.660161815846869573927812110014555778432623361"


def const_li2() -> Interval:
    """Enclosure of li_2 = integral_0^2 dt/log t (principal value)."""
    return Interval(LI2_LO, LI2_HI)


def const_twin_prime() -> Interval:
    """Enclosure of the twin prime constant prod_{p>2} p(p-2)/(p-1)^2."""
    return Interval(TWIN_PRIME_LO, TWIN_PRIME_HI)

