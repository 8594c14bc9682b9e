"""
Rigorous interval arithmetic
============================

Every quantity in the bound is carried as an interval whose endpoints are
rounded outward, so the true real number is always inside.
"""

# %%
# Exact inputs stay exact; inexact results widen by about one unit in the
# last place at the working precision (128 bits by default).
from fractions import Fraction

from brungrh.rint import Interval, const_pi, exp, log, pow10, precision

third = Interval(1) / Interval(3)
print("1/3      ", third, "width", float(third.width()))
print("contains 1/3:", Fraction(1, 3) in third)

# %%
# Elementary functions enclose their exact values.
print("log(e)   ", log(exp(Interval(1))))
print("pi       ", const_pi())

# %%
# Exponents are unbounded, so grid points up to 10**2000 stay finite.
big = pow10(Interval(2000))
print("10^2000  ", big)
print("log      ", log(big))

# %%
# Precision is a context setting; a coarser precision gives a wider but still
# valid enclosure.
for bits in (53, 128, 256):
    with precision(bits):
        r = log(Interval(10)) / Interval(7)
        print(f"{bits:4d} bits  width {float(r.width()):.3e}")

# %%
# Endpoints serialize to bit-exact hex strings.
lo, hi = third.to_hex()
print(lo, hi)
assert Interval.from_hex(lo, hi) == third
