"""
A complete bound at desk scale
==============================

Builds the small ("desk") tables, chooses z for each of the 9906 grid cells,
assembles the rigorous total and prints the block report.  Takes about a
minute; the full-scale preset only differs in the table limits.
"""

# %%
from pathlib import Path

from brungrh import cli
from brungrh.brun import GridSpec, load_external_counts, total_bound
from brungrh.optimize import optimize_all

out = Path("demo-output")
cfg = cli.resolve_config("desk", table_dir=str(out / "tables"))
cli.cmd_tables(cfg)
vt, qt = cli.load_tables(cfg)

# %%
# The optimizer works on a double-precision model; the chosen z values are
# then re-evaluated with interval arithmetic.
points = GridSpec().points()
zs = optimize_all(points, vt, qt)
print("first z values:", zs[:5], " last z has", len(str(zs[-1])), "digits")

res = total_bound(points, zs, vt, qt, load_external_counts())
print(cli.render_summary(res))

# %%
# Block sums, rounded up at four significant figures.
print(cli.render_report(cli.report_rows(res, cli.REFERENCE_BLOCKS)))
