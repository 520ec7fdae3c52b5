"""Logical error rates: the leading-order formula against Monte Carlo.

The closed form counts only the shortest failing chains (straight rows plus
single syndrome faults).  At d = 3 that is most of what goes wrong, so the
two agree closely.  At d = 5 there are many more ways to build a failing
chain of the minimal length out of diagonal hook errors, and the formula
falls short of the simulation.

Run:  python demos/02_logical_error_rates.py [shots]
"""

from __future__ import annotations

import sys

from surfarch import analytic, arch, lattice, sim

shots = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
m = arch.preset("textbook")

print("d  T1/us   MC p_XL/cycle        analytic   ratio")
for d in (3, 5):
    lay = lattice.build_layout(d)
    sched = lattice.build_schedule(lay, m)
    for T1_us in (3.0, 5.0, 10.0):
        mc = sim.estimate(lay, sched, m, T1_us * 1e-6, shots)
        an = analytic.architecture_rates(m, d, T1_us * 1e-6)[0]
        print(f"{d}  {T1_us:5.1f}   {mc.p_xl_per_cycle:.2e} +- {mc.p_xl_err:.1e}   "
              f"{an:.2e}   {mc.p_xl_per_cycle / an:5.2f}")

# Below threshold the d = 5 rates drop under the d = 3 rates.  The T1 where
# the curves cross is the threshold; see `surfarch threshold` for the full scan.
