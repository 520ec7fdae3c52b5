"""Leakage of a flux-pulsed CZ gate between two transmons.

Qutrit 1 is tuned down to where |11> meets |20>, held there for one full
swap, and brought back.  A fast pulse leaks population into |20> because it
cannot follow the avoided crossing; a slow pulse loses population to T1 and
T2.  In between sits the best gate time.  This sweep is the slow part of the
package (about 20 seconds per point).

Run:  python demos/04_cz_gate_leakage.py
"""

from __future__ import annotations

from surfarch import gatesim

rows = gatesim.sweep([0.055], [7, 9, 11, 13, 16], T1=10_000.0, T2=10_000.0)
for r in rows:
    print(f"t = {r.t_total_ns:4.0f} ns   leakage {r.leakage:.2e}   CZ infidelity {r.infidelity:.1e}")
best = gatesim.curve_minimum(rows)
print(f"minimum leakage {best.leakage:.2e} at {best.t_total_ns:g} ns")

# The same trade-off in its simplest form: a linear sweep through a single
# avoided crossing of coupling g at rate 2 GHz/ns.
for g in (0.01, 0.045, 0.1):
    print(f"g = {g * 1e3:4.0f} MHz: fraction following the crossing "
          f"{gatesim.landau_zener_error(g, 2.0):.4f}")
