"""Where the errors in one error-correction cycle come from.

Each architecture spends its cycle differently: the textbook and Helmer
schedules are short, the DiVincenzo schedule is 400 ns long because every
CNOT is wrapped in SWAPs.  Idle decoherence over a step of length t is
replaced by its Pauli-twirled version, px = py = (1 - e^{-t/T1})/4 and
pz = (1 - e^{-t/T2})/2 - px, and the per-cycle flip rates add those budgets
to the gate and measurement errors.

Run:  python demos/01_cycle_error_budget.py
"""

from __future__ import annotations

from surfarch import arch, lattice
from surfarch.twirl import DampingParams, pta_channel

T1 = 10e-6

for name in arch.ARCHITECTURES:
    m = arch.preset(name)
    sched = lattice.build_schedule(lattice.build_layout(3), m)
    print(f"{name}: steps {sched.durations_ns} ns, cycle {sched.t_cycle_ns} ns")

    ch = pta_channel(DampingParams(sched.t_cycle_ns * 1e-9, T1, T1))
    print(f"  idle for one cycle at T1 = T2 = 10 us: px = py = {ch.px:.3e}, pz = {ch.pz:.3e}")

    r = arch.cycle_error_rates(m, T1)
    print(f"  bit flips per cycle   p_bf = {r.p_bf:.3e}  (syndrome side q_bf = {r.q_bf:.3e})")
    print(f"  phase flips per cycle p_pf = {r.p_pf:.3e}  (syndrome side q_pf = {r.q_pf:.3e})")

# The long DiVincenzo cycle makes bit flips clearly more likely than phase
# flips, which is why its logical X and Z error rates separate.
