"""Following a few hand-placed errors through the decoder.

A single X error on a data qubit lights up the two neighbouring Z
syndromes; matching pairs them and the correction undoes the error.  Two
X errors in a row of a d = 3 code are (d + 1)/2 flips: the matcher prefers
the cheaper completion through the third qubit, and the row turns into a
logical X.
"""

from __future__ import annotations

import numpy as np

from surfarch import arch, lattice
from surfarch.decoder import Decoder
from surfarch.sim import run_shot

m = arch.preset("textbook")
lay = lattice.build_layout(3)
sched = lattice.build_schedule(lay, m)
dec = Decoder.build(lay, sched, m, 10e-6, n_cycles=2, backend="blossom")


def show(title, faults):
    rec = run_shot(lay, sched, m, 2, faults=faults, noiseless=True)
    out = dec.decode_shot(rec)["X"]
    left = out.correction.x_bits ^ rec.final_residual.x_bits
    print(title)
    print("  detection events (syndrome, round):", sorted(rec.detection_events))
    print("  matched pairs:", sorted(tuple(sorted(p)) for p in out.matched_pairs))
    print("  data qubits flipped after correction:",
          [lay.data_coords[q] for q in np.nonzero(left)[0]])


centre = lay.data_coords.index((2, 2))
show("one X in the middle of the patch", [(0, 0, centre, "X")])

row = sorted((q for q in range(lay.n_data) if lay.data_coords[q][0] == 2),
             key=lambda q: lay.data_coords[q][1])
show("two X errors on one row", [(0, 0, q, "X") for q in row[:2]])
