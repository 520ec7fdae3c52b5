"""Architecture parameter sets and per-cycle flip budgets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .twirl import DampingParams, pta_channel

NS = 1e-9
US = 1e-6

ARCHITECTURES = ("textbook", "helmer", "divincenzo")
T2_RULES = ("equal_T1", "twice_T1")


@dataclass(frozen=True)
class ArchitectureModel:
    """One architecture: gate timings (integer nanoseconds) and error budgets.

    The cycle is prep (``t_qsp``), four CNOT steps in north/west/east/south
    order, a local rotation (``t_loc``) and readout (``t_meas``).
    """

    name: str
    T1: float | None
    T2_rule: str
    t_qsp_ns: int
    t_loc_ns: int
    t_meas_ns: int
    t_cnot_ns: int
    p_intr: float
    p_meas: float
    p_qsp: float
    cnot_step_ns: tuple[int, int, int, int]
    t1_range_us: tuple[float, float] = (1.0, 10.0)

    def __post_init__(self):
        if self.T2_rule not in T2_RULES:
            raise ValueError(f"unknown T2 rule {self.T2_rule!r}")
        object.__setattr__(self, "cnot_step_ns", tuple(int(x) for x in self.cnot_step_ns))
        if len(self.cnot_step_ns) != 4:
            raise ValueError("need exactly four CNOT step durations")
        for name in ("t_qsp_ns", "t_loc_ns", "t_meas_ns", "t_cnot_ns"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if any(x < 0 for x in self.cnot_step_ns):
            raise ValueError("CNOT step durations must be non-negative")
        for name in ("p_intr", "p_meas", "p_qsp"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.T1 is not None and not self.T1 > 0:
            raise ValueError("T1 must be positive")

    @property
    def t_middle_ns(self) -> int:
        return sum(self.cnot_step_ns)

    @property
    def t_cycle_ns(self) -> int:
        return self.t_qsp_ns + self.t_middle_ns + self.t_loc_ns + self.t_meas_ns

    @property
    def t_cycle(self) -> float:
        return self.t_cycle_ns * NS

    @property
    def t_middle(self) -> float:
        return self.t_middle_ns * NS

    def T2_for(self, T1: float) -> float:
        return T1 if self.T2_rule == "equal_T1" else 2.0 * T1

    def replace(self, **changes) -> "ArchitectureModel":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["cnot_step_ns"] = list(self.cnot_step_ns)
        out["t1_range_us"] = list(self.t1_range_us)
        if out["T1"] is None:
            del out["T1"]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ArchitectureModel":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - fields
        if unknown:
            raise KeyError(f"unknown architecture field(s): {sorted(unknown)}")
        data = dict(data)
        data.setdefault("T1", None)
        data["cnot_step_ns"] = tuple(data["cnot_step_ns"])
        if "t1_range_us" in data:
            data["t1_range_us"] = tuple(data["t1_range_us"])
        return cls(**data)


_PRESETS = {
    "textbook": ArchitectureModel(
        name="textbook", T1=None, T2_rule="equal_T1",
        t_qsp_ns=40, t_loc_ns=5, t_meas_ns=35, t_cnot_ns=21,
        p_intr=1e-4, p_meas=1e-2, p_qsp=1e-2,
        cnot_step_ns=(21, 21, 21, 21), t1_range_us=(1.0, 10.0),
    ),
    "helmer": ArchitectureModel(
        name="helmer", T1=None, T2_rule="equal_T1",
        t_qsp_ns=40, t_loc_ns=5, t_meas_ns=35, t_cnot_ns=20,
        p_intr=1e-3, p_meas=1e-2, p_qsp=1e-2,
        cnot_step_ns=(20, 20, 20, 20), t1_range_us=(1.0, 10.0),
    ),
    # SWAP overhead is folded into the first and last CNOT steps.
    "divincenzo": ArchitectureModel(
        name="divincenzo", T1=None, T2_rule="twice_T1",
        t_qsp_ns=40, t_loc_ns=5, t_meas_ns=35, t_cnot_ns=20,
        p_intr=1e-3, p_meas=1e-2, p_qsp=1e-2,
        cnot_step_ns=(100, 60, 60, 100), t1_range_us=(1.0, 40.0),
    ),
}


def preset(name: str) -> ArchitectureModel:
    try:
        return _PRESETS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown architecture {name!r}; choose one of {', '.join(ARCHITECTURES)}"
        ) from None


@dataclass(frozen=True)
class CycleErrorRates:
    p_bf: float
    q_bf: float
    p_pf: float
    q_pf: float
    t_middle: float


def intrinsic_flip_probability(p_intr: float) -> float:
    """Single-qubit bit (or phase) flip probability from a uniformly
    distributed two-qubit Pauli error: 8 of the 15 labels flip a given qubit."""
    return 8.0 * p_intr / 15.0


def cycle_error_rates(m: ArchitectureModel, T1: float) -> CycleErrorRates:
    T2 = m.T2_for(T1)
    full = pta_channel(DampingParams(m.t_cycle, T1, T2))
    mid = pta_channel(DampingParams(m.t_middle, T1, T2))
    mid_rot = pta_channel(DampingParams(m.t_middle + 2 * m.t_loc_ns * NS, T1, T2))
    gates = 4 * intrinsic_flip_probability(m.p_intr)
    return CycleErrorRates(
        p_bf=full.px + full.py + gates,
        q_bf=m.p_qsp + mid.px + mid.py + m.p_meas + gates,
        p_pf=full.pz + full.py + gates,
        q_pf=m.p_qsp + mid_rot.pz + mid_rot.py + m.p_meas + gates,
        t_middle=m.t_middle,
    )
