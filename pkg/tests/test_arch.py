from __future__ import annotations

import math

import numpy as np
import pytest

from surfarch import arch
from surfarch.arch import cycle_error_rates, intrinsic_flip_probability, preset


def test_cycle_times():
    assert preset("textbook").t_cycle_ns == 164
    assert preset("helmer").t_cycle_ns == 160
    dv = preset("divincenzo")
    assert dv.t_cycle_ns == 400
    assert dv.t_loc_ns + dv.t_meas_ns == 40


@pytest.mark.parametrize("name", arch.ARCHITECTURES)
def test_schedule_sum(name):
    m = preset(name)
    assert m.t_qsp_ns + sum(m.cnot_step_ns) + m.t_loc_ns + m.t_meas_ns == m.t_cycle_ns


def test_unknown_preset():
    with pytest.raises(ValueError, match="unknown architecture"):
        preset("surface")


def test_preset_case_insensitive_and_immutable():
    m = preset("Helmer")
    changed = m.replace(p_meas=0.0)
    assert changed.p_meas == 0.0
    assert preset("helmer").p_meas == 1e-2


def test_validation():
    m = preset("textbook")
    with pytest.raises(ValueError):
        m.replace(p_meas=1.5)
    with pytest.raises(ValueError):
        m.replace(cnot_step_ns=(1, 2, 3))
    with pytest.raises(ValueError):
        m.replace(T2_rule="half")


@pytest.mark.parametrize("name", arch.ARCHITECTURES)
def test_dict_round_trip(name):
    m = preset(name)
    assert arch.ArchitectureModel.from_dict(m.to_dict()) == m
    with pytest.raises(KeyError):
        arch.ArchitectureModel.from_dict({**m.to_dict(), "bogus": 1})


def test_intrinsic_factor():
    assert intrinsic_flip_probability(15e-4) == pytest.approx(8e-4)


def test_zero_noise_rates():
    m = preset("textbook").replace(p_intr=0.0, p_qsp=0.0, p_meas=0.0)
    r = cycle_error_rates(m, 1e300)
    assert (r.p_bf, r.q_bf, r.p_pf, r.q_pf) == (0.0, 0.0, 0.0, 0.0)


def test_textbook_symmetric_data_rates():
    r = cycle_error_rates(preset("textbook"), 10e-6)
    assert r.p_bf == pytest.approx(r.p_pf, rel=1e-12)


def test_textbook_rates_oracle():
    # 50-digit scalar evaluation of the four per-cycle sums
    r = cycle_error_rates(preset("textbook"), 10e-6)
    assert r.p_bf == pytest.approx(0.0083464594098571848, rel=1e-13)
    assert r.q_bf == pytest.approx(0.024395742621784145, rel=1e-13)
    assert r.q_pf == pytest.approx(0.024891312386315948, rel=1e-13)


def test_divincenzo_contributions():
    m = preset("divincenzo")
    r = cycle_error_rates(m, 10e-6)
    gates = 4 * intrinsic_flip_probability(m.p_intr)
    assert r.p_bf - gates == pytest.approx(1.96e-2, rel=2e-3)
    assert r.p_pf - gates == pytest.approx(9.90e-3, rel=2e-3)


@pytest.mark.parametrize("name", arch.ARCHITECTURES)
def test_rates_monotone_in_t1(name):
    m = preset(name)
    rows = [cycle_error_rates(m, t * 1e-6) for t in np.geomspace(0.5, 100, 40)]
    for a, b in zip(rows, rows[1:]):
        for f in ("p_bf", "q_bf", "p_pf", "q_pf"):
            assert getattr(b, f) <= getattr(a, f)


def test_twice_t1_bit_flips_dominate():
    m = preset("divincenzo")
    for t in np.geomspace(0.1, 1e4, 30):
        r = cycle_error_rates(m, t * 1e-6)
        assert r.p_bf > r.p_pf
    assert m.T2_for(3e-6) == 6e-6
    assert not math.isclose(cycle_error_rates(m, 5e-6).p_bf, cycle_error_rates(m, 5e-6).p_pf)
