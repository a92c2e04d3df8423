import math

import pytest

from reconfmem.device import Regime, conductance_of, new_state
from reconfmem.presets import LIF, NONVOLATILE
from reconfmem.protocols import (ProtocolError, firing_ratio, linearity_r2, run_lif_cycle,
                                 run_plasticity, run_pulse_train, seeded_factory, step_size)
from reconfmem.stimulus import PulseTrain

L = LIF.without_jitter()
CC = 1e-5
NOMINAL = PulseTrain(10, 1e-4, 1.0, 1e-4, 0.1)


def test_calibrated_lif_fires_at_pulse_five():
    _, _, rep = run_pulse_train(new_state(L), NOMINAL, CC, L)
    assert rep.fired and rep.firing_pulse_index == 5


def test_zero_amplitude_never_fires():
    tr = PulseTrain(10, 1e-4, 0.0, 1e-4, 0.0)
    _, trace, rep = run_pulse_train(new_state(L), tr, CC, L)
    assert not rep.fired
    assert all(p.i == 0.0 for p in trace)


def test_firing_index_stable_under_dt_refinement():
    h = step_size(NOMINAL, L)
    a, _, ra = run_pulse_train(new_state(L), NOMINAL, CC, L, reset_on_fire=False)
    b, _, rb = run_pulse_train(new_state(L), NOMINAL, CC, L, dt=h / 10, reset_on_fire=False)
    assert ra.firing_pulse_index == rb.firing_pulse_index
    assert a.w == pytest.approx(b.w, rel=0.01)


@pytest.mark.parametrize("field,values", [("pulse_amplitude", [0.9, 1.0, 1.2, 1.5]),
                                          ("pulse_width", [0.8e-4, 1e-4, 1.5e-4, 2e-4])])
def test_firing_index_monotone(field, values):
    idx = []
    for x in values:
        tr = PulseTrain(30, 1e-4, 1.0, 1e-4, 0.1).__class__(
            **{**dict(n_pulses=30, pulse_width=1e-4, pulse_amplitude=1.0, gap_width=1e-4, gap_amplitude=0.1), field: x})
        _, _, rep = run_pulse_train(new_state(L), tr, CC, L, record=False)
        idx.append(rep.firing_pulse_index or math.inf)
    assert all(b <= a for a, b in zip(idx, idx[1:]))


def _pulse_map(w, v, width, gap, p):
    """Closed-form one-period map of the volatile state (unclamped growth)."""
    x = (v - p.v_set_nominal) / p.v0_growth
    rate = p.k_growth * math.expm1(x)
    total = rate + 1.0 / p.tau_relax
    w_inf = rate / total
    w = w_inf + (w - w_inf) * math.exp(-total * width)
    return w * math.exp(-gap / p.tau_relax)


def test_leak_dominance_never_fires():
    v, width, gap = 0.6, 1e-4, 1e-3
    w = 0.0
    for _ in range(10_000):
        w = _pulse_map(w, v, width, gap, L)
    # the fixed point's peak current stays below the firing level
    w_peak = _pulse_map(w, v, width, 0.0, L)
    assert conductance_of(w_peak, L) * v < 1e-6
    _, _, rep = run_pulse_train(new_state(L), PulseTrain(300, width, v, gap, 0.1), CC, L, record=False)
    assert not rep.fired


def test_lif_cycle_recovers_and_repeats():
    s = new_state(L)
    a = run_lif_cycle(s, NOMINAL, CC, L)
    b = run_lif_cycle(s, NOMINAL, CC, L)
    assert a.fired and a.firing_pulse_index == 5
    assert a.recovered and a.recovery_time <= 10 * L.tau_relax
    assert b.fired and abs(b.firing_pulse_index - 5) <= 1


def test_jittered_lif_still_fires_sometimes():
    p = LIF.replace(seed=0)
    s = new_state(p)
    idx = [run_lif_cycle(s, NOMINAL, CC, p).firing_pulse_index for _ in range(4)]
    assert any(i is not None for i in idx)
    assert len(set(idx)) > 1


def test_lif_weak_train():
    rep = run_lif_cycle(new_state(L), PulseTrain(10, 1e-4, 0.2, 1e-4, 0.1), CC, L)
    assert not rep.fired and rep.recovered


def test_lif_refuses_nonvolatile_device():
    with pytest.raises(ProtocolError):
        run_lif_cycle(new_state(L, w=0.99), NOMINAL, CC, L)


def test_firing_ratio_trends_and_determinism():
    widths = [1e-4, 2e-4, 3e-4, 4e-4]
    tmpl = PulseTrain(20, 1e-4, 1.0, 1e-4, 0.1)
    t1 = firing_ratio(seeded_factory(LIF, 1), tmpl, widths, 20, 20, CC, LIF)
    t2 = firing_ratio(seeded_factory(LIF, 1), tmpl, widths, 20, 20, CC, LIF)
    means = [t1[w].mean for w in widths]
    assert all(b >= a for a, b in zip(means, means[1:]))
    assert [t1[w].ratios for w in widths] == [t2[w].ratios for w in widths]
    zero = firing_ratio(seeded_factory(LIF, 1), tmpl, [0.0], 3, 20, CC, LIF)
    assert zero[0.0].mean == 0.0


def test_plasticity_stp():
    rep = run_plasticity(new_state(L), PulseTrain(30, 15e-3, 2.5, 10e-3, 0.1), 5e-3, L)
    assert rep.outcome == "STP"
    g = rep.gap_conductance
    assert all(b >= a for a, b in zip(g, g[1:]))
    assert g[-1] > 1.5 * rep.baseline_conductance
    assert rep.after_idle_conductance == pytest.approx(rep.baseline_conductance, rel=0.05)


def test_plasticity_ltp():
    rep = run_plasticity(new_state(L), PulseTrain(30, 20e-3, 3.5, 10e-3, 0.1), 5e-3, L)
    assert rep.outcome == "LTP"
    assert rep.post_train_regime is Regime.NONVOLATILE
    assert rep.after_idle_conductance == rep.final_conductance
    assert rep.linearity_r2 >= 0.9


def test_plasticity_read_only_train_is_flat():
    rep = run_plasticity(new_state(L), PulseTrain(10, 15e-3, 0.1, 10e-3, 0.1), 5e-3, L)
    assert rep.outcome == "none"
    assert len(set(rep.gap_conductance)) == 1


def test_linearity_r2():
    assert linearity_r2([1, 2, 3, 4]) == pytest.approx(1.0)
    assert linearity_r2([1, 2]) is None
    assert linearity_r2([2, 2, 2]) is None


def test_bad_compliance():
    with pytest.raises(ValueError):
        run_pulse_train(new_state(NONVOLATILE), NOMINAL, 0.0, NONVOLATILE)
