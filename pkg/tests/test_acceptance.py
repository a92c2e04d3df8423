"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL ...`` line (visible with
``pytest -s`` or in the captured output of a failure) and asserts its runtime
budget where one is set.
"""

import time

import numpy as np
import pytest

from reconfmem import dr
from reconfmem.array import VariationModel, sample_array
from reconfmem.cli import main
from reconfmem.device import (Regime, classify_regime, extract_switching_metrics, hold, new_state,
                              read_current, relax, run_endurance, run_iv_sweep)
from reconfmem.io import read_json
from reconfmem.mlp import LESION_TYPES, MlpModel, separable_dataset
from reconfmem.presets import LIF, NONVOLATILE, TTI, get_preset
from reconfmem.protocols import firing_ratio, run_lif_cycle, run_plasticity, run_pulse_train, seeded_factory
from reconfmem.stimulus import PulseTrain, SweepSpec
from reconfmem.tti import Led, TtiConfig, canonical_train, new_tti_state, step_tti


def report(n, ok, detail, elapsed=None):
    t = "" if elapsed is None else f" ({elapsed:.2f} s)"
    print(f"[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}{t}")
    assert ok, detail


def test_1_nonvolatile_regime():
    t0 = time.perf_counter()
    p = NONVOLATILE.without_jitter()
    _, tr = run_iv_sweep(new_state(p), SweepSpec.bipolar(), 1e-3, p)
    m = extract_switching_metrics(tr, p)
    dt = time.perf_counter() - t0
    ok = m.on_off_ratio >= 1e5 and abs(m.v_set - 0.29) <= 0.01 and dt < 1.0
    report(1, ok, f"on/off {m.on_off_ratio:.3g}, V_set {m.v_set:.4f} V", dt)


def test_2_volatile_regime():
    p = NONVOLATILE.without_jitter()
    s, tr = run_iv_sweep(new_state(p), SweepSpec.bipolar(), 1e-5, p)
    switched = extract_switching_metrics(tr, p).switched
    relax(s, 10 * p.tau_relax, p)
    hrs = read_current(s, p) == pytest.approx(p.g_off * p.read_voltage, rel=1e-2)
    pw = get_preset("volatile-50pW").without_jitter()
    _, tr = run_iv_sweep(new_state(pw), SweepSpec.bipolar(), 1e-5, pw)
    power = extract_switching_metrics(tr, pw).switching_power
    ok = switched and hrs and classify_regime(s, p) is Regime.VOLATILE and abs(power / 50e-12 - 1) <= 0.01
    report(2, ok, f"HRS after 10 tau: {hrs}, switching power {power * 1e12:.2f} pW")


def _set_stats(p, cc, n=200):
    s = new_state(p)
    sweep = SweepSpec.bipolar(segment_time=0.05, points_per_segment=500)
    vs = []
    while len(vs) < n:
        s, tr = run_iv_sweep(s, sweep, cc, p)
        m = extract_switching_metrics(tr, p)
        if m.switched:
            vs.append(m.v_set)
    return float(np.mean(vs)), float(np.std(vs, ddof=1))


def test_3_jitter_statistics():
    t0 = time.perf_counter()
    nv = _set_stats(NONVOLATILE.replace(seed=0), 1e-3)
    vo = _set_stats(get_preset("volatile-10uA").replace(seed=0), 1e-5)
    dt = time.perf_counter() - t0
    within = [abs(got / want - 1) <= 0.2 for got, want in zip(nv + vo, (0.29, 0.10, 0.40, 0.19))]
    report(3, all(within) and dt < 10.0,
           f"NV mean/std {nv[0]:.3f}/{nv[1]:.3f} V, volatile {vo[0]:.3f}/{vo[1]:.3f} V", dt)


def test_4_retention_and_endurance():
    t0 = time.perf_counter()
    p = NONVOLATILE.without_jitter()
    s, _ = run_iv_sweep(new_state(p), SweepSpec.unipolar(1.0, 0.25, 200), 1e-3, p)
    w0, i0 = s.w, read_current(s, p)
    for _ in range(50):
        relax(s, 100.0 - 1e-3, p)
        hold(s, p.read_voltage, 1e-3, 1e-3, p)
    held = s.w == w0 and read_current(s, p) == i0 and s.t >= 5000.0
    er = run_endurance(new_state(NONVOLATILE.replace(seed=0)), 2500, 1e-3, NONVOLATILE.replace(seed=0))
    dt = time.perf_counter() - t0
    frac = er.successes / er.cycles
    report(4, held and frac >= 0.99 and dt < 60.0,
           f"5000 s retention held: {held}, endurance {er.successes}/{er.cycles}", dt)


def test_5_lif():
    p = LIF.without_jitter()
    train = PulseTrain(10, 1e-4, 1.0, 1e-4, 0.1)
    s = new_state(p)
    a = run_lif_cycle(s, train, 1e-5, p)
    b = run_lif_cycle(s, train, 1e-5, p)
    widths = [1e-4, 2e-4, 3e-4, 4e-4]
    table = firing_ratio(seeded_factory(LIF, 0), PulseTrain(20, 1e-4, 1.0, 1e-4, 0.1), widths, 50, 20, 1e-5, LIF)
    means = [table[w].mean for w in widths]
    ok = (a.firing_pulse_index == 5 and a.recovered and b.fired and abs(b.firing_pulse_index - 5) <= 1
          and all(y >= x for x, y in zip(means, means[1:])))
    report(5, ok, f"fires at {a.firing_pulse_index} then {b.firing_pulse_index}, "
                  f"ratio means {[round(m, 3) for m in means]}")


def test_6_plasticity():
    p = LIF.without_jitter()
    stp = run_plasticity(new_state(p), PulseTrain(30, 15e-3, 2.5, 10e-3, 0.1), 5e-3, p)
    ltp = run_plasticity(new_state(p), PulseTrain(30, 20e-3, 3.5, 10e-3, 0.1), 5e-3, p)
    ok = (stp.outcome == "STP" and stp.after_idle_conductance <= 1.01 * stp.baseline_conductance
          and ltp.outcome == "LTP" and ltp.post_train_regime is Regime.NONVOLATILE
          and ltp.after_idle_conductance == ltp.final_conductance and ltp.linearity_r2 >= 0.9)
    report(6, ok, f"2.5 V -> {stp.outcome}, 3.5 V -> {ltp.outcome} (R^2 {ltp.linearity_r2:.3f})")


def test_7_array_statistics():
    arr, _ = sample_array(VariationModel(seed=0), 16, 65)
    st = arr.stats()
    ok = 0.90 <= st["yield"] <= 0.96 and 5.2 <= st["onoff_decades_mean"] <= 5.8
    report(7, ok, f"yield {st['yield']:.3f}, mean decades {st['onoff_decades_mean']:.2f}")


def test_8_tti_tri_mode():
    p, cfg = TTI.without_jitter(), TtiConfig()
    leds = [step_tti(new_tti_state(p), canonical_train(v, cfg), cfg, p).led for v in (0.3, 0.8, 1.5)]
    solid = step_tti(new_tti_state(p), canonical_train(1.5, cfg), cfg, p)
    latched = True
    for v in (0.0, 0.3, 0.8, 1.5):
        relax(solid.device, 1000.0, p)
        latched &= step_tti(solid, canonical_train(v, cfg), cfg, p).led is Led.SOLID
    flash = step_tti(new_tti_state(p), canonical_train(0.8, cfg), cfg, p)
    relax(flash.device, 10 * p.tau_relax, p)
    reverts = step_tti(flash, canonical_train(0.3, cfg), cfg, p).led is Led.OFF
    ok = leds == [Led.OFF, Led.FLASH, Led.SOLID] and latched and reverts
    report(8, ok, f"0.3/0.8/1.5 V -> {'/'.join(x.value for x in leds)}, latch held {latched}, "
                  f"flash reverts {reverts}")


def _rel_err(model, x, y, eps=1e-6):
    g1, _ = model.gradients(x, y)
    errs = []
    for idx in [(0, 0), (3, 10), (15, 81), (7, 40)]:
        old = model.w1[idx]
        model.w1[idx] = old + eps
        lp = model.loss(x, y)
        model.w1[idx] = old - eps
        lm = model.loss(x, y)
        model.w1[idx] = old
        fd = (lp - lm) / (2 * eps)
        errs.append(abs(fd - g1[idx]) / max(abs(fd), 1e-12))
    return max(errs)


def test_9a_gradient_check():
    rng = np.random.default_rng(0)
    err = _rel_err(MlpModel.init(seed=2, scale=0.5), rng.random((10, 81)), rng.integers(0, 2, 10))
    report("9a", err <= 1e-4, f"max relative error {err:.2e}")


def test_9bc_float_and_device_training():
    t0 = time.perf_counter()
    ds = separable_dataset(400, seed=0)
    tr, te = dr.split_indices(ds.y, 0.25, seed=0)
    train, test = ds.subset(tr), ds.subset(te)
    fm, frep, _ = dr.train_run(train, "float", epochs=1000, seed=0)
    dm, drep, extra = dr.train_run(train, "device", epochs=1000, seed=0, yield_p=0.93)
    dt = time.perf_counter() - t0
    first = frep.first_epoch_reaching(0.99)
    gap_train = frep.final_accuracy - drep.final_accuracy
    gap_test = fm.accuracy(test.x, test.y) - dm.accuracy(test.x, test.y)
    dead = 1 - float(np.mean(extra["array_yield"]))
    ok = first is not None and gap_train <= 0.05 and gap_test <= 0.05 and dt < 300
    report("9b+c", ok, f"float hits 99% at epoch {first}; device {drep.final_accuracy:.3f} vs float "
                       f"{frep.final_accuracy:.3f} (test gap {gap_test:+.3f}, {dead:.1%} dead)", dt)


def test_9d_user_vectors_end_to_end(tmp_path):
    data = tmp_path / "data"
    assert main(["synth-data", "--out", str(data), "--n-images", "4"]) == 0
    out = tmp_path / "run"
    assert main(["train-dr", "--vectors", str(data / "vectors.csv"), "--epochs", "100",
                 "--out", str(out)]) == 0
    metrics = read_json(out / "train_dr.json")["modes"]["float"]["metrics_test"]
    ok = all(k in metrics and {"accuracy", "sensitivity", "specificity"} <= set(metrics[k])
             for k in LESION_TYPES)
    report("9d", ok, f"per-lesion metrics reported for {', '.join(LESION_TYPES)}")


def test_10_determinism(tmp_path):
    runs = [["sweep"], ["pulse"], ["lif"], ["firing-ratio", "--trials", "3"], ["plasticity"],
            ["endurance", "--cycles", "5"], ["sample-array"], ["synth-data", "--n-images", "1"],
            ["train-dr", "--separable", "true", "--n-samples", "60", "--epochs", "3", "--mode", "both"],
            ["tti", "--amplitude", "0.8"]]
    same = []
    for argv in runs:
        snaps = []
        for k in range(2):
            d = tmp_path / argv[0] / str(k)
            assert main(argv + ["--seed", "5", "--out", str(d)]) == 0
            snaps.append({p.name: p.read_bytes() for p in d.iterdir()})
        same.append(snaps[0] == snaps[1])
    # eval-dr reads the model written by train-dr
    model = tmp_path / "train-dr" / "0" / "model_float.json"
    snaps = []
    for k in range(2):
        d = tmp_path / "eval" / str(k)
        assert main(["eval-dr", "--model", str(model), "--separable", "true", "--n-samples", "60",
                     "--seed", "5", "--out", str(d)]) == 0
        snaps.append({p.name: p.read_bytes() for p in d.iterdir()})
    same.append(snaps[0] == snaps[1])
    report(10, all(same), f"{sum(same)}/{len(same)} commands byte-identical on rerun")
