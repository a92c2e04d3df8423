"""Command-line entry point.

Every subcommand takes ``--config FILE`` (flat key = value), ``--seed``,
``--out DIR`` and ``--preset NAME``, plus one ``--key value`` flag per
config key. Precedence: defaults < config file < flags. The effective
configuration is archived as ``config.txt`` beside the outputs.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import dr, io
from .array import VariationModel, sample_array
from .config import SCHEMAS, ConfigError, RunConfig, defaults, parse_config, serialize, set_value
from .device import (extract_switching_metrics, new_state, run_endurance, run_iv_sweep)
from .imaging import FeatureScaler
from .presets import DEFAULT_CC, get_preset
from .protocols import ProtocolError, firing_ratio, run_lif_cycle, run_plasticity, run_pulse_train, seeded_factory
from .stimulus import PulseTrain, SweepSpec
from .synth import SynthSpec, synth_dataset
from .tti import TtiConfig, canonical_train, new_tti_state, run_scenario, step_tti

ENV_OUT = "RECONFMEM_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _params(cfg: RunConfig):
    if cfg.preset is None:
        raise ConfigError(f"{cfg.command} needs a preset")
    try:
        p = get_preset(cfg.preset)
    except KeyError as e:
        raise ConfigError(e.args[0]) from None
    p = p.replace(seed=cfg.seed)
    return p if cfg.values.get("jitter", True) else p.without_jitter()


def _cc(cfg: RunConfig) -> float:
    cc = cfg.values.get("cc")
    if cc is None:
        cc = DEFAULT_CC.get(cfg.preset)
    if cc is None or not cc > 0:
        raise ConfigError("cc must be a positive current")
    return cc


def _train(cfg: RunConfig, n_pulses: Optional[int] = None) -> PulseTrain:
    v = cfg.values
    return PulseTrain(n_pulses if n_pulses is not None else v["n_pulses"], v["pulse_width"], v["amplitude"],
                      v["gap_width"], v["gap_amplitude"])


# ---------------------------------------------------------------------------
# commands; each writes its files into ``out`` and returns the report


def cmd_sweep(cfg: RunConfig, out: Path) -> dict:
    p, cc, v = _params(cfg), _cc(cfg), cfg.values
    sweep = SweepSpec.bipolar(v["v_max"], v["v_min"], v["segment_time"], v["points_per_segment"])
    state = new_state(p)
    trace, per_cycle = [], []
    for _ in range(max(1, v["cycles"])):
        state, tr = run_iv_sweep(state, sweep, cc, p)
        trace += tr
        per_cycle.append(extract_switching_metrics(tr, p).as_dict())
    io.write_trace(out / "sweep_trace.csv", trace)
    rep = {"preset": cfg.preset, "cc": cc, **per_cycle[0], "per_cycle": per_cycle}
    io.write_json(out / "sweep.json", rep, "sweep")
    return rep


def cmd_pulse(cfg: RunConfig, out: Path) -> dict:
    p, cc, v = _params(cfg), _cc(cfg), cfg.values
    _, trace, fr = run_pulse_train(new_state(p), _train(cfg), cc, p, i_fire=v["i_fire"],
                                   reset_on_fire=v["reset_on_fire"])
    io.write_trace(out / "pulse_trace.csv", trace)
    rep = {"preset": cfg.preset, "cc": cc, **fr.as_dict()}
    io.write_json(out / "pulse.json", rep, "pulse")
    return rep


def cmd_lif(cfg: RunConfig, out: Path) -> dict:
    p, cc, v = _params(cfg), _cc(cfg), cfg.values
    state = new_state(p)
    cycles = []
    for _ in range(max(1, v["cycles"])):
        cycles.append(run_lif_cycle(state, _train(cfg), cc, p, t_recover=v["t_recover"], i_fire=v["i_fire"]).as_dict())
    io.write_csv(out / "lif_cycles.csv", ["cycle"] + list(cycles[0]),
                 ([k + 1] + ["" if x is None else x for x in c.values()] for k, c in enumerate(cycles)))
    rep = {"preset": cfg.preset, "cc": cc, "cycles": cycles}
    io.write_json(out / "lif.json", rep, "lif")
    return rep


def cmd_firing_ratio(cfg: RunConfig, out: Path) -> dict:
    p, cc, v = _params(cfg), _cc(cfg), cfg.values
    if not v["widths"]:
        raise ConfigError("widths must list at least one pulse width")
    template = PulseTrain(v["pulses_per_trial"], v["widths"][0], v["amplitude"], v["gap_width"], v["gap_amplitude"])
    table = firing_ratio(seeded_factory(p, cfg.seed), template, v["widths"], v["trials"],
                         v["pulses_per_trial"], cc, p, i_fire=v["i_fire"])
    stats = [s.as_dict() for s in table.values()]
    io.write_csv(out / "firing_ratio.csv", ["width_s", "mean", "std", "q25", "q50", "q75"],
                 ([s["width"], s["mean"], s["std"], *s["quartiles"]] for s in stats))
    means = [s["mean"] for s in stats]
    rep = {"preset": cfg.preset, "cc": cc, "widths": stats,
           "non_decreasing": all(b >= a for a, b in zip(means, means[1:]))}
    io.write_json(out / "firing_ratio.json", rep, "firing-ratio")
    return rep


def cmd_plasticity(cfg: RunConfig, out: Path) -> dict:
    p, cc = _params(cfg), _cc(cfg)
    pr = run_plasticity(new_state(p), _train(cfg), cc, p, idle=cfg["idle"])
    io.write_csv(out / "plasticity_gaps.csv", ["pulse_index", "conductance_S"],
                 enumerate(pr.gap_conductance, start=1))
    rep = {"preset": cfg.preset, "cc": cc, **pr.as_dict()}
    io.write_json(out / "plasticity.json", rep, "plasticity")
    return rep


def cmd_endurance(cfg: RunConfig, out: Path) -> dict:
    p, cc, v = _params(cfg), _cc(cfg), cfg.values
    sweep = SweepSpec.bipolar(v["v_max"], v["v_min"], v["segment_time"], v["points_per_segment"])
    er = run_endurance(new_state(p), v["cycles"], cc, p, sweep, v["min_ratio"])
    io.write_csv(out / "endurance.csv", ["cycle", "on_off_ratio", "success"],
                 ((k + 1, r, ok) for k, (r, ok) in enumerate(zip(er.on_off_ratios, er.per_cycle))))
    rep = {"preset": cfg.preset, "cc": cc, **er.as_dict()}
    io.write_json(out / "endurance.json", rep, "endurance")
    return rep


def cmd_sample_array(cfg: RunConfig, out: Path) -> dict:
    v = cfg.values
    vm = VariationModel(v["yield_p"], v["onoff_decades_mean"], v["onoff_decades_sigma"], v["v_set_mean"],
                        v["v_set_sigma"], v["v_reset_mean"], v["v_reset_sigma"], seed=cfg.seed)
    arr, params = sample_array(vm, v["rows"], v["cols"], base=_params(cfg))
    io.write_matrix(out / "array_g.csv", arr.g)
    io.write_csv(out / "devices.csv", ["row", "col", "functional", "onoff_decades", "v_set", "v_reset", "g_off"],
                 ((r, c, arr.functional[r, c], arr.onoff_decades[r, c], params[r][c].v_set_nominal,
                   params[r][c].v_reset_nominal, params[r][c].g_off)
                  for r in range(arr.rows) for c in range(arr.cols)))
    rep = {"seed": cfg.seed, **arr.stats()}
    io.write_json(out / "array_stats.json", rep, "sample-array")
    return rep


def cmd_synth_data(cfg: RunConfig, out: Path) -> dict:
    v = cfg.values
    spec = SynthSpec(n_images=v["n_images"], height=v["height"], width=v["width"],
                     lesions_per_type=v["lesions_per_type"], distractors=v["distractors"], texture=v["texture"])
    res = synth_dataset(spec, cfg.seed)
    for img in res.images:
        io.write_pnm(out / f"{img.name}.ppm", img.rgb)
    rows = [dict(r, image=f"{r['image']}.ppm") for r in res.rows]
    io.write_manifest(out / "manifest.csv", rows)
    io.write_vectors(out / "vectors.csv", rows, res.features)
    counts: Dict[str, List[int]] = {}
    for r in rows:
        counts.setdefault(r["lesion_type"], [0, 0])[r["label"]] += 1
    rep = {"seed": cfg.seed, "images": len(res.images), "candidates": len(rows),
           "per_type": {k: {"non_lesion": c[0], "lesion": c[1]} for k, c in sorted(counts.items())}}
    io.write_json(out / "synth.json", rep, "synth-data")
    return rep


def _dataset_source(v: dict) -> str:
    return "manifest" if v["manifest"] else "vectors" if v["vectors"] else "separable" if v["separable"] else ""


def cmd_train_dr(cfg: RunConfig, out: Path) -> dict:
    v = cfg.values
    if not _dataset_source(v):
        raise ConfigError("train-dr needs manifest, vectors or separable = true")
    modes = ["float", "device"] if v["mode"] == "both" else [v["mode"]]
    for m in modes:
        if m not in ("float", "device"):
            raise ConfigError(f"mode must be float, device or both, not {v['mode']!r}")
    rows, x = dr.load_raw(v["manifest"], v["vectors"], v["separable"], v["n_samples"], cfg.seed)
    labels = np.array([r["label"] for r in rows], int)
    tr, te = dr.split_indices(labels, v["test_fraction"], cfg.seed)
    if tr.size == 0:
        raise ValueError("training split is empty")
    scaler = FeatureScaler().fit(x[tr])
    full = dr.to_dataset(rows, x, scaler)
    train, test = full.subset(tr), full.subset(te)
    base = dr.update_model(v["n_levels"], v["nonlinearity"], v["alpha"], v["curve"])
    log, results = [], {}
    for m in modes:
        model, rep, extra = dr.train_run(train, m, epochs=v["epochs"], seed=cfg.seed, batch_size=v["batch_size"],
                                         step=v["step"], yield_p=v["yield_p"], n_models=v["n_models"], base=base)
        log += [(m, k + 1, l, a, n) for k, (l, a, n) in enumerate(zip(rep.loss, rep.accuracy, rep.pulses))]
        name = "model.json" if len(modes) == 1 else f"model_{m}.json"
        io.write_json(out / name, dr.model_dict(model, scaler, m), "mlp-model")
        results[m] = {"model_file": name, "final_train_accuracy": rep.final_accuracy,
                      "first_epoch_99": rep.first_epoch_reaching(0.99), **extra,
                      "metrics_train": dr.metrics_dict(model, train),
                      "metrics_test": dr.metrics_dict(model, test) if len(test) else None}
    io.write_csv(out / "train_log.csv", ["mode", "epoch", "loss", "accuracy", "pulses"], log)
    rep = {"source": _dataset_source(v), "n": len(full), "n_train": len(train), "n_test": len(test),
           "epochs": v["epochs"], "modes": results}
    if len(modes) == 2 and v["epochs"] > 0:
        rep["train_accuracy_gap"] = results["float"]["final_train_accuracy"] - results["device"]["final_train_accuracy"]
    io.write_json(out / "train_dr.json", rep, "train-dr")
    return rep


def cmd_eval_dr(cfg: RunConfig, out: Path) -> dict:
    v = cfg.values
    if not _dataset_source(v):
        raise ConfigError("eval-dr needs manifest, vectors or separable = true")
    model_path = Path(v["model"])
    if not model_path.exists() and (out / model_path).exists():
        model_path = out / model_path
    model, scaler = dr.model_from_dict(io.read_json(model_path))
    rows, x = dr.load_raw(v["manifest"], v["vectors"], v["separable"], v["n_samples"], cfg.seed)
    ds = dr.to_dataset(rows, x, scaler)
    prob = model.predict_proba(ds.x)
    io.write_csv(out / "predictions.csv", ["image", "candidate_id", "label", "lesion_type", "p_lesion", "predicted"],
                 ((r["image"], r["candidate_id"], r["label"], r["lesion_type"], p, int(p >= model.confidence))
                  for r, p in zip(rows, prob)))
    rep = {"source": _dataset_source(v), "n": len(ds), "confidence": model.confidence,
           "metrics": dr.metrics_dict(model, ds)}
    io.write_json(out / "eval_dr.json", rep, "eval-dr")
    return rep


def _tti_config(v: dict) -> TtiConfig:
    cal = v["calibration"]
    if len(cal) < 4 or len(cal) % 2:
        raise ConfigError("calibration needs pairs: temp,volts,temp,volts,...")
    try:
        return TtiConfig(tuple(zip(cal[0::2], cal[1::2])), v["pulse_width"], v["gap_width"], v["gap_amplitude"],
                         v["pulses_per_burst"], v["bursts"], v["burst_idle"], v["i_fire"], v["cc"])
    except ValueError as e:
        raise ConfigError(str(e)) from None


def cmd_tti(cfg: RunConfig, out: Path) -> dict:
    v = cfg.values
    p, tcfg = _params(cfg), _tti_config(v)
    if v["profile"]:
        sr = run_scenario(io.read_profile(v["profile"]), tcfg, p)
        io.write_csv(out / "led_timeline.csv", ["t_s", "temp_C", "volts", "fires", "led", "regime"],
                     ([r[k] for k in ("t_s", "temp_C", "volts", "fires", "led", "regime")] for r in sr.timeline))
        rep = {"preset": cfg.preset, **sr.as_dict(), "led_sequence": [x.value for x in sr.led_sequence()]}
    elif v["amplitude"] is not None:
        st = step_tti(new_tti_state(p), canonical_train(v["amplitude"], tcfg), tcfg, p)
        rep = {"preset": cfg.preset, "amplitude": v["amplitude"], "final_led": st.led.value,
               "latched": st.latched, "events": st.events}
    else:
        raise ConfigError("tti needs a profile file or a canonical-train amplitude")
    io.write_json(out / "tti.json", rep, "tti")
    return rep


COMMANDS: Dict[str, Callable[[RunConfig, Path], dict]] = {
    "sweep": cmd_sweep, "pulse": cmd_pulse, "lif": cmd_lif, "firing-ratio": cmd_firing_ratio,
    "plasticity": cmd_plasticity, "endurance": cmd_endurance, "sample-array": cmd_sample_array,
    "train-dr": cmd_train_dr, "eval-dr": cmd_eval_dr, "synth-data": cmd_synth_data, "tti": cmd_tti,
}
assert set(COMMANDS) == set(SCHEMAS)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./out)")
    common.add_argument("--preset")
    parser = argparse.ArgumentParser(prog="reconfmem", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=f"run {name}")
        for key, (_, default) in SCHEMAS[name].items():
            sp.add_argument("--" + key.replace("_", "-"), dest="k_" + key, metavar="V",
                            help=f"default {default!r}")
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    cfg = parse_config(args.config, args.command) if args.config else defaults(args.command)
    for key in SCHEMAS[args.command]:
        val = getattr(args, "k_" + key)
        if val is not None:
            set_value(cfg, key, val)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.preset is not None:
        cfg.preset = args.preset
    cfg.out = args.out or os.environ.get(ENV_OUT) or "out"
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(serialize(cfg))
        COMMANDS[cfg.command](cfg, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolError, io.FormatError, ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{cfg.command}: wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
