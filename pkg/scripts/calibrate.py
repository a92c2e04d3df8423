#!/usr/bin/env python3
"""Re-derive the fitted dynamics constants of the shipped presets.

* LIF: interval of k_growth for which the jitter-free device first fires at
  pulse 5 of the 0.1 ms / 1 V train (the preset uses the midpoint).
* TTI: Flash and Solid amplitude thresholds of the canonical train.
"""

import argparse

from reconfmem.device import new_state
from reconfmem.presets import LIF, TTI, get_preset
from reconfmem.protocols import run_pulse_train
from reconfmem.stimulus import PulseTrain
from reconfmem.tti import TtiConfig, flash_threshold

LIF_TRAIN = PulseTrain(20, 1e-4, 1.0, 1e-4, 0.1)


def first_fire(k: float) -> int:
    p = LIF.replace(k_growth=k).without_jitter()
    _, _, rep = run_pulse_train(new_state(p), LIF_TRAIN, 1e-5, p, record=False)
    return rep.firing_pulse_index or 10**6


def k_edge(target: int, lo: float, hi: float, tol: float = 0.5) -> float:
    """Smallest k with first_fire(k) <= target (first_fire decreases with k)."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if first_fire(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", type=int, default=5)
    args = ap.parse_args()
    lo = k_edge(args.target, 10.0, 1e4)
    hi = k_edge(args.target - 1, 10.0, 1e4)
    print(f"LIF: first firing at pulse {args.target} for k_growth in [{lo:.1f}, {hi:.1f}); "
          f"midpoint {0.5 * (lo + hi):.0f}, preset {LIF.k_growth:g}")
    cfg = TtiConfig()
    for name in ("tti-au", "graphene-be"):
        p = get_preset(name).without_jitter()
        flash = flash_threshold(p, cfg)
        line = f"{name}: Flash from {flash:.3f} V"
        if p.i_stab != float("inf"):
            line += f", Solid from {flash_threshold(p, cfg, solid=True):.3f} V"
        print(line)


if __name__ == "__main__":
    main()
