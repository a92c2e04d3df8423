"""Named device parameter sets.

Dynamics constants are not measured quantities; each preset fixes them so
that one family of observables comes out right (see ``scripts/calibrate.py``).
"""

from __future__ import annotations

import math
from typing import Dict

from .device import DeviceParams


def _w_at(g: float, g_off: float = 1e-9, g_on: float = 1e-2) -> float:
    return math.log(g / g_off) / math.log(g_on / g_off)


# Stable filaments above 0.75 (g_crit ~ 1.8e-4 S, i_stab reached from ~0.56 V with 1 mA).
NONVOLATILE = DeviceParams()

# Same stack, thresholds of the volatile population.
VOLATILE = DeviceParams(v_set_nominal=0.40, v_set_sigma=0.19)

# Integrate-and-fire / plasticity device. The compliance gate opens at 3 V
# (i_stab / g_crit), between the STP (2.5 V) and LTP (3.5 V) trains.
# k_growth puts the first firing of the 0.1 ms / 1 V train at pulse 5.
LIF = DeviceParams(
    v_set_nominal=0.40, v_set_sigma=0.19,
    w_crit=_w_at(1e-4 / 3.0), i_stab=1e-4,
    tau_relax=3e-3, v0_growth=0.5, k_growth=627.0, k_stable=1e-3,
)

# TTI device: 0.3 V stays silent, 0.8 V fires without stabilising, 1.5 V
# stabilises (gate opens at 1.1 V).
TTI = DeviceParams(
    v_set_nominal=0.40, v_set_sigma=0.19,
    w_crit=_w_at(1e-4 / 1.1), i_stab=1e-4,
    tau_relax=1e-3, v0_growth=0.3, k_growth=600.0,
)

PRESETS: Dict[str, DeviceParams] = {
    "nonvolatile-1mA": NONVOLATILE,
    "volatile-10uA": VOLATILE,
    # 0.40 V ** 2 * 312.5 pS = 50 pW at the mean volatile SET voltage
    "volatile-50pW": VOLATILE.replace(g_off=312.5e-12),
    # vacancy-healed stack: needs ~9 V forming, higher SET, small window
    "bdt-treated": NONVOLATILE.replace(forming_voltage=9.0, v_set_nominal=0.8, g_on_cap=1e-5),
    # inert graphene bottom electrode: filaments never stabilise
    "graphene-be": TTI.replace(v_set_nominal=0.30, v_set_sigma=0.10, i_stab=math.inf,
                               v0_growth=0.1, k_growth=1000.0),
    "lif-calibrated": LIF,
    "tti-au": TTI,
}

# Compliance current each preset is meant to be run at.
DEFAULT_CC: Dict[str, float] = {
    "nonvolatile-1mA": 1e-3,
    "volatile-10uA": 1e-5,
    "volatile-50pW": 1e-5,
    "bdt-treated": 1e-3,
    "graphene-be": 1e-3,
    "lif-calibrated": 1e-5,
    "tti-au": 1e-3,
}


def get_preset(name: str) -> DeviceParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None
