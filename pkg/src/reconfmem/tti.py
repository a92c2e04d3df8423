"""Tri-mode time-temperature indicator driven by one volatile memristor.

Temperature readings become bursts of voltage pulses. The LED is off when a
burst leaves the device silent, flashes when the device fires but its
filament stays volatile, and turns solid (latched for good) once the
filament stabilises.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .device import DeviceParams, DeviceState, Regime, classify_regime, new_state, relax
from .protocols import I_FIRE, run_pulse_train
from .stimulus import PulseTrain


class Led(str, enum.Enum):
    OFF = "Off"
    FLASH = "Flash"
    SOLID = "Solid"


@dataclass(frozen=True)
class TtiConfig:
    # (temperature degC, pulse amplitude V), strictly increasing in both
    calibration: Tuple[Tuple[float, float], ...] = ((4.0, 0.3), (12.0, 0.8), (25.0, 1.5))
    pulse_width: float = 0.2e-3
    gap_width: float = 0.1e-3
    gap_amplitude: float = 0.1
    pulses_per_burst: int = 100
    bursts: int = 10
    burst_idle: float = 1.0
    i_fire: float = I_FIRE
    cc: float = 1e-3

    def __post_init__(self):
        cal = tuple((float(t), float(v)) for t, v in self.calibration)
        object.__setattr__(self, "calibration", cal)
        if len(cal) < 2:
            raise ValueError("need at least two calibration points")
        for (t0, v0), (t1, v1) in zip(cal, cal[1:]):
            if not (t1 > t0 and v1 > v0):
                raise ValueError("temperature-to-voltage map must be increasing")

    def temp_to_volts(self, temp: float) -> float:
        """Piecewise-linear through the calibration points, extrapolated, floored at 0 V."""
        ts = [t for t, _ in self.calibration]
        vs = [v for _, v in self.calibration]
        if temp <= ts[0]:
            k = 0
        elif temp >= ts[-1]:
            k = len(ts) - 2
        else:
            k = int(np.searchsorted(ts, temp, side="right")) - 1
        slope = (vs[k + 1] - vs[k]) / (ts[k + 1] - ts[k])
        return max(0.0, vs[k] + slope * (temp - ts[k]))

    def burst(self, amplitude: float) -> PulseTrain:
        return PulseTrain(self.pulses_per_burst, self.pulse_width, amplitude,
                          self.gap_width, self.gap_amplitude)


@dataclass
class TtiState:
    device: DeviceState
    led: Led = Led.OFF
    latched: bool = False
    events: List[dict] = field(default_factory=list)


def new_tti_state(params: DeviceParams) -> TtiState:
    return TtiState(new_state(params))


def temp_to_pulses(series: Sequence[Tuple[float, float]], config: TtiConfig) -> List[PulseTrain]:
    """One burst per (t, degC) sample, amplitude from the calibration map."""
    times = [t for t, _ in series]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("temperature series must be strictly time-ordered")
    return [config.burst(config.temp_to_volts(temp)) for _, temp in series]


def canonical_train(amplitude: float, config: TtiConfig) -> List[PulseTrain]:
    """``bursts`` x ``pulses_per_burst`` pulses at one amplitude (the 100x10 train)."""
    return [config.burst(amplitude)] * config.bursts


def _apply_burst(state: TtiState, burst: PulseTrain, config: TtiConfig,
                 params: DeviceParams) -> int:
    dev = state.device
    _, _, rep = run_pulse_train(dev, burst, config.cc, params, i_fire=config.i_fire,
                                reset_on_fire=True, record=False)
    if rep.n_events:
        state.events.append({"t": dev.t, "event": "fire", "count": rep.n_events})
    if not state.latched and classify_regime(dev, params) is Regime.NONVOLATILE:
        state.latched = True
        state.events.append({"t": dev.t, "event": "latch"})
    return rep.n_events


def _led_for(state: TtiState, fired: int) -> Led:
    if state.latched:
        return Led.SOLID
    return Led.FLASH if fired else Led.OFF


def step_tti(state: TtiState, train: Union[PulseTrain, Sequence[PulseTrain]], config: TtiConfig,
             params: DeviceParams) -> TtiState:
    """Run bursts (idle ``burst_idle`` at 0 V between them) and update the LED.

    The LED reflects this whole train: Solid once latched, Flash if any
    burst fired, Off otherwise.
    """
    bursts = [train] if isinstance(train, PulseTrain) else list(train)
    fired = 0
    for k, burst in enumerate(bursts):
        if k:
            relax(state.device, config.burst_idle, params)
        fired += _apply_burst(state, burst, config, params)
    state.led = _led_for(state, fired)
    return state


@dataclass
class ScenarioReport:
    timeline: List[dict]
    events: List[dict]
    final_led: Led
    latched: bool

    def led_sequence(self) -> List[Led]:
        """LED states with consecutive repeats collapsed."""
        seq: List[Led] = []
        for row in self.timeline:
            led = Led(row["led"])
            if not seq or seq[-1] is not led:
                seq.append(led)
        return seq

    def as_dict(self) -> dict:
        return {"final_led": self.final_led.value, "latched": self.latched,
                "timeline": self.timeline, "events": self.events}


def run_scenario(profile: Sequence[Tuple[float, float]], config: TtiConfig,
                 params: DeviceParams, state: Optional[TtiState] = None) -> ScenarioReport:
    """Feed a (t_s, degC) profile through the indicator, one burst per reading.

    Between readings the device idles at 0 V. Each reading's LED state is
    taken from its own burst (Solid stays Solid).
    """
    bursts = temp_to_pulses(profile, config)
    state = state or new_tti_state(params)
    t_dev0 = state.device.t
    timeline = []
    for k, ((t, temp), burst) in enumerate(zip(profile, bursts)):
        if k:
            gap = (t - profile[k - 1][0]) - bursts[k - 1].duration
            relax(state.device, max(gap, 0.0), params)
        fired = _apply_burst(state, burst, config, params)
        state.led = _led_for(state, fired)
        timeline.append({"t_s": t, "temp_C": temp, "volts": burst.pulse_amplitude,
                         "fires": fired, "led": state.led.value,
                         "regime": classify_regime(state.device, params).value})
    events = [dict(e, t=e["t"] - t_dev0 + (profile[0][0] if profile else 0.0)) for e in state.events]
    return ScenarioReport(timeline, events, state.led, state.latched)


def flash_threshold(params: DeviceParams, config: TtiConfig, lo: float = 0.0, hi: float = 3.0,
                    tol: float = 1e-3, solid: bool = False) -> float:
    """Smallest burst amplitude reaching Flash (or Solid) on a fresh device, by bisection."""
    target = Led.SOLID if solid else Led.FLASH

    def reaches(v: float) -> bool:
        st = step_tti(new_tti_state(params), canonical_train(v, config), config, params)
        return st.led is Led.SOLID if solid else st.led in (Led.FLASH, Led.SOLID)

    if not reaches(hi):
        raise ValueError(f"no {target.value} below {hi} V")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if reaches(mid):
            hi = mid
        else:
            lo = mid
    return hi
