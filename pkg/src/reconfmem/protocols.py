"""Pulse-train protocols: integrate-and-fire, firing-ratio statistics, plasticity."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .device import (DeviceParams, DeviceState, Regime, TracePoint, advance, classify_regime,
                     conductance_of, draw_set_threshold, new_state, point_of, read_current, relax)
from .stimulus import PulseTrain

I_FIRE = 1e-6
# steps per shortest pulse/gap segment
MIN_STEPS_PER_SEGMENT = 20


class ProtocolError(RuntimeError):
    pass


@dataclass
class FiringReport:
    fired: bool
    firing_pulse_index: Optional[int]
    i_max: float
    post_train_regime: Regime
    firing_events: List[int] = field(default_factory=list)
    gap_conductance: List[float] = field(default_factory=list)

    @property
    def n_events(self) -> int:
        return len(self.firing_events)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["post_train_regime"] = self.post_train_regime.value
        d["n_events"] = self.n_events
        return d


def step_size(train: PulseTrain, params: DeviceParams, dt: Optional[float] = None) -> float:
    h = min(params.dt_max, train.shortest_segment / MIN_STEPS_PER_SEGMENT)
    return h if dt is None else min(h, dt)


def run_pulse_train(state: DeviceState, train: PulseTrain, cc: float, params: DeviceParams, *,
                    i_fire: float = I_FIRE, reset_on_fire: bool = True, dt: Optional[float] = None,
                    record: bool = True) -> Tuple[DeviceState, List[TracePoint], FiringReport]:
    """Step the device through ``train``.

    A pulse is a firing event if the current reaches ``i_fire`` during it.
    With ``reset_on_fire`` a device still in the volatile regime at the end
    of a firing pulse snaps back to w = 0 (the thin filament dissociates)
    and a fresh SET threshold is drawn for the next integration cycle.

    ``gap_conductance`` holds the read conductance at the first step of
    every gap.
    """
    if not cc > 0:
        raise ValueError("compliance current must be positive")
    h_max = step_size(train, params, dt)
    trace: List[TracePoint] = []
    events: List[int] = []
    gap_g: List[float] = []
    i_max = 0.0
    fired_now = False
    for k, is_pulse, width, v in train.segments():
        n = max(1, math.ceil(width / h_max - 1e-9))
        h = width / n
        if is_pulse:
            fired_now = False
        for j in range(n):
            i = advance(state, v, cc, h, params)
            if record:
                trace.append(point_of(state, v, i, params))
            if i > i_max:
                i_max = i
            if is_pulse and i >= i_fire:
                fired_now = True
            elif j == 0 and not is_pulse:
                gap_g.append(_read_g(state, params))
        if is_pulse and fired_now:
            events.append(k)
            if reset_on_fire and state.w < params.w_crit:
                state.w = 0.0
                draw_set_threshold(state, params)
    report = FiringReport(
        fired=bool(events),
        firing_pulse_index=events[0] if events else None,
        i_max=i_max,
        post_train_regime=classify_regime(state, params),
        firing_events=events,
        gap_conductance=gap_g,
    )
    return state, trace, report


def _read_g(state: DeviceState, params: DeviceParams) -> float:
    return conductance_of(state.w, params) if state.formed else params.g_off


@dataclass
class LifReport:
    fired: bool
    firing_pulse_index: Optional[int]
    n_events: int
    recovered: bool
    recovery_time: Optional[float]
    w_after_train: float
    w_after_recovery: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def run_lif_cycle(state: DeviceState, train: PulseTrain, cc: float, params: DeviceParams, *,
                  t_recover: Optional[float] = None, i_fire: float = I_FIRE,
                  dt: Optional[float] = None) -> LifReport:
    """Integrate-and-fire on ``train`` followed by an idle at the read level.

    Recovery means w dropped below 1 % of ``w_crit``; ``recovery_time`` is
    the idle time needed for that (closed form for the exponential decay).
    """
    if classify_regime(state, params) is Regime.NONVOLATILE:
        raise ProtocolError("LIF needs a volatile device; this one holds a stable filament")
    if t_recover is None:
        t_recover = 10.0 * params.tau_relax
    state, _, rep = run_pulse_train(state, train, cc, params, i_fire=i_fire, dt=dt, record=False)
    w_end = state.w
    target = 1e-2 * params.w_crit
    if state.w >= params.w_crit:
        return LifReport(rep.fired, rep.firing_pulse_index, rep.n_events, False, None, w_end, w_end)
    needed = 0.0 if w_end <= target else params.tau_relax * math.log(w_end / target)
    # read level sits below every SET threshold, so the idle is pure relaxation
    relax(state, t_recover, params)
    state.last_v = params.read_voltage
    recovered = state.w < target
    return LifReport(rep.fired, rep.firing_pulse_index, rep.n_events, recovered,
                     needed if recovered else None, w_end, state.w)


@dataclass
class RatioStats:
    width: float
    ratios: List[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.ratios))

    @property
    def std(self) -> float:
        return float(np.std(self.ratios, ddof=1)) if len(self.ratios) > 1 else 0.0

    @property
    def quartiles(self) -> Tuple[float, float, float]:
        q = np.percentile(self.ratios, [25, 50, 75])
        return float(q[0]), float(q[1]), float(q[2])

    def as_dict(self) -> dict:
        return {"width": self.width, "mean": self.mean, "std": self.std,
                "quartiles": list(self.quartiles), "ratios": list(self.ratios)}


def firing_ratio(state_factory: Callable[[int], DeviceState], train_template: PulseTrain,
                 widths: Sequence[float], trials: int, pulses_per_trial: int, cc: float,
                 params: DeviceParams, *, i_fire: float = I_FIRE,
                 dt: Optional[float] = None) -> Dict[float, RatioStats]:
    """Fraction of pulses that fire, per pulse width.

    Trial ``j`` at every width starts from ``state_factory(j)``, so widths are
    compared on the same jitter streams. The gap of the template is kept.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    table: Dict[float, RatioStats] = {}
    for width in widths:
        ratios = []
        for j in range(trials):
            if width <= 0:
                ratios.append(0.0)
                continue
            train = dataclasses.replace(train_template, n_pulses=pulses_per_trial, pulse_width=width)
            st = state_factory(j)
            _, _, rep = run_pulse_train(st, train, cc, params, i_fire=i_fire, dt=dt, record=False)
            ratios.append(rep.n_events / pulses_per_trial)
        table[width] = RatioStats(width, ratios)
    return table


def seeded_factory(params: DeviceParams, base_seed: int = 0) -> Callable[[int], DeviceState]:
    """State factory giving trial ``j`` its own jitter stream."""
    def make(j: int) -> DeviceState:
        return new_state(params.replace(seed=base_seed * 100003 + j))
    return make


@dataclass
class PlasticityReport:
    outcome: str  # "STP", "LTP" or "none"
    gap_conductance: List[float]
    baseline_conductance: float
    final_conductance: float
    after_idle_conductance: float
    post_train_regime: Regime
    linearity_r2: Optional[float]
    i_max: float

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["post_train_regime"] = self.post_train_regime.value
        return d


def linearity_r2(y: Sequence[float]) -> Optional[float]:
    """R^2 of a least-squares line through (index, y)."""
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        return None
    x = np.arange(len(y), dtype=float)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return None
    slope, icpt = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + icpt)) ** 2))
    return 1.0 - ss_res / ss_tot


def run_plasticity(state: DeviceState, train: PulseTrain, cc: float, params: DeviceParams, *,
                   idle: Optional[float] = None, rise_factor: float = 1.5,
                   dt: Optional[float] = None) -> PlasticityReport:
    """Potentiating train followed by an idle, classified STP / LTP / none.

    LTP: the filament ends the train stable (w >= w_crit). STP: the gap
    read conductance rose at least ``rise_factor`` above baseline during the
    train but returned within 5 % of baseline after ``idle`` (default
    10 tau_relax). The linearity score is computed on gap reads taken while
    the device is non-volatile, or on all gap reads for STP.
    """
    if idle is None:
        idle = 10.0 * params.tau_relax
    g0 = _read_g(state, params)
    state, _, rep = run_pulse_train(state, train, cc, params, reset_on_fire=False, dt=dt, record=False)
    gaps = rep.gap_conductance
    g_end = _read_g(state, params)
    regime = classify_regime(state, params)
    relax(state, idle, params)
    g_idle = _read_g(state, params)

    if regime is Regime.NONVOLATILE:
        outcome = "LTP"
        g_stable = params.g_crit
        ramp = [g for g in gaps if g >= g_stable]
    elif gaps and max(gaps) >= rise_factor * g0 and g_idle <= 1.05 * g0:
        outcome = "STP"
        ramp = gaps
    else:
        outcome = "none"
        ramp = gaps
    return PlasticityReport(outcome, gaps, g0, g_end, g_idle, regime, linearity_r2(ramp), rep.i_max)
