"""Single-filament behavioral model of an Ag/MoS2 memristor.

The device is described by one scalar filament strength ``w`` in [0, 1].
Conductance is log-linear in ``w`` between ``g_off`` and ``g_on_cap``.

Dynamics, per integration step (exponential Euler, exact for frozen rates):

* positive bias above the SET threshold grows the filament,
  ``dw/dt = k * (exp((v_eff - v_th) / v0) - 1) * (1 - w)``, where
  ``v_eff = min(v, cc / g)`` is the voltage left across the device once the
  compliance current is reached. Growth therefore stalls at ``g = cc / v_th``.
* below ``w_crit`` the filament is thin and dissolves with time constant
  ``tau_relax`` whenever it exists (also while being driven).
* crossing ``w_crit`` requires the current at ``w_crit`` to reach ``i_stab``;
  otherwise the filament is held just below ``w_crit`` (compliance gate).
  Above ``w_crit`` the filament thickens at rate ``k_stable`` and never
  decays spontaneously.
* negative bias beyond the RESET threshold ruptures the filament,
  ``dw/dt = -k_rupture * (exp((v_th_reset - v) / v0) - 1) * w``.

SET/RESET thresholds are redrawn at the start of every positive/negative
excursion (and after a neuron self-reset), Gaussian and clamped to 3 sigma.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .stimulus import SweepSpec

# Jittered thresholds never come closer to zero than this multiple of the read level,
# so reads never disturb the state.
READ_MARGIN = 1.2
# SET/RESET detection: current ratio between consecutive sweep points.
JUMP_FACTOR = 10.0


class Regime(str, enum.Enum):
    PRISTINE = "Pristine"
    VOLATILE = "Volatile"
    NONVOLATILE = "NonVolatile"


@dataclass(frozen=True)
class DeviceParams:
    v_set_nominal: float = 0.29
    v_set_sigma: float = 0.10
    v_reset_nominal: float = -0.44
    v_reset_sigma: float = 0.20
    g_off: float = 1e-9
    g_on_cap: float = 1e-2
    w_crit: float = 0.75
    i_stab: float = 1e-4
    tau_relax: float = 0.05
    k_growth: float = 1e6
    v0_growth: float = 0.05
    k_rupture: float = 1e6
    forming_voltage: float = 0.0
    read_voltage: float = 0.1
    seed: int = 0
    # growth prefactor once the filament is stable; None means k_growth
    k_stable: Optional[float] = None
    jitter: bool = True

    def __post_init__(self):
        if not self.g_off > 0:
            raise ValueError("g_off must be positive")
        if not self.g_on_cap > self.g_off:
            raise ValueError("g_on_cap must exceed g_off")
        if not 0.0 < self.w_crit < 1.0:
            raise ValueError("w_crit must lie in (0, 1)")
        if not self.tau_relax > 0:
            raise ValueError("tau_relax must be positive")
        if not self.v_set_nominal > 0 > self.v_reset_nominal:
            raise ValueError("need v_set_nominal > 0 > v_reset_nominal")
        if self.v_set_sigma < 0 or self.v_reset_sigma < 0:
            raise ValueError("threshold sigmas must be non-negative")
        if self.v0_growth <= 0 or self.k_growth < 0 or self.k_rupture < 0:
            raise ValueError("growth/rupture constants must be positive")
        if self.read_voltage < 0 or self.forming_voltage < 0:
            raise ValueError("read and forming voltages must be non-negative")

    @cached_property
    def log_ratio(self) -> float:
        return math.log(self.g_on_cap / self.g_off)

    @cached_property
    def g_crit(self) -> float:
        return conductance_of(self.w_crit, self)

    @property
    def k_stable_eff(self) -> float:
        return self.k_growth if self.k_stable is None else self.k_stable

    @property
    def dt_max(self) -> float:
        return self.tau_relax / 100.0

    def replace(self, **changes) -> "DeviceParams":
        return dataclasses.replace(self, **changes)

    def without_jitter(self) -> "DeviceParams":
        return dataclasses.replace(self, jitter=False)


@dataclass
class DeviceState:
    """Evolving device state. Protocol functions update it in place."""

    w: float = 0.0
    formed: bool = False
    regime: Regime = Regime.PRISTINE
    t: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    v_set_th: float = 0.0
    v_reset_th: float = 0.0
    last_v: float = 0.0

    def copy(self) -> "DeviceState":
        new = dataclasses.replace(self)
        new.rng = np.random.default_rng()
        new.rng.bit_generator.state = self.rng.bit_generator.state
        return new


class TracePoint(NamedTuple):
    t: float
    v: float
    i: float
    w: float
    g: float


@dataclass
class SwitchingMetrics:
    switched: bool
    v_set: Optional[float] = None
    v_reset: Optional[float] = None
    on_off_ratio: Optional[float] = None
    turn_on_slope_mv_per_decade: Optional[float] = None
    switching_power: Optional[float] = None

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class EnduranceReport:
    cycles: int
    successes: int
    per_cycle: List[bool]
    on_off_ratios: List[float]

    @property
    def success_fraction(self) -> float:
        return self.successes / self.cycles

    @property
    def passed(self) -> bool:
        return self.success_fraction >= 0.99

    def as_dict(self) -> dict:
        return {
            "cycles": self.cycles,
            "successes": self.successes,
            "success_fraction": self.success_fraction,
            "passed": self.passed,
            "min_on_off_ratio": min(self.on_off_ratios) if self.on_off_ratios else None,
        }


def conductance_of(w: float, params: DeviceParams) -> float:
    """g_off * (g_on_cap / g_off) ** w."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"filament strength {w!r} outside [0, 1]")
    return params.g_off * math.exp(w * params.log_ratio)


def strength_of(g: float, params: DeviceParams) -> float:
    """Inverse of conductance_of, clipped to [0, 1]."""
    w = math.log(g / params.g_off) / params.log_ratio
    return min(1.0, max(0.0, w))


def new_state(params: DeviceParams, w: float = 0.0, formed: Optional[bool] = None) -> DeviceState:
    """Fresh state with its own jitter stream seeded from ``params.seed``.

    A device created with ``w > 0`` is considered formed.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    if formed is None:
        formed = w > 0.0
    state = DeviceState(w=w, formed=formed, rng=np.random.default_rng(params.seed),
                        v_set_th=params.v_set_nominal, v_reset_th=params.v_reset_nominal)
    state.regime = classify_regime(state, params)
    return state


def classify_regime(state: DeviceState, params: DeviceParams) -> Regime:
    if not state.formed:
        return Regime.PRISTINE
    return Regime.NONVOLATILE if state.w >= params.w_crit else Regime.VOLATILE


def draw_set_threshold(state: DeviceState, params: DeviceParams) -> float:
    v = params.v_set_nominal
    if params.jitter and params.v_set_sigma > 0:
        z = min(3.0, max(-3.0, state.rng.standard_normal()))
        v += params.v_set_sigma * z
    state.v_set_th = max(v, READ_MARGIN * params.read_voltage)
    return state.v_set_th


def draw_reset_threshold(state: DeviceState, params: DeviceParams) -> float:
    v = params.v_reset_nominal
    if params.jitter and params.v_reset_sigma > 0:
        z = min(3.0, max(-3.0, state.rng.standard_normal()))
        v += params.v_reset_sigma * z
    state.v_reset_th = min(v, -READ_MARGIN * params.read_voltage)
    return state.v_reset_th


def _compliance_cap(cc: float, v_th: float, p: DeviceParams) -> float:
    # strength at which cc / g(w) == v_th
    return min(1.0, math.log(cc / (v_th * p.g_off)) / p.log_ratio)


def advance(state: DeviceState, v: float, cc: float, dt: float, p: DeviceParams) -> float:
    """Advance ``state`` in place by ``dt`` at constant bias ``v``; return the current."""
    if not math.isfinite(v):
        raise ValueError(f"non-finite voltage {v!r}")
    if v > 0.0 and state.last_v <= 0.0:
        draw_set_threshold(state, p)
    elif v < 0.0 and state.last_v >= 0.0:
        draw_reset_threshold(state, p)
    state.last_v = v
    state.t += dt

    if not state.formed:
        if v != 0.0 and abs(v) >= p.forming_voltage:
            state.formed = True
        else:
            return math.copysign(min(p.g_off * abs(v), cc), v) if v else 0.0

    w = state.w
    w_crit = p.w_crit
    log_ratio = p.log_ratio
    g = p.g_off * math.exp(w * log_ratio)
    decay = 1.0 / p.tau_relax if w < w_crit else 0.0

    if v > 0.0:
        v_th = state.v_set_th
        v_eff = min(v, cc / g)
        x = (v_eff - v_th) / p.v0_growth
        if x > 0.0:
            cap = _compliance_cap(cc, v_th, p)
            if w < w_crit:
                rate = p.k_growth * math.expm1(x)
                total = rate + decay
                w_inf = rate / total
                w_new = w_inf + (w - w_inf) * math.exp(-total * dt)
                if w_new > cap:
                    w_new = cap
                if w_new >= w_crit:
                    i_gate = min(p.g_crit * v, cc)
                    w_new = w_crit if i_gate >= p.i_stab else math.nextafter(w_crit, 0.0)
            else:
                rate = p.k_stable_eff * math.expm1(x)
                w_new = 1.0 - (1.0 - w) * math.exp(-rate * dt)
                if w_new > cap:
                    w_new = max(w, cap)
        else:
            w_new = w * math.exp(-decay * dt) if decay else w
    elif v < 0.0:
        x = (state.v_reset_th - v) / p.v0_growth
        rate = p.k_rupture * math.expm1(x) if x > 0.0 else 0.0
        w_new = w * math.exp(-(rate + decay) * dt)
    else:
        w_new = w * math.exp(-decay * dt) if decay else w

    w_new = min(1.0, max(0.0, w_new))
    state.w = w_new
    state.regime = Regime.NONVOLATILE if w_new >= w_crit else Regime.VOLATILE
    if v == 0.0:
        return 0.0
    g_new = p.g_off * math.exp(w_new * log_ratio)
    return math.copysign(min(g_new * abs(v), cc), v)


def _check_step_args(v: float, cc: float, dt: float, p: DeviceParams) -> None:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt > p.dt_max * (1 + 1e-9):
        raise ValueError(f"dt={dt:g} exceeds dt_max={p.dt_max:g}")
    if not cc > 0:
        raise ValueError("compliance current must be positive")


def step(state: DeviceState, v: float, cc: float, dt: float,
         params: DeviceParams) -> Tuple[DeviceState, TracePoint]:
    """One explicit integration step. ``state`` is updated in place and returned."""
    _check_step_args(v, cc, dt, params)
    i = advance(state, v, cc, dt, params)
    return state, point_of(state, v, i, params)


def point_of(state: DeviceState, v: float, i: float, params: DeviceParams) -> TracePoint:
    g = params.g_off * math.exp(state.w * params.log_ratio) if state.formed else params.g_off
    return TracePoint(state.t, v, i, state.w, g)


def hold(state: DeviceState, v: float, duration: float, cc: float, params: DeviceParams,
         dt: Optional[float] = None) -> float:
    """Hold a constant bias for ``duration`` using steps no longer than dt_max; return last current."""
    if duration <= 0:
        return 0.0
    dt_lim = params.dt_max if dt is None else min(dt, params.dt_max)
    n = max(1, math.ceil(duration / dt_lim - 1e-9))
    h = duration / n
    i = 0.0
    for _ in range(n):
        i = advance(state, v, cc, h, params)
    return i


def relax(state: DeviceState, duration: float, params: DeviceParams) -> DeviceState:
    """Zero-bias idle, integrated in closed form (the decay law is linear)."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    state.last_v = 0.0
    state.t += duration
    if state.formed and state.w < params.w_crit:
        state.w *= math.exp(-duration / params.tau_relax)
        state.regime = Regime.VOLATILE
    return state


def read_current(state: DeviceState, params: DeviceParams) -> float:
    """Non-perturbing read at ``params.read_voltage``."""
    g = conductance_of(state.w, params) if state.formed else params.g_off
    return g * params.read_voltage


def run_iv_sweep(state: DeviceState, sweep: SweepSpec, cc: float, params: DeviceParams,
                 dt: Optional[float] = None) -> Tuple[DeviceState, List[TracePoint]]:
    """Drive the device along ``sweep``; one trace point per sweep sample.

    Each sample interval is split into equal sub-steps no longer than
    ``min(dt, params.dt_max)``, holding the sample's voltage.
    """
    if sweep is None or not sweep.vertices:
        raise ValueError("empty sweep")
    if not cc > 0:
        raise ValueError("compliance current must be positive")
    dt_lim = params.dt_max if dt is None else min(dt, params.dt_max)
    trace: List[TracePoint] = []
    t_prev = sweep.vertices[0][0]
    for t, v in sweep.samples():
        span = t - t_prev
        n = max(1, math.ceil(span / dt_lim - 1e-9))
        h = span / n
        i = 0.0
        for _ in range(n):
            i = advance(state, v, cc, h, params)
        trace.append(point_of(state, v, i, params))
        t_prev = t
    return state, trace


def extract_switching_metrics(trace: Sequence[TracePoint], params: DeviceParams) -> SwitchingMetrics:
    """SET/RESET voltages, read ON/OFF ratio, turn-on slope and switching power.

    SET is the first rising-branch point whose current is at least 10x the
    previous point's; RESET is the analogous drop on the negative branch.
    """
    set_idx = None
    for k in range(1, len(trace)):
        a, b = trace[k - 1], trace[k]
        if b.v > a.v > 0 and a.i > 0 and b.i >= JUMP_FACTOR * a.i:
            set_idx = k
            break
    if set_idx is None:
        return SwitchingMetrics(switched=False)

    a, b = trace[set_idx - 1], trace[set_idx]
    decades = math.log10(b.i / a.i)
    slope = (b.v - a.v) * 1e3 / decades

    reset_idx = None
    for k in range(set_idx + 1, len(trace)):
        c, d = trace[k - 1], trace[k]
        if d.v < c.v < 0 and abs(d.i) * JUMP_FACTOR <= abs(c.i):
            reset_idx = k
            break

    v_read = params.read_voltage
    pre = [p for p in trace[:set_idx] if p.v > 0]
    post = []
    for k in range(set_idx + 1, len(trace)):
        c, d = trace[k - 1], trace[k]
        if d.v <= 0:
            break
        if d.v < c.v:
            post.append(d)
    on_off = None
    if pre and post:
        p_pre = min(pre, key=lambda p: abs(p.v - v_read))
        p_post = min(post, key=lambda p: abs(p.v - v_read))
        on_off = (p_post.i / p_post.v) / (p_pre.i / p_pre.v)
    return SwitchingMetrics(
        switched=True,
        v_set=b.v,
        v_reset=trace[reset_idx].v if reset_idx is not None else None,
        on_off_ratio=on_off,
        turn_on_slope_mv_per_decade=slope,
        switching_power=a.v * a.i,
    )


def run_endurance(state: DeviceState, cycles: int, cc: float, params: DeviceParams,
                  sweep: Optional[SweepSpec] = None, min_ratio: float = 10.0) -> EnduranceReport:
    """Repeated SET/RESET sweeps; a cycle succeeds if the read ON/OFF ratio reaches ``min_ratio``.

    The ON read follows the positive half-sweep, the OFF read follows the
    negative half. Both are non-perturbing reads of the filament state.
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    sweep = sweep or SweepSpec.bipolar(segment_time=0.1, points_per_segment=200)
    verts = sweep.vertices
    # split after the positive excursion returns to zero
    split = next(k for k in range(1, len(verts)) if verts[k][1] <= 0 and verts[k - 1][1] > 0)
    pos = SweepSpec(verts[: split + 1], sweep.points_per_segment)
    neg = SweepSpec(verts[split:], sweep.points_per_segment) if split < len(verts) - 1 else None
    per_cycle, ratios = [], []
    for _ in range(cycles):
        _sweep_quiet(state, pos, cc, params)
        on = read_current(state, params)
        if neg is not None:
            _sweep_quiet(state, neg, cc, params)
        off = read_current(state, params)
        ratio = on / off
        ratios.append(ratio)
        per_cycle.append(ratio >= min_ratio)
    return EnduranceReport(cycles, sum(per_cycle), per_cycle, ratios)


def _sweep_quiet(state: DeviceState, sweep: SweepSpec, cc: float, params: DeviceParams) -> None:
    dt_lim = params.dt_max
    t_prev = sweep.vertices[0][0]
    for t, v in sweep.samples():
        span = t - t_prev
        n = max(1, math.ceil(span / dt_lim - 1e-9))
        h = span / n
        for _ in range(n):
            advance(state, v, cc, h, params)
        t_prev = t
