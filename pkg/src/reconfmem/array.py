"""Device-to-device variation and pulse-programmed crossbar synapses."""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .device import READ_MARGIN, DeviceParams
from .presets import NONVOLATILE


@dataclass(frozen=True)
class VariationModel:
    yield_p: float = 0.93
    onoff_decades_mean: float = 5.5
    onoff_decades_sigma: float = 0.3
    v_set_mean: float = 0.29
    v_set_sigma: float = 0.10
    v_reset_mean: float = -0.44
    v_reset_sigma: float = 0.20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.yield_p <= 1.0:
            raise ValueError("yield_p must lie in [0, 1]")
        if min(self.onoff_decades_sigma, self.v_set_sigma, self.v_reset_sigma) < 0:
            raise ValueError("sigmas must be non-negative")


@dataclass(frozen=True)
class ConductanceUpdateModel:
    """Per-pulse potentiation/depression curve of one synaptic device.

    Without ``measured_curve`` the device follows the usual nonlinear pulse
    response: starting from g_min, ``n`` potentiating pulses give
    ``g_min + span * (1 - exp(-nu * n / N)) / (1 - exp(-nu))`` so that
    ``N = n_levels`` pulses cross the full window; depression mirrors this
    from g_max. ``nu`` -> 0 is a linear device, large ``nu`` saturates early.
    Setting ``alpha_p`` / ``alpha_d`` switches to plain exponential
    saturation onto the rails, ``g += alpha_p * (g_max - g)`` and
    ``g -= alpha_d * (g - g_min)``. These defaults are synthetic stand-ins
    for measured curves. With
    ``measured_curve = (potentiation, depression)`` conductance steps along
    the supplied tables instead.
    """

    g_min: float = 1e-5
    g_max: float = 1e-4
    n_levels: int = 800
    nonlinearity_p: float = 0.25
    nonlinearity_d: float = 0.25
    alpha_p: Optional[float] = None
    alpha_d: Optional[float] = None
    measured_curve: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = None

    def __post_init__(self):
        if not self.g_min < self.g_max:
            raise ValueError("need g_min < g_max")
        if self.n_levels < 1:
            raise ValueError("n_levels must be >= 1")
        if self.nonlinearity_p < 0 or self.nonlinearity_d < 0:
            raise ValueError("nonlinearity must be >= 0")
        for a in (self.alpha_p, self.alpha_d):
            if a is not None and not 0 < a < 1:
                raise ValueError("alpha_p and alpha_d must lie in (0, 1)")
        if self.measured_curve is not None:
            pot, dep = (tuple(float(x) for x in b) for b in self.measured_curve)
            if not pot or not dep:
                raise ValueError("measured curve needs potentiation and depression blocks")
            object.__setattr__(self, "measured_curve", (pot, dep))

    @property
    def g_range(self) -> float:
        return self.g_max - self.g_min

    @property
    def linear_p(self) -> bool:
        return self.alpha_p is None and self.nonlinearity_p == 0

    @property
    def linear_d(self) -> bool:
        return self.alpha_d is None and self.nonlinearity_d == 0

    @property
    def decay_p(self) -> float:
        """Per-pulse shrink factor of the distance to the potentiation asymptote."""
        if self.alpha_p is not None:
            return 1.0 - self.alpha_p
        return math.exp(-self.nonlinearity_p / self.n_levels)

    @property
    def decay_d(self) -> float:
        if self.alpha_d is not None:
            return 1.0 - self.alpha_d
        return math.exp(-self.nonlinearity_d / self.n_levels)

    @property
    def g_sat_p(self) -> float:
        """Asymptote of the potentiation curve (inf for a linear device)."""
        if self.alpha_p is not None:
            return self.g_max
        return self.g_min + self.g_range * _excess(self.nonlinearity_p)

    @property
    def g_sat_d(self) -> float:
        if self.alpha_d is not None:
            return self.g_min
        return self.g_max - self.g_range * _excess(self.nonlinearity_d)

    def step_p(self, g):
        """Conductance increase of one potentiating pulse from ``g`` (before clipping)."""
        if self.linear_p:
            return self.g_range / self.n_levels + 0 * np.asarray(g)
        return (self.g_sat_p - g) * (1.0 - self.decay_p)

    def step_d(self, g):
        if self.linear_d:
            return self.g_range / self.n_levels + 0 * np.asarray(g)
        return (g - self.g_sat_d) * (1.0 - self.decay_d)

    def potentiated(self, g: float, n: int = 1) -> float:
        if self.measured_curve is not None:
            pot = self.measured_curve[0]
            k = _nearest(pot, g)
            return pot[min(k + n, len(pot) - 1)]
        for _ in range(n):
            g = min(self.g_max, g + float(self.step_p(g)))
        return g

    def depressed(self, g: float, n: int = 1) -> float:
        if self.measured_curve is not None:
            dep = self.measured_curve[1]
            k = _nearest(dep, g)
            return dep[min(k + n, len(dep) - 1)]
        for _ in range(n):
            g = max(self.g_min, g - float(self.step_d(g)))
        return g


def _excess(nu: float) -> float:
    return math.inf if nu == 0 else 1.0 / -math.expm1(-nu)


def _nearest(table: Sequence[float], g: float) -> int:
    return int(np.argmin(np.abs(np.asarray(table) - g)))


def sample_update_models(n: int = 9, base: ConductanceUpdateModel = ConductanceUpdateModel(),
                         spread: float = 0.2, seed: int = 0) -> List[ConductanceUpdateModel]:
    """``n`` device curves with log-normally scattered level counts and nonlinearities."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        kn, kp, kd = np.exp(spread * rng.standard_normal(3))
        m = dataclasses.replace(base, n_levels=max(1, int(round(base.n_levels * kn))),
                                nonlinearity_p=float(base.nonlinearity_p * kp),
                                nonlinearity_d=float(base.nonlinearity_d * kd))
        if base.alpha_p is not None:
            m = dataclasses.replace(m, alpha_p=float(min(base.alpha_p * kp, 0.5)))
        if base.alpha_d is not None:
            m = dataclasses.replace(m, alpha_d=float(min(base.alpha_d * kd, 0.5)))
        out.append(m)
    return out


@dataclass
class CrossbarArray:
    """Conductance matrix ``g[row, col]``; dead cells sit at their g_min and ignore pulses."""

    g: np.ndarray
    functional: np.ndarray
    models: List[ConductanceUpdateModel]
    model_index: np.ndarray
    onoff_decades: Optional[np.ndarray] = None
    skipped_pulses: int = 0

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        self.functional = np.asarray(self.functional, dtype=bool)
        self.model_index = np.asarray(self.model_index, dtype=int)
        self._refresh_model_arrays()
        self.g = np.where(self.functional, np.clip(self.g, self.g_min, self.g_max), self.g_min)

    def _refresh_model_arrays(self) -> None:
        mi = self.model_index
        self.g_min = np.array([m.g_min for m in self.models])[mi]
        self.g_max = np.array([m.g_max for m in self.models])[mi]
        # linear curves get unit decay and a fixed step instead of an asymptote
        lin_p = np.array([m.linear_p for m in self.models])[mi]
        lin_d = np.array([m.linear_d for m in self.models])[mi]
        fixed = np.array([m.g_range / m.n_levels for m in self.models])[mi]
        sat_p = np.array([0.0 if m.linear_p else m.g_sat_p for m in self.models])[mi]
        sat_d = np.array([0.0 if m.linear_d else m.g_sat_d for m in self.models])[mi]
        k_p = 1.0 - np.array([m.decay_p for m in self.models])[mi]
        k_d = 1.0 - np.array([m.decay_d for m in self.models])[mi]
        self._step_coeffs = (lin_p, lin_d, fixed, sat_p, sat_d, k_p, k_d)
        self._measured = any(m.measured_curve is not None for m in self.models)

    @classmethod
    def uniform(cls, rows: int, cols: int, model: ConductanceUpdateModel = ConductanceUpdateModel(),
                functional: Optional[np.ndarray] = None) -> "CrossbarArray":
        func = np.ones((rows, cols), bool) if functional is None else functional
        return cls(np.full((rows, cols), model.g_min), func, [model], np.zeros((rows, cols), int))

    @property
    def rows(self) -> int:
        return self.g.shape[0]

    @property
    def cols(self) -> int:
        return self.g.shape[1]

    def step_p(self) -> np.ndarray:
        """Per-cell size of the next potentiating pulse (unclipped)."""
        lin_p, _, fixed, sat_p, _, k_p, _ = self._step_coeffs
        return np.where(lin_p, fixed, (sat_p - self.g) * k_p)

    def step_d(self) -> np.ndarray:
        _, lin_d, fixed, _, sat_d, _, k_d = self._step_coeffs
        return np.where(lin_d, fixed, (self.g - sat_d) * k_d)

    def model_at(self, r: int, c: int) -> ConductanceUpdateModel:
        return self.models[self.model_index[r, c]]

    def copy(self) -> "CrossbarArray":
        return CrossbarArray(self.g.copy(), self.functional.copy(), list(self.models),
                             self.model_index.copy(),
                             None if self.onoff_decades is None else self.onoff_decades.copy())

    def stats(self) -> dict:
        func = self.functional
        out = {"rows": self.rows, "cols": self.cols, "devices": int(func.size),
               "functional": int(func.sum()), "yield": float(func.mean())}
        if self.onoff_decades is not None and func.any():
            dec = self.onoff_decades[func]
            out.update({
                "onoff_decades_mean": float(dec.mean()),
                "onoff_decades_std": float(dec.std(ddof=1)) if dec.size > 1 else 0.0,
                "fraction_above_5_decades": float((dec > 5.0).mean()),
            })
        return out

    def pulse(self, signs: np.ndarray) -> int:
        """Apply at most one pulse per cell: +1 potentiate, -1 depress, 0 nothing.

        Cells are visited in row-major order. Returns the number of pulses
        that reached a functional device.
        """
        signs = np.asarray(signs)
        if signs.shape != self.g.shape:
            raise ValueError(f"pulse mask shape {signs.shape} != array shape {self.g.shape}")
        dead_hits = int(np.count_nonzero(signs[~self.functional]))
        self.skipped_pulses += dead_hits
        pot = (signs > 0) & self.functional
        dep = (signs < 0) & self.functional
        if self._measured:
            for r, c in zip(*np.nonzero(pot | dep)):
                m = self.model_at(r, c)
                self.g[r, c] = m.potentiated(self.g[r, c]) if pot[r, c] else m.depressed(self.g[r, c])
        else:
            g_new = np.where(pot, np.minimum(self.g + self.step_p(), self.g_max), self.g)
            self.g = np.where(dep, np.maximum(g_new - self.step_d(), self.g_min), g_new)
        return int(pot.sum() + dep.sum())


def sample_array(model: VariationModel, rows: int, cols: int,
                 base: DeviceParams = NONVOLATILE,
                 update_models: Optional[List[ConductanceUpdateModel]] = None,
                 cc_ref: float = 1e-3) -> Tuple[CrossbarArray, List[List[DeviceParams]]]:
    """Draw a rows x cols array of devices.

    Every cell is functional with probability ``yield_p``; its ON/OFF window
    (decades), SET and RESET voltages are Normal draws. The per-device
    ``g_off`` is chosen so that the ON state reached at ``cc_ref`` sits
    ``decades`` above it. Synaptic update curves are assigned round-robin.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    rng = np.random.default_rng(model.seed)
    functional = rng.random((rows, cols)) < model.yield_p
    decades = rng.normal(model.onoff_decades_mean, model.onoff_decades_sigma, (rows, cols))
    v_set = rng.normal(model.v_set_mean, model.v_set_sigma, (rows, cols))
    v_reset = rng.normal(model.v_reset_mean, model.v_reset_sigma, (rows, cols))
    floor = READ_MARGIN * base.read_voltage
    v_set = np.maximum(v_set, floor)
    v_reset = np.minimum(v_reset, -floor)

    update_models = update_models or [ConductanceUpdateModel()]
    index = (np.arange(rows * cols) % len(update_models)).reshape(rows, cols)
    arr = CrossbarArray(np.zeros((rows, cols)), functional, update_models, index, onoff_decades=decades)

    params: List[List[DeviceParams]] = []
    for r in range(rows):
        row = []
        for c in range(cols):
            g_on = min(base.g_on_cap, cc_ref / v_set[r, c])
            g_off = min(g_on / 10.0 ** decades[r, c], 0.5 * base.g_on_cap)
            row.append(base.replace(v_set_nominal=float(v_set[r, c]), v_reset_nominal=float(v_reset[r, c]),
                                    g_off=float(g_off), seed=int(model.seed * 1_000_003 + r * cols + c)))
        params.append(row)
    return arr, params


def potentiate(array: CrossbarArray, r: int, c: int, n_pulses: int = 1) -> float:
    """Apply ``n_pulses`` potentiating pulses to one cell; returns its new conductance."""
    if not array.functional[r, c]:
        warnings.warn(f"cell ({r}, {c}) is not functional; pulse ignored", RuntimeWarning)
        array.skipped_pulses += n_pulses
        return float(array.g[r, c])
    array.g[r, c] = array.model_at(r, c).potentiated(float(array.g[r, c]), n_pulses)
    return float(array.g[r, c])


def depress(array: CrossbarArray, r: int, c: int, n_pulses: int = 1) -> float:
    if not array.functional[r, c]:
        warnings.warn(f"cell ({r}, {c}) is not functional; pulse ignored", RuntimeWarning)
        array.skipped_pulses += n_pulses
        return float(array.g[r, c])
    array.g[r, c] = array.model_at(r, c).depressed(float(array.g[r, c]), n_pulses)
    return float(array.g[r, c])


def read_mvm(array: CrossbarArray, v_in: np.ndarray) -> np.ndarray:
    """Column currents ``i[c] = sum_r g[r, c] * v[r]`` (ideal wires).

    ``v_in`` may also be a (batch, rows) matrix.
    """
    v_in = np.asarray(v_in, dtype=float)
    if v_in.shape[-1] != array.rows:
        raise ValueError(f"input length {v_in.shape[-1]} != array rows {array.rows}")
    return v_in @ array.g


def map_weight(w_signed: float, g_min: float, g_max: float) -> Tuple[float, float]:
    """Canonical differential-pair targets: only one side is raised above g_min."""
    if abs(w_signed) > 1.0 + 1e-12:
        raise ValueError("weight must lie in [-1, 1]")
    w_signed = max(-1.0, min(1.0, w_signed))
    span = g_max - g_min
    if w_signed >= 0:
        return g_min + w_signed * span, g_min
    return g_min, g_min - w_signed * span


def pair_weight(array: CrossbarArray, r: int, c_plus: int, c_minus: int) -> float:
    m = array.model_at(r, c_plus)
    return float((array.g[r, c_plus] - array.g[r, c_minus]) / m.g_range)


def program_pair(array: CrossbarArray, r: int, c_plus: int, c_minus: int, w_signed: float) -> int:
    """Set a pair to ``w_signed`` with pulses from the fully depressed state.

    Both cells are first pushed to g_min, then the side carrying the weight
    receives the pulse count whose level is closest to the target. Returns
    the number of potentiating pulses used.
    """
    g_plus, g_minus = map_weight(w_signed, array.model_at(r, c_plus).g_min,
                                 array.model_at(r, c_plus).g_max)
    for c in (c_plus, c_minus):
        if array.functional[r, c]:
            array.g[r, c] = array.model_at(r, c).g_min
    c, target = (c_plus, g_plus) if w_signed >= 0 else (c_minus, g_minus)
    if not array.functional[r, c]:
        return 0
    m = array.model_at(r, c)
    g, best, best_n, n = m.g_min, m.g_min, 0, 0
    limit = 10 * m.n_levels + 1000
    while n < limit:
        if abs(g - target) < abs(best - target):
            best, best_n = g, n
        g_next = m.potentiated(g)
        if g_next <= g or g > target:
            break
        g, n = g_next, n + 1
    if abs(g - target) < abs(best - target):
        best, best_n = g, n
    array.g[r, c] = best
    return best_n
