"""Stimulus descriptions: piecewise-linear sweeps and rectangular pulse trains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple


@dataclass(frozen=True)
class SweepSpec:
    """Piecewise-linear voltage path sampled at ``points_per_segment`` points per segment."""

    vertices: Tuple[Tuple[float, float], ...]
    points_per_segment: int = 500

    def __post_init__(self):
        verts = tuple((float(t), float(v)) for t, v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 2:
            raise ValueError("sweep needs at least two vertices")
        for (t0, _), (t1, _) in zip(verts, verts[1:]):
            if not t1 > t0:
                raise ValueError("sweep vertex times must be strictly increasing")
        if self.points_per_segment < 1:
            raise ValueError("points_per_segment must be >= 1")

    @classmethod
    def bipolar(cls, v_max: float = 1.0, v_min: float = -1.0, segment_time: float = 0.25,
                points_per_segment: int = 500) -> "SweepSpec":
        """0 -> v_max -> 0 -> v_min -> 0, each leg lasting ``segment_time``."""
        ts = [k * segment_time for k in range(5)]
        vs = [0.0, v_max, 0.0, v_min, 0.0]
        return cls(tuple(zip(ts, vs)), points_per_segment)

    @classmethod
    def unipolar(cls, v_max: float = 1.0, segment_time: float = 0.25,
                 points_per_segment: int = 500) -> "SweepSpec":
        return cls(((0.0, 0.0), (segment_time, v_max), (2 * segment_time, 0.0)), points_per_segment)

    @property
    def duration(self) -> float:
        return self.vertices[-1][0] - self.vertices[0][0]

    def samples(self) -> Iterator[Tuple[float, float]]:
        """Yield (t, v) sample points, excluding the first vertex."""
        n = self.points_per_segment
        for (t0, v0), (t1, v1) in zip(self.vertices, self.vertices[1:]):
            for k in range(1, n + 1):
                yield t0 + (t1 - t0) * k / n, v0 + (v1 - v0) * k / n


@dataclass(frozen=True)
class PulseTrain:
    """Rectangular pulses separated by gaps held at a (read) level.

    Each period is ``pulse_width`` at ``pulse_amplitude`` followed by
    ``gap_width`` at ``gap_amplitude``.
    """

    n_pulses: int
    pulse_width: float
    pulse_amplitude: float
    gap_width: float
    gap_amplitude: float = 0.1

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if not (self.pulse_width > 0 and self.gap_width > 0):
            raise ValueError("pulse and gap widths must be positive")

    @property
    def period(self) -> float:
        return self.pulse_width + self.gap_width

    @property
    def duration(self) -> float:
        return self.n_pulses * self.period

    @property
    def shortest_segment(self) -> float:
        return min(self.pulse_width, self.gap_width)

    def segments(self) -> Iterator[Tuple[int, bool, float, float]]:
        """Yield (pulse_index, is_pulse, duration, voltage), pulse_index counting from 1."""
        for k in range(1, self.n_pulses + 1):
            yield k, True, self.pulse_width, self.pulse_amplitude
            yield k, False, self.gap_width, self.gap_amplitude


def concat_vertices(parts: Sequence[SweepSpec]) -> SweepSpec:
    """Join sweeps end to end, shifting times so they run back to back."""
    verts = list(parts[0].vertices)
    for spec in parts[1:]:
        t_shift = verts[-1][0] - spec.vertices[0][0]
        verts.extend((t + t_shift, v) for t, v in spec.vertices[1:])
    return SweepSpec(tuple(verts), parts[0].points_per_segment)
