"""Excitation schedules: major loops, reversal curves, minor loops.

A schedule is an ordered list of linear H ramps. Expansion convention: the
first segment contributes ``linspace(start, end, count)`` (both endpoints
included); every later segment shares its start with the previous end and
contributes ``count`` samples excluding that shared point. Total sample
count is therefore the sum of the segment counts.

Reversal fields are located by simulating a dense sweep on a copy of the
plane and linearly interpolating the H value of the first B crossing, which
gives sub-grid accuracy. Before every recorded schedule the plane history
is reconditioned from deep negative saturation; Preisach rate independence
makes the conditioning path insensitive to sampling, so it is applied as a
short sequence of extremal fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preisach import PreisachPlane
from .trace import HysteresisTrace

__all__ = [
    "ExcitationSchedule",
    "ExperimentSpec",
    "EXPERIMENTS",
    "CURVE_NAMES",
    "build_major_schedule",
    "build_forc_schedule",
    "build_minor_schedule",
    "run_schedule",
    "generate_experiment_traces",
]

CURVE_NAMES = ("major", "forc1", "forc2", "minor1", "minor2")

_SCAN_SAMPLES = 4096


@dataclass(frozen=True)
class ExcitationSchedule:
    """Ordered (start_H, end_H, sample_count) linear ramps."""

    segments: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        prev_end = None
        for start, end, count in self.segments:
            if count < 1:
                raise ValueError("every segment needs sample_count >= 1")
            if prev_end is not None and start != prev_end:
                raise ValueError("consecutive segments must share endpoints")
            prev_end = end

    def samples(self) -> np.ndarray:
        parts = []
        for k, (start, end, count) in enumerate(self.segments):
            if k == 0:
                parts.append(np.linspace(start, end, count))
            else:
                parts.append(np.linspace(start, end, count + 1)[1:])
        return np.concatenate(parts)

    def __len__(self) -> int:
        return sum(count for _, _, count in self.segments)


@dataclass(frozen=True)
class ExperimentSpec:
    """Targets of one experiment: saturation, FORC origins, minor-loop peaks."""

    b_max: float
    forc_origins: tuple[float, float]
    minor_maxima: tuple[float, float]
    train_len: int = 595
    forc_lens: tuple[int, int] = (199, 399)
    minor_lens: tuple[int, int] = (399, 399)

    def __post_init__(self):
        if any(o >= self.b_max for o in self.forc_origins):
            raise ValueError("FORC origins must lie below b_max")
        if any(p >= self.b_max for p in self.minor_maxima):
            raise ValueError("minor-loop maxima must lie below b_max")
        if self.train_len < 2 or any(n < 2 for n in self.forc_lens + self.minor_lens):
            raise ValueError("sequence lengths must be at least 2")


EXPERIMENTS: dict[int, ExperimentSpec] = {
    1: ExperimentSpec(b_max=1.7, forc_origins=(1.25, 0.5), minor_maxima=(1.25, 1.1)),
    2: ExperimentSpec(b_max=1.25, forc_origins=(1.2, 1.0), minor_maxima=(1.0, 0.8)),
    3: ExperimentSpec(b_max=1.3, forc_origins=(1.0, 0.75), minor_maxima=(1.0, 0.75)),
    4: ExperimentSpec(b_max=1.5, forc_origins=(1.25, 0.75), minor_maxima=(0.9, 0.7)),
}


def _split_count(total: int, n_segments: int = 2) -> tuple[int, ...]:
    """Allocate samples across equal-arc segments (largest share first)."""
    base = total // n_segments
    extra = total - base * n_segments
    return tuple(base + (1 if k < extra else 0) for k in range(n_segments))


def _interp_crossing(h0: float, b0: float, h1: float, b1: float, target: float) -> float:
    if b1 == b0:
        return h1
    return h0 + (target - b0) * (h1 - h0) / (b1 - b0)


def _ascending_crossing(plane: PreisachPlane, target_b: float) -> float:
    """H where B first reaches target_b on the ascent from deep negative saturation."""
    sim = plane.copy()
    sim.saturate_negative()
    h_prev = -sim.h_sat
    b_prev = sim.apply(h_prev)
    if b_prev >= target_b:
        return h_prev
    for h in np.linspace(-sim.h_sat, sim.h_sat, _SCAN_SAMPLES)[1:]:
        b = sim.apply(h)
        if b >= target_b:
            return _interp_crossing(h_prev, b_prev, float(h), b, target_b)
        h_prev, b_prev = float(h), b
    raise ValueError(
        f"B = {target_b} T is unreachable: plane saturates at {sim.saturation_b:.6f} T"
    )


def _descending_crossing(plane: PreisachPlane, h_start: float, target_b: float) -> float:
    """H where B first falls to target_b while descending from the given state."""
    sim = plane.copy()
    h_prev = h_start
    b_prev = sim.apply(h_start)
    if b_prev <= target_b:
        return h_prev
    for h in np.linspace(h_start, -sim.h_sat, _SCAN_SAMPLES)[1:]:
        b = sim.apply(h)
        if b <= target_b:
            return _interp_crossing(h_prev, b_prev, float(h), b, target_b)
        h_prev, b_prev = float(h), b
    raise ValueError(f"B never crossed {target_b} T while descending from H = {h_start}")


def _major_reversal_field(spec: ExperimentSpec, plane: PreisachPlane) -> float:
    if spec.b_max > plane.saturation_b:
        raise ValueError(
            f"b_max = {spec.b_max} T exceeds plane saturation {plane.saturation_b:.6f} T"
        )
    return _ascending_crossing(plane, spec.b_max)


def build_major_schedule(spec: ExperimentSpec, plane: PreisachPlane) -> ExcitationSchedule:
    """Full cycle between the fields where |B| first reaches b_max."""
    h_up = _major_reversal_field(spec, plane)
    n_up, n_down = _split_count(spec.train_len)
    return ExcitationSchedule(((-h_up, h_up, n_up), (h_up, -h_up, n_down)))


def build_forc_schedule(
    spec: ExperimentSpec, plane: PreisachPlane, origin_b: float, length: int
) -> ExcitationSchedule:
    """Descend the upper major branch to the origin, then sweep back up."""
    if origin_b > spec.b_max:
        raise ValueError("FORC origin cannot exceed b_max")
    h_up = _major_reversal_field(spec, plane)
    top = plane.copy()
    top.saturate_negative()
    top.apply(-top.h_sat)
    top.apply(h_up)
    h_rev = _descending_crossing(top, h_up, origin_b)
    n_down, n_up_again = _split_count(length)
    return ExcitationSchedule(((h_up, h_rev, n_down), (h_rev, h_up, n_up_again)))


def build_minor_schedule(
    spec: ExperimentSpec, plane: PreisachPlane, peak_b: float, length: int
) -> ExcitationSchedule:
    """One closed cycle between the fields where B first crosses -peak_b and +peak_b."""
    if peak_b > spec.b_max:
        raise ValueError("minor-loop peak cannot exceed b_max")
    h_plus = _ascending_crossing(plane, peak_b)
    at_peak = plane.copy()
    at_peak.saturate_negative()
    at_peak.apply(-at_peak.h_sat)
    at_peak.apply(h_plus)
    h_minus = _descending_crossing(at_peak, h_plus, -peak_b)
    n_up, n_down = _split_count(length)
    return ExcitationSchedule(((h_minus, h_plus, n_up), (h_plus, h_minus, n_down)))


def run_schedule(plane: PreisachPlane, schedule: ExcitationSchedule) -> HysteresisTrace:
    """Drive the plane along every schedule sample; the plane keeps the history."""
    hs = schedule.samples()
    bs = np.empty(len(hs))
    for k, h in enumerate(hs):
        bs[k] = plane.apply(float(h))
    return HysteresisTrace(h=hs, b=bs)


def _condition(plane: PreisachPlane, fields: list[float]) -> None:
    plane.saturate_negative()
    for h in fields:
        plane.apply(h)


def generate_experiment_traces(
    spec: ExperimentSpec, plane: PreisachPlane
) -> dict[str, HysteresisTrace]:
    """Produce the five traces of one experiment on fresh copies of the plane.

    Every curve is recorded after reconditioning from deep negative
    saturation, so the traces are independent of any prior plane state:

    - major: condition to the loop bottom via (-h_sat, +h_up, -h_up) so the
      recorded cycle is the closed steady loop;
    - forc k: condition to the loop top, record descent to the origin and
      the reversal sweep back to the top;
    - minor k: condition to (-h_sat, h_plus, h_minus), record the closed
      cycle between the crossing fields.
    """
    h_up = _major_reversal_field(spec, plane)
    traces: dict[str, HysteresisTrace] = {}

    major = build_major_schedule(spec, plane)
    p = plane.copy()
    _condition(p, [-p.h_sat, h_up, -h_up])
    traces["major"] = run_schedule(p, major)

    for k, (origin, length) in enumerate(zip(spec.forc_origins, spec.forc_lens), start=1):
        sched = build_forc_schedule(spec, plane, origin, length)
        p = plane.copy()
        _condition(p, [-p.h_sat, h_up])
        traces[f"forc{k}"] = run_schedule(p, sched)

    for k, (peak, length) in enumerate(zip(spec.minor_maxima, spec.minor_lens), start=1):
        sched = build_minor_schedule(spec, plane, peak, length)
        h_minus, h_plus = sched.segments[0][0], sched.segments[0][1]
        p = plane.copy()
        _condition(p, [-p.h_sat, h_plus, h_minus])
        traces[f"minor{k}"] = run_schedule(p, sched)

    return traces
