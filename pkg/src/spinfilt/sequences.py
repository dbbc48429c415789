"""Ideal pi-pulse sequences and their toggling-frame step functions.

Pulses are instantaneous inversions. A sequence is fully described by its
ordered pulse times and the total time ``t_f``; the sign function ``s(t)``
starts at +1 and flips at every pulse.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

# relative tolerance (in units of t_f) for detecting coincident pulses
TIME_RTOL = 1e-12
MIN_GAP_RTOL = 1e-15


@dataclass(frozen=True)
class PulseSequence:
    pulse_times: tuple[float, ...]
    total_time: float

    def __post_init__(self):
        times = tuple(float(t) for t in self.pulse_times)
        tf = float(self.total_time)
        if not tf > 0 or not math.isfinite(tf):
            raise ValueError(f"total time must be positive and finite, got {tf!r}")
        gap = MIN_GAP_RTOL * tf
        prev = 0.0
        for t in times:
            if not t - prev >= gap:
                raise ValueError("pulse times must be strictly increasing and inside (0, t_f)")
            prev = t
        if times and not tf - times[-1] >= gap:
            raise ValueError("last pulse must come before the total time")
        object.__setattr__(self, "pulse_times", times)
        object.__setattr__(self, "total_time", tf)

    @property
    def n_pulses(self) -> int:
        return len(self.pulse_times)

    def boundaries(self) -> np.ndarray:
        """Segment boundaries ``[0, t_1, ..., t_N, t_f]``."""
        return np.concatenate(([0.0], self.pulse_times, [self.total_time]))

    def segments(self) -> Iterator[tuple[float, float, int]]:
        """Yield ``(start, stop, sign)`` for every constant-sign interval."""
        b = self.boundaries()
        for i in range(len(b) - 1):
            yield float(b[i]), float(b[i + 1]), -1 if i % 2 else 1

    def signs(self) -> np.ndarray:
        return np.where(np.arange(self.n_pulses + 1) % 2 == 0, 1.0, -1.0)

    def durations(self) -> np.ndarray:
        return np.diff(self.boundaries())

    def concatenate(self, other: "PulseSequence") -> "PulseSequence":
        shift = self.total_time
        return PulseSequence(
            self.pulse_times + tuple(t + shift for t in other.pulse_times),
            self.total_time + other.total_time,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "pulse_time_seconds"])
        for k, t in enumerate(self.pulse_times, start=1):
            writer.writerow([k, repr(t)])
        writer.writerow(["total", repr(self.total_time)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PulseSequence":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        if not rows or [c.strip() for c in rows[0]] != ["index", "pulse_time_seconds"]:
            raise ValueError("missing 'index,pulse_time_seconds' header")
        times, total = [], None
        for row in rows[1:]:
            key, value = row[0].strip(), float(row[1])
            if key == "total":
                total = value
            else:
                if total is not None:
                    raise ValueError("pulse rows after the 'total' row")
                if int(key) != len(times) + 1:
                    raise ValueError(f"pulse index {key} out of order")
                times.append(value)
        if total is None:
            raise ValueError("missing trailing 'total,t_f' row")
        return cls(tuple(times), total)


def free_evolution(total_time: float) -> PulseSequence:
    return PulseSequence((), total_time)


def cpmg(n_pulses: int, tau: float, total_time: float | None = None) -> PulseSequence:
    """Equidistant sequence: pulses at (2k-1) tau, k = 1..N, total time 2 N tau.

    ``N = 0`` has no intrinsic duration, so it needs ``total_time`` and
    returns the corresponding free evolution.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    if n_pulses < 0:
        raise ValueError("pulse number must be non-negative")
    if n_pulses == 0:
        if total_time is None:
            raise ValueError("N=0 needs an explicit total_time")
        return free_evolution(total_time)
    k = np.arange(1, n_pulses + 1)
    return PulseSequence(tuple((2 * k - 1) * tau), 2 * n_pulses * tau)


@dataclass(frozen=True)
class ResonancePoint:
    """Location ``(k, c)`` inside the resonance region of an ``N``-pulse filter."""

    k: int
    c: float
    N: int = 1

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("resonance order k must be non-negative")
        if self.N < 1:
            raise ValueError("N must be positive")
        if not -2.0 < self.c < 2.0:
            raise ValueError(f"c must lie in (-2, 2), got {self.c}")


@dataclass(frozen=True)
class SliceSpec:
    """Alternating +c / -c plan: ``slices`` blocks of ``pulses_per_slice`` pulses.

    Build it with :meth:`from_tau0`; the constructor only checks consistency.
    """

    slices: int
    pulses_per_slice: int
    tau_plus: float
    tau_minus: float
    resonance_order: int = 0
    resonance_param: float = 0.0

    def __post_init__(self):
        if self.slices < 1 or self.pulses_per_slice < 1:
            raise ValueError("slices and pulses_per_slice must be positive")
        if self.resonance_order < 0:
            raise ValueError("resonance order must be non-negative")
        if not -2.0 < self.resonance_param < 2.0:
            raise ValueError("resonance parameter c must lie in (-2, 2)")
        if not (self.tau_plus > 0 and self.tau_minus > 0):
            raise ValueError("tau_plus and tau_minus must be positive")
        tau0 = self.tau0
        expected = self.resonance_param * tau0 / ((2 * self.resonance_order + 1) * self.pulses_per_slice)
        if abs((self.tau_plus - tau0) - expected) > 1e-12 * tau0:
            raise ValueError("tau_plus/tau_minus inconsistent with (c, k, n)")

    @property
    def tau0(self) -> float:
        return 0.5 * (self.tau_plus + self.tau_minus)

    @property
    def n_pulses(self) -> int:
        return self.slices * self.pulses_per_slice

    @classmethod
    def from_tau0(cls, slices: int, pulses_per_slice: int, tau0: float, c: float, k: int = 0) -> "SliceSpec":
        if not tau0 > 0:
            raise ValueError("tau0 must be positive")
        if pulses_per_slice < 1:
            raise ValueError("pulses_per_slice must be positive")
        delta = c * tau0 / ((2 * k + 1) * pulses_per_slice)
        return cls(slices, pulses_per_slice, tau0 + delta, tau0 - delta, k, c)

    def slice_taus(self) -> list[float]:
        return [self.tau_plus if j % 2 == 0 else self.tau_minus for j in range(self.slices)]


def sliced_alternating(spec: SliceSpec) -> PulseSequence:
    """Concatenate CPMG-shaped blocks, alternating tau_plus and tau_minus."""
    n = spec.pulses_per_slice
    times: list[float] = []
    start = 0.0
    k = np.arange(1, n + 1)
    for tau in spec.slice_taus():
        times.extend(start + (2 * k - 1) * tau)
        start += 2 * n * tau
    return PulseSequence(tuple(times), start)


def slice_boundaries(spec: SliceSpec) -> np.ndarray:
    """Start times of every slice plus the final time."""
    lengths = [2 * spec.pulses_per_slice * tau for tau in spec.slice_taus()]
    return np.concatenate(([0.0], np.cumsum(lengths)))


def _check_time(seq: PulseSequence, t: float) -> None:
    slack = TIME_RTOL * seq.total_time
    if not -slack <= t <= seq.total_time + slack:
        raise ValueError(f"time {t!r} outside [0, {seq.total_time!r}]")


def _pulses_before(seq: PulseSequence, t: float) -> int:
    # pulse at t_k counts once t >= t_k - tol
    slack = TIME_RTOL * seq.total_time
    return int(np.searchsorted(np.asarray(seq.pulse_times), t + slack, side="right"))


def step_function(seq: PulseSequence, t: float) -> int:
    """Toggling sign s(t) = (-1)^(pulses with t_k <= t)."""
    _check_time(seq, t)
    return -1 if _pulses_before(seq, t) % 2 else 1


def integrated_step(seq: PulseSequence, t: float) -> float:
    """s_F(t) = integral of s over [0, t], summed exactly segment by segment."""
    _check_time(seq, t)
    t = min(max(t, 0.0), seq.total_time)
    total = 0.0
    for a, b, sign in seq.segments():
        if a >= t:
            break
        total += sign * (min(b, t) - a)
    return total


def integrated_step_at_boundaries(seq: PulseSequence) -> np.ndarray:
    """s_F evaluated at every segment start (and at t_f as the last entry)."""
    return np.concatenate(([0.0], np.cumsum(seq.signs() * seq.durations())))


def resonance_tau_weak(omega: float, point: ResonancePoint) -> float:
    """tau with omega tau = (2k+1) pi/2 + c pi/(2N)."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    if point.N == 1 and point.k == 0 and not -1.0 < point.c < 1.0:
        # a single pulse at k = 0 only has the range c in (-1, 1) before tau hits zero
        raise ValueError("N=1, k=0 weak resonance needs c in (-1, 1)")
    tau = ((2 * point.k + 1) * math.pi / 2 + point.c * math.pi / (2 * point.N)) / omega
    if not tau > 0:
        raise ValueError("resonance condition gives non-positive tau")
    return tau


def resonance_tau_strong(A: float, point: ResonancePoint, branch: str = "conditional") -> float:
    """tau with A tau = (2k+1) pi + c pi/N (conditional) or 2 k pi + c pi/N (unconditional)."""
    if not A > 0:
        raise ValueError("A must be positive")
    if branch == "conditional":
        base = (2 * point.k + 1) * math.pi
    elif branch == "unconditional":
        base = 2 * point.k * math.pi
    else:
        raise ValueError(f"unknown branch {branch!r}")
    tau = (base + point.c * math.pi / point.N) / A
    if not tau > 0:
        raise ValueError("resonance condition gives non-positive tau")
    return tau
