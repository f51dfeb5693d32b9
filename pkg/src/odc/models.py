"""Value-of-information and energy sources, plus the lossy battery.

Energy is measured in mA-slot throughout (current times slot count); voltage
is ignored. Every random source is driven by an explicit seed so a stream can
be replayed bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

SECONDS_PER_HOUR = 3600.0
DEFAULT_SLOT_SECONDS = 60.0
DEFAULT_CAPACITY_MAH = 40.0


class TraceExhausted(IndexError):
    """Raised when a replayed stream is asked for a slot past its end."""


def mah_to_charge(mah: float, slot_seconds: float = DEFAULT_SLOT_SECONDS) -> float:
    """Convert a charge in mAh to mA-slot for the given slot length."""
    return mah * SECONDS_PER_HOUR / slot_seconds


# ---------------------------------------------------------------------------
# Value of information
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability weights over a support shared with other distributions."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d sequence")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    def __len__(self):
        return len(self.weights)


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence ``sum p_i ln(p_i / q_i)`` in nats.

    ``p`` and ``q`` may be :class:`DiscreteDistribution` instances or plain
    weight sequences. Terms with ``p_i = 0`` contribute nothing.
    """
    p = p if isinstance(p, DiscreteDistribution) else DiscreteDistribution(tuple(p))
    q = q if isinstance(q, DiscreteDistribution) else DiscreteDistribution(tuple(q))
    if len(p) != len(q):
        raise ValueError(f"support mismatch: {len(p)} vs {len(q)} bins")
    total = 0.0
    for i, (pi, qi) in enumerate(zip(p.weights, q.weights)):
        if pi == 0.0:
            continue
        if qi == 0.0:
            raise ValueError(f"divergence undefined: q[{i}] = 0 where p[{i}] > 0")
        total += pi * math.log(pi / qi)
    # rounding can leave a tiny negative residue for p == q
    return max(total, 0.0)


def voi_from_window(observed, reference, bin_count: int = 8) -> float:
    """VoI of an observation window relative to a reference window.

    Both windows are binned into equal-width histograms over their joint
    range. Each bin receives additive smoothing of ``1 / len(window)`` before
    normalisation so the divergence stays finite.
    """
    observed = np.asarray(observed, dtype=float).ravel()
    reference = np.asarray(reference, dtype=float).ravel()
    if observed.size == 0 or reference.size == 0:
        raise ValueError("both windows must be non-empty")
    if bin_count < 2:
        raise ValueError("bin_count must be >= 2")
    lo = min(observed.min(), reference.min())
    hi = max(observed.max(), reference.max())
    if hi <= lo:
        return 0.0
    edges = np.linspace(lo, hi, bin_count + 1)

    def smoothed(window):
        counts, _ = np.histogram(window, bins=edges)
        counts = counts + 1.0 / window.size
        return counts / counts.sum()

    return kl_divergence(tuple(smoothed(observed)), tuple(smoothed(reference)))


@dataclass(frozen=True)
class VoISource:
    """Per-slot VoI of the datum available for sampling.

    ``kind="gaussian"`` draws i.i.d. from N(mean, variance) clamped at zero;
    ``kind="trace"`` replays ``values``.
    """

    kind: str = "gaussian"
    mean: float = 1.0
    variance: float = 0.5
    seed: int = 0
    values: tuple[float, ...] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "trace"):
            raise ValueError(f"unknown VoI source kind {self.kind!r}")
        if self.kind == "trace":
            if self.values is None:
                raise ValueError("trace VoI source needs values")
            vals = tuple(float(v) for v in self.values)
            if any(v < 0 for v in vals):
                raise ValueError("trace VoI values must be non-negative")
            object.__setattr__(self, "values", vals)
        elif self.variance < 0:
            raise ValueError("variance must be non-negative")

    def stream(self, horizon: int) -> np.ndarray:
        """First ``horizon`` values of the source."""
        if self.kind == "trace":
            if horizon > len(self.values):
                raise TraceExhausted(
                    f"VoI trace has {len(self.values)} slots, {horizon} requested")
            return np.asarray(self.values[:horizon], dtype=float)
        cached = self._cache.get("gaussian")
        if cached is None or cached.size < horizon:
            rng = np.random.default_rng(self.seed)
            draws = rng.normal(self.mean, math.sqrt(self.variance), size=max(horizon, 1))
            cached = np.maximum(draws, 0.0)
            self._cache["gaussian"] = cached
        return cached[:horizon].copy()


def next_voi(source: VoISource, slot: int) -> float:
    """VoI available at ``slot``."""
    if slot < 0:
        raise ValueError("slot must be non-negative")
    return float(source.stream(slot + 1)[slot])


# ---------------------------------------------------------------------------
# Harvested energy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarvestProcess:
    """Per-slot harvested power (mA) with the solar-state threshold.

    ``kind`` is one of ``"markov"``, ``"trace"`` or ``"phase-schedule"``.
    Trace and phase-schedule processes replay ``power``; a markov process
    walks ``transition`` over ``levels`` starting from ``start_state``.
    """

    kind: str
    power: tuple[float, ...] | None = None
    solar_threshold: float = 20.0
    levels: tuple[float, ...] | None = None
    transition: tuple[tuple[float, ...], ...] | None = None
    start_state: int | None = None
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("markov", "trace", "phase-schedule"):
            raise ValueError(f"unknown harvest kind {self.kind!r}")
        if self.kind == "markov":
            if self.levels is None or self.transition is None:
                raise ValueError("markov harvest needs levels and transition")
            P = np.asarray(self.transition, dtype=float)
            n = len(self.levels)
            if P.shape != (n, n):
                raise ValueError(f"transition matrix must be {n}x{n}")
            if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
                raise ValueError("malformed transition matrix: rows must be "
                                 "non-negative and sum to 1")
            if any(lv < 0 for lv in self.levels):
                raise ValueError("harvest levels must be non-negative")
        else:
            if self.power is None:
                raise ValueError(f"{self.kind} harvest needs a power stream")
            vals = tuple(float(v) for v in self.power)
            if any(v < 0 for v in vals):
                raise ValueError("harvested power must be non-negative")
            object.__setattr__(self, "power", vals)

    def stationary_distribution(self) -> np.ndarray:
        if self.kind != "markov":
            raise ValueError("only markov processes have a stationary distribution")
        P = np.asarray(self.transition, dtype=float)
        vals, vecs = np.linalg.eig(P.T)
        v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
        return v / v.sum()

    def states(self, horizon: int) -> np.ndarray:
        """Markov state index per slot."""
        if self.kind != "markov":
            raise ValueError("only markov processes have states")
        cached = self._cache.get("states")
        if cached is not None and cached.size >= horizon:
            return cached[:horizon].copy()
        P = np.cumsum(np.asarray(self.transition, dtype=float), axis=1)
        rng = np.random.default_rng(self.seed)
        n = len(self.levels)
        s = self.start_state
        if s is None:
            s = int(rng.choice(n, p=self.stationary_distribution()))
        u = rng.random(max(horizon, 1))
        out = np.empty(max(horizon, 1), dtype=int)
        for t in range(out.size):
            out[t] = s
            s = min(int(np.searchsorted(P[s], u[t], side="right")), n - 1)
        self._cache["states"] = out
        return out[:horizon].copy()

    def stream(self, horizon: int) -> np.ndarray:
        """Harvested power for the first ``horizon`` slots."""
        if self.kind == "markov":
            return np.asarray(self.levels, dtype=float)[self.states(horizon)]
        if horizon > len(self.power):
            raise TraceExhausted(
                f"harvest trace has {len(self.power)} slots, {horizon} requested")
        return np.asarray(self.power[:horizon], dtype=float)

    def solar_states(self, horizon: int) -> np.ndarray:
        return (self.stream(horizon) >= self.solar_threshold).astype(int)


def solar_state(power: float, threshold: float) -> int:
    # inclusive boundary: power exactly at the threshold runs the node
    return int(power >= threshold)


def next_harvest(proc: HarvestProcess, slot: int) -> tuple[float, int]:
    """Harvested power and solar state at ``slot``."""
    if slot < 0:
        raise ValueError("slot must be non-negative")
    power = float(proc.stream(slot + 1)[slot])
    return power, solar_state(power, proc.solar_threshold)


def phase_schedule(total_energy: float, phases: Sequence[tuple[int, int]],
                   horizon: int | None = None, solar_threshold: float = 20.0) -> HarvestProcess:
    """Spread ``total_energy`` uniformly over inclusive slot ranges.

    ``phases`` is a list of ``(first, last)`` slot pairs. Slots outside every
    phase harvest nothing. ``horizon`` defaults to one past the last phase.
    """
    if not phases:
        raise ValueError("phase list is empty")
    if total_energy <= 0:
        raise ValueError("total_energy must be positive")
    ranges = sorted((int(a), int(b)) for a, b in phases)
    for a, b in ranges:
        if a < 0 or b < a:
            raise ValueError(f"invalid phase ({a}, {b})")
    for (_, b0), (a1, _) in zip(ranges, ranges[1:]):
        if a1 <= b0:
            raise ValueError("phases overlap")
    end = ranges[-1][1] + 1
    horizon = end if horizon is None else int(horizon)
    if horizon < end:
        raise ValueError("phases extend past the horizon")
    n_active = sum(b - a + 1 for a, b in ranges)
    per_slot = total_energy / n_active
    power = np.zeros(horizon)
    for a, b in ranges:
        power[a:b + 1] = per_slot
    return HarvestProcess("phase-schedule", power=tuple(power), solar_threshold=solar_threshold)


def uniform_units(unit_energy: float, units: int, horizon: int, seed: int,
                  solar_threshold: float = 20.0) -> HarvestProcess:
    """Drop ``units`` energy quanta into uniformly random slots.

    Slots are drawn with replacement, so quanta landing in the same slot
    stack.
    """
    if units < 0 or horizon < 1:
        raise ValueError("units must be >= 0 and horizon >= 1")
    rng = np.random.default_rng(seed)
    slots = rng.integers(0, horizon, size=units)
    power = np.bincount(slots, minlength=horizon).astype(float) * unit_energy
    return HarvestProcess("trace", power=tuple(power), solar_threshold=solar_threshold)


# ---------------------------------------------------------------------------
# Battery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Battery:
    level: float
    capacity: float = mah_to_charge(DEFAULT_CAPACITY_MAH)
    charge_efficiency: float = 0.8
    wasted: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.charge_efficiency <= 1.0:
            raise ValueError("charge_efficiency must lie in (0, 1]")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if not 0.0 <= self.level <= self.capacity:
            raise ValueError(f"level {self.level} outside [0, {self.capacity}]")

    @classmethod
    def half_full(cls, capacity: float = mah_to_charge(DEFAULT_CAPACITY_MAH),
                  charge_efficiency: float = 0.8) -> "Battery":
        return cls(capacity / 2.0, capacity, charge_efficiency)


def store_energy(b: Battery, harvested: float) -> Battery:
    """Charge the battery with ``harvested`` energy at its charge efficiency.

    Charge that would overflow the capacity is dropped and added to
    ``wasted``.
    """
    if harvested < 0:
        raise ValueError("harvested energy must be non-negative")
    gained = b.charge_efficiency * harvested
    level = b.level + gained
    overflow = max(0.0, level - b.capacity)
    return replace(b, level=min(level, b.capacity), wasted=b.wasted + overflow)


def draw_energy(b: Battery, amount: float) -> Battery:
    if amount < 0:
        raise ValueError("amount must be non-negative")
    if amount > b.level + 1e-9:
        raise ValueError(f"cannot draw {amount} from battery holding {b.level}")
    return replace(b, level=max(0.0, b.level - amount))
