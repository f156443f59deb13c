"""Shared domain types: sensor samples, traces, key events, segments, datasets.

All types are immutable value objects once constructed, so they can be shared
freely across worker threads or processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# Canonical channel order used everywhere downstream (index 0..11).
CHANNEL_NAMES = (
    "acc.x", "acc.y", "acc.z",
    "accG.x", "accG.y", "accG.z",
    "rotR.alpha", "rotR.beta", "rotR.gamma",
    "ori.alpha", "ori.beta", "ori.gamma",
)
N_CHANNELS = 12

# Channel-group order matching CHANNEL_NAMES blocks of three.
TRIPLE_NAMES = ("acc", "accG", "rotR", "ori")

DATASET_MODES = ("pin50", "digit10", "activity3")
MODE_CLASS_COUNTS = {"pin50": 50, "digit10": 10, "activity3": 3}


def _as_triple(value, name: str) -> Optional[tuple]:
    if value is None:
        return None
    vals = tuple(float(v) for v in value)
    if len(vals) != 3:
        raise ValueError(f"{name} must have exactly 3 components, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"{name} contains a non-finite component: {vals}")
    return vals


@dataclass(frozen=True)
class SensorSample:
    """One reading of the merged motion/orientation stream.

    Any of the four channel triples may be wholly absent (None); a partially
    filled triple is rejected at construction time.
    """

    t: float                                  # ms since session start
    acc: Optional[tuple] = None               # (x, y, z) in m/s^2
    accG: Optional[tuple] = None              # (x, y, z) in m/s^2, includes gravity
    rotR: Optional[tuple] = None              # (alpha, beta, gamma) in deg/s
    ori: Optional[tuple] = None               # (alpha, beta, gamma) in degrees
    interval: Optional[float] = None          # sampling interval in ms

    def __post_init__(self):
        t = float(self.t)
        if not math.isfinite(t) or t < 0:
            raise ValueError(f"sample time must be finite and >= 0, got {self.t}")
        object.__setattr__(self, "t", t)
        for name in TRIPLE_NAMES:
            object.__setattr__(self, name, _as_triple(getattr(self, name), name))
        if self.interval is not None:
            iv = float(self.interval)
            if not math.isfinite(iv) or iv <= 0:
                raise ValueError(f"interval must be positive and finite, got {self.interval}")
            object.__setattr__(self, "interval", iv)

    def channel_value(self, index: int) -> Optional[float]:
        """Value of canonical channel `index`, or None if its triple is absent."""
        triple = getattr(self, TRIPLE_NAMES[index // 3])
        return None if triple is None else triple[index % 3]


@dataclass(frozen=True)
class SensorTrace:
    """Time-ordered samples from one capture session."""

    samples: tuple
    session_id: str = ""
    device_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self):
        return len(self.samples)

    @property
    def t_start(self) -> float:
        return self.samples[0].t

    @property
    def t_end(self) -> float:
        return self.samples[-1].t

    def channel_series(self, index: int):
        """(times, values) arrays for one canonical channel, skipping samples
        where that triple is absent."""
        ts, vs = [], []
        for s in self.samples:
            v = s.channel_value(index)
            if v is not None:
                ts.append(s.t)
                vs.append(v)
        return np.asarray(ts, dtype=float), np.asarray(vs, dtype=float)


def validate_trace(trace: SensorTrace) -> list:
    """Check SensorTrace invariants; violations are returned as data, not raised.

    Returns an empty list iff the trace is non-empty and sample times are
    strictly increasing. Each violation names the offending sample index.
    """
    violations = []
    if len(trace.samples) == 0:
        violations.append("empty trace")
        return violations
    prev_t = None
    for i, s in enumerate(trace.samples):
        if prev_t is not None and s.t <= prev_t:
            violations.append(f"sample {i}: non-increasing t ({s.t} after {prev_t})")
        prev_t = s.t
    return violations


def _check_pin(pin: str, name: str) -> str:
    pin = str(pin)
    if len(pin) != 4 or not pin.isdigit():
        raise ValueError(f"{name} must be exactly 4 decimal digits, got {pin!r}")
    return pin


@dataclass(frozen=True)
class KeyEvent:
    """One keydown during PIN entry."""

    t: float
    digit: int
    entry_index: int                          # position within the PIN, 0..3
    expected_pin: str
    entered_pin: Optional[str] = None         # filled once the 4th digit lands

    def __post_init__(self):
        t = float(self.t)
        if not math.isfinite(t) or t < 0:
            raise ValueError(f"event time must be finite and >= 0, got {self.t}")
        object.__setattr__(self, "t", t)
        if int(self.digit) != self.digit or not 0 <= int(self.digit) <= 9:
            raise ValueError(f"digit must be an integer in 0..9, got {self.digit}")
        object.__setattr__(self, "digit", int(self.digit))
        if int(self.entry_index) != self.entry_index or not 0 <= int(self.entry_index) <= 3:
            raise ValueError(f"entry_index must be an integer in 0..3, got {self.entry_index}")
        object.__setattr__(self, "entry_index", int(self.entry_index))
        object.__setattr__(self, "expected_pin", _check_pin(self.expected_pin, "expected_pin"))
        if self.entered_pin is not None:
            object.__setattr__(self, "entered_pin", _check_pin(self.entered_pin, "entered_pin"))


@dataclass(frozen=True)
class PinEntrySegment:
    """A labeled slice of a trace covering one PIN (or one digit) entry.

    `channels` holds the 12 canonical sequences. Lengths may differ across
    channels (the two browser listeners fire independently) but every
    sequence must have at least 2 samples.
    """

    channels: tuple                           # 12 read-only float arrays
    label: object                             # 4-digit string or digit 0..9
    user_id: str = ""
    valid: bool = True                        # expected PIN == entered PIN

    def __post_init__(self):
        chans = tuple(np.asarray(c, dtype=float) for c in self.channels)
        if len(chans) != N_CHANNELS:
            raise ValueError(f"expected {N_CHANNELS} channel sequences, got {len(chans)}")
        for name, arr in zip(CHANNEL_NAMES, chans):
            if arr.ndim != 1 or arr.size < 2:
                raise ValueError(f"channel {name}: need a 1-d sequence of length >= 2")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"channel {name}: non-finite values")
            arr.setflags(write=False)
        object.__setattr__(self, "channels", chans)

    def __len__(self):
        return max(len(c) for c in self.channels)


@dataclass(frozen=True)
class Dataset:
    """Segments plus the ordered label space they are classified over."""

    segments: tuple
    label_space: tuple
    mode: str

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "label_space", tuple(self.label_space))
        if self.mode not in DATASET_MODES:
            raise ValueError(f"unknown dataset mode {self.mode!r}")
        want = MODE_CLASS_COUNTS[self.mode]
        if len(set(self.label_space)) != len(self.label_space):
            raise ValueError("label_space contains duplicates")
        if len(self.label_space) != want:
            raise ValueError(
                f"mode {self.mode} requires {want} labels, got {len(self.label_space)}")
        known = set(self.label_space)
        for i, seg in enumerate(self.segments):
            if seg.label not in known:
                raise ValueError(f"segment {i}: label {seg.label!r} not in label_space")

    def labels(self) -> list:
        return [seg.label for seg in self.segments]


def build_dataset(segments: Sequence[PinEntrySegment], mode: str,
                  label_space: Optional[Sequence] = None) -> Dataset:
    """Assemble a Dataset from segments, dropping entries flagged invalid.

    If `label_space` is omitted it is the sorted set of labels present, which
    only works when every class actually occurs in `segments`.
    """
    kept = [s for s in segments if s.valid]
    if label_space is None:
        label_space = sorted({s.label for s in kept})
    return Dataset(segments=tuple(kept), label_space=tuple(label_space), mode=mode)
