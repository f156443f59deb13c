"""Session-file parsing and keydown-anchored segmentation.

Session files are UTF-8 with one JSON object per line:

  header (optional, first line only):
    {"k":"h","session":"<id>","user":"<id>","device":"<text>","created":"<ISO-8601>"}
  sample:
    {"k":"s","t":<ms>,"acc":[x,y,z],"accG":[x,y,z],"rotR":[a,b,g],"ori":[a,b,g],
     "interval":<ms or null>}        (any of the four triples may be null)
  key event:
    {"k":"e","t":<ms>,"digit":<0-9>,"idx":<0-3>,"expected":"dddd","entered":"dddd" or null}

This format is the bit-exact contract between the capture server, the browser
collector, and this parser; the serializers below are the single source of
truth for it.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .records import (
    N_CHANNELS,
    KeyEvent,
    PinEntrySegment,
    SensorSample,
    SensorTrace,
    TRIPLE_NAMES,
)

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed session file; `line_no` is 1-based."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# ---------------------------------------------------------------------------
# line serializers (shared by synth and the capture server)

def header_line(session: str, user: str, device: str, created: str) -> str:
    return json.dumps(
        {"k": "h", "session": session, "user": user, "device": device, "created": created},
        separators=(",", ":"))


def sample_line(sample: SensorSample) -> str:
    obj = {"k": "s", "t": sample.t}
    for name in TRIPLE_NAMES:
        triple = getattr(sample, name)
        obj[name] = None if triple is None else list(triple)
    obj["interval"] = sample.interval
    return json.dumps(obj, separators=(",", ":"))


def event_line(ev: KeyEvent) -> str:
    obj = {"k": "e", "t": ev.t, "digit": ev.digit, "idx": ev.entry_index,
           "expected": ev.expected_pin, "entered": ev.entered_pin}
    return json.dumps(obj, separators=(",", ":"))


# ---------------------------------------------------------------------------
# parsing

def _require(obj: dict, key: str, line_no: int):
    if key not in obj:
        raise ParseError(line_no, f"missing field {key!r}")
    return obj[key]


def _parse_sample(obj: dict, line_no: int) -> SensorSample:
    kwargs = {"t": _require(obj, "t", line_no), "interval": obj.get("interval")}
    for name in TRIPLE_NAMES:
        kwargs[name] = obj.get(name)
    try:
        return SensorSample(**kwargs)
    except (TypeError, ValueError) as err:
        raise ParseError(line_no, f"bad sample: {err}") from err


def _parse_event(obj: dict, line_no: int) -> KeyEvent:
    try:
        return KeyEvent(
            t=_require(obj, "t", line_no),
            digit=_require(obj, "digit", line_no),
            entry_index=_require(obj, "idx", line_no),
            expected_pin=_require(obj, "expected", line_no),
            entered_pin=obj.get("entered"),
        )
    except (TypeError, ValueError) as err:
        if isinstance(err, ParseError):
            raise
        raise ParseError(line_no, f"bad key event: {err}") from err


def parse_session(data) -> tuple:
    """Parse one session file into (SensorTrace, [KeyEvent], metadata).

    `data` is bytes or str. Line order is preserved. Metadata carries
    session_id, user_id, device_label, and created when a header is present.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    metadata = {"session_id": "", "user_id": "", "device_label": "", "created": ""}
    samples: list = []
    events: list = []
    for line_no, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            raise ParseError(line_no, "blank line")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise ParseError(line_no, f"invalid JSON: {err}") from err
        if not isinstance(obj, dict):
            raise ParseError(line_no, "record is not a JSON object")
        kind = obj.get("k")
        if kind == "h":
            if line_no != 1:
                raise ParseError(line_no, "header allowed only on the first line")
            metadata = {
                "session_id": str(obj.get("session", "")),
                "user_id": str(obj.get("user", "")),
                "device_label": str(obj.get("device", "")),
                "created": str(obj.get("created", "")),
            }
        elif kind == "s":
            samples.append(_parse_sample(obj, line_no))
        elif kind == "e":
            events.append(_parse_event(obj, line_no))
        else:
            raise ParseError(line_no, f"unknown record kind {kind!r}")
    trace = SensorTrace(samples=tuple(samples), session_id=metadata["session_id"],
                        device_label=metadata["device_label"])
    return trace, events, metadata


def load_session(path) -> tuple:
    with open(path, "rb") as fh:
        return parse_session(fh.read())


def write_session(path, session_id: str, user: str, device: str, created: str,
                  trace: SensorTrace, events: Sequence[KeyEvent]) -> None:
    """Write a full session in the line format, interleaving samples and key
    events by time (samples first on ties)."""
    lines = [header_line(session_id, user, device, created)]
    merged = sorted(
        [(s.t, 0, sample_line(s)) for s in trace.samples]
        + [(e.t, 1, event_line(e)) for e in events],
        key=lambda item: (item[0], item[1]))
    lines.extend(item[2] for item in merged)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# listener-stream merging

def merge_listener_streams(trace: SensorTrace, tolerance_ms: Optional[float] = None) -> SensorTrace:
    """Pair motion-only and orientation-only samples into full samples.

    Real browsers fire the motion and orientation listeners independently, so
    a captured stream may alternate partial samples. Each motion-only sample
    is paired with the nearest unused orientation-only sample within
    `tolerance_ms` (default: one sampling interval estimated from the data);
    unpaired partial samples are dropped. Samples that already carry all four
    triples pass through untouched.
    """
    motion_only, ori_only, full = [], [], []
    for s in trace.samples:
        has_motion = any(getattr(s, n) is not None for n in ("acc", "accG", "rotR"))
        if s.ori is not None and has_motion:
            full.append(s)
        elif has_motion:
            motion_only.append(s)
        elif s.ori is not None:
            ori_only.append(s)
    if not motion_only and not ori_only:
        return trace

    if tolerance_ms is None:
        ts = np.array([s.t for s in trace.samples])
        dts = np.diff(ts)
        dts = dts[dts > 0]
        tolerance_ms = float(np.median(dts)) if dts.size else 0.0

    ori_ts = np.array([s.t for s in ori_only])
    used = np.zeros(len(ori_only), dtype=bool)
    for m in motion_only:
        if ori_ts.size == 0:
            break
        j = int(np.searchsorted(ori_ts, m.t))
        best, best_gap = -1, None
        for cand in (j - 1, j):
            if 0 <= cand < len(ori_only) and not used[cand]:
                gap = abs(ori_ts[cand] - m.t)
                if gap <= tolerance_ms and (best_gap is None or gap < best_gap):
                    best, best_gap = cand, gap
        if best >= 0:
            used[best] = True
            full.append(SensorSample(t=m.t, acc=m.acc, accG=m.accG, rotR=m.rotR,
                                     ori=ori_only[best].ori, interval=m.interval))
    full.sort(key=lambda s: s.t)
    return SensorTrace(samples=tuple(full), session_id=trace.session_id,
                       device_label=trace.device_label)


# ---------------------------------------------------------------------------
# segmentation

@dataclass(frozen=True)
class SegmentationConfig:
    """Window widths (ms) around the keydown anchors."""

    pin_pre_ms: float = 150.0
    pin_post_ms: float = 400.0
    digit_pre_ms: float = 100.0
    digit_post_ms: float = 300.0

    def __post_init__(self):
        for name in ("pin_pre_ms", "pin_post_ms", "digit_pre_ms", "digit_post_ms"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)


class _ChannelIndex:
    """Per-channel (times, values) arrays for fast window slicing."""

    def __init__(self, trace: SensorTrace):
        self.series = [trace.channel_series(c) for c in range(N_CHANNELS)]
        self.t_lo = trace.t_start
        self.t_hi = trace.t_end

    def window(self, lo: float, hi: float):
        """12 channel slices for [lo, hi] clipped to trace bounds, or None if
        any channel has fewer than 2 samples in the window."""
        lo = max(lo, self.t_lo)
        hi = min(hi, self.t_hi)
        out = []
        for ts, vs in self.series:
            a = int(np.searchsorted(ts, lo, side="left"))
            b = int(np.searchsorted(ts, hi, side="right"))
            if b - a < 2:
                return None
            out.append(vs[a:b])
        return tuple(out)


def _check_event_order(events: Sequence[KeyEvent]):
    for i in range(1, len(events)):
        if events[i].t < events[i - 1].t:
            raise ValueError(
                f"key events out of time order at index {i} "
                f"(t={events[i].t} after t={events[i - 1].t})")


def _group_runs(events: Sequence[KeyEvent]) -> list:
    """Split events into complete 4-keydown runs sharing one expected PIN.

    A run starts at entry_index 0 and must continue with indices 1, 2, 3 and
    an unchanged expected PIN; anything inconsistent abandons the run.
    Incomplete runs yield nothing.
    """
    runs, current = [], []
    for ev in events:
        if ev.entry_index == 0:
            current = [ev]
        elif current and ev.entry_index == len(current) and ev.expected_pin == current[0].expected_pin:
            current.append(ev)
        else:
            current = []
            continue
        if len(current) == 4:
            runs.append(current)
            current = []
    return runs


def _run_entered(run: Sequence[KeyEvent]) -> str:
    final = run[-1].entered_pin
    return final if final is not None else "".join(str(ev.digit) for ev in run)


def segment_pins(trace: SensorTrace, events: Sequence[KeyEvent],
                 cfg: SegmentationConfig = SegmentationConfig(),
                 user_id: str = "") -> list:
    """One segment per complete 4-keydown run.

    The window spans [first keydown - pin_pre_ms, last keydown + pin_post_ms]
    clipped to the trace. Windows where any channel has fewer than 2 samples
    are dropped (counted in a warning).
    """
    if len(trace.samples) == 0:
        return []
    _check_event_order(events)
    index = _ChannelIndex(trace)
    segments, dropped = [], 0
    for run in _group_runs(events):
        window = index.window(run[0].t - cfg.pin_pre_ms, run[-1].t + cfg.pin_post_ms)
        if window is None:
            dropped += 1
            continue
        expected = run[0].expected_pin
        segments.append(PinEntrySegment(
            channels=window, label=expected, user_id=user_id,
            valid=(expected == _run_entered(run))))
    if dropped:
        log.warning("segment_pins: dropped %d window(s) with under-sampled channels", dropped)
    return segments


def segment_digits(trace: SensorTrace, events: Sequence[KeyEvent],
                   cfg: SegmentationConfig = SegmentationConfig(),
                   user_id: str = "") -> list:
    """One segment per keydown, labeled with the pressed digit."""
    if len(trace.samples) == 0:
        return []
    _check_event_order(events)
    index = _ChannelIndex(trace)
    segments, dropped = [], 0
    for ev in events:
        window = index.window(ev.t - cfg.digit_pre_ms, ev.t + cfg.digit_post_ms)
        if window is None:
            dropped += 1
            continue
        segments.append(PinEntrySegment(
            channels=window, label=ev.digit, user_id=user_id,
            valid=(str(ev.digit) == ev.expected_pin[ev.entry_index])))
    if dropped:
        log.warning("segment_digits: dropped %d window(s) with under-sampled channels", dropped)
    return segments
