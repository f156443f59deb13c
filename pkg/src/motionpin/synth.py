"""Synthetic sensor-trace generation for desk-scale pipeline validation.

The tap model is invented but physically motivated: each keydown injects a
half-sine acceleration pulse whose x/y amplitudes follow the key's offset on
a 3x4 numpad grid, a matching derivative-shaped rotation-rate pulse, and a
decaying orientation step. Its only job is to give the pipeline
label-dependent structure with controllable separability; none of the
constants describe real devices.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .records import KeyEvent, SensorSample, SensorTrace

GRAVITY = 9.81

# 3x4 grid offsets (dx, dy) from the device centre; '0' sits bottom-centre.
KEYPAD_OFFSETS = {
    1: (-1.0, 1.5), 2: (0.0, 1.5), 3: (1.0, 1.5),
    4: (-1.0, 0.5), 5: (0.0, 0.5), 6: (1.0, 0.5),
    7: (-1.0, -0.5), 8: (0.0, -0.5), 9: (1.0, -0.5),
    0: (0.0, -1.5),
}

ROT_PULSE_SCALE = 40.0       # deg/s per unit grid offset
ORI_STEP_SCALE = 2.0         # degrees per unit grid offset
ORI_DECAY_MS = 300.0         # relaxation back to rest after a tap

ACTIVITY_PROFILES = {
    # activity -> (oscillation frequency Hz, amplitude m/s^2)
    "sitting": (0.0, 0.0),
    "walking": (1.8, 1.5),
    "running": (3.0, 4.0),
}
CALL_VIBRATION_HZ = 7.0
CALL_VIBRATION_AMP = 1.8     # m/s^2 handling wobble while a call is active
CALL_TILT_DEG = 25.0         # orientation shift while the device is held up
CALL_RAMP_S = 2.0            # transient at the start and end of a call

SYNTH_CREATED = "1970-01-01T00:00:00Z"   # fixed stamp keeps emitted files reproducible


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    sample_rate_hz: float = 60.0
    n_users: int = 10
    pins: tuple = ()                  # defaults to make_pin_list(seed)
    reps: int = 5
    tap_amp: float = 1.0              # m/s^2 per unit grid offset
    tap_width_ms: float = 120.0
    noise_sigma: float = 0.05
    user_jitter: float = 0.1
    inter_key_ms: float = 400.0
    inter_pin_ms: float = 1500.0
    lead_in_ms: float = 500.0
    tail_ms: float = 800.0
    entry_error_rate: float = 0.0

    def __post_init__(self):
        if self.sample_rate_hz <= 0 or self.tap_width_ms <= 0:
            raise ValueError("sample_rate_hz and tap_width_ms must be positive")
        if self.n_users <= 0 or self.reps <= 0:
            raise ValueError("n_users and reps must be positive")
        if self.noise_sigma < 0 or self.user_jitter < 0:
            raise ValueError("noise_sigma and user_jitter must be >= 0")
        if self.inter_key_ms <= 0 or self.inter_pin_ms < 0 or self.lead_in_ms < 0 or self.tail_ms < 0:
            raise ValueError("timing fields must be non-negative (inter_key_ms positive)")
        if not 0.0 <= self.entry_error_rate <= 1.0:
            raise ValueError("entry_error_rate must be in [0, 1]")
        pins = tuple(self.pins) if self.pins else make_pin_list(self.seed)
        for p in pins:
            if len(p) != 4 or not str(p).isdigit():
                raise ValueError(f"PIN {p!r} is not 4 decimal digits")
        object.__setattr__(self, "pins", pins)


def make_pin_list(seed: int) -> tuple:
    """50 distinct 4-digit PINs whose 200 digit slots use every digit exactly
    20 times. Built by shuffling a balanced digit pool, retrying on the rare
    draw that repeats a PIN."""
    rng = np.random.default_rng([int(seed), 0x9214])
    pool = np.repeat(np.arange(10), 20)
    while True:
        rng.shuffle(pool)
        pins = ["".join(str(d) for d in pool[i:i + 4]) for i in range(0, 200, 4)]
        if len(set(pins)) == 50:
            return tuple(pins)


def _substream(*parts) -> np.random.Generator:
    ints = [p if isinstance(p, int) else zlib.crc32(str(p).encode()) for p in parts]
    return np.random.default_rng(ints)


def _half_sine(tau: np.ndarray, width: float) -> np.ndarray:
    return np.sin(np.pi * tau / width)


def gen_session(cfg: SynthConfig, user: str, pin_sequence: Sequence[str],
                session_index: int = 0) -> tuple:
    """Simulate one sitting of PIN entries; returns (SensorTrace, [KeyEvent]).

    Deterministic for a given (cfg.seed, user, pin_sequence, session_index).
    With zero noise and zero jitter the trace is a pure function of the PIN
    sequence, so identical PINs produce identical tap responses.
    """
    dt = 1000.0 / cfg.sample_rate_hz
    per_pin = 3 * cfg.inter_key_ms + cfg.inter_pin_ms
    total_ms = cfg.lead_in_ms + len(pin_sequence) * per_pin - cfg.inter_pin_ms + cfg.tail_ms \
        if pin_sequence else cfg.lead_in_ms + cfg.tail_ms
    n = int(round(total_ms / dt)) + 1
    t = np.arange(n) * dt
    chans = np.zeros((12, n))

    gain = 1.0
    if cfg.user_jitter > 0:
        gain = 1.0 + cfg.user_jitter * float(_substream(cfg.seed, 1, user).standard_normal())
    rng_keys = _substream(cfg.seed, 2, user, session_index)
    rng_noise = _substream(cfg.seed, 3, user, session_index)

    events = []
    width = cfg.tap_width_ms
    for i, pin in enumerate(pin_sequence):
        base = cfg.lead_in_ms + i * per_pin
        entered_digits = []
        key_times = []
        for k in range(4):
            t_key = round((base + k * cfg.inter_key_ms) / dt) * dt
            key_times.append(t_key)
            digit = int(pin[k])
            if cfg.entry_error_rate > 0 and rng_keys.random() < cfg.entry_error_rate:
                digit = int((digit + 1 + rng_keys.integers(9)) % 10)
            entered_digits.append(digit)
            _add_tap(chans, t, t_key, digit, width, cfg.tap_amp * gain)
        entered = "".join(str(d) for d in entered_digits)
        for k in range(4):
            events.append(KeyEvent(t=key_times[k], digit=entered_digits[k],
                                   entry_index=k, expected_pin=pin, entered_pin=entered))

    chans[5] += GRAVITY                       # accG.z carries gravity
    if cfg.noise_sigma > 0:
        chans += rng_noise.normal(0.0, cfg.noise_sigma, size=chans.shape)

    samples = _to_samples(t, chans, dt)
    return SensorTrace(samples=samples), events


def _add_tap(chans: np.ndarray, t: np.ndarray, t_key: float, digit: int,
             width: float, amp: float) -> None:
    dx, dy = KEYPAD_OFFSETS[digit]
    lo = int(np.searchsorted(t, t_key))
    hi = int(np.searchsorted(t, t_key + width, side="right"))
    tau = t[lo:hi] - t_key
    pulse = _half_sine(tau, width)
    deriv = np.cos(np.pi * tau / width)
    # acceleration (with and without gravity) shares the same tap transient
    for base in (0, 3):
        chans[base + 0, lo:hi] += amp * dx * pulse
        chans[base + 1, lo:hi] += amp * dy * pulse
        chans[base + 2, lo:hi] += amp * pulse
    rot = ROT_PULSE_SCALE * amp
    chans[6, lo:hi] += rot * dy * deriv
    chans[7, lo:hi] += rot * dx * deriv
    chans[8, lo:hi] += rot * 0.5 * (dx - dy) * deriv

    # orientation: smoothed step that relaxes back to rest
    hi2 = int(np.searchsorted(t, t_key + width + 6 * ORI_DECAY_MS, side="right"))
    tau2 = t[lo:hi2] - t_key
    rise = 0.5 * (1.0 - np.cos(np.pi * np.minimum(tau2, width) / width))
    decay = np.exp(-np.maximum(tau2 - width, 0.0) / ORI_DECAY_MS)
    resp = ORI_STEP_SCALE * amp * rise * decay
    chans[9, lo:hi2] += dy * resp
    chans[10, lo:hi2] += dx * resp
    chans[11, lo:hi2] += 0.3 * (dx + dy) * resp


def _to_samples(t: np.ndarray, chans: np.ndarray, dt: float) -> tuple:
    cols = chans.T
    return tuple(
        SensorSample(
            t=float(ti),
            acc=tuple(row[0:3]),
            accG=tuple(row[3:6]),
            rotR=tuple(row[6:9]),
            ori=tuple(row[9:12]),
            interval=dt,
        )
        for ti, row in zip(t, cols)
    )


def gen_activity_trace(cfg: SynthConfig, script: Sequence[tuple]) -> tuple:
    """Synthesize a trace for a list of (activity, duration_s) entries.

    Activities: sitting (noise only), walking/running (raised sinusoidal
    vertical acceleration), call_event (orientation/acceleration shift with
    2 s transients plus handling vibration for the whole call). Returns the
    trace and the exact (activity, start_s, end_s) ground-truth intervals.
    """
    if not script:
        raise ValueError("activity script is empty")
    for name, dur in script:
        if name not in ("sitting", "walking", "running", "call_event"):
            raise ValueError(f"unknown activity {name!r}")
        if not dur > 0:
            raise ValueError(f"activity {name}: duration must be positive, got {dur}")

    rate = cfg.sample_rate_hz
    total_s = float(sum(d for _, d in script))
    n = int(round(total_s * rate))
    t_s = np.arange(n) / rate
    chans = np.zeros((12, n))

    truth = []
    start = 0.0
    for name, dur in script:
        end = start + float(dur)
        sel = (t_s >= start) & (t_s < end)
        tau = t_s[sel] - start
        if name in ("walking", "running"):
            freq, amp = ACTIVITY_PROFILES[name]
            wave = amp * (1.0 + np.sin(2.0 * np.pi * freq * tau))
            chans[2, sel] += wave             # acc.z
            chans[5, sel] += wave             # mirrored into accG
        elif name == "call_event":
            ramp_up = np.clip(tau / CALL_RAMP_S, 0.0, 1.0)
            ramp_down = np.clip((float(dur) - tau) / CALL_RAMP_S, 0.0, 1.0)
            level = np.minimum(ramp_up, ramp_down)
            vib = CALL_VIBRATION_AMP * np.sin(2.0 * np.pi * CALL_VIBRATION_HZ * tau)
            chans[0, sel] += 0.6 * vib
            chans[2, sel] += 0.8 * vib
            chans[3, sel] += 0.6 * vib + 1.5 * level      # lifted: gravity redistributes
            chans[5, sel] += 0.8 * vib - 1.0 * level
            chans[10, sel] += CALL_TILT_DEG * level       # ori.beta tilt
        truth.append((name, start, end))
        start = end

    chans[5] += GRAVITY
    if cfg.noise_sigma > 0:
        rng = _substream(cfg.seed, 4)
        chans += rng.normal(0.0, cfg.noise_sigma, size=chans.shape)

    dt = 1000.0 / rate
    samples = _to_samples(t_s * 1000.0, chans, dt)
    return SensorTrace(samples=samples), truth


@dataclass(frozen=True)
class SynthSession:
    user: str
    rep: int
    session_id: str
    pin_order: tuple
    trace: SensorTrace
    events: tuple


def gen_sessions(cfg: SynthConfig):
    """Yield one SynthSession per (user, repetition), covering every PIN in
    cfg.pins once per repetition in a per-session shuffled order."""
    for u in range(cfg.n_users):
        user = f"user{u:02d}"
        for rep in range(cfg.reps):
            order = np.array(cfg.pins)
            _substream(cfg.seed, 5, user, rep).shuffle(order)
            trace, events = gen_session(cfg, user, list(order), session_index=rep)
            yield SynthSession(
                user=user, rep=rep,
                session_id=f"synth-{cfg.seed}-{user}-r{rep}",
                pin_order=tuple(order), trace=trace, events=tuple(events))


def separation_statistic(x: np.ndarray, labels: Sequence) -> float:
    """Between-class over within-class scatter of a feature matrix; larger
    means the classes are easier to tell apart.

    Features are standardized first so the ratio is scale-free; otherwise the
    large-magnitude energy features drown out everything else.
    """
    x = np.asarray(x, dtype=float)
    std = x.std(axis=0)
    x = (x - x.mean(axis=0)) / np.where(std > 0, std, 1.0)
    labels = np.asarray(labels)
    mu = x.mean(axis=0)
    between = 0.0
    within = 0.0
    for lab in np.unique(labels):
        rows = x[labels == lab]
        mu_c = rows.mean(axis=0)
        between += rows.shape[0] * float(np.sum((mu_c - mu) ** 2))
        within += float(np.sum((rows - mu_c) ** 2))
    if within == 0.0:
        return math.inf
    return between / within
