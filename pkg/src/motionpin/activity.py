"""Event detection and coarse activity labeling from motion traces.

Transparent threshold/spectral rules rather than a trained model: discrete
device events (e.g. phone calls being handled) show up as bursts of
acceleration variance, and gait shows up as a dominant oscillation frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .records import SensorTrace

ACTIVITY_LABELS = ("sitting", "walking", "running")


@dataclass(frozen=True)
class ActivityWindowConfig:
    window_s: float = 4.0                     # classification window
    hop_s: float = 1.0
    event_window_s: float = 0.5               # short window for event variance
    event_var_threshold: float = 0.5          # (m/s^2)^2 on |accG|
    min_event_gap_s: float = 1.5
    walking_band_hz: tuple = (1.2, 2.4)
    running_band_hz: tuple = (2.4, 4.5)
    sitting_energy_threshold: float = 0.2     # (m/s^2)^2 per sample

    def __post_init__(self):
        if self.window_s <= 0 or self.hop_s <= 0 or self.event_window_s <= 0:
            raise ValueError("window_s, hop_s and event_window_s must be positive")
        lo_w, hi_w = self.walking_band_hz
        lo_r, hi_r = self.running_band_hz
        if not (0 < lo_w < hi_w <= lo_r < hi_r):
            raise ValueError("activity bands must be ordered and disjoint")
        if self.event_var_threshold <= 0 or self.sitting_energy_threshold <= 0:
            raise ValueError("thresholds must be positive")
        if self.min_event_gap_s < 0:
            raise ValueError("min_event_gap_s must be >= 0")


def _magnitude_series(trace: SensorTrace, base: int):
    """(times_s, |triple|) for the channel group starting at `base`,
    restricted to samples where the whole triple is present."""
    ts, comps = [], []
    for s in trace.samples:
        x = s.channel_value(base)
        if x is not None:
            ts.append(s.t)
            comps.append((x, s.channel_value(base + 1), s.channel_value(base + 2)))
    t = np.asarray(ts, dtype=float) / 1000.0
    v = np.linalg.norm(np.asarray(comps, dtype=float), axis=1) if comps else np.empty(0)
    return t, v


def _sample_rate(t_s: np.ndarray) -> float:
    dts = np.diff(t_s)
    dts = dts[dts > 0]
    if dts.size == 0:
        raise ValueError("cannot estimate a sampling rate from fewer than 2 samples")
    return 1.0 / float(np.median(dts))


def _moving_variance(v: np.ndarray, win: int) -> np.ndarray:
    """Centered moving variance with edge windows truncated."""
    half = win // 2
    c1 = np.concatenate([[0.0], np.cumsum(v)])
    c2 = np.concatenate([[0.0], np.cumsum(v * v)])
    idx = np.arange(v.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, v.size)
    n = (hi - lo).astype(float)
    mean = (c1[hi] - c1[lo]) / n
    return (c2[hi] - c2[lo]) / n - mean * mean


def detect_events(trace: SensorTrace, cfg: ActivityWindowConfig = ActivityWindowConfig()) -> list:
    """Bursts of |accG| variance, returned as (start_s, end_s) intervals.

    Contiguous above-threshold stretches form intervals; intervals closer
    than min_event_gap_s are merged. Output is sorted and disjoint.
    """
    t_s, mag = _magnitude_series(trace, base=3)
    if mag.size == 0:
        raise ValueError("trace has no acceleration-including-gravity samples")
    rate = _sample_rate(t_s)
    if (t_s[-1] - t_s[0]) < cfg.event_window_s:
        raise ValueError(f"trace shorter than one event window ({cfg.event_window_s} s)")
    win = max(2, int(round(cfg.event_window_s * rate)))
    var = _moving_variance(mag, win)
    above = var > cfg.event_var_threshold

    intervals = []
    i = 0
    while i < above.size:
        if above[i]:
            j = i
            while j + 1 < above.size and above[j + 1]:
                j += 1
            intervals.append([float(t_s[i]), float(t_s[j])])
            i = j + 1
        else:
            i += 1
    merged = []
    for iv in intervals:
        if merged and iv[0] - merged[-1][1] < cfg.min_event_gap_s:
            merged[-1][1] = iv[1]
        else:
            merged.append(iv)
    return [(a, b) for a, b in merged]


def _dominant_frequency(x: np.ndarray, rate: float) -> float:
    """Peak of the magnitude spectrum, DC excluded, up to Nyquist."""
    n = 1 << (x.size - 1).bit_length()
    mag = np.abs(np.fft.rfft(x, n=n))
    if mag.size < 2:
        return 0.0
    k = 1 + int(np.argmax(mag[1:]))
    return k * rate / n


def classify_windows(trace: SensorTrace, cfg: ActivityWindowConfig = ActivityWindowConfig()) -> list:
    """Label sliding windows as sitting / walking / running.

    Quiet windows (mean-removed |acc| energy per sample below the sitting
    threshold) are sitting; otherwise the dominant oscillation frequency
    picks the gait band, falling back to the nearest band edge.
    """
    t_s, mag = _magnitude_series(trace, base=0)
    if mag.size == 0:
        raise ValueError("trace has no acceleration samples")
    rate = _sample_rate(t_s)
    win = int(round(cfg.window_s * rate))
    hop = max(1, int(round(cfg.hop_s * rate)))
    if win < 2 or mag.size < win:
        raise ValueError(f"trace shorter than one window ({cfg.window_s} s)")

    out = []
    for start in range(0, mag.size - win + 1, hop):
        seg = mag[start:start + win]
        seg = seg - seg.mean()
        energy_per_sample = float(np.mean(seg * seg))
        if energy_per_sample < cfg.sitting_energy_threshold:
            label = "sitting"
        else:
            freq = _dominant_frequency(seg, rate)
            lo_w, hi_w = cfg.walking_band_hz
            lo_r, hi_r = cfg.running_band_hz
            if lo_w <= freq <= hi_w:
                label = "walking"
            elif lo_r <= freq <= hi_r:
                label = "running"
            else:
                dist_w = min(abs(freq - lo_w), abs(freq - hi_w))
                dist_r = min(abs(freq - lo_r), abs(freq - hi_r))
                label = "walking" if dist_w <= dist_r else "running"
        out.append((float(t_s[start]), label))
    return out
