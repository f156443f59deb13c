"""114-element feature extraction from 12-channel segments.

Layout (fixed, channel order as in records.CHANNEL_NAMES):
  0..35    time domain (max, min, mean) per channel, channel-major
  36..71   frequency domain (max, min, mean) of the DFT magnitude per channel
  72..83   time-domain energy per channel
  84..95   frequency-domain energy per channel
  96..113  correlation coefficients for the sensor pairs
           (ori,acc) (ori,accG) (ori,rotR) (acc,accG) (acc,rotR) (accG,rotR),
           three per-axis values each, axes in (x/alpha, y/beta, z/gamma) order
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .records import CHANNEL_NAMES, N_CHANNELS, PinEntrySegment

N_FEATURES = 114

# (first sensor base index, second sensor base index) into the channel list.
CORRELATION_PAIRS = ((9, 0), (9, 3), (9, 6), (0, 3), (0, 6), (3, 6))

FEATURE_NAMES = tuple(f"f{i:03d}" for i in range(N_FEATURES))


def preprocess(seq) -> np.ndarray:
    """Subtract the first value so the sequence starts at 0.

    Removes the effect of the device's initial position/orientation.
    Idempotent: preprocessing twice equals preprocessing once.
    """
    seq = np.asarray(seq, dtype=float)
    if seq.size == 0:
        raise ValueError("cannot preprocess an empty sequence")
    return seq - seq[0]


def basic_stats(seq) -> tuple:
    """(max, min, mean) of a non-empty finite sequence."""
    seq = np.asarray(seq, dtype=float)
    if seq.size == 0:
        raise ValueError("cannot compute stats of an empty sequence")
    if not np.all(np.isfinite(seq)):
        raise ValueError("sequence contains non-finite values")
    return float(seq.max()), float(seq.min()), float(seq.mean())


def energy(seq) -> float:
    """Sum of squared values."""
    seq = np.asarray(seq, dtype=float)
    if seq.size == 0:
        raise ValueError("cannot compute energy of an empty sequence")
    return float(np.sum(seq * seq))


def dft_magnitude(seq) -> np.ndarray:
    """Magnitude spectrum of the sequence, zero-padded to the next power of two.

    Returns all N bins of the length-N transform (N = next power of two
    >= len(seq)), not just the non-redundant half.
    """
    seq = np.asarray(seq, dtype=float)
    if seq.size < 2:
        raise ValueError("DFT needs at least 2 samples")
    n = 1 << (seq.size - 1).bit_length()
    return np.abs(np.fft.fft(seq, n=n))


def correlation(a, b) -> float:
    """Correlation coefficient Cov(A,B)/sqrt(Cov(A,A)*Cov(B,B)).

    Unequal lengths are truncated to the shorter sequence. If either input
    has zero variance the coefficient is defined as 0 so constant channels
    stay representable.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = min(a.size, b.size)
    if n < 2:
        raise ValueError("correlation needs at least 2 paired samples")
    a = a[:n] - a[:n].mean()
    b = b[:n] - b[:n].mean()
    # normalize each vector first: identical to cov/sqrt(var*var) since the
    # 1/(n-1) factors cancel, but safe against underflow of tiny variances
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.dot(a / norm_a, b / norm_b))


@dataclass(frozen=True)
class FeatureVector:
    """One segment reduced to the fixed 114-value layout."""

    values: np.ndarray
    label: object
    user_id: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have shape ({N_FEATURES},), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature vector contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def extract(segment: PinEntrySegment) -> FeatureVector:
    """Compute the full 114-feature vector for one segment."""
    values = np.empty(N_FEATURES, dtype=float)
    pre = []
    spectra = []
    for c in range(N_CHANNELS):
        try:
            p = preprocess(segment.channels[c])
            values[3 * c: 3 * c + 3] = basic_stats(p)
            mag = dft_magnitude(p)
            values[36 + 3 * c: 36 + 3 * c + 3] = basic_stats(mag)
            values[72 + c] = energy(p)
            values[84 + c] = energy(mag)
        except ValueError as err:
            raise ValueError(f"channel {CHANNEL_NAMES[c]}: {err}") from err
        pre.append(p)
        spectra.append(mag)
    i = 96
    for first, second in CORRELATION_PAIRS:
        for axis in range(3):
            try:
                values[i] = correlation(pre[first + axis], pre[second + axis])
            except ValueError as err:
                raise ValueError(
                    f"channels {CHANNEL_NAMES[first + axis]}/{CHANNEL_NAMES[second + axis]}: {err}"
                ) from err
            i += 1
    return FeatureVector(values=values, label=segment.label, user_id=segment.user_id)


@dataclass(frozen=True)
class FeatureSet:
    """Feature matrix plus aligned labels/user ids; rows are segments."""

    x: np.ndarray                 # (n, 114)
    labels: tuple
    user_ids: tuple

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2 or x.shape[1] != N_FEATURES:
            raise ValueError(f"feature matrix must be (n, {N_FEATURES}), got {x.shape}")
        if x.shape[0] != len(self.labels) or x.shape[0] != len(self.user_ids):
            raise ValueError("labels/user_ids must align with matrix rows")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "user_ids", tuple(self.user_ids))

    def __len__(self):
        return self.x.shape[0]

    def subset(self, indices) -> "FeatureSet":
        idx = np.asarray(indices, dtype=int)
        return FeatureSet(
            x=self.x[idx],
            labels=tuple(self.labels[i] for i in idx),
            user_ids=tuple(self.user_ids[i] for i in idx),
        )

    def with_labels(self, labels) -> "FeatureSet":
        return FeatureSet(x=self.x, labels=tuple(labels), user_ids=self.user_ids)


def extract_all(segments: Sequence[PinEntrySegment]) -> FeatureSet:
    """Feature extraction over many segments; labels are coerced to strings
    so they stay stable through CSV round trips."""
    vectors = [extract(s) for s in segments]
    if not vectors:
        raise ValueError("no segments to extract features from")
    return FeatureSet(
        x=np.stack([v.values for v in vectors]),
        labels=tuple(str(v.label) for v in vectors),
        user_ids=tuple(v.user_id for v in vectors),
    )


def write_csv(fs: FeatureSet, path) -> None:
    """CSV export: header `label,user_id,f000..f113`, one row per segment.

    Floats are written with repr so a read-back is value-exact.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", "user_id", *FEATURE_NAMES])
        for row, label, user in zip(fs.x, fs.labels, fs.user_ids):
            writer.writerow([label, user, *[repr(float(v)) for v in row]])


def read_csv(path) -> FeatureSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["label", "user_id"] or tuple(header[2:]) != FEATURE_NAMES:
            raise ValueError(f"{path}: not a feature CSV (bad header)")
        labels, users, rows = [], [], []
        for rec in reader:
            if len(rec) != 2 + N_FEATURES:
                raise ValueError(f"{path}: row {len(rows) + 2} has {len(rec)} fields")
            labels.append(rec[0])
            users.append(rec[1])
            rows.append([float(v) for v in rec[2:]])
    if not rows:
        raise ValueError(f"{path}: no feature rows")
    return FeatureSet(x=np.asarray(rows), labels=tuple(labels), user_ids=tuple(users))
