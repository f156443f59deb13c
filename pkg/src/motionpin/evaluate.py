"""Dataset splitting, top-k identification rates, baselines, and the survey
rank-correlation utility."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import FeatureSet
from .mlp import MlpModel, normalize, forward
from .records import Dataset

DEFAULT_RATIOS = (0.70, 0.15, 0.15)


# ---------------------------------------------------------------------------
# stratified splitting

def _per_class_counts(n: int, ratios, deficits) -> list:
    """Split n class members into len(ratios) parts: floor of the ideal share
    each, remainders to the largest fractional parts (ties go to the part
    currently furthest under its global target, then to the earlier part)."""
    ideal = [n * r for r in ratios]
    counts = [int(np.floor(v)) for v in ideal]
    fracs = [v - c for v, c in zip(ideal, counts)]
    order = sorted(range(len(ratios)), key=lambda s: (-fracs[s], -deficits[s], s))
    for s in order[: n - sum(counts)]:
        counts[s] += 1
    return counts


def stratified_indices(labels: Sequence, ratios=DEFAULT_RATIOS, seed: int = 0,
                       label_space: Optional[Sequence] = None) -> tuple:
    """Deterministic stratified partition of range(len(labels)).

    Returns (train_idx, val_idx, test_idx) as int arrays. Per class the part
    sizes are within one of the exact proportion; globally they track the
    ideal totals. Every class needs at least 3 members.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    labels = list(labels)
    if label_space is None:
        label_space = sorted(set(labels))
    by_class = {lab: [] for lab in label_space}
    for i, lab in enumerate(labels):
        if lab not in by_class:
            raise ValueError(f"label {lab!r} not in label space")
        by_class[lab].append(i)
    for lab in label_space:
        if len(by_class[lab]) < 3:
            raise ValueError(f"class {lab!r} has only {len(by_class[lab])} samples; need >= 3")

    rng = np.random.default_rng(seed)
    targets = [len(labels) * r for r in ratios]
    assigned = [0] * len(ratios)
    parts = [[] for _ in ratios]
    for lab in label_space:
        members = np.array(by_class[lab], dtype=int)
        rng.shuffle(members)
        deficits = [t - a for t, a in zip(targets, assigned)]
        counts = _per_class_counts(len(members), ratios, deficits)
        ofs = 0
        for s, c in enumerate(counts):
            parts[s].extend(members[ofs:ofs + c].tolist())
            assigned[s] += c
            ofs += c
    return tuple(np.array(sorted(p), dtype=int) for p in parts)


def split_dataset(dataset: Dataset, ratios=DEFAULT_RATIOS, seed: int = 0) -> tuple:
    """70/15/15-style stratified split of a Dataset into three Datasets."""
    tr, va, te = stratified_indices(dataset.labels(), ratios, seed, dataset.label_space)
    pick = lambda idx: Dataset(
        segments=tuple(dataset.segments[i] for i in idx),
        label_space=dataset.label_space, mode=dataset.mode)
    return pick(tr), pick(va), pick(te)


def split_featureset(fs: FeatureSet, ratios=DEFAULT_RATIOS, seed: int = 0,
                     label_space: Optional[Sequence] = None) -> tuple:
    tr, va, te = stratified_indices(fs.labels, ratios, seed, label_space)
    return fs.subset(tr), fs.subset(va), fs.subset(te)


# ---------------------------------------------------------------------------
# top-k evaluation

@dataclass
class EvalReport:
    top_k_rates: dict                 # k -> rate
    confusion: np.ndarray             # (out, out) argmax counts, rows = truth
    n_test: int
    mode: str = ""
    baselines: dict = field(default_factory=dict)
    label_space: tuple = ()

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_test": self.n_test,
            "top_k_rates": {str(k): v for k, v in sorted(self.top_k_rates.items())},
            "baselines": self.baselines,
            "label_space": list(self.label_space),
            "confusion": self.confusion.astype(int).tolist(),
        }

    def to_text(self) -> str:
        names = {1: "One", 2: "Two", 3: "Three"}
        lines = [f"Identification rates ({self.mode or 'custom'}, n={self.n_test})",
                 f"{'Attempts':<10}{'Rate':>9}"]
        for k in sorted(self.top_k_rates):
            label = names.get(k, str(k))
            lines.append(f"{label:<10}{self.top_k_rates[k] * 100:>8.2f}%")
        if self.baselines:
            lines.append("Baselines:")
            for name, rate in self.baselines.items():
                lines.append(f"  {name}: {rate * 100:.2f}%")
        return "\n".join(lines)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def evaluate(model: MlpModel, test: FeatureSet, ks=(1, 2, 3), mode: str = "") -> EvalReport:
    """Top-k identification rates and an argmax confusion matrix.

    A test sample counts as a top-k hit when its true label is among the k
    most probable classes; ties resolve to the lower label-space index, so
    the result is order-invariant and deterministic.
    """
    if len(test) == 0:
        raise ValueError("test set is empty")
    ks = sorted(set(int(k) for k in ks))
    if ks[0] < 1 or ks[-1] > model.output_dim:
        raise ValueError(f"ks must lie in 1..{model.output_dim}")
    y = np.asarray([model.label_index(l) for l in test.labels], dtype=int)
    p = forward(model, normalize(test.x, model))
    order = np.argsort(-p, axis=1, kind="stable")

    rates = {}
    for k in ks:
        hits = (order[:, :k] == y[:, None]).any(axis=1)
        rates[k] = float(hits.mean())
    out = model.output_dim
    confusion = np.zeros((out, out), dtype=int)
    np.add.at(confusion, (y, order[:, 0]), 1)
    baselines = random_baselines(mode) if mode else {}
    if mode == "digit10" and 3 in rates:
        # compounding the measured per-digit rate over a 4-digit PIN gives the
        # 81-candidate search-space success probability
        baselines["derived_pin_success_81_attempts"] = pin_success_from_digit_rate(rates[3])
    return EvalReport(top_k_rates=rates, confusion=confusion, n_test=len(test),
                      mode=mode, baselines=baselines, label_space=model.label_space)


def pin_success_from_digit_rate(p: float) -> float:
    """Chance of recovering a whole 4-digit PIN when each digit independently
    succeeds with probability p (so the candidate set is attempts^4)."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"digit success rate must be in [0, 1], got {p}")
    return p ** 4


def digit_rate_for_pin_success(q: float) -> float:
    """Inverse of pin_success_from_digit_rate (fourth root)."""
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"PIN success rate must be in [0, 1], got {q}")
    return q ** 0.25


def random_baselines(mode: str) -> dict:
    """Guessing baselines per mode: k attempts over the class space, plus the
    81-attempt full-PIN-space figure for digit mode."""
    if mode == "pin50":
        return {"random_1_attempt": 1 / 50, "random_3_attempts": 3 / 50}
    if mode == "digit10":
        return {"random_1_attempt": 1 / 10, "random_3_attempts": 3 / 10,
                "random_pin_81_attempts": 81 / 10000}
    if mode == "pin_full_space":
        return {"random_81_attempts": 81 / 10000}
    if mode == "activity3":
        return {"random_1_attempt": 1 / 3}
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Spearman rank correlation (average ranks for ties)

def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=float)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0   # mean of ranks i+1..j+1
        i = j + 1
    return ranks


def spearman(a, b) -> float:
    """Spearman's rho: Pearson correlation of average-ranked data."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be 1-d sequences of equal length")
    if a.size < 2:
        raise ValueError("need at least 2 observations")
    ra = _average_ranks(a) - (a.size + 1) / 2.0
    rb = _average_ranks(b) - (b.size + 1) / 2.0
    va = float(ra @ ra)
    vb = float(rb @ rb)
    if va == 0.0 or vb == 0.0:
        raise ValueError("rank variance is zero (constant input)")
    return float(ra @ rb) / np.sqrt(va * vb)


# ---------------------------------------------------------------------------
# Likert survey tables

@dataclass(frozen=True)
class LikertTable:
    """Participants x sensors matrix of 1..5 ordinal scores."""

    sensors: tuple
    scores: np.ndarray            # (participants, sensors)
    group: str = ""

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=int)
        if scores.ndim != 2 or scores.shape[1] != len(self.sensors):
            raise ValueError("scores must be (participants, sensors)")
        if scores.size == 0:
            raise ValueError("empty Likert table")
        if scores.min() < 1 or scores.max() > 5:
            raise ValueError("Likert scores must be in 1..5")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "sensors", tuple(self.sensors))

    def aggregate(self) -> np.ndarray:
        """Mean score per sensor; the basis for ranking sensors."""
        return self.scores.mean(axis=0)


def load_likert_csv(path, group: str = "") -> LikertTable:
    """CSV with a sensor-name header row and one 1..5 row per participant."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: missing header row")
        rows = []
        for rec in reader:
            if len(rec) != len(header):
                raise ValueError(f"{path}: row {len(rows) + 2} has {len(rec)} fields, "
                                 f"expected {len(header)}")
            rows.append([int(v) for v in rec])
    return LikertTable(sensors=tuple(header), scores=np.asarray(rows), group=group)


def survey_rank_correlation(knowledge: LikertTable, concern: LikertTable) -> float:
    """Spearman correlation between sensor rankings by aggregate knowledge and
    by aggregate concern."""
    if knowledge.sensors != concern.sensors:
        raise ValueError("knowledge and concern tables list different sensors")
    return spearman(knowledge.aggregate(), concern.aggregate())
