"""End-to-end run: synthesize sessions, re-parse them through the real file
parser, segment, featurize, train, and evaluate."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .evaluate import EvalReport, evaluate, split_featureset
from .features import FeatureSet, extract_all, write_csv
from .ingest import SegmentationConfig, load_session, segment_digits, segment_pins, write_session
from .mlp import TrainConfig, save_model, train_scg
from .records import build_dataset, validate_trace
from .synth import SYNTH_CREATED, SynthConfig, gen_sessions


@dataclass(frozen=True)
class PipelineConfig:
    out_dir: str
    seed: int = 7
    n_users: int = 10
    reps: int = 5
    noise_sigma: float = 0.05
    hidden_dim: int = 64
    sample_rate_hz: float = 60.0
    mode: str = "pin50"                    # or "digit10"
    ks: tuple = (1, 2, 3)
    max_epochs: int = 1000
    shuffle_labels: bool = False
    keep_sessions: bool = True


@dataclass
class PipelineResult:
    report: EvalReport
    features: FeatureSet
    n_segments: int = 0
    paths: dict = field(default_factory=dict)


def write_manifest(out_dir, command: str, config: dict, inputs: list, outputs: list,
                   seeds: dict) -> Path:
    """Drop a reproducibility manifest next to a command's outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"manifest-{command}.json"
    doc = {
        "tool": f"motionpin {__version__}",
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def synthesize_sessions(cfg: SynthConfig, out_dir) -> list:
    """Write one session file per (user, repetition); returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for session in gen_sessions(cfg):
        path = out_dir / f"{session.session_id}.jsonl"
        write_session(path, session.session_id, session.user, "synthetic",
                      SYNTH_CREATED, session.trace, session.events)
        paths.append(path)
    return paths


def ingest_sessions(paths, mode: str = "pin50",
                    seg_cfg: SegmentationConfig = SegmentationConfig()) -> tuple:
    """Parse + validate + segment many session files.

    Returns (segments, summary). Raises if any trace violates its invariants.
    """
    paths = sorted(Path(p) for p in paths)
    segments = []
    n_samples = n_events = 0
    for path in paths:
        trace, events, meta = load_session(path)
        violations = validate_trace(trace)
        if violations:
            raise ValueError(f"{path}: trace violations: {violations[:3]}")
        n_samples += len(trace.samples)
        n_events += len(events)
        segment = segment_pins if mode == "pin50" else segment_digits
        segments.extend(segment(trace, events, seg_cfg, user_id=meta["user_id"]))
    summary = {"sessions": len(paths), "samples": n_samples,
               "events": n_events, "segments": len(segments),
               "violations": 0}
    return segments, summary


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """The full synthetic attack experiment; deterministic per cfg.seed."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    synth_cfg = SynthConfig(seed=cfg.seed, n_users=cfg.n_users, reps=cfg.reps,
                            noise_sigma=cfg.noise_sigma,
                            sample_rate_hz=cfg.sample_rate_hz)
    session_dir = out / "sessions"
    session_paths = synthesize_sessions(synth_cfg, session_dir)

    with open(out / "pins.json", "w", encoding="utf-8") as fh:
        json.dump(list(synth_cfg.pins), fh)
        fh.write("\n")

    segments, summary = ingest_sessions(session_paths, mode=cfg.mode)
    label_space = sorted(synth_cfg.pins) if cfg.mode == "pin50" else list(range(10))
    dataset = build_dataset(segments, mode=cfg.mode, label_space=label_space)

    features = extract_all(dataset.segments)
    if cfg.shuffle_labels:
        rng = np.random.default_rng([cfg.seed, 0x5f1e])
        perm = rng.permutation(len(features))
        features = features.with_labels([features.labels[i] for i in perm])
    features_path = out / "features.csv"
    write_csv(features, features_path)

    feature_label_space = sorted({str(l) for l in label_space})
    train, val, test = split_featureset(features, seed=cfg.seed,
                                        label_space=feature_label_space)
    train_cfg = TrainConfig(seed=cfg.seed, hidden_dim=cfg.hidden_dim,
                            max_epochs=cfg.max_epochs)
    model, history = train_scg(train, val, train_cfg, label_space=feature_label_space)
    model.config["split_seed"] = cfg.seed
    model_path = out / "model.json"
    save_model(model, model_path)
    history_path = out / "history.json"
    with open(history_path, "w", encoding="utf-8") as fh:
        json.dump({"train_loss": history.train_loss, "val_loss": history.val_loss,
                   "stop_reason": history.stop_reason}, fh)
        fh.write("\n")

    report = evaluate(model, test, ks=cfg.ks, mode=cfg.mode)
    report_path = out / "report.json"
    report.save(report_path)

    manifest = write_manifest(
        out, "pipeline",
        config={k: (list(v) if isinstance(v, tuple) else v)
                for k, v in vars(cfg).items()},
        inputs=[], outputs=[out / "pins.json", features_path, model_path,
                            history_path, report_path, session_dir],
        seeds={"pipeline": cfg.seed})

    return PipelineResult(report=report, features=features,
                          n_segments=len(dataset.segments),
                          paths={"features": features_path, "model": model_path,
                                 "history": history_path, "report": report_path,
                                 "manifest": manifest, "sessions": session_dir,
                                 "summary": summary})
