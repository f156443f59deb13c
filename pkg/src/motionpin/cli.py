"""Command-line entry point.

Subcommands mirror the pipeline stages: synth, ingest, featurize, train,
eval, activity, survey, serve, and pipeline (everything in one run). Every
command that writes artifacts drops a manifest-<command>.json beside them.
Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .activity import ActivityWindowConfig, classify_windows, detect_events
from .evaluate import evaluate, load_likert_csv, split_featureset, survey_rank_correlation
from .features import extract_all, read_csv, write_csv
from .ingest import ParseError, SegmentationConfig, load_session, write_session
from .mlp import TrainConfig, load_model, save_model, train_scg
from .pipeline import (PipelineConfig, ingest_sessions, run_pipeline,
                       synthesize_sessions, write_manifest)
from .records import build_dataset
from .synth import SYNTH_CREATED, SynthConfig, gen_activity_trace


class CliError(ValueError):
    """User-facing validation problem; exits with status 1."""


def _config_of(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "command")}


def _parse_script(text: str) -> list:
    # "sitting:22,walking:34,running:25"
    script = []
    for part in text.split(","):
        name, _, dur = part.partition(":")
        if not dur:
            raise CliError(f"bad activity entry {part!r}; use name:seconds")
        script.append((name.strip(), float(dur)))
    return script


def _dataset_to_json(dataset) -> dict:
    return {
        "mode": dataset.mode,
        "label_space": list(dataset.label_space),
        "segments": [
            {"label": seg.label, "user_id": seg.user_id, "valid": seg.valid,
             "channels": [c.tolist() for c in seg.channels]}
            for seg in dataset.segments
        ],
    }


def _dataset_from_json(obj):
    from .records import Dataset, PinEntrySegment
    segments = [PinEntrySegment(channels=tuple(s["channels"]), label=s["label"],
                                user_id=s.get("user_id", ""), valid=s.get("valid", True))
                for s in obj["segments"]]
    return Dataset(segments=tuple(segments), label_space=tuple(obj["label_space"]),
                   mode=obj["mode"])


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = SynthConfig(seed=args.seed, n_users=args.users, reps=args.reps,
                      noise_sigma=args.noise, sample_rate_hz=args.rate)
    outputs = []
    if args.activity_script:
        trace, truth = gen_activity_trace(cfg, _parse_script(args.activity_script))
        path = out / f"activity-{args.seed}.jsonl"
        write_session(path, f"activity-{args.seed}", "synthetic", "synthetic",
                      SYNTH_CREATED, trace, [])
        truth_path = out / f"activity-{args.seed}.truth.json"
        with open(truth_path, "w", encoding="utf-8") as fh:
            json.dump([{"activity": a, "start_s": s, "end_s": e} for a, s, e in truth], fh)
            fh.write("\n")
        outputs += [path, truth_path]
        print(f"wrote {path} ({len(trace.samples)} samples) and ground truth")
    else:
        paths = synthesize_sessions(cfg, out / "sessions")
        pins_path = out / "pins.json"
        with open(pins_path, "w", encoding="utf-8") as fh:
            json.dump(list(cfg.pins), fh)
            fh.write("\n")
        outputs += [out / "sessions", pins_path]
        print(f"wrote {len(paths)} session files to {out / 'sessions'}")
    write_manifest(out, "synth", config=_config_of(args) | {"pins": len(cfg.pins)},
                   inputs=[], outputs=outputs, seeds={"synth": args.seed})
    return 0


def cmd_ingest(args) -> int:
    session_dir = Path(args.sessions)
    paths = sorted(session_dir.glob("*.jsonl")) if session_dir.is_dir() else [session_dir]
    if not paths:
        raise CliError(f"no session files under {session_dir}")
    seg_cfg = SegmentationConfig(pin_pre_ms=args.pin_pre, pin_post_ms=args.pin_post,
                                 digit_pre_ms=args.digit_pre, digit_post_ms=args.digit_post)
    segments, summary = ingest_sessions(paths, mode=args.mode, seg_cfg=seg_cfg)
    if args.out:
        # assembling a classification dataset needs the full label space
        label_space = None
        if args.pins:
            with open(args.pins, encoding="utf-8") as fh:
                label_space = sorted(json.load(fh))
        elif args.mode == "digit10":
            label_space = list(range(10))
        dataset = build_dataset(segments, mode=args.mode, label_space=label_space)
        out = Path(args.out)
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(_dataset_to_json(dataset), fh)
            fh.write("\n")
        summary["kept_segments"] = len(dataset.segments)
        print(json.dumps(summary))
        write_manifest(out.parent, "ingest", config=_config_of(args), inputs=paths,
                       outputs=[out], seeds={})
    else:
        # check-only run: parse, validate, segment, and report counts
        print(json.dumps(summary))
    return 0


def cmd_featurize(args) -> int:
    with open(args.dataset, encoding="utf-8") as fh:
        dataset = _dataset_from_json(json.load(fh))
    features = extract_all(dataset.segments)
    write_csv(features, args.out)
    print(f"wrote {len(features)} feature rows to {args.out}")
    write_manifest(Path(args.out).parent, "featurize", config=_config_of(args),
                   inputs=[args.dataset], outputs=[args.out], seeds={})
    return 0


def cmd_train(args) -> int:
    features = read_csv(args.features)
    train, val, _ = split_featureset(features, seed=args.seed)
    cfg = TrainConfig(seed=args.seed, hidden_dim=args.hidden,
                      max_epochs=args.max_epochs, val_patience=args.patience)
    model, history = train_scg(train, val, cfg,
                               label_space=sorted(set(features.labels)))
    model.config["split_seed"] = args.seed
    save_model(model, args.out)
    history_path = Path(args.out).with_suffix(".history.json")
    with open(history_path, "w", encoding="utf-8") as fh:
        json.dump({"train_loss": history.train_loss, "val_loss": history.val_loss,
                   "stop_reason": history.stop_reason}, fh)
        fh.write("\n")
    print(json.dumps({"iterations": len(history.train_loss) - 1,
                      "stop_reason": history.stop_reason,
                      "best_val_loss": min(history.val_loss)}))
    write_manifest(Path(args.out).parent, "train", config=_config_of(args),
                   inputs=[args.features], outputs=[args.out, history_path],
                   seeds={"train": args.seed})
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    features = read_csv(args.features)
    unknown = sorted(set(features.labels) - set(model.label_space))
    if unknown:
        raise CliError(f"feature labels not in the model's label space: {unknown[:5]}")
    if args.split == "test":
        seed = model.config.get("split_seed")
        if seed is None:
            raise CliError("model carries no split_seed; use --split all")
        _, _, subset = split_featureset(features, seed=int(seed),
                                        label_space=sorted(set(features.labels)))
    else:
        subset = features
    ks = [int(k) for k in args.ks.split(",")]
    report = evaluate(model, subset, ks=ks, mode=args.mode)
    print(report.to_text())
    outputs = []
    if args.out:
        report.save(args.out)
        outputs.append(args.out)
        write_manifest(Path(args.out).parent, "eval", config=_config_of(args),
                       inputs=[args.model, args.features], outputs=outputs, seeds={})
    return 0


def cmd_activity(args) -> int:
    trace, _, _ = load_session(args.session)
    cfg = ActivityWindowConfig()
    events = detect_events(trace, cfg)
    windows = classify_windows(trace, cfg)
    doc = {"events": [{"start_s": a, "end_s": b} for a, b in events],
           "windows": [{"start_s": s, "label": lab} for s, lab in windows]}
    text = json.dumps(doc, indent=1)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        write_manifest(Path(args.out).parent, "activity", config=_config_of(args),
                       inputs=[args.session], outputs=[args.out], seeds={})
    print(text)
    return 0


def cmd_survey(args) -> int:
    knowledge = load_likert_csv(args.knowledge, group="knowledge")
    concern = load_likert_csv(args.concern, group="concern")
    rho = survey_rank_correlation(knowledge, concern)
    print(f"spearman rho = {rho:.3f} (n_sensors = {len(knowledge.sensors)})")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"spearman_rho": rho, "sensors": list(knowledge.sensors)}, fh)
            fh.write("\n")
        write_manifest(Path(args.out).parent, "survey", config=_config_of(args),
                       inputs=[args.knowledge, args.concern], outputs=[args.out], seeds={})
    return 0


def cmd_serve(args) -> int:
    from .server import serve
    write_manifest(args.data_dir, "serve", config=_config_of(args), inputs=[],
                   outputs=[args.data_dir], seeds={})
    serve(args.host, args.port, args.data_dir, allow_origin=args.allow_origin)
    return 0


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig(out_dir=args.out, seed=args.seed, n_users=args.users,
                         reps=args.reps, noise_sigma=args.noise,
                         hidden_dim=args.hidden, mode=args.mode,
                         max_epochs=args.max_epochs,
                         shuffle_labels=args.shuffle_labels)
    result = run_pipeline(cfg)
    print(result.report.to_text())
    print(json.dumps({"segments": result.n_segments,
                      "top_k": {str(k): v for k, v in result.report.top_k_rates.items()}}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motionpin",
                                     description=sys.modules[__package__].__doc__)
    parser.add_argument("--version", action="version", version=f"motionpin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="emit synthetic session files")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--users", type=int, default=10)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--rate", type=float, default=60.0)
    p.add_argument("--activity-script", default="",
                   help="e.g. 'sitting:22,walking:34,running:25' (emits an activity trace instead)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="session files -> segmented dataset JSON")
    p.add_argument("--sessions", required=True, help="session file or directory")
    p.add_argument("--mode", choices=["pin50", "digit10"], default="pin50")
    p.add_argument("--out", default="", help="dataset JSON to write (omit for a check-only run)")
    p.add_argument("--pins", default="", help="pins.json fixing the label space")
    p.add_argument("--pin-pre", type=float, default=150.0)
    p.add_argument("--pin-post", type=float, default=400.0)
    p.add_argument("--digit-pre", type=float, default=100.0)
    p.add_argument("--digit-post", type=float, default=300.0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="dataset JSON -> feature CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="feature CSV -> model JSON")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=6)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="model + features -> top-k report")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--ks", default="1,2,3")
    p.add_argument("--mode", choices=["pin50", "digit10", "activity3"], default="pin50")
    p.add_argument("--split", choices=["test", "all"], default="test")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("activity", help="trace -> detected events + window labels")
    p.add_argument("--session", required=True)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_activity)

    p = sub.add_parser("survey", help="Likert CSVs -> Spearman rank correlation")
    p.add_argument("--knowledge", required=True)
    p.add_argument("--concern", required=True)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_survey)

    p = sub.add_parser("serve", help="run the capture server")
    p.add_argument("--host", default=os.environ.get("MOTIONPIN_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("MOTIONPIN_PORT", "8787")))
    p.add_argument("--data-dir", default=os.environ.get("MOTIONPIN_DATA_DIR", "./capture-data"))
    p.add_argument("--allow-origin", default=os.environ.get("MOTIONPIN_ALLOW_ORIGIN", "*"))
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("pipeline", help="synth -> ingest -> featurize -> train -> eval")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--users", type=int, default=10)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--mode", choices=["pin50", "digit10"], default="pin50")
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--shuffle-labels", action="store_true",
                   help="permute labels (chance-level control)")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ParseError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:                      # pragma: no cover - safety net
        print(f"internal error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
