"""Single command-line entry point for the whole toolkit.

Subcommands: ingest, train, evaluate, export, serve, predict, report.
Exit codes: 0 success, 1 domain error, 2 usage error. Diagnostics go to
stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluator, trainer
from .config import load_config
from .datapipe import build_stream
from .errors import VeriframeError
from .faces import get_detector
from .ingest import ingest_videos, load_index
from .manifest import load_manifest
from .model import ModelConfig, backbone_spec
from .service import (
    ServiceConfig,
    canonical_report_json,
    classify_media,
    serve,
)
from .media import sniff_media_type


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veriframe",
        description="Build face corpora, train counterfeit discriminators, "
                    "evaluate them, and serve predictions.",
    )
    parser.add_argument("--config", help="path to veriframe.toml")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="extract labeled face crops from videos")
    p.add_argument("--manifest", required=True)
    p.add_argument("--video-root", required=True)
    p.add_argument("--output-root", required=True)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--mode", choices=["uniform", "random"], default="uniform")
    p.add_argument("--detector", default=None)
    p.add_argument("--crop-size", type=int, default=256)
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="fine-tune a backbone on an ingested corpus")
    p.add_argument("--index", required=True)
    p.add_argument("--out", required=True, help="artifact output directory")
    p.add_argument("--backbone", default=None)
    p.add_argument("--head", choices=["sigmoid_1", "softmax_2"], default="softmax_2")
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="confusion-matrix evaluation on the test split")
    p.add_argument("--artifact", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export", help="re-export an artifact (verifies integrity)")
    p.add_argument("--artifact", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="run the inference API")
    p.add_argument("--artifact", default=None)
    p.add_argument("--detector", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--max-upload-mb", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="classify one media file, JSON to stdout")
    p.add_argument("--artifact", required=True)
    p.add_argument("--file", required=True)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--detector", default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("report", help="write the model comparison report")
    p.add_argument("--counts", default=None,
                   help="CSV of model,tp,fp,tn,fn rows; defaults to the "
                        "built-in reference comparison")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, default=0)

    return parser


def _cmd_ingest(args, cfg) -> int:
    manifest = load_manifest(args.manifest)
    detector = get_detector(args.detector or cfg["faces.backend"])
    report = ingest_videos(
        manifest,
        video_root=args.video_root,
        output_root=args.output_root,
        detector=detector,
        frames_per_video=args.frames,
        mode=args.mode,
        seed=args.seed,
        crop_size=args.crop_size,
        margin=args.margin,
        workers=args.workers,
    )
    print(
        f"processed {report.videos_processed} videos "
        f"({len(report.videos_failed)} failed), sampled {report.frames_sampled} "
        f"frames, wrote {report.faces_written['real']} real / "
        f"{report.faces_written['fake']} fake crops to {report.output_root}",
        file=sys.stderr,
    )
    for name, reason in report.videos_failed:
        print(f"  failed: {name}: {reason}", file=sys.stderr)
    return 0


def _cmd_train(args, cfg) -> int:
    rows = load_index(args.index)
    root = Path(args.index).parent
    backbone = args.backbone or cfg["model.backbone"]
    spec = backbone_spec(backbone)
    config = ModelConfig(
        backbone=spec, head_hidden_units=args.hidden, head_output=args.head
    )
    tcfg = trainer.TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
    )
    train_stream = build_stream(
        rows, "train", root=root, target_size=spec.input_size,
        batch_size=args.batch_size, shuffle_seed=args.seed,
        cache=not args.no_cache,
    )
    val_stream = build_stream(
        rows, "val", root=root, target_size=spec.input_size,
        batch_size=args.batch_size, cache=not args.no_cache,
    )
    model, history = trainer.train(config, train_stream, val_stream, tcfg)
    artifact = trainer.export_model(model, args.out)
    trainer.save_history(history, Path(args.out) / "history.json")
    last = history[-1]
    print(
        f"trained {backbone} for {len(history)} epochs "
        f"(final val accuracy {last.val_accuracy:.4f}); artifact "
        f"{artifact.model_id} at {artifact.path}",
        file=sys.stderr,
    )
    return 0


def _cmd_evaluate(args, cfg) -> int:
    model = trainer.load_model(args.artifact)
    rows = load_index(args.index)
    root = Path(args.index).parent
    cm, _ = evaluator.run_evaluation(
        model, rows, root=root, n=args.n, seed=args.seed,
        threshold=args.threshold,
    )
    name = model.config.backbone.name
    report = evaluator.compare_models([(name, cm)])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    evaluator.write_report_csv(report, out_dir / "report.csv")
    evaluator.write_report_json(report, out_dir / "report.json")
    print(f"wrote {out_dir / 'report.csv'} and {out_dir / 'report.json'}",
          file=sys.stderr)
    return 0


def _cmd_export(args, cfg) -> int:
    model = trainer.load_model(args.artifact)
    artifact = trainer.export_model(
        model, args.out, preprocessing=getattr(model, "preprocessing", None)
    )
    print(f"re-exported artifact sha256:{artifact.checksum} to {artifact.path}",
          file=sys.stderr)
    return 0


def _cmd_serve(args, cfg) -> int:
    service_config = ServiceConfig(
        model_artifact=args.artifact or cfg["service.model_artifact"],
        detector=args.detector or cfg["service.detector"],
        max_upload_mb=args.max_upload_mb or cfg["service.max_upload_mb"],
        port=args.port or cfg["service.port"],
        host=args.host or cfg["service.host"],
    )
    serve(service_config)
    return 0


def _cmd_predict(args, cfg) -> int:
    model = trainer.load_model(args.artifact)
    detector = get_detector(args.detector or cfg["service.detector"])
    path = Path(args.file)
    if not path.is_file():
        raise VeriframeError(f"media file not found: {path}")
    payload = path.read_bytes()
    media_type = sniff_media_type(path.name, payload)
    report = classify_media(
        payload,
        media_type,
        model,
        detector,
        frames=args.frames,
        threshold=args.threshold,
        seed=args.seed,
        model_id=getattr(model, "model_id", ""),
    )
    sys.stdout.write(canonical_report_json(report).decode("utf-8") + "\n")
    return 0


def _load_counts_csv(path: str) -> list[tuple[str, evaluator.ConfusionMatrix]]:
    import csv as _csv

    entries = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = _csv.DictReader(handle)
        required = {"model", "tp", "fp", "tn", "fn"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise VeriframeError(
                f"counts file needs columns {sorted(required)}, "
                f"got {reader.fieldnames}"
            )
        for row in reader:
            entries.append(
                (
                    row["model"],
                    evaluator.ConfusionMatrix(
                        tp=int(row["tp"]), fp=int(row["fp"]),
                        tn=int(row["tn"]), fn=int(row["fn"]),
                    ),
                )
            )
    if not entries:
        raise VeriframeError("counts file has no rows")
    return entries


def _cmd_report(args, cfg) -> int:
    if args.counts:
        report = evaluator.compare_models(_load_counts_csv(args.counts))
    else:
        report = evaluator.reference_comparison()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    evaluator.write_report_csv(report, out_dir / "report.csv")
    evaluator.write_report_json(report, out_dir / "report.json")
    print(json.dumps(evaluator.report_to_dict(report)["best"], indent=2),
          file=sys.stderr)
    print(f"wrote {out_dir / 'report.csv'} and {out_dir / 'report.json'}",
          file=sys.stderr)
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "export": _cmd_export,
    "serve": _cmd_serve,
    "predict": _cmd_predict,
    "report": _cmd_report,
}


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(config_path=args.config)
        return _COMMANDS[args.command](args, cfg)
    except VeriframeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
