"""Command-line front end wiring all pipeline stages.

Dense per-pixel work (change maps, segmentation, rendering) runs only on
frames the first stage flags as novel, which is the point of staging the
pipeline. Exit codes: 0 success, 2 input error, 3 configuration error.
"""

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import decision, metrics, novelty, prototypes, rasters, render, tensorfile
from .features import provider_from_arg
from .manifest import load_entry_image, load_entry_labels, load_manifest
from .novelty import PixelStatField, SeriesState
from .prototypes import (
    DEFAULT_CONFIDENCE_THRESHOLD,
    DEFAULT_NEIGHBORS,
    DEFAULT_PROTOTYPES_PER_CLASS,
)


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    manifest: str | None = None
    m: float = novelty.DEFAULT_SIGMA_MULTIPLIER
    epsilon: float = novelty.DEFAULT_CHANGE_THRESHOLD
    k: int = DEFAULT_NEIGHBORS
    prototypes: int = DEFAULT_PROTOTYPES_PER_CLASS
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    decision_threshold: float = decision.DEFAULT_DECISION_THRESHOLD
    method: str = "minibatch-kmeans"
    mode: str = "nearest-real-pixel"
    seed: int = 0
    provider: str = "identity"
    bank: str | None = None
    out: str = "."
    cap_per_class: int = 20000
    min_change_region: int = 0


def _validate(cfg: RunConfig) -> None:
    if cfg.m <= 0:
        raise ConfigError(f"--m must be positive, got {cfg.m}")
    if not 0.0 <= cfg.epsilon <= 1.0:
        raise ConfigError(f"--epsilon must lie in [0, 1], got {cfg.epsilon}")
    if cfg.k < 1:
        raise ConfigError(f"--k must be >= 1, got {cfg.k}")
    if cfg.prototypes < 1:
        raise ConfigError(f"--prototypes must be >= 1, got {cfg.prototypes}")
    if not 0.0 <= cfg.confidence_threshold <= 1.0:
        raise ConfigError(
            f"--confidence-threshold must lie in [0, 1], got {cfg.confidence_threshold}"
        )
    if not 0.0 <= cfg.decision_threshold <= 100.0:
        raise ConfigError(
            f"--decision-threshold must lie in [0, 100], got {cfg.decision_threshold}"
        )
    if cfg.method not in prototypes.METHODS:
        raise ConfigError(f"--method must be one of {prototypes.METHODS}")
    if cfg.mode not in prototypes.MODES:
        raise ConfigError(f"--mode must be one of {prototypes.MODES}")
    if cfg.cap_per_class < 1:
        raise ConfigError(f"--cap-per-class must be >= 1, got {cfg.cap_per_class}")


def resolve_config(args) -> RunConfig:
    """Defaults, overridden by --config file values, overridden by flags."""
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in doc.items():
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    _validate(cfg)
    return cfg


def _manifest_entries(cfg: RunConfig):
    if not cfg.manifest:
        raise ConfigError("a series manifest is required (positional or config 'manifest')")
    return load_manifest(cfg.manifest)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _verdict_line(verdict) -> str:
    return json.dumps(
        {
            "id": verdict.image_id,
            "timestamp": verdict.timestamp,
            "S": verdict.similarity,
            "threshold": verdict.threshold,
            "is_novel": verdict.is_novel,
        }
    )


def _run_detector(cfg, entries, on_frame=None):
    """Stream frames through stage 1; calls on_frame(verdict, image) per frame."""
    field = None
    state = SeriesState()
    verdicts = []
    for entry in entries:
        image = load_entry_image(entry)
        if field is None:
            field = PixelStatField.empty(*image.data.shape)
        verdict, field, state = novelty.process_frame(field, state, image, cfg.m)
        verdicts.append(verdict)
        if on_frame is not None:
            on_frame(verdict, image)
    return verdicts


def _write_verdicts(out: Path, verdicts) -> Path:
    path = out / "verdicts.jsonl"
    with open(path, "w") as fh:
        for verdict in verdicts:
            fh.write(_verdict_line(verdict) + "\n")
    return path


def cmd_detect(cfg, args) -> int:
    out = _out_dir(cfg)
    verdicts = _run_detector(cfg, _manifest_entries(cfg))
    _write_verdicts(out, verdicts)
    novel = sum(v.is_novel for v in verdicts)
    print(f"{len(verdicts)} frames, {novel} novel -> {out / 'verdicts.jsonl'}")
    return 0


def _change_mask(cfg, verdict):
    mask = novelty.binary_change_map(verdict.similarity_map, cfg.epsilon)
    return novelty.remove_small_regions(mask, cfg.min_change_region)


def cmd_change_map(cfg, args) -> int:
    out = _out_dir(cfg)

    def on_frame(verdict, image):
        if not verdict.is_novel:
            return
        tensorfile.write_tensor(
            out / f"{verdict.image_id}.similarity.imtf",
            verdict.similarity_map.astype(np.float32),
        )
        rasters.save_mask(out / f"{verdict.image_id}.change.imtf", _change_mask(cfg, verdict))

    verdicts = _run_detector(cfg, _manifest_entries(cfg), on_frame)
    _write_verdicts(out, verdicts)
    novel = sum(v.is_novel for v in verdicts)
    print(f"{len(verdicts)} frames, {novel} change maps -> {out}")
    return 0


def cmd_train_bank(cfg, args) -> int:
    entries = [e for e in _manifest_entries(cfg) if e.label_path is not None]
    if not entries:
        raise ValueError("no manifest entries carry label maps")
    provider = provider_from_arg(cfg.provider)
    labeled = [(load_entry_image(e), load_entry_labels(e)) for e in entries]
    samples = prototypes.collect_class_pixels(
        labeled, provider, cfg.cap_per_class, seed=cfg.seed
    )
    bank = prototypes.build_prototype_bank(
        samples, cfg.method, cfg.mode, per_class=cfg.prototypes, seed=cfg.seed
    )
    bank_path = Path(cfg.bank) if cfg.bank else _out_dir(cfg) / "bank.json"
    bank_path.parent.mkdir(parents=True, exist_ok=True)
    bank.save(bank_path)
    print(f"{len(bank)} prototypes ({cfg.method}, {cfg.mode}) -> {bank_path}")
    return 0


def _load_bank(cfg) -> prototypes.PrototypeBank:
    if not cfg.bank:
        raise ConfigError("--bank is required for this command")
    return prototypes.PrototypeBank.load(cfg.bank)


def cmd_segment(cfg, args) -> int:
    out = _out_dir(cfg)
    bank = _load_bank(cfg)
    provider = provider_from_arg(cfg.provider)
    entries = _manifest_entries(cfg)
    for entry in entries:
        image = load_entry_image(entry)
        labels, confidence = prototypes.segment_image(image, bank, provider, cfg.k)
        rasters.save_class_map(out / f"{entry.image_id}.classes.imtf", labels)
        tensorfile.write_tensor(
            out / f"{entry.image_id}.confidence.imtf", confidence.astype(np.float32)
        )
    print(f"segmented {len(entries)} frames -> {out}")
    return 0


def cmd_explain(cfg, args) -> int:
    bank = _load_bank(cfg)
    provider = provider_from_arg(cfg.provider)
    entry = next(
        (e for e in _manifest_entries(cfg) if e.image_id == args.image_id), None
    )
    if entry is None:
        raise ValueError(f"image id {args.image_id!r} not in manifest")
    image = load_entry_image(entry)
    explanation = prototypes.explain_pixel(image, args.h, args.v, bank, provider, cfg.k)
    print(json.dumps(explanation.to_dict(), indent=2))
    return 0


def cmd_pipeline(cfg, args) -> int:
    out = _out_dir(cfg)
    bank = _load_bank(cfg)
    provider = provider_from_arg(cfg.provider)
    records = []
    segment_calls = 0

    def on_frame(verdict, image):
        nonlocal segment_calls
        if not verdict.is_novel:
            return
        image_id = verdict.image_id
        tensorfile.write_tensor(
            out / f"{image_id}.similarity.imtf", verdict.similarity_map.astype(np.float32)
        )
        change = _change_mask(cfg, verdict)
        rasters.save_mask(out / f"{image_id}.change.imtf", change)
        labels, confidence = prototypes.segment_image(image, bank, provider, cfg.k)
        segment_calls += 1
        rasters.save_class_map(out / f"{image_id}.classes.imtf", labels)
        tensorfile.write_tensor(
            out / f"{image_id}.confidence.imtf", confidence.astype(np.float32)
        )
        render.save_png(out / f"{image_id}.classes.png", render.render_class_map(labels))
        render.save_png(
            out / f"{image_id}.confidence.png",
            render.render_confidence(confidence, labels, cfg.confidence_threshold),
        )
        water_change = decision.water_change_mask(change, labels)
        render.save_png(
            out / f"{image_id}.change_overlay.png",
            render.render_change_overlay(water_change),
        )
        percentage = decision.water_change_percentage(change, labels)
        records.append(
            decision.FrameRecord(
                image_id=image_id,
                timestamp=verdict.timestamp,
                new_water_percentage=percentage,
                decision=decision.flood_decision(percentage, cfg.decision_threshold),
                water_change=water_change,
            )
        )

    verdicts = _run_detector(cfg, _manifest_entries(cfg), on_frame)
    _write_verdicts(out, verdicts)
    report = decision.build_report(records)
    doc = report.to_dict()
    doc["invocations"] = {
        "frames": len(verdicts),
        "novel": sum(v.is_novel for v in verdicts),
        "segment_image_calls": segment_calls,
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    if report.extent is not None:
        rasters.save_mask(out / "extent.imtf", report.extent)
    onset = report.flood_onset or "none"
    print(
        f"{len(verdicts)} frames, {doc['invocations']['novel']} novel, "
        f"{segment_calls} segmented, onset {onset} -> {out}"
    )
    return 0


def _read_verdict_flags(path) -> list:
    flags = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                flags.append(bool(json.loads(line)["is_novel"]))
    return flags


def _read_truth_flags(path) -> list:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, list):
        raise ValueError(f"{path}: truth file must be a JSON array")
    return [bool(item["anomalous"]) for item in doc]


def cmd_eval(cfg, args) -> int:
    if len(args.pred) != len(args.gt):
        raise ValueError(
            f"{len(args.pred)} prediction files vs {len(args.gt)} ground-truth files"
        )
    out = _out_dir(cfg)
    csv_path = out / "metrics.csv"
    if args.eval_mode == "segmentation":
        rows = [
            metrics.segmentation_metrics(rasters.load_class_map(p), rasters.load_class_map(g))
            for p, g in zip(args.pred, args.gt)
        ]
        metrics.write_segmentation_csv(csv_path, rows)
    elif args.eval_mode == "anomaly":
        rows = [
            metrics.eval_anomaly_series(_read_verdict_flags(p), _read_truth_flags(g))
            for p, g in zip(args.pred, args.gt)
        ]
        metrics.write_anomaly_csv(csv_path, rows)
    else:
        rows = [
            metrics.eval_change_masks(rasters.load_mask(p), rasters.load_mask(g))
            for p, g in zip(args.pred, args.gt)
        ]
        metrics.write_change_csv(csv_path, rows)
    print(csv_path.read_text(), end="")
    print(f"-> {csv_path}")
    return 0


def cmd_render(cfg, args) -> int:
    out = _out_dir(cfg)
    labels = rasters.load_class_map(args.classes)
    stem = Path(args.classes).stem
    render.save_png(out / f"{stem}.png", render.render_class_map(labels))
    written = [f"{stem}.png"]
    if args.confidence:
        confidence = tensorfile.read_tensor(args.confidence)
        rgb = render.render_confidence(confidence, labels, cfg.confidence_threshold)
        name = f"{Path(args.confidence).stem}.png"
        render.save_png(out / name, rgb)
        written.append(name)
    if args.change:
        change = rasters.load_mask(args.change)
        water_change = decision.water_change_mask(change, labels)
        name = f"{Path(args.change).stem}_overlay.png"
        render.save_png(out / name, render.render_change_overlay(water_change))
        written.append(name)
    print(f"wrote {', '.join(written)} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON RunConfig file; flags override its values")
    shared.add_argument("--m", type=float, help="novelty sigma multiplier (default 3)")
    shared.add_argument("--epsilon", type=float, help="pixel change threshold (default 0.5)")
    shared.add_argument("--k", type=int, help="kNN neighbours (default 10)")
    shared.add_argument("--prototypes", type=int, help="prototypes per class (default 100)")
    shared.add_argument("--confidence-threshold", type=float,
                        help="high-confidence cutoff (default 0.8)")
    shared.add_argument("--decision-threshold", type=float,
                        help="flood decision, %% of valid pixels (default 1.0)")
    shared.add_argument("--method", choices=prototypes.METHODS, help="clustering method")
    shared.add_argument("--mode", choices=prototypes.MODES, help="prototype mode")
    shared.add_argument("--seed", type=int, help="RNG seed (default 0)")
    shared.add_argument("--provider", help='"identity" or a feature-tensor directory')
    shared.add_argument("--bank", help="prototype bank JSON path")
    shared.add_argument("--out", help="output directory (default .)")
    shared.add_argument("--cap-per-class", type=int, dest="cap_per_class",
                        help="training-pixel cap per class (default 20000)")
    shared.add_argument("--min-change-region", type=int, dest="min_change_region",
                        help="drop changed regions smaller than this (default off)")

    parser = argparse.ArgumentParser(
        prog="floodkit",
        description="Multi-stage flood detection over multispectral image time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, handler, help_text, manifest_arg=True):
        sp = sub.add_parser(name, parents=[shared], help=help_text)
        if manifest_arg:
            sp.add_argument("manifest", nargs="?", help="series manifest JSON")
        sp.set_defaults(handler=handler)
        return sp

    command("detect", cmd_detect, "flag novel frames, write verdicts.jsonl")
    command("change-map", cmd_change_map, "verdicts plus change maps for novel frames")
    command("train-bank", cmd_train_bank, "cluster labeled pixels into a prototype bank")
    command("segment", cmd_segment, "classify every frame in the manifest")
    sp = command("explain", cmd_explain, "kNN evidence for one pixel's label")
    sp.add_argument("image_id")
    sp.add_argument("h", type=int)
    sp.add_argument("v", type=int)
    command("pipeline", cmd_pipeline, "all four stages; dense work only on novel frames")
    sp = command("eval", cmd_eval, "metric CSVs from predictions and ground truth",
                 manifest_arg=False)
    sp.add_argument("eval_mode", choices=("segmentation", "anomaly", "change"))
    sp.add_argument("--pred", nargs="+", required=True)
    sp.add_argument("--gt", nargs="+", required=True)
    sp = command("render", cmd_render, "PNG renders of maps", manifest_arg=False)
    sp.add_argument("--classes", required=True, help="class map tensor")
    sp.add_argument("--confidence", help="confidence tensor to render")
    sp.add_argument("--change", help="change mask tensor to overlay")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.handler(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError, json.JSONDecodeError,
            tensorfile.TensorFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
