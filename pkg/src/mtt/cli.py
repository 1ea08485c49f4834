"""Command-line entry point: ``mtt track|simulate|evaluate|partition-debug``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import Config, ConfigError, load_config
from .core import (
    ParseError,
    parse_detections,
    parse_embeddings,
    read_tracks,
    write_detections,
    write_embeddings,
    write_tracks,
)
from .estimator import MultiTrackletTracker, TrackletGenerator, make_subsequences
from .metrics import clear_mot
from .partition import format_partition_debug
from .simulate import SceneSpec, format_ground_truth, generate
from .tracklets import SolverBudgetError

logger = logging.getLogger("mtt")

EXIT_OK, EXIT_INPUT, EXIT_BUDGET = 0, 2, 3


def _fail(msg: str, code: int = EXIT_INPUT) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def cmd_track(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else Config()
        frames = parse_detections(args.dets)
        emb = parse_embeddings(args.emb, frames) if args.emb else None
    except (OSError, ParseError, ConfigError) as exc:
        return _fail(str(exc))

    est = MultiTrackletTracker(cfg, mode=args.mode, log_events=args.log_events)
    try:
        est.fit(frames, embeddings=emb)
    except SolverBudgetError as exc:
        return _fail(str(exc), EXIT_BUDGET)
    except ValueError as exc:
        return _fail(str(exc))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_tracks(est.tracks_, out)
    manifest = dict(est.manifest_)
    manifest["inputs"] = {"dets": str(args.dets), "emb": str(args.emb) if args.emb else None,
                          "config": str(args.config) if args.config else None}
    manifest["output"] = str(out)
    manifest_path(out).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if args.log_events:
        out.with_name(out.stem + ".events.log").write_text("".join(e + "\n" for e in est.events_))
    if args.diagnostics:
        Path(args.diagnostics).write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in est.diagnostics_))
    if args.debug_dir:
        _write_debug(Path(args.debug_dir), frames, emb, cfg, args.mode)
    logger.info("%d tracks written to %s", len(est.tracks_), out)
    return EXIT_OK


def _write_debug(root: Path, frames, emb, cfg, mode) -> None:
    root.mkdir(parents=True, exist_ok=True)
    curve, subs = make_subsequences(frames, cfg, mode)
    (root / "partition.csv").write_text(format_partition_debug(curve, subs))
    gen = TrackletGenerator(cfg, debug=True).fit()
    rows, dumps = ["det_id,frame,cx,cy,cluster_id\n"], []
    for i, sub in enumerate(subs):
        res = gen.transform(frames.detections(sub.first, sub.last), emb, sub)
        rows += res.debug_rows
        dumps += [f"# subsequence {i} [{sub.first}, {sub.last}]\n{text}" for text in res.instances]
    (root / "clusters.csv").write_text("".join(rows))
    (root / "instances.txt").write_text("\n".join(dumps))


def cmd_simulate(args) -> int:
    try:
        spec = SceneSpec.load(args.spec)
    except (OSError, ValueError, TypeError) as exc:
        return _fail(f"invalid scene spec: {exc}")
    truth, frames, emb = generate(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_detections(frames, out / "det.txt")
    write_embeddings(emb, out / "emb.txt")
    (out / "gt.txt").write_text(format_ground_truth(truth))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        gt = read_tracks(args.gt)
        preds = read_tracks(args.tracks)
    except (OSError, ParseError) as exc:
        return _fail(str(exc))
    gt_frames = {f for t in gt for f in t.boxes}
    extra = {f for t in preds for f in t.boxes} - gt_frames
    if gt_frames and extra:
        print(f"warning: {len(extra)} track frames have no ground truth", file=sys.stderr)
    report = clear_mot(gt, preds, args.iou)
    print(report.to_json() if args.json else report.to_table(), end="" if not args.json else "\n")
    return EXIT_OK


def cmd_partition_debug(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else Config()
        frames = parse_detections(args.dets)
        curve, subs = make_subsequences(frames, cfg, args.mode)
    except (OSError, ParseError, ConfigError, ValueError) as exc:
        return _fail(str(exc))
    text = format_partition_debug(curve, subs)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the tracker on a detection file")
    p.add_argument("--dets", required=True)
    p.add_argument("--emb")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--mode", default="adaptive", help="adaptive | fixed:L | sliding:L")
    p.add_argument("--log-events", action="store_true")
    p.add_argument("--diagnostics", help="per-round JSON lines")
    p.add_argument("--debug-dir", help="write partition/cluster/instance dumps here")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("simulate", help="generate a synthetic scene")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="CLEAR-MOT and IDF1 against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("partition-debug", help="per-frame counts and subsequence ids as CSV")
    p.add_argument("--dets", required=True)
    p.add_argument("--config")
    p.add_argument("--mode", default="adaptive")
    p.add_argument("--out")
    p.set_defaults(func=cmd_partition_debug)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
