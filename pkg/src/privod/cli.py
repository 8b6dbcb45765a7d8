"""Command line entry point: ``privod <subcommand> ...``.

Frame data moves between subcommands as packed raw streams (``-`` means
stdin/stdout), labels and detections as per-frame text files. Exit codes:
0 success, 1 usage error, 2 data or format error, 3 internal error.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Iterator, TypeVar

from privod import clips, dataset, encoder, frameio, synth
from privod.config import PipelineConfig, load_config
from privod.errors import FormatError, InvariantError
from privod.evaluation import evaluate
from privod.raster import box_blur

log = logging.getLogger("privod")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

T = TypeVar("T")
R = TypeVar("R")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int) -> Iterator[R]:
    """``map`` over a worker pool; results come back in input order."""
    if threads <= 1:
        yield from map(fn, items)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending: deque = deque()
        for item in items:
            pending.append(pool.submit(fn, item))
            if len(pending) >= 2 * threads:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


@contextlib.contextmanager
def _open_in(path: str):
    if path == "-":
        yield sys.stdin.buffer
    else:
        with open(path, "rb") as fp:
            yield fp


@contextlib.contextmanager
def _open_out(path: str, mode: str = "wb"):
    if path == "-":
        yield sys.stdout.buffer if "b" in mode else sys.stdout
    else:
        with open(path, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": "\n"})) as fp:
            yield fp


def _pick(cli_value, config_value):
    return config_value if cli_value is None else cli_value


def cmd_blur(args, cfg: PipelineConfig) -> int:
    radius = _pick(args.radius, cfg.blur.radius)
    passes = _pick(args.passes, cfg.blur.passes)
    with _open_in(args.input) as src, _open_out(args.output) as dst:
        writer = frameio.StreamWriter(dst)
        frames = frameio.iter_stream(src)
        for out in ordered_map(lambda f: box_blur(f, radius, passes), frames, cfg.threads):
            writer.write(out)
    log.info("blurred %d frames (radius %d, passes %d)", writer.count, radius, passes)
    return EXIT_OK


def cmd_extract_clips(args, cfg: PipelineConfig) -> int:
    c = cfg.clips
    threshold = _pick(args.threshold, c.threshold)
    pad = _pick(args.pad_seconds, c.pad_seconds)
    fps = _pick(args.fps, c.fps)
    stride = _pick(args.stride, c.stride)
    with _open_in(args.input) as src:
        counter = {"n": 0}

        def counted(frames):
            for f in frames:
                counter["n"] += 1
                yield f

        series = list(clips.iter_motion(counted(frameio.iter_stream(src, fps=fps)), stride))
    segments = clips.extract_segments(series, threshold, pad, fps, counter["n"], args.video_id)
    with _open_out(args.output, "w") as dst:
        dst.write(clips.segments_to_csv(segments))
    log.info("%d frames, %d clip(s)", counter["n"], len(segments))
    return EXIT_OK


def _source_for(args, cfg: PipelineConfig, index: int) -> encoder.BoxSource | None:
    """Boxes of frame ``index - 1`` for the blue channel of frame ``index``."""
    if args.mode == "none" or index == 0:
        return None
    prev = index - 1
    key = dataset.frame_key(args.video_id, prev)
    if args.mode == "train":
        path = Path(args.labels) / f"{key}{dataset.LABEL_SUFFIX}"
        if not path.is_file():
            raise FormatError(f"missing label file for frame {prev} ({path})")
        anns = dataset.read_label_file(path)
        return encoder.BoxSource.ground_truth([a.box for a in anns])
    path = Path(args.detections) / f"{key}{dataset.DETECTION_SUFFIX}"
    dets = dataset.read_detection_file(path) if path.is_file() else []
    floor = _pick(args.confidence_floor, cfg.encoder.confidence_floor)
    return encoder.BoxSource.predictions([d.box for d in dets], [d.confidence for d in dets], floor)


def cmd_encode(args, cfg: PipelineConfig) -> int:
    if args.mode == "train" and not args.labels:
        raise UsageError("--mode train needs --labels")
    if args.mode == "infer" and not args.detections:
        raise UsageError("--mode infer needs --detections")
    e = cfg.encoder
    threshold = _pick(args.motion_threshold, e.motion_threshold)
    policy = None
    if args.mode == "train":
        policy = encoder.AugmentationPolicy(e.p_use_bitmap, e.p_discard_all, e.p_jitter_box, e.jitter_max, cfg.seed)
    audit_path = args.audit or (None if args.output == "-" else args.output + ".audit.jsonl")

    def jobs(frames):
        prev = None
        for frame in frames:
            index = frame.index + args.start_index
            yield frame.data, prev, _source_for(args, cfg, index), index
            prev = frame.data

    def work(job):
        cur, prev, source, index = job
        return encoder.encode(cur, prev, source, policy, threshold, index=index)

    with contextlib.ExitStack() as stack:
        src = stack.enter_context(_open_in(args.input))
        dst = stack.enter_context(_open_out(args.output))
        audit = stack.enter_context(_open_out(audit_path, "w")) if audit_path else None
        writer = frameio.StreamWriter(dst)
        for encoded in ordered_map(work, jobs(frameio.iter_stream(src)), cfg.threads):
            writer.write(encoded.to_array())
            if audit is not None:
                audit.write(encoded.audit.to_json() + "\n")
    log.info("encoded %d frames (mode %s)", writer.count, args.mode)
    return EXIT_OK


def cmd_eval(args, cfg: PipelineConfig) -> int:
    ev = cfg.eval
    iou_t = _pick(args.iou, ev.iou_threshold)
    conf_t = _pick(args.conf, ev.conf_threshold)
    cm_iou = _pick(args.cm_iou, ev.cm_iou_threshold)
    label_paths = dataset.label_files(args.labels)
    det_paths = dataset.detection_files(args.detections)
    if not set(label_paths) & set(det_paths):
        raise FormatError(f"no frame keys shared between {args.labels} and {args.detections}")
    keys = set(label_paths) | set(det_paths)
    if args.manifest:
        manifest = dataset.read_manifest(Path(args.manifest).read_text(encoding="utf-8"))
        keys = {k for k in keys if manifest.get(k) == args.split}
        if not keys:
            raise FormatError(f"no frames of split {args.split!r} in {args.manifest}")
    truths, dets = [], []
    for key in sorted(keys):
        if key in label_paths:
            truths.extend(dataset.read_label_file(label_paths[key]))
        if key in det_paths:
            dets.extend(dataset.read_detection_file(det_paths[key]))
    report = evaluate(dets, truths, iou_t, conf_t, cm_iou)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ap.csv").write_text(report.ap_csv(), encoding="utf-8")
    (out / "confusion.csv").write_text(report.matrix.to_csv(normalize=True), encoding="utf-8")
    (out / "confusion_counts.csv").write_text(report.matrix.to_csv(normalize=False), encoding="utf-8")
    table = report.table(args.model)
    (out / "table.txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_simulate(args, cfg: PipelineConfig) -> int:
    if args.scene:
        script = synth.SceneScript.from_json(Path(args.scene).read_text(encoding="utf-8"))
    else:
        script = synth.preset_icu_scene(cfg.seed)
    if args.raw:
        script = synth.SceneScript(
            script.canvas, script.actors, script.noise_sigma, (0, 1), script.seed, script.background,
            script.motion_interval,
        )
    if args.write_scene:
        Path(args.write_scene).write_text(script.to_json(), encoding="utf-8")
    labels = Path(args.labels) if args.labels else None
    if labels:
        labels.mkdir(parents=True, exist_ok=True)
    with _open_out(args.output) as dst:
        writer = frameio.StreamWriter(dst)
        for index, (frame, anns) in enumerate(synth.iter_video(script, args.video_id)):
            writer.write(frame)
            if labels:
                dataset.write_label_file(labels, args.video_id, index, anns)
    log.info("rendered %d frames", writer.count)
    return EXIT_OK


def cmd_split(args, cfg: PipelineConfig) -> int:
    fractions = cfg.split.fractions
    if args.fractions:
        try:
            fractions = tuple(float(x) for x in args.fractions.split(","))
        except ValueError:
            raise UsageError(f"--fractions must be comma-separated numbers, got {args.fractions!r}") from None
    try:
        fractions = dataset.check_fractions(fractions)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    keys = list(dataset.label_files(args.labels))
    by_video = args.by_video or cfg.split.group_by_video
    split = dataset.split_frames(keys, fractions, cfg.seed, group_by_video=by_video)
    with _open_out(args.output, "w") as dst:
        dst.write(split.to_csv())
    log.info("split %d frames: %s", len(keys), split.counts())
    return EXIT_OK


def cmd_config(args, cfg: PipelineConfig) -> int:
    sys.stdout.write(cfg.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="privod", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="PipelineConfig JSON file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--threads", type=int, help="worker threads for per-frame stages")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("blur", help="box-blur a packed frame stream")
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.add_argument("--radius", type=int)
    p.add_argument("--passes", type=int)
    p.set_defaults(func=cmd_blur)

    p = sub.add_parser("extract-clips", help="find padded motion clips, write CSV")
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.add_argument("--threshold", type=float)
    p.add_argument("--pad-seconds", type=float)
    p.add_argument("--fps", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--video-id", default="video")
    p.set_defaults(func=cmd_extract_clips)

    p = sub.add_parser("encode", help="temporal channel encoding of a frame stream")
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.add_argument("--mode", choices=("none", "train", "infer"), default="none")
    p.add_argument("--labels", help="ground-truth label directory (train mode)")
    p.add_argument("--detections", help="detection directory (infer mode)")
    p.add_argument("--video-id", default="video")
    p.add_argument("--start-index", type=int, default=0, help="frame number of the first frame in the stream")
    p.add_argument("--motion-threshold", type=int)
    p.add_argument("--confidence-floor", type=float)
    p.add_argument("--audit", help="gate audit JSONL (default: <out>.audit.jsonl)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("eval", help="mAP and confusion matrix of detections vs labels")
    p.add_argument("--detections", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", dest="output", required=True, help="report directory")
    p.add_argument("--iou", type=float, help="IoU threshold for mAP")
    p.add_argument("--conf", type=float, help="confidence threshold for the confusion matrix")
    p.add_argument("--cm-iou", type=float, help="IoU threshold for the confusion matrix")
    p.add_argument("--manifest", help="split manifest CSV restricting the frames")
    p.add_argument("--split", default="test", choices=dataset.SPLITS)
    p.add_argument("--model", default="model", help="row label in the printed table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="render a synthetic scene to a stream and label files")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scene", help="scene script JSON")
    src.add_argument("--preset", choices=("icu",), default="icu")
    p.add_argument("--out", dest="output", default="-")
    p.add_argument("--labels", help="directory for per-frame label files")
    p.add_argument("--video-id", default="sim")
    p.add_argument("--raw", action="store_true", help="skip the scene's blur")
    p.add_argument("--write-scene", help="also save the scene script as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("split", help="frame-level train/val/test manifest")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", dest="output", default="-")
    p.add_argument("--fractions", help="e.g. 0.7,0.15,0.15")
    p.add_argument("--by-video", action="store_true", help="keep each video in one split")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("config", help="print the effective configuration")
    p.set_defaults(func=cmd_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        cfg.validate()
    except (FormatError, ValueError, OSError) as exc:
        print(f"privod: config error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"privod {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantError, AssertionError) as exc:
        print(f"privod {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (FormatError, ValueError, OSError) as exc:
        print(f"privod {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
