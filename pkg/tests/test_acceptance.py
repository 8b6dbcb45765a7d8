"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""

import math
import time
from fractions import Fraction

import numpy as np
from scipy import stats

import fixtures
from oracles import oracle_iou
from privod import frameio
from privod.cli import main
from privod.clips import covered_frames, extract_segments, motion_series
from privod.dataset import Annotation, Detection, split_frames
from privod.encoder import MARK, AugmentationPolicy, BoxSource, encode, render_bitmap
from privod.evaluation import format_percent, match_all, mean_average_precision, per_class_ap
from privod.geometry import OrientedBox, iou
from privod.raster import BLUR_RADIUS, VideoMeta, box_mask
from privod.synth import PRESET_MOTION, Actor, SceneScript, render_video

PAD_FRAMES = 250


def test_iou_matches_rasterized_oracle(acceptance):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst = 0.0
    n = 10_000
    for _ in range(n):
        a = OrientedBox(*rng.uniform(0, 400, 2), *rng.uniform(1, 200, 2), rng.uniform(-math.pi, math.pi))
        b = OrientedBox(a.cx + rng.uniform(-100, 100), a.cy + rng.uniform(-100, 100), *rng.uniform(1, 200, 2),
                        rng.uniform(-math.pi, math.pi))
        worst = max(worst, abs(iou(a, b) - oracle_iou(a, b, 2048)))
    elapsed = time.perf_counter() - t0
    sq = OrientedBox(0, 0, 2, 2)
    analytic = [
        (iou(sq, sq), 1.0),
        (iou(sq, OrientedBox(100, 0, 2, 2)), 0.0),
        (iou(sq, OrientedBox(1, 0, 2, 2)), 1 / 3),
    ]
    analytic_err = max(abs(got - want) for got, want in analytic)
    ok = worst <= 2e-3 and analytic_err <= 1e-9 and elapsed < 60
    acceptance(1, ok, f"max |iou - oracle| {worst:.2e} over {n} pairs, analytic err {analytic_err:.1e}, {elapsed:.1f} s")
    assert ok


def test_augmentation_statistics(acceptance):
    boxes = [OrientedBox(14, 14, 8, 8), OrientedBox(34, 14, 8, 8, 0.3), OrientedBox(14, 34, 6, 10),
             OrientedBox(34, 34, 10, 6, -0.4)]
    source = BoxSource.ground_truth(boxes)
    policy = AugmentationPolicy(seed=77)
    frame = np.zeros((48, 48, 3), np.uint8)
    n = 100_000
    used = discarded = any_blue = 0
    survivors = jittered = 0
    offsets = []
    values = set()
    t0 = time.perf_counter()
    for i in range(n):
        enc = encode(frame, None, source, policy, index=i)
        rec = enc.audit
        values.update(np.unique(enc.blue).tolist())
        any_blue += bool(enc.blue.any())
        if not rec.use_bitmap:
            continue
        used += 1
        if rec.discard_all:
            discarded += 1
            continue
        survivors += len(rec.jittered)
        jittered += sum(rec.jittered)
        offsets.extend(rec.offsets)
    elapsed = time.perf_counter() - t0
    offsets = np.array(offsets)
    use_rate = used / n
    discard_rate = discarded / used
    jitter_rate = jittered / survivors
    blue_rate = any_blue / n
    uniform = stats.uniform(loc=-10, scale=20).cdf
    ks = max(stats.kstest(offsets[:, 0], uniform).statistic, stats.kstest(offsets[:, 1], uniform).statistic)
    ok = (
        abs(use_rate - 0.5) <= 0.01
        and abs(discard_rate - 0.2) <= 0.01
        and abs(jitter_rate - 0.6) <= 0.01
        and abs(blue_rate - 0.4) <= 0.01
        and ks < 0.01
        and values <= {0, MARK}
        and elapsed < 120
    )
    acceptance(
        2, ok,
        f"use {use_rate:.4f}, discard|use {discard_rate:.4f}, jitter|kept {jitter_rate:.4f}, "
        f"any-blue {blue_rate:.4f}, KS {ks:.4f} (n={len(offsets)}), {elapsed:.1f} s",
    )
    assert ok


def test_blue_channel_contract(acceptance):
    rng = np.random.default_rng(3)
    frame = rng.integers(0, 256, (60, 80, 3), dtype=np.uint8)
    seen = set()
    exact = True
    for i in range(300):
        k = int(rng.integers(0, 6))
        boxes = [OrientedBox(*rng.uniform(-10, 90, 2), *rng.uniform(1, 40, 2), rng.uniform(-3, 3)) for _ in range(k)]
        confs = rng.uniform(0, 1, k).tolist()
        src = BoxSource.predictions(boxes, confs, 0.25)
        inferred = encode(frame, None, src, None, index=i).blue
        expected = render_bitmap([b for b, c in zip(boxes, confs) if c >= 0.25], 80, 60)
        exact &= np.array_equal(inferred, expected)
        trained = encode(frame, None, BoxSource.ground_truth(boxes), AugmentationPolicy(seed=i), index=i).blue
        seen.update(np.unique(inferred).tolist())
        seen.update(np.unique(trained).tolist())
    ok = exact and seen <= {0, MARK}
    acceptance(3, ok, f"blue values {sorted(seen)}, inference bitmap exact on 300 frames: {exact}")
    assert ok


def test_table_all_column(acceptance):
    baseline = [0.980, 0.581, 0.976, 0.953]
    proposed = [0.995, 0.581, 0.984, 0.994]
    shown = (format_percent(mean_average_precision(baseline)), format_percent(mean_average_precision(proposed)))
    exact = tuple(sum(Fraction(str(v)) for v in row) / 4 * 100 for row in (baseline, proposed))
    ok = shown == ("87.2", "88.9") and exact == (Fraction("87.25"), Fraction("88.85"))
    acceptance(4, ok, f"All column {shown[0]} / {shown[1]} (exact {float(exact[0])} / {float(exact[1])})")
    assert ok


def _random_fixture(rng):
    truths, dets = [], []
    for frame in range(int(rng.integers(1, 6))):
        for _ in range(int(rng.integers(0, 5))):
            box = OrientedBox(*rng.uniform(0, 200, 2), *rng.uniform(5, 60, 2), rng.uniform(-3, 3))
            cls = int(rng.integers(0, 4))
            truths.append(Annotation(cls, box, frame, "r"))
            if rng.random() < 0.7:
                moved = box.translated(*rng.uniform(-5, 5, 2))
                dets.append(Detection(cls, moved, float(rng.uniform(0.05, 1)), frame, "r"))
        for _ in range(int(rng.integers(0, 3))):
            box = OrientedBox(*rng.uniform(0, 200, 2), *rng.uniform(5, 60, 2), rng.uniform(-3, 3))
            dets.append(Detection(int(rng.integers(0, 4)), box, float(rng.uniform(0.05, 1)), frame, "r"))
    return truths, dets


def _tp_counts(result):
    return {c: sum(tp for _, tp in recs) for c, recs in result.records.items()}


def test_ap_fixture_and_duplicates(acceptance):
    aps = per_class_ap(match_all(fixtures.DETECTIONS, fixtures.TRUTHS))
    fixture_err = max(abs(aps[c] - v) for c, v in fixtures.EXPECTED_AP.items())
    rng = np.random.default_rng(5)
    violations = 0
    for _ in range(1000):
        truths, dets = _random_fixture(rng)
        clones = [Detection(d.class_id, d.box, d.confidence * float(rng.uniform(0.5, 1)), d.frame_index, d.video_id)
                  for d in dets]
        before = _tp_counts(match_all(dets, truths))
        after = _tp_counts(match_all(dets + clones, truths))
        violations += any(after.get(c, 0) != n for c, n in before.items())
    ok = fixture_err <= 1e-9 and violations == 0
    acceptance(5, ok, f"fixture AP max err {fixture_err:.1e}; duplicate-TP violations {violations}/1000")
    assert ok


def _random_script(rng):
    frames = 160
    canvas = VideoMeta(fps=25, width=64, height=48, frame_count=frames)
    actors = [Actor(0, ((0, OrientedBox(32, 34, 50, 16, 0.1)), (frames - 1, OrientedBox(32, 34, 50, 16, 0.1))), 110)]
    for _ in range(int(rng.integers(1, 3))):
        start = int(rng.integers(5, 120))
        stop = start + int(rng.integers(3, 30))
        a = OrientedBox(*rng.uniform(10, 50, 2), *rng.uniform(6, 16, 2), rng.uniform(-1, 1))
        b = a.translated(*rng.uniform(-20, 20, 2))
        actors.append(Actor(1, ((0, a), (start, a), (stop, b), (frames - 1, b)), int(rng.integers(180, 250))))
    return SceneScript(canvas, tuple(actors), noise_sigma=2.0, blur=(2, 1), seed=int(rng.integers(0, 1000)))


def test_clip_extraction(acceptance, preset_video):
    script, frames, _ = preset_video
    series = motion_series(frames)
    segments = extract_segments(series, 2.0, 10.0, script.canvas.fps, len(frames))
    start, stop = PRESET_MOTION
    boundary_ok = len(segments) == 1
    if boundary_ok:
        seg = segments[0]
        # segment end is exclusive; compare the last covered frame
        boundary_ok = abs(seg.start - (start - PAD_FRAMES)) <= 1 and abs((seg.end - 1) - (stop + PAD_FRAMES)) <= 1
    rng = np.random.default_rng(9)
    monotone_ok = True
    for _ in range(15):
        rscript = _random_script(rng)
        rseries = motion_series(render_video(rscript)[0])
        n = rscript.canvas.frame_count
        covers = [covered_frames(extract_segments(rseries, t, 0.4, 25, n)) for t in np.linspace(0, 4, 17)]
        monotone_ok &= all(a >= b for a, b in zip(covers, covers[1:]))
        covers = [covered_frames(extract_segments(rseries, 0.5, p, 25, n)) for p in np.linspace(0, 2, 11)]
        monotone_ok &= all(a <= b for a, b in zip(covers, covers[1:]))
    ok = boundary_ok and monotone_ok
    got = [(s.start, s.end) for s in segments]
    acceptance(6, ok, f"preset segments {got} vs script {PRESET_MOTION} padded by {PAD_FRAMES}; "
                      f"monotone over 15 random scripts: {monotone_ok}")
    assert ok


def _pipeline(tmp, tag, threads):
    raw, blurred, encoded, labels = (tmp / f"{tag}_{n}" for n in ("raw.bin", "blur.bin", "enc.bin", "labels"))
    common = ["--seed", "42", "--threads", str(threads)]
    assert main(common + ["simulate", "--preset", "icu", "--raw", "--out", str(raw), "--labels", str(labels)]) == 0
    assert main(common + ["blur", "--in", str(raw), "--out", str(blurred)]) == 0
    assert main(common + ["encode", "--in", str(blurred), "--out", str(encoded), "--mode", "train",
                          "--labels", str(labels), "--video-id", "sim"]) == 0
    return encoded.read_bytes()


def test_end_to_end_determinism(acceptance, tmp_path):
    t0 = time.perf_counter()
    first = _pipeline(tmp_path, "a", 4)
    elapsed = time.perf_counter() - t0
    second = _pipeline(tmp_path, "b", 1)
    header = frameio.HEADER.unpack(first[: frameio.HEADER.size])
    frames = (len(first) - frameio.HEADER.size) // (header[0] * header[1] * header[2])
    ok = first == second and elapsed < 300 and frames == 750
    acceptance(7, ok, f"two runs bit-identical: {first == second} ({frames} frames {header[0]}x{header[1]}), "
                      f"one run {elapsed:.1f} s")
    assert ok


def test_green_channel_localization(acceptance, preset_video):
    script, frames, annotations = preset_video
    staff = {a.frame_index: a.box for a in annotations if a.class_id == 1}
    grow = 2 * (BLUR_RADIUS + 2)
    start, stop = PRESET_MOTION
    inside = total = 0
    for i in range(start + 1, stop + 1):
        green = encode(frames[i], frames[i - 1]).green > 0
        b = staff[i]
        region = box_mask(OrientedBox(b.cx, b.cy, b.w + grow, b.h + grow, b.theta), 640, 400)
        inside += int(np.count_nonzero(green & region))
        total += int(np.count_nonzero(green))
    share = inside / total if total else 0.0
    ok = total > 0 and share >= 0.90
    acceptance(8, ok, f"{share:.1%} of {total} motion pixels inside the staff box dilated by {grow // 2} px")
    assert ok


def test_frame_split(acceptance):
    keys = [f"cam_{i}" for i in range(100)]
    a = split_frames(keys, seed=1)
    counts = a.counts()
    permuted = list(np.random.default_rng(2).permutation(keys))
    invariant = split_frames(permuted, seed=1).assignment == a.assignment
    deterministic = split_frames(keys, seed=1).assignment == a.assignment
    ok = counts == {"train": 70, "val": 15, "test": 15} and invariant and deterministic
    acceptance(9, ok, f"counts {counts}, permutation invariant {invariant}, deterministic {deterministic}")
    assert ok
