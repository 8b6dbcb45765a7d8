import json
import subprocess
import sys

import numpy as np
import pytest

import fixtures
from privod import dataset, frameio
from privod.cli import main, ordered_map
from privod.encoder import render_bitmap
from privod.geometry import OrientedBox
from privod.raster import VideoMeta
from privod.synth import Actor, SceneScript

EMPTY_SCENE = SceneScript(VideoMeta(fps=25, width=40, height=30, frame_count=6), background=60, noise_sigma=0)


def small_scene(frames=40):
    traj = ((0, OrientedBox(10, 15, 8, 10)), (10, OrientedBox(10, 15, 8, 10)),
            (20, OrientedBox(40, 15, 8, 10)), (frames - 1, OrientedBox(40, 15, 8, 10)))
    bed = Actor(0, ((0, OrientedBox(30, 22, 40, 10, 0.1)), (frames - 1, OrientedBox(30, 22, 40, 10, 0.1))), 120)
    return SceneScript(VideoMeta(fps=25, width=64, height=32, frame_count=frames),
                       (bed, Actor(1, traj, 230)), noise_sigma=2.0, blur=(2, 1), seed=1)


def write_video(path, frames):
    with open(path, "wb") as fp:
        frameio.write_stream(fp, frames)


def read_video(path):
    with open(path, "rb") as fp:
        return [np.asarray(f) for f in frameio.read_stream(fp)]


@pytest.fixture
def scene_files(tmp_path):
    scene = tmp_path / "scene.json"
    scene.write_text(small_scene().to_json())
    video, labels = tmp_path / "raw.bin", tmp_path / "labels"
    assert main(["simulate", "--scene", str(scene), "--out", str(video), "--labels", str(labels),
                 "--video-id", "cam"]) == 0
    return video, labels


def test_ordered_map_preserves_order():
    assert list(ordered_map(lambda x: x * x, range(50), 4)) == [x * x for x in range(50)]
    assert list(ordered_map(str, [], 3)) == []


def test_config_subcommand(capsys, tmp_path):
    assert main(["--seed", "7", "config"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["seed"] == 7 and doc["blur"] == {"radius": 6, "passes": 1}
    bad = tmp_path / "bad.json"
    bad.write_text('{"blurr": {}}')
    assert main(["--config", str(bad), "config"]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.json"), "config"]) == 2


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["blur", "--radius", "x"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "privod", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 1
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"\x04\x00\x00\x00\x04\x00\x00\x00\x07")
    proc = subprocess.run([sys.executable, "-m", "privod", "blur", "--in", str(bad), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "byte offset 8" in proc.stderr


def test_blur_identity_cases(tmp_path):
    rng = np.random.default_rng(0)
    noisy = [rng.integers(0, 256, (20, 24, 3), dtype=np.uint8) for _ in range(4)]
    write_video(tmp_path / "n.bin", noisy)
    assert main(["blur", "--in", str(tmp_path / "n.bin"), "--out", str(tmp_path / "n0.bin"), "--radius", "0"]) == 0
    assert (tmp_path / "n0.bin").read_bytes() == (tmp_path / "n.bin").read_bytes()
    write_video(tmp_path / "c.bin", [np.full((20, 24, 3), 90, np.uint8)] * 3)
    assert main(["blur", "--in", str(tmp_path / "c.bin"), "--out", str(tmp_path / "c6.bin")]) == 0
    assert (tmp_path / "c6.bin").read_bytes() == (tmp_path / "c.bin").read_bytes()


def test_blur_threads_do_not_change_output(tmp_path):
    rng = np.random.default_rng(1)
    write_video(tmp_path / "n.bin", [rng.integers(0, 256, (20, 24), dtype=np.uint8) for _ in range(9)])
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"o{threads}.bin"
        assert main(["--threads", threads, "blur", "--in", str(tmp_path / "n.bin"), "--out", str(out),
                     "--radius", "3"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert len(read_video(tmp_path / "o1.bin")) == 9


def test_blur_truncated_stream(tmp_path, capsys):
    write_video(tmp_path / "n.bin", [np.zeros((4, 4), np.uint8)] * 2)
    data = (tmp_path / "n.bin").read_bytes()[:-3]
    (tmp_path / "t.bin").write_bytes(data)
    assert main(["blur", "--in", str(tmp_path / "t.bin"), "--out", str(tmp_path / "o.bin"), "--radius", "1"]) == 2
    assert "byte offset 25" in capsys.readouterr().err


def test_simulate_empty_scene(tmp_path):
    scene = tmp_path / "s.json"
    scene.write_text(EMPTY_SCENE.to_json())
    out, labels = tmp_path / "v.bin", tmp_path / "lab"
    assert main(["simulate", "--scene", str(scene), "--out", str(out), "--labels", str(labels)]) == 0
    frames = read_video(out)
    assert len(frames) == 6 and all(np.all(f == 60) for f in frames)
    files = dataset.label_files(labels)
    assert len(files) == 6 and all(p.read_text() == "" for p in files.values())


def test_simulate_invalid_scene(tmp_path, capsys):
    scene = tmp_path / "s.json"
    scene.write_text('{"canvas": {"width": 0, "height": 3}}')
    assert main(["simulate", "--scene", str(scene), "--out", str(tmp_path / "v.bin")]) == 2


def test_simulate_is_deterministic(tmp_path, scene_files):
    video, labels = scene_files
    scene = tmp_path / "scene.json"
    again = tmp_path / "again.bin"
    assert main(["simulate", "--scene", str(scene), "--out", str(again)]) == 0
    assert again.read_bytes() == video.read_bytes()
    assert len(dataset.label_files(labels)) == 40


def test_extract_clips(tmp_path, scene_files, capsys):
    video, _ = scene_files
    out = tmp_path / "clips.csv"
    assert main(["extract-clips", "--in", str(video), "--out", str(out), "--pad-seconds", "0",
                 "--threshold", "1.0", "--video-id", "cam"]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "video_id,start_frame,end_frame,peak_motion"
    assert [r.split(",")[:3] for r in rows[1:]] == [["cam", "11", "21"]]
    write_video(tmp_path / "static.bin", [np.full((8, 8), 5, np.uint8)] * 10)
    assert main(["extract-clips", "--in", str(tmp_path / "static.bin"), "--out", str(out)]) == 0
    assert out.read_text() == "video_id,start_frame,end_frame,peak_motion\n"


def test_encode_none_mode(tmp_path, scene_files):
    video, _ = scene_files
    out = tmp_path / "enc.bin"
    assert main(["encode", "--in", str(video), "--out", str(out)]) == 0
    frames = read_video(out)
    assert len(frames) == 40 and not any(f[..., 2].any() for f in frames)
    audit = (tmp_path / "enc.bin.audit.jsonl").read_text().splitlines()
    assert len(audit) == 40 and json.loads(audit[5])["mode"] == "none"


def test_encode_train_is_deterministic(tmp_path, scene_files):
    video, labels = scene_files
    outs = []
    for name, threads in (("a", "1"), ("b", "3")):
        out = tmp_path / f"{name}.bin"
        assert main(["--seed", "11", "--threads", threads, "encode", "--in", str(video), "--out", str(out),
                     "--mode", "train", "--labels", str(labels), "--video-id", "cam"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    frames = read_video(tmp_path / "a.bin")
    assert set(np.unique(np.stack(frames)[..., 2])) <= {0, 32}
    assert any(f[..., 2].any() for f in frames)
    other = tmp_path / "c.bin"
    main(["--seed", "12", "encode", "--in", str(video), "--out", str(other), "--mode", "train",
          "--labels", str(labels), "--video-id", "cam"])
    assert other.read_bytes() != outs[0]


def test_encode_train_missing_label(tmp_path, scene_files, capsys):
    video, labels = scene_files
    (labels / "cam_7.txt").unlink()
    assert main(["encode", "--in", str(video), "--out", str(tmp_path / "e.bin"), "--mode", "train",
                 "--labels", str(labels), "--video-id", "cam"]) == 2
    assert "frame 7" in capsys.readouterr().err


def test_encode_mode_needs_directory(tmp_path, scene_files):
    video, _ = scene_files
    assert main(["encode", "--in", str(video), "--out", str(tmp_path / "e.bin"), "--mode", "train"]) == 1


def test_encode_infer_uses_confident_boxes(tmp_path, scene_files):
    video, labels = scene_files
    dets = tmp_path / "dets"
    dets.mkdir()
    box = OrientedBox(20, 16, 10, 10)
    dataset.write_detection_file(dets, "cam", 4, [dataset.Detection(1, box, 0.9), dataset.Detection(0, OrientedBox(50, 10, 6, 6), 0.1)])
    out = tmp_path / "e.bin"
    assert main(["encode", "--in", str(video), "--out", str(out), "--mode", "infer", "--detections", str(dets),
                 "--video-id", "cam"]) == 0
    blues = [f[..., 2] for f in read_video(out)]
    assert np.array_equal(blues[5], render_bitmap([box], 64, 32))
    assert sum(b.any() for b in blues) == 1


def write_fixture(root):
    labels, dets = root / "labels", root / "dets"
    labels.mkdir()
    dets.mkdir()
    for frame in range(10):
        dataset.write_label_file(labels, fixtures.VIDEO, frame, [t for t in fixtures.TRUTHS if t.frame_index == frame])
        dataset.write_detection_file(dets, fixtures.VIDEO, frame,
                                     [d for d in fixtures.DETECTIONS if d.frame_index == frame])
    return labels, dets


def test_eval_fixture(tmp_path, capsys):
    labels, dets = write_fixture(tmp_path)
    out = tmp_path / "report"
    assert main(["eval", "--labels", str(labels), "--detections", str(dets), "--out", str(out),
                 "--model", "fixture"]) == 0
    printed = capsys.readouterr().out
    cells = [c.strip() for c in printed.splitlines()[-1].split("|")[1:]]
    assert cells == ["50.0", "55.0", "25.0", "83.3", "53.3"]
    ap = (out / "ap.csv").read_text().splitlines()
    assert ap[4] == "patient,0.833333,2,4"
    counts = (out / "confusion_counts.csv").read_text().splitlines()
    assert counts[1:] == ["bed,1,0,0,0,0", "staff,0,3,0,0,2", "devices,0,0,1,0,1", "patient,1,0,0,2,0",
                          "background,0,1,1,0,0"]
    assert (out / "confusion.csv").exists() and (out / "table.txt").read_text() == printed


def test_eval_no_shared_keys(tmp_path, capsys):
    labels, dets = tmp_path / "l", tmp_path / "d"
    labels.mkdir()
    dets.mkdir()
    dataset.write_label_file(labels, "a", 0, [])
    dataset.write_detection_file(dets, "b", 0, [])
    assert main(["eval", "--labels", str(labels), "--detections", str(dets), "--out", str(tmp_path / "r")]) == 2
    assert "no frame keys shared" in capsys.readouterr().err


def test_eval_with_manifest(tmp_path, capsys):
    labels, dets = write_fixture(tmp_path)
    manifest = tmp_path / "m.csv"
    manifest.write_text("frame_key,split\nfx_0,test\nfx_1,train\n")
    assert main(["eval", "--labels", str(labels), "--detections", str(dets), "--out", str(tmp_path / "r"),
                 "--manifest", str(manifest)]) == 0
    ap = (tmp_path / "r" / "ap.csv").read_text().splitlines()
    assert ap[1] == "bed,1.000000,1,1" and ap[2] == "staff,n/a,0,0"


def test_split(tmp_path):
    labels = tmp_path / "labels"
    labels.mkdir()
    for i in range(100):
        dataset.write_label_file(labels, "v", i, [])
    out = tmp_path / "m.csv"
    assert main(["--seed", "3", "split", "--labels", str(labels), "--out", str(out)]) == 0
    manifest = dataset.read_manifest(out.read_text())
    assert sorted(manifest.values()).count("train") == 70
    assert sorted(manifest.values()).count("val") == 15
    first = out.read_text()
    assert main(["--seed", "3", "split", "--labels", str(labels), "--out", str(out)]) == 0
    assert out.read_text() == first
    assert main(["split", "--labels", str(labels), "--out", str(out), "--fractions", "0.5,0.5,0.5"]) == 1


def test_end_to_end_perfect_detections(tmp_path, scene_files, capsys):
    video, labels = scene_files
    blurred, encoded = tmp_path / "b.bin", tmp_path / "e.bin"
    assert main(["blur", "--in", str(video), "--out", str(blurred), "--radius", "2"]) == 0
    assert main(["encode", "--in", str(blurred), "--out", str(encoded), "--mode", "train", "--labels", str(labels),
                 "--video-id", "cam"]) == 0
    dets = tmp_path / "dets"
    dets.mkdir()
    for key, path in dataset.label_files(labels).items():
        vid, idx = dataset.parse_frame_key(key)
        anns = dataset.read_label_file(path)
        dataset.write_detection_file(dets, vid, idx, [dataset.Detection(a.class_id, a.box, 1.0) for a in anns])
    capsys.readouterr()
    assert main(["eval", "--labels", str(labels), "--detections", str(dets), "--out", str(tmp_path / "r")]) == 0
    cells = [c.strip() for c in capsys.readouterr().out.splitlines()[-1].split("|")[1:]]
    assert cells == ["100.0", "100.0", "n/a", "n/a", "100.0"]
