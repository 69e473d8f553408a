import math

import numpy as np
import pytest

from posecomp import kitti_io
from posecomp.cli import main
from posecomp.geometry import Box3D
from posecomp.kitti_io import DepthRaster, LabelRecord, read_frame, write_frame
from posecomp.warp import checkerboard

import oracles

P2 = "P2: 721.5377 0 609.5593 44.85728 0 721.5377 172.854 0.2163791 0 0 1 0.002745884\n"


@pytest.fixture
def calib(tmp_path):
    p = tmp_path / "calib.txt"
    p.write_text(P2)
    return p


def pose_file(tmp_path, text, name="pose.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def scene_records(yaw=0.0):
    out = []
    for i, (x, z) in enumerate([(-4.0, 15.0), (2.0, 22.0), (6.0, 35.0)]):
        box = Box3D(np.array([x, 0.9, z]), (1.5, 1.6, 4.0), yaw + 0.3 * i * (yaw != 0))
        out.append(LabelRecord.from_box(box, bbox2d=(100, 100, 200, 160)))
    return out


class TestWarp:
    def write_inputs(self, tmp_path, w=64, h=48, depth=None):
        img = checkerboard(w, h, square=6)
        (tmp_path / "img.ppm").write_bytes(kitti_io.write_ppm(img))
        if depth is None:
            depth = np.full((h, w), 10.0, np.float32)
        (tmp_path / "depth.pfm").write_bytes(kitti_io.write_pfm(DepthRaster(depth)))
        return img

    def run(self, tmp_path, calib, *extra):
        args = ["warp", str(tmp_path / "img.ppm"), str(tmp_path / "depth.pfm"), str(calib),
                "--out", str(tmp_path / "out" / "view"), *extra]
        return main(args)

    def test_identity(self, tmp_path):
        img = self.write_inputs(tmp_path)
        calib = tmp_path / "c.txt"
        calib.write_text("P2: 60 0 31.5 0 0 60 23.5 0 0 0 1 0\n")
        assert self.run(tmp_path, calib) == 0
        out = kitti_io.read_ppm((tmp_path / "out" / "view.ppm").read_bytes())
        assert out.pixels.tobytes() == img.pixels.tobytes()
        mask = kitti_io.read_pgm((tmp_path / "out" / "view_mask.pgm").read_bytes())
        assert not mask.any()
        assert (tmp_path / "out" / "view_report.txt").read_text() == "1.000000 0 0\n"

    def test_golden_pitch(self, tmp_path, data_dir):
        v, u = np.mgrid[0:48, 0:64]
        depth = (4.0 + 0.25 * v + 0.05 * u).astype(np.float32)
        depth[40:, :8] = 0.0
        self.write_inputs(tmp_path, depth=depth)
        calib = tmp_path / "c.txt"
        calib.write_text("P2: 60 0 31.5 0 0 60 23.5 0 0 0 1 0\n")
        pose = pose_file(tmp_path, "pitch_deg: 3\n")
        assert self.run(tmp_path, calib, "--pose", str(pose), "--no-fill") == 0
        assert (tmp_path / "out" / "view.ppm").read_bytes() == \
            (data_dir / "warp_pitch3.ppm").read_bytes()
        assert (tmp_path / "out" / "view_mask.pgm").read_bytes() == \
            (data_dir / "warp_pitch3_mask.pgm").read_bytes()

    def test_crop(self, tmp_path, calib):
        self.write_inputs(tmp_path, 1280, 375)
        pose = pose_file(tmp_path, "pitch_deg: 2\n")
        assert self.run(tmp_path, calib, "--pose", str(pose), "--crop") == 0
        out = kitti_io.read_ppm((tmp_path / "out" / "view.ppm").read_bytes())
        assert (out.width, out.height) == (804, 244)

    def test_shape_mismatch_exit_1(self, tmp_path, calib):
        self.write_inputs(tmp_path, depth=np.ones((10, 10), np.float32))
        assert self.run(tmp_path, calib) == 1

    def test_missing_file_exit_1(self, tmp_path, calib):
        assert self.run(tmp_path, calib) == 1

    def test_bad_pose_exit_1(self, tmp_path, calib):
        self.write_inputs(tmp_path)
        pose = pose_file(tmp_path, "warp_factor: 9\n")
        assert self.run(tmp_path, calib, "--pose", str(pose)) == 1


class TestRelabel:
    def test_identity_round_trips(self, tmp_path, calib, data_dir):
        out = tmp_path / "out.txt"
        assert main(["relabel", str(data_dir / "label_000001.txt"), str(calib),
                     "--out", str(out)]) == 0
        src = kitti_io.read_label_file(data_dir / "label_000001.txt")
        assert kitti_io.read_label_file(out) == src
        assert not kitti_io.sidecar_path(out).exists()

    def test_ty_shifts_location(self, tmp_path, calib, data_dir):
        out = tmp_path / "out.txt"
        pose = pose_file(tmp_path, "ty: 0.5\n")
        assert main(["relabel", str(data_dir / "label_000001.txt"), str(calib),
                     "--pose", str(pose), "--out", str(out)]) == 0
        src = kitti_io.read_label_file(data_dir / "label_000001.txt")
        got = kitti_io.read_label_file(out)
        for a, b in zip(src, got):
            if a.is_dont_care:
                assert b == a
                continue
            assert b.location[1] == pytest.approx(a.location[1] + 0.5, abs=1e-9)
            assert (b.location[0], b.location[2], b.rotation_y) == \
                (a.location[0], a.location[2], a.rotation_y)

    def test_pitch_writes_sidecar_and_projected_boxes(self, tmp_path, calib):
        src = tmp_path / "in.txt"
        recs = scene_records(yaw=0.4)
        write_frame(src, recs, [None] * len(recs))
        out = tmp_path / "out.txt"
        pose = pose_file(tmp_path, "pitch_deg: 3\n")
        assert main(["relabel", str(src), str(calib), "--pose", str(pose), "--out", str(out)]) == 0
        assert kitti_io.sidecar_path(out).exists()
        got, rots = read_frame(out)
        R = oracles.rx(math.radians(3))
        for rec, new in zip(kitti_io.read_label_file(src), got):
            c = rec.center
            pts = oracles.cuboid_corners(c, rec.dims, oracles.ry(rec.rotation_y))
            moved = np.array([oracles.matvec(R, p) for p in pts])
            u = 721.5377 * moved[:, 0] / moved[:, 2] + 609.5593
            v = 721.5377 * moved[:, 1] / moved[:, 2] + 172.854
            ref = (max(u.min(), 0), max(v.min(), 0), min(u.max(), 1279), min(v.max(), 374))
            np.testing.assert_allclose(new.bbox2d, ref, atol=0.005 + 1e-9)

    def test_directory_mode_and_crop(self, tmp_path, calib, data_dir):
        labels = tmp_path / "labels"
        labels.mkdir()
        (labels / "000001.txt").write_text((data_dir / "label_000001.txt").read_text())
        out = tmp_path / "out"
        assert main(["relabel", str(labels), str(calib), "--crop", "--out", str(out)]) == 0
        got = kitti_io.read_label_file(out / "000001.txt")
        dc = [r for r in got if r.is_dont_care][0]
        src_dc = [r for r in kitti_io.read_label_file(labels / "000001.txt") if r.is_dont_care][0]
        assert dc.bbox2d[0] == pytest.approx(src_dc.bbox2d[0] - 238)
        assert dc.bbox2d[1] == pytest.approx(src_dc.bbox2d[1] - 65)
        for r in got:
            if not r.is_dont_care:
                assert 0 <= r.bbox2d[0] and r.bbox2d[2] <= 803 and r.bbox2d[3] <= 243

    def test_malformed_label_exit_1(self, tmp_path, calib):
        bad = tmp_path / "bad.txt"
        bad.write_text("Car 1 2 3\n")
        assert main(["relabel", str(bad), str(calib), "--out", str(tmp_path / "o.txt")]) == 1


class TestCompensate:
    def gt_and_dets(self, tmp_path, calib, pose_text, yaw=0.0):
        src = tmp_path / "ref.txt"
        recs = scene_records(yaw)
        write_frame(src, recs, [None] * len(recs))
        pose = pose_file(tmp_path, pose_text)
        gt = tmp_path / "gt.txt"
        assert main(["relabel", str(src), str(calib), "--pose", str(pose), "--out", str(gt)]) == 0
        gt_recs, gt_rots = read_frame(gt)
        dets = tmp_path / "det.txt"
        write_frame(dets, [r.with_score(0.9) for r in gt_recs], [None] * len(gt_recs))
        return pose, gt_recs, gt_rots, dets

    def test_zero_pose_keeps_geometry(self, tmp_path, calib):
        dets = tmp_path / "det.txt"
        recs = [r.with_score(0.8) for r in scene_records(0.5)]
        write_frame(dets, recs, [None] * len(recs))
        out = tmp_path / "out.txt"
        assert main(["compensate", str(dets), str(calib), "--out", str(out)]) == 0
        assert kitti_io.read_label_file(out) == kitti_io.read_label_file(dets)
        assert not kitti_io.sidecar_path(out).exists()

    def test_pitch_recovers_gt(self, tmp_path, calib):
        pose, gt_recs, gt_rots, dets = self.gt_and_dets(tmp_path, calib, "pitch_deg: 5\n")
        out = tmp_path / "comp.txt"
        assert main(["compensate", str(dets), str(calib), "--pose", str(pose),
                     "--out", str(out)]) == 0
        recs, rots = read_frame(out)
        for g, gr, d, dr in zip(gt_recs, gt_rots, recs, rots):
            np.testing.assert_allclose(d.to_box(dr).corners(), g.to_box(gr).corners(), atol=1e-6)

    def test_roll_only_touches_sidecar(self, tmp_path, calib):
        dets = tmp_path / "det.txt"
        recs = [r.with_score(0.8) for r in scene_records(0.5)]
        write_frame(dets, recs, [None] * len(recs))
        pose = pose_file(tmp_path, "roll_deg: 3\n")
        out = tmp_path / "out.txt"
        assert main(["compensate", str(dets), str(calib), "--pose", str(pose),
                     "--out", str(out)]) == 0
        before, after = kitti_io.read_label_file(dets), kitti_io.read_label_file(out)
        for a, b in zip(before, after):
            assert (a.rotation_y, a.dims) == (b.rotation_y, b.dims)
        rows = kitti_io.sidecar_path(out).read_text().splitlines()
        assert len(rows) == len(before)

    def test_apply_yaw(self, tmp_path, calib):
        dets = tmp_path / "det.txt"
        recs = [r.with_score(0.8) for r in scene_records(0.5)]
        write_frame(dets, recs, [None] * len(recs))
        pose = pose_file(tmp_path, "yaw_deg: 10\n")
        out = tmp_path / "out.txt"
        assert main(["compensate", str(dets), str(calib), "--pose", str(pose), "--apply-yaw",
                     "--out", str(out)]) == 0
        for a, b in zip(recs, kitti_io.read_label_file(out)):
            assert b.rotation_y == pytest.approx(a.rotation_y + math.radians(10), abs=0.005)


def write_dataset(root, n=3):
    from posecomp.synth import make_scene, shift_scene
    from posecomp.kitti_io import PoseSpec

    shifted = shift_scene(make_scene(seed=2, n_frames=n), PoseSpec(pitch_deg=2.0))
    dirs = [root / d for d in ("det", "gt", "calib")]
    for d in dirs:
        d.mkdir()
    for i, ((g, gr), (u, ur)) in enumerate(zip(shifted.gt, shifted.uncompensated)):
        write_frame(dirs[1] / f"{i:06d}.txt", g, gr)
        write_frame(dirs[0] / f"{i:06d}.txt", u, ur)
        (dirs[2] / f"{i:06d}.txt").write_text(P2)
    return [str(d) for d in dirs]


class TestEvalAblate:
    def test_eval_writes_csv(self, tmp_path, capsys):
        dirs = write_dataset(tmp_path)
        out = tmp_path / "res"
        assert main(["eval", *dirs, "--out", str(out)]) == 0
        csv = (out / "eval.csv").read_text().splitlines()
        assert csv[0] == "metric,tier,ap" and len(csv) == 10
        assert "ap3d" in capsys.readouterr().out

    def test_eval_flags(self, tmp_path):
        dirs = write_dataset(tmp_path)
        out = tmp_path / "res"
        assert main(["eval", *dirs, "--metric", "apbev", "--iou", "0.5", "--recall-points", "11",
                     "--out", str(out)]) == 0
        csv = (out / "eval.csv").read_text().splitlines()
        assert len(csv) == 4 and all(l.startswith("apbev") for l in csv[1:])

    def test_missing_frame_exit_2(self, tmp_path):
        dirs = write_dataset(tmp_path)
        (tmp_path / "gt" / "000001.txt").unlink()
        assert main(["eval", *dirs, "--out", str(tmp_path / "r")]) == 2
        assert main(["ablate", *dirs, "--out", str(tmp_path / "r")]) == 2

    def test_ablate_csv(self, tmp_path):
        dirs = write_dataset(tmp_path)
        out = tmp_path / "res"
        assert main(["ablate", *dirs, "--out", str(out)]) == 0
        lines = (out / "ablation.csv").read_text().splitlines()
        assert lines[0] == "factor,direction,tier,ap" and len(lines) == 34

    def test_bad_iou_flag(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["eval", "a", "b", "c", "--iou", "1.5"])
        assert err.value.code == 2


class TestSynthDemo:
    def test_outputs_and_determinism(self, tmp_path):
        args = ["synth-demo", "--frames", "4", "--angles", "0,3", "--offsets", "0.5"]
        assert main([*args, "--out", str(tmp_path / "a")]) == 0
        assert main([*args, "--out", str(tmp_path / "b")]) == 0
        for name in ("synth_demo.csv", "synth_demo_full.csv", "synth_demo_summary.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        lines = (tmp_path / "a" / "synth_demo.csv").read_text().splitlines()
        assert lines[0] == "axis,angle,variant,ap"
        assert "pitch,0,uncompensated,100.00" in lines
        assert "tx,+0.5,compensated,100.00" in lines

    def test_seed_range(self):
        with pytest.raises(SystemExit):
            main(["synth-demo", "--seed", "-1"])


def test_relabel_deterministic(tmp_path, calib, data_dir):
    pose = pose_file(tmp_path, "pitch_deg: 1.5\nroll_deg: -2\n")
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}.txt"
        main(["relabel", str(data_dir / "label_000001.txt"), str(calib), "--pose", str(pose),
              "--out", str(out)])
        outs.append(out.read_bytes() + kitti_io.sidecar_path(out).read_bytes())
    assert outs[0] == outs[1]
