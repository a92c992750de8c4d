import json
from pathlib import Path

import cv2
import numpy as np
import pytest

from wraphdr.cli import EXIT_CAPACITY, EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from wraphdr.hdrio import read_hdr, read_winding_png, write_pfm
from wraphdr.metrics import evaluate
from wraphdr.scenes import random_smooth_scene

GOLDEN = Path(__file__).parent / "golden" / "cli"


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def gaussian(tmp_path):
    path = tmp_path / "gauss.pfm"
    assert run("scene", path, "--kind", "gaussian", "--amplitude", 16, "--size", 129, 129, "--sigma", 24) == 0
    return path


@pytest.fixture
def smooth(tmp_path):
    path = tmp_path / "smooth.pfm"
    write_pfm(random_smooth_scene(np.random.default_rng(3), (48, 48)), path)
    return path


class TestEncode:
    def test_files_and_metadata(self, tmp_path, gaussian):
        out = tmp_path / "enc"
        assert run("encode", gaussian, out, "--kind", "mantissa", "--alpha", 2, "--imax", 1) == EXIT_OK
        meta = json.loads((out / "sensor.json").read_text())
        assert meta["params"]["kind"] == "mantissa" and meta["params"]["alpha"] == 2.0
        assert meta["shape"] == [129, 129]
        assert read_winding_png(out / "winding.png").max() == 5
        assert meta["max_winding"] == 5

    def test_modulo_max_winding(self, tmp_path, gaussian):
        run("encode", gaussian, tmp_path / "enc", "--kind", "modulo")
        assert read_winding_png(tmp_path / "enc" / "winding.png").max() == 16

    def test_bits8_lattice(self, tmp_path, gaussian):
        run("encode", gaussian, tmp_path / "enc", "--bits", 8)
        codes = cv2.imread(str(tmp_path / "enc" / "sensor.png"), cv2.IMREAD_UNCHANGED).astype(int)
        assert np.all(codes % 257 == 0)

    def test_deterministic(self, tmp_path, gaussian):
        for d in ("a", "b"):
            run("encode", gaussian, tmp_path / d, "--bits", 10, "--noise-sigma", 0.01, "--seed", 4)
        for f in ("sensor.png", "winding.png"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_bad_flags_rejected_before_io(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            run("encode", tmp_path / "nope.pfm", tmp_path / "out", "--kind", "mantissa", "--imax", 0.5)
        assert exc.value.code == EXIT_USAGE
        assert not (tmp_path / "out").exists()

    def test_missing_input(self, tmp_path):
        assert run("encode", tmp_path / "nope.pfm", tmp_path / "out") == EXIT_IO


class TestDecode:
    @pytest.mark.parametrize("kind", ["modulo", "mantissa"])
    @pytest.mark.parametrize("solver", ["floodfill", "mrf"])
    def test_roundtrip_psnr(self, tmp_path, smooth, kind, solver):
        run("encode", smooth, tmp_path / "enc", "--kind", kind)
        report = tmp_path / "rep.json"
        code = run("decode", tmp_path / "enc" / "sensor.png", "-o", tmp_path / "out.pfm", "--solver", solver,
                   "--report", report, "--reference", smooth)
        assert code == EXIT_OK
        rep = json.loads(report.read_text())
        assert rep["psnr_db"] == "inf" or rep["psnr_db"] >= 100
        assert read_hdr(tmp_path / "out.pfm").shape == (48, 48)

    def test_missing_sidecar(self, tmp_path, smooth, caplog):
        run("encode", smooth, tmp_path / "enc")
        (tmp_path / "enc" / "sensor.json").unlink()
        assert run("decode", tmp_path / "enc" / "sensor.png", "-o", tmp_path / "o.pfm") == EXIT_IO
        assert "sensor.json" in caplog.text

    def test_mrf_noisy_reports_counters(self, tmp_path, smooth):
        run("encode", smooth, tmp_path / "enc", "--noise-sigma", 0.01, "--bits", 12)
        report = tmp_path / "rep.json"
        code = run("decode", tmp_path / "enc" / "sensor.png", "-o", tmp_path / "o.pfm", "--solver", "mrf",
                   "--max-label", 16, "--report", report)
        assert code == EXIT_OK
        rep = json.loads(report.read_text())
        for key in ("conflicts", "residual_edges", "clipped", "at_ceiling", "energy", "initial_energy"):
            assert key in rep

    def test_strict_capacity(self, tmp_path, gaussian):
        run("encode", gaussian, tmp_path / "enc", "--kind", "modulo")
        args = ["decode", tmp_path / "enc" / "sensor.png", "-o", tmp_path / "o.pfm", "--solver", "mrf",
                "--max-label", 4, "--max-sweeps", 1, "--report", tmp_path / "r.json"]
        assert run(*args) == EXIT_OK
        assert json.loads((tmp_path / "r.json").read_text())["capacity_exceeded"]
        assert run(*args, "--strict") == EXIT_CAPACITY

    def test_bad_solver_flag(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("decode", tmp_path / "s.png", "-o", tmp_path / "o.pfm", "--max-label", 0)
        assert exc.value.code == EXIT_USAGE


class TestDataset:
    def _sources(self, d):
        d.mkdir()
        rng = np.random.default_rng(0)
        for i in range(3):
            write_pfm(10 ** rng.uniform(-1, 2, (20, 24)), d / f"img{i}.pfm")
        (d / "notes.txt").write_text("ignored")

    def test_count_and_determinism(self, tmp_path, monkeypatch):
        self._sources(tmp_path / "src")
        flags = ["--exposure-factors", 1, 2, "--crop", 8, 8, "--crops-per-image", 2, "--seed", 3]
        assert run("dataset", tmp_path / "src", tmp_path / "a", *flags, "--threads", 1) == EXIT_OK
        monkeypatch.setenv("WRAPHDR_THREADS", "3")
        assert run("dataset", tmp_path / "src", tmp_path / "b", *flags) == EXIT_OK
        ma = (tmp_path / "a" / "manifest.jsonl").read_text().replace(str(tmp_path / "a"), "")
        lines = ma.splitlines()
        assert len(lines) == 3 * 2 * 2
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_record_reconstruction(self, tmp_path):
        self._sources(tmp_path / "src")
        run("dataset", tmp_path / "src", tmp_path / "out", "--exposure-factors", 4, "--crop", 8, 8)
        rec = json.loads((tmp_path / "out" / "manifest.jsonl").read_text().splitlines()[1])
        src = read_hdr(rec["source"])
        r0, c0 = rec["crop_origin"]
        truth = src[r0:r0 + 8, c0:c0 + 8] * 4
        z = np.load(tmp_path / "out" / rec["edges"])
        w = read_winding_png(tmp_path / "out" / rec["winding"])
        from wraphdr.codec import CodecParams, reconstruct
        out = reconstruct(z["sensor"], w, CodecParams.from_dict(rec["params"]))
        assert np.all(np.abs(out - truth) <= 4 * np.spacing(truth))

    def test_empty_source(self, tmp_path):
        (tmp_path / "src").mkdir()
        assert run("dataset", tmp_path / "src", tmp_path / "out") == EXIT_DATA

    def test_missing_dir(self, tmp_path):
        assert run("dataset", tmp_path / "nope", tmp_path / "out") == EXIT_IO


class TestEval:
    def test_self(self, tmp_path, gaussian, capsys):
        img = read_hdr(gaussian)
        big = tmp_path / "big.pfm"
        write_pfm(np.tile(img, (2, 2))[:180, :180], big)
        assert run("eval", big, big) == EXIT_OK
        line = json.loads(capsys.readouterr().out)
        assert line["psnr_db"] == "inf" and line["ssim"] == 1.0 and line["msssim"] == 1.0

    def test_matches_library(self, tmp_path, smooth):
        gt = read_hdr(smooth)
        pred = tmp_path / "pred.pfm"
        write_pfm(gt * 1.01, pred)
        out = tmp_path / "eval.jsonl"
        run("eval", pred, smooth, "-o", out)
        run("eval", pred, smooth, "-o", out, "--peak", 10)
        lines = [json.loads(x) for x in out.read_text().splitlines()]
        ref = evaluate(read_hdr(pred), gt)
        assert lines[0]["psnr_db"] == ref.psnr_db and lines[0]["ssim"] == ref.ssim
        assert lines[1]["psnr_db"] == evaluate(read_hdr(pred), gt, peak=10).psnr_db

    def test_dimension_mismatch(self, tmp_path, caplog):
        write_pfm(np.ones((4, 4)), tmp_path / "a.pfm")
        write_pfm(np.ones((4, 5)), tmp_path / "b.pfm")
        assert run("eval", tmp_path / "a.pfm", tmp_path / "b.pfm") == EXIT_DATA
        assert "mismatch" in caplog.text


def _sections(text):
    out, cur = {}, None
    for line in text.splitlines():
        if line.startswith("# "):
            cur = out.setdefault(line[2:], [])
        else:
            cur.append(line.split("\t"))
    return out


class TestAnalyze:
    def test_constant_scene(self, tmp_path, capsys):
        write_pfm(np.full((8, 8), 3.0), tmp_path / "c.pfm")
        assert run("analyze", tmp_path / "c.pfm") == EXIT_OK
        sec = _sections(capsys.readouterr().out)
        assert all(row[2] == "0" for row in sec["recoverability"][1:])
        hist = [row for row in sec["log_histogram"][2:]]
        assert sum(int(r[3]) > 0 for r in hist) == 1

    def test_gaussian_wraps_and_dr(self, tmp_path, gaussian):
        out = tmp_path / "a.tsv"
        assert run("analyze", gaussian, "-o", out, "--dr-n", 256) == EXIT_OK
        sec = _sections(out.read_text())
        wraps = {r[0]: (int(r[1]), int(r[2])) for r in sec["wrap_count"][1:]}
        assert wraps["modulo"][0] == 16 and wraps["mantissa"][0] == 5
        assert wraps["mantissa"][1] < wraps["modulo"][1]
        dr = {(r[0], r[1]): r[3] for r in sec["dynamic_range"][1:]}
        assert float(dr[("modulo", "256")]) == pytest.approx(24.08, abs=0.01)
        assert dr[("mantissa", "256")] == "rejected"

    def test_mantissa_dr_row(self, tmp_path, gaussian, capsys):
        run("analyze", gaussian, "--imax", 2, "--dr-n", 256)
        sec = _sections(capsys.readouterr().out)
        dr = {(r[0], r[1]): r[3] for r in sec["dynamic_range"][1:]}
        assert float(dr[("mantissa", "256")]) == pytest.approx(770.6, abs=0.1)

    def test_bad_bins(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("analyze", tmp_path / "x.pfm", "--bins", 1)
        assert exc.value.code == EXIT_USAGE


class TestGoldenOutputs:
    """Byte-for-byte checks of the documented text formats."""

    def _scene(self, tmp_path):
        path = tmp_path / "ramp.pfm"
        run("scene", path, "--kind", "ramp2d", "--size", 4, 12, "--slope", 0.4, "--slope-y", 0.1)
        return path

    def test_analyze_tsv(self, tmp_path):
        out = tmp_path / "a.tsv"
        run("analyze", self._scene(tmp_path), "-o", out, "--bins", 4, "--dr-n", 256)
        assert out.read_text() == (GOLDEN / "analyze_ramp.tsv").read_text()

    def test_sidecar(self, tmp_path):
        path = self._scene(tmp_path)
        run("encode", path, tmp_path / "enc", "--kind", "modulo", "--bits", 8)
        meta = json.loads((tmp_path / "enc" / "sensor.json").read_text())
        meta["source"] = "ramp.pfm"
        assert meta == json.loads((GOLDEN / "sensor.json").read_text())

    def test_decode_report(self, tmp_path):
        path = self._scene(tmp_path)
        run("encode", path, tmp_path / "enc", "--kind", "modulo")
        run("decode", tmp_path / "enc" / "sensor.png", "-o", tmp_path / "o.pfm", "--report", tmp_path / "r.json")
        rep = json.loads((tmp_path / "r.json").read_text())
        rep["sidecar"], rep["output"] = "sensor.json", "out.pfm"
        assert rep == json.loads((GOLDEN / "decode_report.json").read_text())

    def test_manifest_line(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        run("scene", src / "ramp.pfm", "--kind", "ramp2d", "--size", 4, 12, "--slope", 0.4)
        run("dataset", src, tmp_path / "out", "--exposure-factors", 2, "--crop", 4, 8, "--seed", 1)
        line = json.loads((tmp_path / "out" / "manifest.jsonl").read_text())
        line["source"] = "ramp.pfm"
        assert line == json.loads((GOLDEN / "manifest.jsonl").read_text())
