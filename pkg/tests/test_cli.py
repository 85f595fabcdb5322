from __future__ import annotations

import csv
import json
import shutil

import numpy as np
import pytest
from PIL import Image

from spermmorph.cli import EXIT_ERROR, EXIT_OK, POINT_COLUMNS, TRACE_COLUMNS, main
from spermmorph.raster import InstancePartMask, ScalarImage, save_image, save_mask
from spermmorph.report import CSV_COLUMNS


@pytest.fixture(scope="module")
def phantom_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("phantoms")
    spec = d / "spec.json"
    spec.write_text(json.dumps({"canvas": [640, 512], "count": 1, "noise_sigma": 0.02}))
    assert main(["synth", "--spec", str(spec), "--seed", "5", "--out", str(d)]) == EXIT_OK
    spec.unlink()
    return d


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_writes_phantom_files(phantom_dir):
    names = sorted(p.name for p in phantom_dir.iterdir())
    assert names == ["phantom_000.png", "phantom_000_instance.png", "phantom_000_part.png",
                     "phantom_000_truth.json"]


def test_measure_round_trip(phantom_dir, tmp_path):
    out = tmp_path / "out"
    assert main(["measure", str(phantom_dir / "phantom_000.png"), "--out", str(out), "--overlay"]) == EXIT_OK
    rows = read_csv(out / "report.csv")
    truth = json.loads((phantom_dir / "phantom_000_truth.json").read_text())[0]
    assert len(rows) == 1 and list(rows[0]) == list(CSV_COLUMNS)
    r = rows[0]
    assert float(r["tail_length"]) == pytest.approx(truth["tail"]["length"], rel=0.05)
    assert float(r["tail_width"]) == pytest.approx(truth["tail"]["mean_width"], rel=0.04)
    assert float(r["head_length"]) == pytest.approx(truth["head_length"], rel=0.02)
    assert float(r["ellipticity"]) == pytest.approx(truth["ellipticity"], abs=0.05)
    assert json.loads((out / "report.json").read_text())[0]["instance"] == 1
    svg = (out / "phantom_000_overlay.svg").read_text()
    assert svg.startswith("<svg") and "<polyline" in svg


def test_measure_directory_and_scale(phantom_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["measure", str(phantom_dir), "--out", str(a)]) == EXIT_OK
    assert main(["measure", str(phantom_dir), "--out", str(b), "--scale-um-per-px", "0.5"]) == EXIT_OK
    ra, rb = read_csv(a / "report.csv")[0], read_csv(b / "report.csv")[0]
    assert float(rb["tail_length"]) == pytest.approx(float(ra["tail_length"]) / 2, abs=0.01)
    assert rb["ellipticity"] == ra["ellipticity"]


def test_measure_config_file(phantom_dir, tmp_path):
    cfg = tmp_path / "m.cfg"
    cfg.write_text("scale.um_per_px=0.5\n")
    out = tmp_path / "o"
    assert main(["measure", str(phantom_dir), "--config", str(cfg), "--out", str(out),
                 "--scale-um-per-px", "0.25"]) == EXIT_OK
    ref = tmp_path / "r"
    main(["measure", str(phantom_dir), "--scale-um-per-px", "0.25", "--out", str(ref)])
    assert (out / "report.csv").read_bytes() == (ref / "report.csv").read_bytes()
    cfg.write_text("steger.bogus=1\n")
    assert main(["measure", str(phantom_dir), "--config", str(cfg), "--out", str(out)]) == EXIT_ERROR


def test_measure_missing_mask(tmp_path, capsys):
    img = tmp_path / "lonely.png"
    save_image(img, ScalarImage(np.zeros((8, 8))))
    assert main(["measure", str(img), "--out", str(tmp_path / "o")]) == EXIT_ERROR
    assert "lonely_part.png" in capsys.readouterr().err


def test_measure_empty_mask(tmp_path, capsys):
    img = tmp_path / "blank.png"
    save_image(img, ScalarImage(np.zeros((8, 8))))
    z = np.zeros((8, 8), int)
    save_mask(tmp_path / "blank_part.png", tmp_path / "blank_instance.png", InstancePartMask(z, z))
    out = tmp_path / "o"
    assert main(["measure", str(img), "--out", str(out)]) == EXIT_OK
    assert read_csv(out / "report.csv") == []
    assert "no instances" in capsys.readouterr().err


def test_centerline_arms_and_debug_outputs(phantom_dir, tmp_path):
    img = str(phantom_dir / "phantom_000.png")
    prop, base = tmp_path / "p", tmp_path / "b"
    assert main(["centerline", img, "--out", str(prop), "--dump-fields", "--trace-walk", "--overlay"]) == EXIT_OK
    assert main(["centerline", img, "--out", str(base), "--steger-baseline"]) == EXIT_OK
    pts = read_csv(prop / "phantom_000_centerlines.csv")
    assert list(pts[0]) == list(POINT_COLUMNS)
    assert {p["source"] for p in pts} == {"detected", "reconstructed"}
    assert {p["source"] for p in read_csv(base / "phantom_000_centerlines.csv")} == {"detected"}

    walk = read_csv(prop / "phantom_000_walk.csv")
    assert list(walk[0]) == list(TRACE_COLUMNS) and {w["end"] for w in walk} == {"start", "end"}
    rx = np.asarray(Image.open(prop / "phantom_000_1_rx.tif"))
    header = json.loads((prop / "phantom_000_1_fields.json").read_text())
    assert rx.dtype == np.float32 and rx.shape == (header["height"], header["width"])
    assert (prop / "phantom_000_overlay.svg").exists()


def test_overlay_from_saved_centerlines(phantom_dir, tmp_path):
    img = str(phantom_dir / "phantom_000.png")
    main(["centerline", img, "--out", str(tmp_path)])
    svg = tmp_path / "x.svg"
    assert main(["overlay", img, "--centerlines", str(tmp_path / "phantom_000_centerlines.json"),
                 "--out", str(svg), "--no-image"]) == EXIT_OK
    text = svg.read_text()
    assert "<image" not in text and text.count('class="reconstructed"') > 0
    assert main(["overlay", img, "--centerlines", str(tmp_path / "nope.json"), "--out", str(svg)]) == EXIT_ERROR


def test_eval_parsing_identity(phantom_dir, tmp_path):
    gt = tmp_path / "gt"
    gt.mkdir()
    for name in ("phantom_000_part.png", "phantom_000_instance.png"):
        shutil.copy(phantom_dir / name, gt / name)
    out = tmp_path / "m"
    assert main(["eval-parsing", "--pred", str(gt), "--gt", str(gt), "--out", str(out)]) == EXIT_OK
    agg = json.loads((out / "metrics.json").read_text())["aggregate"]
    assert [agg[k] for k in ("miou", "ap_p_50", "ap_p_vol", "pcp_50")] == [1.0] * 4
    assert (out / "metrics.csv").read_text().splitlines()[-1] == "ALL,1.000000,1.000000,1.000000,1.000000"
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["eval-parsing", "--pred", str(empty), "--gt", str(gt)]) == EXIT_ERROR


def test_synth_single_curve(tmp_path):
    spec = tmp_path / "c.json"
    spec.write_text(json.dumps({"canvas": [300, 300], "noise_sigma": 0.0,
                                "curve": {"kind": "arc", "control": [150, 150, 100, 0, 90]}}))
    assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "c")]) == EXIT_OK
    truth = json.loads((tmp_path / "c" / "curve_truth.json").read_text())
    assert truth["length"] == pytest.approx(157.0796, abs=1e-4)


def test_global_flags(capsys):
    assert main(["--print-labels"]) == EXIT_OK
    assert "5\ttail" in capsys.readouterr().out
    assert main(["--print-config"]) == EXIT_OK
    assert "steger.sigma=1.8" in capsys.readouterr().out
    assert main([]) == EXIT_ERROR
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
