import json
import re

import numpy as np
import pytest

from palmvein import cli
from palmvein.image import GrayImage, Roi, load_image, save_image
from palmvein.pipeline import (METHOD_NAMES, STAGES, PipelineConfig, StageError,
                               UnknownMethodError, run_compare, run_cube_average,
                               run_extract)
from palmvein.synthetic import shadowed_palm


@pytest.fixture(scope="module")
def palm():
    return shadowed_palm(height=200, width=110, seed=3)


@pytest.fixture
def palm_file(tmp_path, palm):
    path = tmp_path / "palm.pgm"
    save_image(palm.image, path)
    return path


def test_defaults():
    cfg = PipelineConfig()
    assert (cfg.sigma, cfg.epsilon, cfg.median_window, cfg.threshold) == (25, 1e-4, 3, "otsu")
    assert (cfg.min_area, cfg.connectivity, cfg.roi) == (20000, 8, None)
    assert (cfg.band_center_nm, cfg.band_width_nm) == (850, 10)
    assert cfg.area_scale and not cfg.invert_before_prune


@pytest.mark.parametrize("bad", [dict(sigma=0), dict(epsilon=-1), dict(median_window=4),
                                 dict(threshold="mean"), dict(threshold="fixed:2"),
                                 dict(min_area=-1), dict(connectivity=6),
                                 dict(band_width_nm=-1), dict(dog_ratio=1.0)])
def test_config_rejects(bad):
    with pytest.raises(ValueError):
        PipelineConfig(**bad)


def test_config_round_trip():
    cfg = PipelineConfig(sigma=12.5, roi=Roi(1, 2, 30, 40), threshold="fixed:0.3",
                         area_scale=False, clahe_tiles=(4, 6), invert_before_prune=True)
    text = cfg.dumps()
    again = PipelineConfig.loads(text)
    assert again == cfg
    assert again.dumps() == text
    assert PipelineConfig.loads(PipelineConfig().dumps()) == PipelineConfig()


def test_config_loads_partial_and_errors():
    cfg = PipelineConfig.loads("# comment\n\nsigma = 10\n", base=PipelineConfig())
    assert cfg.sigma == 10.0 and cfg.min_area == 20000
    with pytest.raises(ValueError, match="line 1"):
        PipelineConfig.loads("bogus=1\n", base=PipelineConfig())
    with pytest.raises(ValueError):
        PipelineConfig.loads("area_scale=maybe\n", base=PipelineConfig())


def test_stage_order_and_trace_files(tmp_path, palm):
    res = run_extract(palm.image, out_dir=tmp_path, trace=True)
    assert tuple(res.trace.names()) == STAGES
    assert len(res.trace.timings_ms) == len(STAGES)
    for i, (name, path) in enumerate(res.trace.stages):
        assert path.endswith(f"{i:02d}_{name}." + ("npy" if name == "retinex" else "pgm"))
    assert (tmp_path / "skeleton.pgm").is_file()
    # binarization is rendered veins-black, the inverted stage veins-white
    thr = load_image(tmp_path / "06_threshold.pgm").data
    inv = load_image(tmp_path / "08_invert.pgm").data
    assert np.array_equal(thr == 0.0, res.outputs["threshold"].mask)
    assert np.array_equal(inv == 1.0, res.vein_mask.mask)
    retinex = np.load(tmp_path / "02_retinex.npy")
    assert np.array_equal(retinex, res.outputs["retinex"].data)


def test_trace_order_with_invert_before_prune(palm):
    res = run_extract(palm.image, PipelineConfig(invert_before_prune=True))
    assert res.trace.names()[7:9] == ["invert", "prune"]
    assert set(res.trace.names()) == set(STAGES)
    # pruning the complement only fills holes, so nothing is lost
    assert not (res.outputs["threshold"].mask & ~res.vein_mask.mask).any()


def test_deterministic_outputs(tmp_path, palm):
    a, b = tmp_path / "a", tmp_path / "b"
    run_extract(palm.image, out_dir=a, trace=True)
    run_extract(palm.image, out_dir=b, trace=True)
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_constant_input_gives_empty_skeleton():
    res = run_extract(GrayImage(np.full((60, 40), 0.4)))
    assert res.skeleton.count() == 0


def test_min_area_scaling(palm):
    res = run_extract(palm.image)
    assert res.min_area == round(20000 * 200 * 110 / (360 * 657))
    pinned = run_extract(palm.image, PipelineConfig(area_scale=False))
    assert pinned.min_area == 20000
    assert pinned.skeleton.count() == 0  # every component is smaller than that


def test_roi_crop(palm):
    res = run_extract(palm.image, PipelineConfig(roi=Roi(10, 20, 80, 150)))
    assert res.skeleton.mask.shape == (150, 80)
    with pytest.raises(StageError) as info:
        run_extract(palm.image, PipelineConfig(roi=Roi(50, 0, 80, 10)))
    assert info.value.stage == "crop"


def test_compare_all_methods(palm):
    report = run_compare(palm.image)
    assert [e.method for e in report.entries] == ["original", *METHOD_NAMES]
    imp = report.improvements()
    assert set(imp) == {"contrast", "entropy", "definition"}
    assert all(v is not None for v in imp.values())


def test_compare_single_and_without_ssr(palm):
    single = run_compare(palm.image, "ssr")
    assert [e.method for e in single.entries] == ["original", "ssr"]
    assert single.improvements() == {}
    assert not single.to_dict().get("improvement_percent")
    others = run_compare(palm.image, ["clahe", "glpf"])
    assert others.proposed is None and others.improvements() == {}


def test_compare_unknown_method(palm):
    with pytest.raises(UnknownMethodError) as info:
        run_compare(palm.image, "ssr,foo")
    for name in METHOD_NAMES:
        assert name in str(info.value)


def _write_cube(tmp_path, wavelengths, rng):
    lines = ["# wavelength\tpath"]
    images = {}
    for wl in wavelengths:
        img = GrayImage(rng.integers(0, 256, (9, 7)) / 255.0)
        save_image(img, tmp_path / f"b{wl}.pgm")
        images[wl] = img
        lines.append(f"{wl}\tb{wl}.pgm")
    manifest = tmp_path / "cube.tsv"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest, images


def test_cube_average_five_bands(tmp_path, rng):
    manifest, images = _write_cube(tmp_path, [830, 845, 850, 855, 870], rng)
    out = tmp_path / "mean.pgm"
    img = run_cube_average(manifest, 850, 10, out)
    expected = (images[845].data + images[850].data + images[855].data) / 3
    assert np.allclose(img.data, expected, atol=1e-12)
    assert load_image(out).shape == (9, 7)


def test_cube_average_empty_selection(tmp_path, rng):
    manifest, _ = _write_cube(tmp_path, [700, 900], rng)
    with pytest.raises(ValueError, match="no band"):
        run_cube_average(manifest, 850, 10)


def test_cube_single_band_resave_is_identical(tmp_path, rng):
    manifest, _ = _write_cube(tmp_path, [850], rng)
    out = tmp_path / "again.pgm"
    run_cube_average(manifest, 800, 1000, out)
    assert out.read_bytes() == (tmp_path / "b850.pgm").read_bytes()


# --------------------------------------------------------------------- CLI


def test_cli_extract(tmp_path, palm_file, capsys):
    out = tmp_path / "out"
    code = cli.main(["extract", "--input", str(palm_file), "--out-dir", str(out),
                     "--trace", "--median", "5"])
    assert code == 0
    assert (out / "skeleton.pgm").is_file()
    cfg = PipelineConfig.loads((out / "config.txt").read_text())
    assert cfg.median_window == 5
    rows = (out / "trace.tsv").read_text().splitlines()
    assert [r.split("\t")[0] for r in rows] == list(STAGES)
    assert "skeleton:" in capsys.readouterr().out


def test_cli_config_precedence(tmp_path, palm_file):
    conf = tmp_path / "c.txt"
    conf.write_text("sigma=10\nmedian_window=5\n")
    out = tmp_path / "out"
    assert cli.main(["extract", "--input", str(palm_file), "--out-dir", str(out),
                     "--config", str(conf), "--sigma", "15"]) == 0
    cfg = PipelineConfig.loads((out / "config.txt").read_text())
    assert (cfg.sigma, cfg.median_window, cfg.min_area) == (15.0, 5, 20000)


def test_cli_cube_extract(tmp_path, palm):
    save_image(palm.image, tmp_path / "b.pgm")
    (tmp_path / "m.tsv").write_text("850\tb.pgm\n")
    assert cli.main(["extract", "--input", str(tmp_path / "m.tsv"), "--cube",
                     "--out-dir", str(tmp_path / "o")]) == 0


def test_cli_compare_reports(tmp_path, palm_file, capsys):
    js = tmp_path / "r.json"
    assert cli.main(["compare", "--input", str(palm_file), "--report", str(js)]) == 0
    doc = json.loads(js.read_text())
    assert [m["method"] for m in doc["methods"]] == ["original", *METHOD_NAMES]
    md = tmp_path / "r.md"
    assert cli.main(["compare", "--input", str(palm_file), "--methods", "ssr,clahe",
                     "--report", str(md)]) == 0
    assert "| ssr" in md.read_text()
    assert cli.main(["compare", "--input", str(palm_file), "--methods", "ssr"]) == 0
    assert "| original" in capsys.readouterr().out


def test_cli_cube_average(tmp_path, rng):
    manifest, _ = _write_cube(tmp_path, [850], rng)
    out = tmp_path / "avg.png"
    assert cli.main(["cube-average", "--manifest", str(manifest), "--out", str(out)]) == 0
    assert load_image(out).shape == (9, 7)


def test_cli_metrics(tmp_path, capsys):
    img = GrayImage(np.arange(256).reshape(16, 16) / 255.0)
    path = tmp_path / "u.png"
    save_image(img, path)
    assert cli.main(["metrics", "--input", str(path)]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out)
    assert doc["entropy"] == 5.5452  # ln 256
    assert set(doc) == {"contrast", "entropy", "definition"}
    for number in re.findall(r": (-?[0-9.]+)", out):
        assert len(number.partition(".")[2]) <= 4


@pytest.mark.parametrize("argv", [
    [],
    ["extract", "--input", "x.pgm"],
    ["frobnicate"],
    ["compare", "--input", "{img}", "--methods", "foo"],
    ["compare", "--input", "{img}", "--report", "{tmp}/r.txt"],
    ["extract", "--input", "{img}", "--out-dir", "{tmp}/o", "--sigma", "abc"],
    ["extract", "--input", "{img}", "--out-dir", "{tmp}/o", "--median", "4"],
    ["extract", "--input", "{img}", "--out-dir", "{tmp}/o", "--roi", "1,2,3"],
])
def test_cli_usage_errors(argv, tmp_path, palm_file):
    argv = [a.format(img=palm_file, tmp=tmp_path) for a in argv]
    try:
        code = cli.main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_cli_io_errors(tmp_path):
    assert cli.main(["metrics", "--input", str(tmp_path / "missing.pgm")]) == 2
    junk = tmp_path / "junk.pgm"
    junk.write_bytes(b"P5\n4 4\n255\n\x00")
    assert cli.main(["metrics", "--input", str(junk)]) == 2
    bad = tmp_path / "bad.tsv"
    bad.write_text("850 no-tab\n")
    assert cli.main(["cube-average", "--manifest", str(bad), "--out", str(tmp_path / "o.pgm")]) == 2
    assert cli.main(["extract", "--input", str(tmp_path / "nope.png"),
                     "--out-dir", str(tmp_path / "o")]) == 2


def test_cli_processing_errors(tmp_path, palm_file, rng):
    assert cli.main(["extract", "--input", str(palm_file), "--out-dir", str(tmp_path / "o"),
                     "--roi", "0,0,5000,5000"]) == 3
    manifest, _ = _write_cube(tmp_path, [700], rng)
    assert cli.main(["cube-average", "--manifest", str(manifest),
                     "--out", str(tmp_path / "o.pgm")]) == 3
    tiny = tmp_path / "tiny.pgm"
    save_image(GrayImage([[0.5, 0.2]]), tiny)
    assert cli.main(["metrics", "--input", str(tiny)]) == 3
