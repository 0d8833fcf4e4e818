import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from palmvein.image import GrayImage
from palmvein.metrics import (MethodScores, QualityReport, build_report, contrast,
                              definition, entropy, relative_improvement)

# published quality scores: (method, contrast, entropy, definition)
PUBLISHED = [
    ("Original", 32.8224, 5.9618, 2.2416),
    ("CLAHE", 53.6735, 6.9370, 4.4789),
    ("DoG-HE", 64.8192, 3.3458, 12.016),
    ("Gaussian low pass", 33.6801, 6.1610, 2.6822),
    ("Proposed", 76.7143, 7.0119, 14.2746),
]


def table_report():
    return QualityReport([MethodScores(*row) for row in PUBLISHED], proposed="Proposed",
                         reference="Original")


def test_contrast_anchors():
    assert contrast(GrayImage(np.full((4, 4), 0.3))) == 0.0
    half = GrayImage(np.array([[0.0, 1.0]] * 4))
    assert contrast(half) == pytest.approx(127.5, abs=1e-12)


def test_entropy_anchors():
    assert entropy(GrayImage(np.full((3, 3), 0.5))) == 0.0
    uniform = GrayImage(np.arange(256).reshape(16, 16) / 255.0)
    assert entropy(uniform) == pytest.approx(math.log(256), abs=1e-12)
    assert entropy(uniform, base=2) == pytest.approx(8.0, abs=1e-12)
    two = GrayImage(np.array([[0.0, 1.0]] * 3))
    assert entropy(two) == pytest.approx(math.log(2), abs=1e-12)


def test_definition_anchors():
    assert definition(GrayImage(np.full((5, 5), 0.9))) == 0.0
    ramp = np.repeat(np.arange(10)[:, None], 7, axis=1) / 255.0
    assert definition(GrayImage(ramp)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        definition(GrayImage([[0.1, 0.2]]))


images = arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(2, 20)),
                elements=st.floats(0, 1))


@settings(max_examples=60, deadline=None)
@given(images)
def test_metrics_match_loops(data):
    img = GrayImage(data)
    assert contrast(img) == pytest.approx(oracles.contrast(data), abs=1e-9)
    assert entropy(img) == pytest.approx(oracles.entropy(data), abs=1e-9)
    assert definition(img) == pytest.approx(oracles.definition(data), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(images, st.floats(-0.3, 0.3), st.floats(0.1, 1.0))
def test_contrast_translation_and_stretch(data, shift, gain):
    data = 0.3 + 0.4 * data  # room to move without clipping
    base = contrast(GrayImage(data))
    assert contrast(GrayImage(data + shift)) == pytest.approx(base, abs=1e-9)
    stretched = data.mean() + gain * (data - data.mean())
    assert contrast(GrayImage(stretched)) == pytest.approx(gain * base, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(arrays(np.int64, (6, 7), elements=st.integers(0, 255)), st.randoms(use_true_random=False))
def test_entropy_invariances(levels, rnd):
    h = entropy(GrayImage(levels / 255.0))
    assert 0.0 <= h <= math.log(256) + 1e-12
    flat = levels.ravel().tolist()
    rnd.shuffle(flat)
    assert entropy(GrayImage(np.array(flat).reshape(6, 7) / 255.0)) == pytest.approx(h, abs=1e-12)
    perm = list(range(256))
    rnd.shuffle(perm)
    relabelled = np.array(perm)[levels]
    assert entropy(GrayImage(relabelled / 255.0)) == pytest.approx(h, abs=1e-12)


def test_published_percentages():
    imp = table_report().improvements()
    assert imp["contrast"] == pytest.approx(18.35, abs=0.005)
    assert imp["entropy"] == pytest.approx(1.08, abs=0.005)
    assert imp["definition"] == pytest.approx(18.80, abs=0.005)
    # the rounded figures as quoted alongside them
    for key, quoted in (("contrast", 18.4), ("entropy", 1.07), ("definition", 18.8)):
        assert abs(imp[key] - quoted) <= 0.1
    r = table_report()
    assert r.best_competitor("contrast").method == "DoG-HE"
    assert r.best_competitor("entropy").method == "CLAHE"
    assert r.best_competitor("definition").method == "DoG-HE"


def test_identical_methods_zero_improvement(rng):
    img = GrayImage(rng.random((10, 10)))
    f = lambda im: GrayImage(np.sqrt(im.data))
    report = build_report(img, [("a", f), ("b", f)], proposed="a")
    assert report.improvements() == {"contrast": 0.0, "entropy": 0.0, "definition": 0.0}


def test_zero_competitor_is_undefined():
    r = QualityReport([MethodScores("p", 3.0, 1.0, 2.0), MethodScores("z", 0.0, 0.0, 0.0)],
                      proposed="p", reference=None)
    assert r.improvements() == {"contrast": None, "entropy": None, "definition": None}
    assert relative_improvement(1.0, 0.0) is None
    doc = json.loads(r.to_json())
    assert doc["improvement_percent"]["contrast"]["percent"] is None
    assert "undefined" in r.to_markdown()


def test_build_report_errors(rng):
    img = GrayImage(rng.random((4, 4)))
    with pytest.raises(ValueError):
        build_report(img, [], proposed="x")
    with pytest.raises(ValueError):
        build_report(img, [("a", lambda im: im)], proposed="b")


def test_build_report_rows(rng):
    img = GrayImage(rng.random((12, 12)))
    report = build_report(img, {"p": lambda im: im, "q": lambda im: im}, proposed="p")
    assert [e.method for e in report.entries] == ["original", "p", "q"]
    single = build_report(img, [("p", lambda im: im)], proposed="p")
    assert single.improvements() == {}


def test_report_serialization():
    r = table_report()
    doc = json.loads(r.to_json())
    assert [m["method"] for m in doc["methods"]] == [row[0] for row in PUBLISHED]
    assert doc["methods"][4]["contrast"] == 76.7143
    assert doc["improvement_percent"]["definition"] == {"vs": "DoG-HE", "percent": 18.8}
    md = r.to_markdown()
    lines = md.splitlines()
    assert lines[0].split("|")[1:5] == [" Method            ", " Contrast ", " Entropy ",
                                        " Definition "]
    assert "| Proposed          |  76.7143 |  7.0119 |    14.2746 |" in md
    assert "- contrast: +18.35% (vs DoG-HE)" in md


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.integers(1, 40), st.integers(1, 40))
def test_constant_images_score_exactly_zero(value, h, w):
    img = GrayImage(np.full((h, w), value))
    assert contrast(img) == 0.0
    assert entropy(img) == 0.0
    if h > 1 and w > 1:
        assert definition(img) == 0.0
