"""Smoke test for the `xfbd` Python module.

Build and install first:
    maturin develop -m crates/py/Cargo.toml
then run:
    python python/smoke_test.py
"""

import json
import math
import tempfile
from pathlib import Path

import xfbd


def test_components():
    mask = bytes([1, 1, 0, 0,
                  0, 0, 0, 1,
                  0, 0, 1, 0])
    assert xfbd.connected_components(mask, 4, 3, 8) == [((0, 0, 1, 0), 2), ((2, 1, 3, 2), 2)]
    assert len(xfbd.connected_components(mask, 4, 3, 4)) == 3


def scene():
    ann = xfbd.Annotation("demo", 32, 32)
    ann.add_rect("a", 4, 4, 12, 12, "destroyed")
    ann.add_rect("b", 18, 18, 26, 24, "no-damage")
    return ann


def test_annotation_roundtrip():
    ann = scene()
    again, warnings = xfbd.Annotation.from_label_json("demo", ann.to_label_json(), 32, 32)
    assert warnings == []
    assert [b[:2] for b in again.buildings()] == [("a", "destroyed"), ("b", "no-damage")]


def test_perfect_prediction():
    ann = scene()
    loc, dam = ann.target_masks()
    report = xfbd.evaluate_scene(loc, dam, ann, collapse=True)
    assert report["pixel"]["xview2_score"] == 1.0
    assert report["object"]["localization_f1"] == 1.0


def test_scores():
    overall, score = xfbd.xview2_score(0.8, [1.0, 0.5, 0.5, 1.0])
    assert math.isclose(overall, 4 / 6)
    assert math.isclose(score, 0.3 * 0.8 + 0.7 * overall)
    assert xfbd.harmonic_mean([1.0, 0.0, 1.0, 1.0]) == 0.0


def test_blend():
    pre = xfbd.Image(32, 32, 3, bytes((x + y) % 256 for y in range(32) for x in range(32) for _ in range(3)))
    post = xfbd.Image(32, 32, 3, bytes(100 + 60 * ((x // 2 + y // 2) % 2) for y in range(32) for x in range(32) for _ in range(3)))
    out, report = xfbd.blend_building(pre, post, scene(), "a")
    assert report["converged"]
    assert out.get(30, 2, 0) == pre.get(30, 2, 0)
    assert out.get(8, 8, 0) != pre.get(8, 8, 0)
    with tempfile.TemporaryDirectory() as tmp:
        path = str(Path(tmp) / "c.png")
        out.save(path)
        assert xfbd.Image.load(path).data() == out.data()


def test_losses():
    assert "bce" in xfbd.loss_names()
    value, grad, degenerate = xfbd.loss("bce", [1.0, 0.0], [0.9, 0.2])
    assert math.isclose(value, -math.log(0.9) - math.log(0.8), rel_tol=1e-12)
    assert len(grad) == 2 and not degenerate
    rows = xfbd.gradient_suite(instances=3, length=16)
    assert all(r["passed"] for r in rows)


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok  {name}")
    print(json.dumps({"status": "passed"}))
