import math

import numpy as np
import pytest

from reconfmem.io import (FormatError, fmt, jsonable, read_csv, read_curve, read_json, read_manifest,
                          read_matrix, read_pnm, read_profile, read_trace, read_vectors, write_csv,
                          write_json, write_manifest, write_matrix, write_pnm, write_trace,
                          write_vectors)


def test_pnm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    rgb = np.round(rng.random((5, 7, 3)) * 255) / 255
    write_pnm(tmp_path / "a.ppm", rgb)
    assert np.allclose(read_pnm(tmp_path / "a.ppm"), rgb)
    gray = rgb[..., 0]
    write_pnm(tmp_path / "a.pgm", gray)
    assert np.allclose(read_pnm(tmp_path / "a.pgm"), gray)


def test_pnm_header_comments_and_16bit(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n# max\n65535\n" + np.array([0, 65535], ">u2").tobytes())
    assert read_pnm(p).tolist() == [[0.0, 1.0]]


@pytest.mark.parametrize("blob", [b"P3\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n2", b"P6\nx 1\n255\n"])
def test_pnm_errors(tmp_path, blob):
    p = tmp_path / "bad.pnm"
    p.write_bytes(blob)
    with pytest.raises(FormatError):
        read_pnm(p)


def test_fmt():
    assert fmt(True) == "1" and fmt(np.float64(0.1)) == "0.1" and fmt(3) == "3"


def test_trace_and_matrix_round_trip(tmp_path):
    tr = [(0.0, 0.1, 1e-10, 0.0, 1e-9), (1e-3, 0.2, 2e-10, 0.01, 1.2e-9)]
    write_trace(tmp_path / "t.csv", tr)
    assert read_trace(tmp_path / "t.csv") == tr
    m = np.arange(6.0).reshape(2, 3) * 1e-5
    write_matrix(tmp_path / "m.csv", m)
    assert np.array_equal(read_matrix(tmp_path / "m.csv"), m)


def test_curve(tmp_path):
    p = tmp_path / "curve.csv"
    write_csv(p, ["pulse_index", "conductance_S"], [(0, 1e-5), (1, 2e-5), (0, 2e-5), (1, 1e-5)])
    assert read_curve(p) == ((1e-5, 2e-5), (2e-5, 1e-5))
    write_csv(p, ["pulse_index", "conductance_S"], [(0, 1e-5), (1, 2e-5)])
    with pytest.raises(FormatError):
        read_curve(p)


def test_profile(tmp_path):
    p = tmp_path / "p.csv"
    write_csv(p, ["t_s", "temp_C"], [(0, 4), (60, 12)])
    assert read_profile(p) == [(0.0, 4.0), (60.0, 12.0)]
    write_csv(p, ["t_s", "temp_C"], [(0, 4), (0, 12)])
    with pytest.raises(FormatError):
        read_profile(p)
    write_csv(p, ["t_s", "temp"], [(0, 4)])
    with pytest.raises(FormatError, match="temp_C"):
        read_profile(p)
    write_csv(p, ["t_s", "temp_C"], [(0, "warm")])
    with pytest.raises(FormatError, match=":2"):
        read_profile(p)


def test_manifest_and_vectors(tmp_path):
    rows = [{"image": "a.ppm", "candidate_id": 0, "label": 1, "lesion_type": "hemorrhage"},
            {"image": "a.ppm", "candidate_id": 1, "label": 0, "lesion_type": "none"}]
    write_manifest(tmp_path / "m.csv", rows)
    assert read_manifest(tmp_path / "m.csv") == rows
    x = np.random.default_rng(0).random((2, 81))
    write_vectors(tmp_path / "v.csv", rows, x)
    back_rows, back_x = read_vectors(tmp_path / "v.csv")
    assert np.array_equal(back_x, x) and [r["label"] for r in back_rows] == [1, 0]
    write_csv(tmp_path / "m.csv", ["image", "candidate_id", "label", "lesion_type"], [("a", 0, 2, "x")])
    with pytest.raises(FormatError):
        read_manifest(tmp_path / "m.csv")


def test_empty_csv(tmp_path):
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(FormatError):
        read_csv(tmp_path / "e.csv")


def test_json(tmp_path):
    assert jsonable({"a": math.inf, "b": np.arange(2), 3: None}) == {"a": "inf", "b": [0, 1], "3": None}
    write_json(tmp_path / "r.json", {"x": 1.5}, kind="demo")
    assert read_json(tmp_path / "r.json") == {"schema_version": "1", "kind": "demo", "x": 1.5}
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(FormatError):
        read_json(tmp_path / "bad.json")
    with pytest.raises(TypeError):
        jsonable(object())
