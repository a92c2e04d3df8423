"""File formats: PNM images, CSV tables, JSON reports.

All writers are deterministic: floats go through ``repr`` (shortest
round-trip form), JSON keys keep insertion order, line endings are ``\\n``.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import os
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

SCHEMA_VERSION = "1"
PathLike = Union[str, os.PathLike]


class FormatError(ValueError):
    """Malformed input file."""


# ---------------------------------------------------------------------------
# PNM

def _pnm_tokens(data: bytes, n: int) -> Tuple[List[bytes], int]:
    """First ``n`` whitespace-separated header tokens (comments skipped) and the
    offset of the byte after the single whitespace that ends the header."""
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < n:
        if pos >= len(data):
            raise FormatError("truncated PNM header")
        c = data[pos:pos + 1]
        if c == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pnm(path: PathLike) -> np.ndarray:
    """Binary PGM (P5) -> (H, W), PPM (P6) -> (H, W, 3); values scaled to [0, 1]."""
    data = Path(path).read_bytes()
    tokens, off = _pnm_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported magic {magic!r} (need P5 or P6)")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: non-integer header field") from None
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: bad dimensions or maxval")
    ch = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = w * h * ch
    raw = data[off:off + n * dtype.itemsize]
    if len(raw) != n * dtype.itemsize:
        raise FormatError(f"{path}: expected {n} samples, file is truncated")
    arr = np.frombuffer(raw, dtype=dtype).astype(float) / maxval
    return arr.reshape((h, w, 3) if ch == 3 else (h, w))


def write_pnm(path: PathLike, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError("image must be (H, W) or (H, W, 3)")
    q = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = img.shape[:2]
    Path(path).write_bytes(magic + b"\n%d %d\n255\n" % (w, h) + q.tobytes())


# ---------------------------------------------------------------------------
# CSV

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, enum.Enum):
        return str(x.value)
    return str(x)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(x) for x in row])


def read_csv(path: PathLike, required: Sequence[str] = ()) -> List[dict]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None:
            raise FormatError(f"{path}: empty file (no header)")
        missing = [c for c in required if c not in rd.fieldnames]
        if missing:
            raise FormatError(f"{path}: missing columns {', '.join(missing)}")
        return list(rd)


def _float(row: dict, key: str, path: PathLike, line: int) -> float:
    try:
        return float(row[key])
    except (TypeError, ValueError):
        raise FormatError(f"{path}:{line}: bad value for {key}: {row.get(key)!r}") from None


TRACE_HEADER = ("t", "v", "i", "w", "g")


def write_trace(path: PathLike, trace: Iterable[Sequence[float]]) -> None:
    write_csv(path, TRACE_HEADER, trace)


def read_trace(path: PathLike) -> List[Tuple[float, ...]]:
    rows = read_csv(path, TRACE_HEADER)
    return [tuple(_float(r, k, path, n + 2) for k in TRACE_HEADER) for n, r in enumerate(rows)]


def read_curve(path: PathLike) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Measured potentiation/depression curve.

    Columns ``pulse_index,conductance_S``; the potentiation block comes
    first and the depression block starts where ``pulse_index`` stops
    increasing.
    """
    rows = read_csv(path, ("pulse_index", "conductance_S"))
    idx = [_float(r, "pulse_index", path, n + 2) for n, r in enumerate(rows)]
    g = [_float(r, "conductance_S", path, n + 2) for n, r in enumerate(rows)]
    split = next((k for k in range(1, len(idx)) if idx[k] <= idx[k - 1]), None)
    if split is None:
        raise FormatError(f"{path}: no depression block (pulse_index never restarts)")
    if any(x <= 0 for x in g):
        raise FormatError(f"{path}: conductances must be positive")
    return tuple(g[:split]), tuple(g[split:])


def write_matrix(path: PathLike, m: np.ndarray) -> None:
    m = np.asarray(m)
    write_csv(path, ["row"] + [f"c{k}" for k in range(m.shape[1])],
              ([r] + list(m[r]) for r in range(m.shape[0])))


def read_matrix(path: PathLike) -> np.ndarray:
    rows = read_csv(path, ("row",))
    if not rows:
        raise FormatError(f"{path}: no rows")
    cols = [k for k in rows[0] if k != "row"]
    return np.array([[_float(r, c, path, n + 2) for c in cols] for n, r in enumerate(rows)])


def read_profile(path: PathLike) -> List[Tuple[float, float]]:
    """Temperature log ``t_s,temp_C`` (strictly increasing time)."""
    rows = read_csv(path, ("t_s", "temp_C"))
    out = [(_float(r, "t_s", path, n + 2), _float(r, "temp_C", path, n + 2)) for n, r in enumerate(rows)]
    for k in range(1, len(out)):
        if out[k][0] <= out[k - 1][0]:
            raise FormatError(f"{path}:{k + 2}: t_s must increase strictly")
    return out


MANIFEST_HEADER = ("image", "candidate_id", "label", "lesion_type")


def read_manifest(path: PathLike) -> List[dict]:
    rows = read_csv(path, MANIFEST_HEADER)
    out = []
    for n, r in enumerate(rows):
        try:
            cid, label = int(r["candidate_id"]), int(r["label"])
        except ValueError:
            raise FormatError(f"{path}:{n + 2}: candidate_id and label must be integers") from None
        if label not in (0, 1):
            raise FormatError(f"{path}:{n + 2}: label must be 0 or 1")
        out.append({"image": r["image"], "candidate_id": cid, "label": label,
                    "lesion_type": r["lesion_type"]})
    return out


def write_manifest(path: PathLike, rows: Sequence[dict]) -> None:
    write_csv(path, MANIFEST_HEADER, ([r[k] for k in MANIFEST_HEADER] for r in rows))


def feature_columns(n: int = 81) -> List[str]:
    return [f"f{k}" for k in range(n)]


def write_vectors(path: PathLike, rows: Sequence[dict], x: np.ndarray) -> None:
    """Manifest columns followed by ``f0..f80`` raw feature values."""
    x = np.asarray(x)
    write_csv(path, list(MANIFEST_HEADER) + feature_columns(x.shape[1]),
              ([r[k] for k in MANIFEST_HEADER] + list(x[n]) for n, r in enumerate(rows)))


def read_vectors(path: PathLike, n_features: int = 81) -> Tuple[List[dict], np.ndarray]:
    cols = feature_columns(n_features)
    raw = read_csv(path, list(MANIFEST_HEADER) + cols)
    rows, x = [], []
    for n, r in enumerate(raw):
        try:
            label = int(r["label"])
        except ValueError:
            raise FormatError(f"{path}:{n + 2}: label must be an integer") from None
        if label not in (0, 1):
            raise FormatError(f"{path}:{n + 2}: label must be 0 or 1")
        rows.append({"image": r["image"], "candidate_id": r["candidate_id"], "label": label,
                     "lesion_type": r["lesion_type"]})
        vals = [_float(r, c, path, n + 2) for c in cols]
        if not all(math.isfinite(v) for v in vals):
            raise FormatError(f"{path}:{n + 2}: non-finite feature")
        x.append(vals)
    return rows, np.array(x).reshape(len(x), n_features)


# ---------------------------------------------------------------------------
# JSON

def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, os.PathLike):
        return os.fspath(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path: PathLike, report: dict, kind: Optional[str] = None) -> None:
    body = {"schema_version": SCHEMA_VERSION}
    if kind:
        body["kind"] = kind
    body.update(report)
    Path(path).write_text(json.dumps(jsonable(body), indent=2) + "\n")


def read_json(path: PathLike) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: {e}") from None
