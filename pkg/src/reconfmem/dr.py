"""Lesion-classification runs: dataset loading, splits, float/device training, persistence."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .array import ConductanceUpdateModel, VariationModel
from .imaging import FeatureScaler, extract_features, find_candidates
from .io import FormatError, read_curve, read_manifest, read_pnm, read_vectors
from .mlp import Dataset, MlpModel, TrainingReport, device_arrays, evaluate, separable_dataset, train_mlp


def load_manifest_dataset(path) -> Tuple[List[dict], np.ndarray]:
    """Rows and raw features for a manifest whose images sit beside it.

    ``candidate_id`` indexes the candidates found by the default detector.
    """
    path = Path(path)
    rows = read_manifest(path)
    if not rows:
        raise FormatError(f"{path}: manifest has no rows")
    cache: Dict[str, list] = {}
    feats = []
    for r in rows:
        name = r["image"]
        if name not in cache:
            img = read_pnm(path.parent / name)
            cache[name] = [img, find_candidates(img)]
        img, cands = cache[name]
        if not 0 <= r["candidate_id"] < len(cands):
            raise FormatError(f"{name}: no candidate {r['candidate_id']} ({len(cands)} detected)")
        feats.append(extract_features(img, cands[r["candidate_id"]]).values)
    return rows, np.array(feats)


def load_raw(manifest: str = "", vectors: str = "", separable: bool = False, n_samples: int = 400,
             seed: int = 0) -> Tuple[List[dict], np.ndarray]:
    if manifest:
        return load_manifest_dataset(manifest)
    if vectors:
        rows, x = read_vectors(vectors)
        if not rows:
            raise FormatError(f"{vectors}: no rows")
        return rows, x
    if separable:
        ds = separable_dataset(n_samples, seed=seed)
        rows = [{"image": "separable", "candidate_id": k, "label": int(ds.y[k]),
                 "lesion_type": str(ds.lesion_type[k])} for k in range(len(ds))]
        return rows, ds.x
    raise FormatError("no dataset: set manifest, vectors or separable")


def to_dataset(rows: List[dict], x: np.ndarray, scaler: Optional[FeatureScaler] = None) -> Dataset:
    xs = x if scaler is None else scaler.transform(x)
    return Dataset(xs, np.array([r["label"] for r in rows], int),
                   np.array([r["lesion_type"] for r in rows], dtype=object),
                   [f"{r['image']}:{r['candidate_id']}" for r in rows])


def split_indices(labels: np.ndarray, test_fraction: float, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Stratified random split; ``test_fraction`` 0 puts everything in train."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        k = int(round(test_fraction * idx.size))
        test.extend(idx[:k])
        train.extend(idx[k:])
    return np.sort(np.array(train, int)), np.sort(np.array(test, int))


def update_model(n_levels: int = 800, nonlinearity: float = 0.25, alpha: Optional[float] = None,
                 curve: str = "") -> ConductanceUpdateModel:
    measured = read_curve(curve) if curve else None
    return ConductanceUpdateModel(n_levels=n_levels, nonlinearity_p=nonlinearity, nonlinearity_d=nonlinearity,
                                  alpha_p=alpha, alpha_d=alpha, measured_curve=measured)


def train_run(train: Dataset, mode: str, *, epochs: int, seed: int, batch_size: int = 16,
              step: float = 1.0 / 800, yield_p: float = 0.93, n_models: int = 9,
              base: ConductanceUpdateModel = ConductanceUpdateModel()) -> Tuple[MlpModel, TrainingReport, dict]:
    """Train from the seed's initial weights; ``mode`` is 'float' or 'device'."""
    model = MlpModel.init(seed)
    extra: dict = {}
    if mode == "float":
        rep = train_mlp(model, train, epochs=epochs, batch_size=batch_size, step=step, seed=seed)
    elif mode == "device":
        a1, a2 = device_arrays(VariationModel(yield_p=yield_p, seed=seed), n_models=n_models, seed=seed, base=base)
        rep = train_mlp(model, train, epochs=epochs, batch_size=batch_size, seed=seed, arrays=(a1, a2))
        extra = {"array_yield": [float(a1.functional.mean()), float(a2.functional.mean())],
                 "skipped_pulses": a1.skipped_pulses + a2.skipped_pulses}
    else:
        raise ValueError(f"unknown mode {mode!r} (float, device or both)")
    return model, rep, extra


def metrics_dict(model: MlpModel, ds: Dataset) -> dict:
    return {k: v.as_dict() for k, v in evaluate(model, ds).items()}


def model_dict(model: MlpModel, scaler: FeatureScaler, mode: str) -> dict:
    return {"mode": mode, "confidence": model.confidence, "w1": model.w1, "w2": model.w2,
            "scaler": scaler.as_dict()}


def model_from_dict(d: dict) -> Tuple[MlpModel, FeatureScaler]:
    try:
        m = MlpModel(np.array(d["w1"], float), np.array(d["w2"], float), confidence=float(d["confidence"]))
        sc = FeatureScaler.from_dict(d["scaler"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bad model file: {e}") from None
    return m, sc
