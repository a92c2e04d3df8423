"""Synthetic fundus-like images with planted lesions, a stand-in for real screening data.

Lesions are drawn on a grid so they never touch:

* hemorrhage: dark red irregular blob, radius 4-6 px
* microaneurysm: small round dark red dot, radius 2-3 px
* hard exudate: sharp yellow blob, radius 2-4 px
* soft exudate: blurred pale patch, radius 4-6 px

Distractors are elongated vessel fragments (red) and light-reflex streaks
(bright). They are non-lesions and carry the lesion type they mimic, so
per-type specificity is defined. Detections that match no planted object
are labelled non-lesion with type ``none``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .imaging import DetectionConfig, LesionCandidate, extract_features, find_candidates
from .mlp import LESION_TYPES, Dataset

RED_TYPES = ("hemorrhage", "microaneurysm")
BRIGHT_TYPES = ("hard_exudate", "soft_exudate")

_BACKGROUND = np.array([0.78, 0.38, 0.16])
_RED = np.array([0.35, 0.05, 0.03])
_YELLOW = np.array([1.0, 0.95, 0.45])
_PALE = np.array([0.98, 0.92, 0.80])


@dataclass(frozen=True)
class SynthSpec:
    n_images: int = 12
    height: int = 96
    width: int = 96
    lesions_per_type: int = 1  # per image
    distractors: int = 4  # per image, alternating red / bright
    red_contrast: Tuple[float, float] = (0.75, 0.95)  # blend weight toward lesion colour
    bright_contrast: Tuple[float, float] = (0.6, 0.9)
    texture: float = 0.02  # std of pixel noise
    cell: int = 24  # placement grid pitch in px

    def __post_init__(self):
        if min(self.n_images, self.lesions_per_type, self.distractors) < 0:
            raise ValueError("counts must be non-negative")
        slots = (self.height // self.cell) * (self.width // self.cell)
        if 4 * self.lesions_per_type + self.distractors > slots:
            raise ValueError(f"{4 * self.lesions_per_type + self.distractors} objects do not fit in {slots} grid cells")
        for lo, hi in (self.red_contrast, self.bright_contrast):
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError("contrast ranges must satisfy 0 <= lo <= hi <= 1")


@dataclass
class PlantedObject:
    lesion_type: str
    is_lesion: bool
    mask: np.ndarray


@dataclass
class SynthImage:
    name: str
    rgb: np.ndarray
    objects: List[PlantedObject] = field(default_factory=list)


def _blob(shape, cy, cx, radius, rng, irregular: float) -> np.ndarray:
    yy, xx = np.mgrid[:shape[0], :shape[1]]
    ang = np.arctan2(yy - cy, xx - cx)
    wobble = 1.0 + irregular * sum(rng.uniform(-1, 1) * np.cos(k * ang + rng.uniform(0, 2 * np.pi))
                                   for k in (2, 3))
    ry = radius * rng.uniform(0.8, 1.2)
    return np.hypot(yy - cy, (xx - cx) * ry / radius) <= ry * wobble


def _streak(shape, cy, cx, rng, length: float, width: float) -> np.ndarray:
    yy, xx = np.mgrid[:shape[0], :shape[1]]
    th = rng.uniform(0, np.pi)
    u = (xx - cx) * np.cos(th) + (yy - cy) * np.sin(th)
    v = -(xx - cx) * np.sin(th) + (yy - cy) * np.cos(th)
    return (np.abs(u) <= length / 2) & (np.abs(v) <= width / 2)


def _paint(rgb: np.ndarray, mask: np.ndarray, colour: np.ndarray, weight: float, blur: float = 0.0) -> None:
    alpha = mask.astype(float)
    if blur:
        alpha = np.clip(ndimage.gaussian_filter(alpha, blur) * 1.6, 0.0, 1.0)
    a = (weight * alpha)[..., None]
    rgb *= 1.0 - a
    rgb += a * colour


def synth_images(spec: SynthSpec, seed: int = 0) -> List[SynthImage]:
    rng = np.random.default_rng(seed)
    h, w, c = spec.height, spec.width, spec.cell
    cells = [(r, q) for r in range(h // c) for q in range(w // c)]
    out = []
    for n in range(spec.n_images):
        yy, xx = np.mgrid[:h, :w]
        shade = 1.0 - 0.15 * (np.hypot(yy - h / 2, xx - w / 2) / max(h, w))
        rgb = _BACKGROUND[None, None, :] * shade[..., None]
        rgb = rgb + rng.normal(0.0, spec.texture, (h, w, 1))
        kinds = [t for t in LESION_TYPES for _ in range(spec.lesions_per_type)]
        kinds += [("vessel", "reflex")[k % 2] for k in range(spec.distractors)]
        slots = rng.permutation(len(cells))[:len(kinds)]
        img = SynthImage(f"img{n:04d}", rgb)
        for k, (kind, slot) in enumerate(zip(kinds, slots)):
            r, q = cells[slot]
            cy = r * c + c / 2 + rng.uniform(-2, 2)
            cx = q * c + c / 2 + rng.uniform(-2, 2)
            red_w = rng.uniform(*spec.red_contrast)
            bright_w = rng.uniform(*spec.bright_contrast)
            if kind == "hemorrhage":
                m = _blob((h, w), cy, cx, rng.uniform(4, 6), rng, 0.25)
                _paint(rgb, m, _RED, red_w)
            elif kind == "microaneurysm":
                m = _blob((h, w), cy, cx, rng.uniform(2, 3), rng, 0.0)
                _paint(rgb, m, _RED, red_w)
            elif kind == "hard_exudate":
                m = _blob((h, w), cy, cx, rng.uniform(2, 4), rng, 0.3)
                _paint(rgb, m, _YELLOW, bright_w)
            elif kind == "soft_exudate":
                m = _blob((h, w), cy, cx, rng.uniform(4, 6), rng, 0.1)
                _paint(rgb, m, _PALE, bright_w, blur=1.5)
            elif kind == "vessel":
                m = _streak((h, w), cy, cx, rng, rng.uniform(12, 18), 4.0)
                _paint(rgb, m, _RED, red_w)
            else:
                m = _streak((h, w), cy, cx, rng, rng.uniform(12, 18), 4.0)
                _paint(rgb, m, _PALE, bright_w)
            mimic = kind if kind in LESION_TYPES else (RED_TYPES if kind == "vessel" else BRIGHT_TYPES)[(k // 2) % 2]
            img.objects.append(PlantedObject(mimic, kind in LESION_TYPES, m))
        img.rgb = np.clip(rgb, 0.0, 1.0)
        out.append(img)
    return out


def label_candidates(candidates: Sequence[LesionCandidate], objects: Sequence[PlantedObject],
                     shape: Tuple[int, int]) -> List[Tuple[int, str]]:
    """(label, lesion_type) per candidate from the planted object it overlaps most."""
    out = []
    for cand in candidates:
        m = cand.mask(shape)
        overlaps = [int(np.count_nonzero(m & o.mask)) for o in objects]
        if overlaps and max(overlaps) > 0:
            o = objects[int(np.argmax(overlaps))]
            out.append((int(o.is_lesion), o.lesion_type))
        else:
            out.append((0, "none"))
    return out


@dataclass
class SynthResult:
    images: List[SynthImage]
    rows: List[dict]  # manifest rows: image, candidate_id, label, lesion_type
    features: np.ndarray  # raw (unscaled) feature matrix, one row per manifest row

    def dataset(self, scaler=None) -> Dataset:
        x = self.features if scaler is None else scaler.transform(self.features)
        return Dataset(x, np.array([r["label"] for r in self.rows], int),
                       np.array([r["lesion_type"] for r in self.rows], dtype=object),
                       [f"{r['image']}:{r['candidate_id']}" for r in self.rows])


def candidate_table(images: Sequence[Tuple[str, np.ndarray]],
                    detection: DetectionConfig = DetectionConfig()) -> Tuple[List[dict], np.ndarray]:
    """Detect candidates in each (name, image) and extract raw features."""
    rows, feats = [], []
    for name, rgb in images:
        for cand in find_candidates(rgb, detection):
            rows.append({"image": name, "candidate_id": cand.cid})
            feats.append(extract_features(rgb, cand).values)
    return rows, np.array(feats).reshape(len(feats), -1)


def synth_dataset(spec: SynthSpec = SynthSpec(), seed: int = 0,
                  detection: DetectionConfig = DetectionConfig()) -> SynthResult:
    images = synth_images(spec, seed)
    rows: List[dict] = []
    feats = []
    for img in images:
        cands = find_candidates(img.rgb, detection)
        for cand, (label, ltype) in zip(cands, label_candidates(cands, img.objects, img.rgb.shape[:2])):
            rows.append({"image": img.name, "candidate_id": cand.cid, "label": label, "lesion_type": ltype})
            feats.append(extract_features(img.rgb, cand).values)
    return SynthResult(images, rows, np.array(feats).reshape(len(feats), -1))
