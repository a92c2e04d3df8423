"""Lesion-candidate detection and the 81-value feature roster.

Images are float arrays in [0, 1], shaped (H, W) or (H, W, 3).
Morphology treats pixels outside the image as background.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

N_FEATURES = 81
RING_WIDTH = 2
SCALES = (0.0, 1.0, 2.0)
_EIGHT = np.ones((3, 3), bool)
_FOUR = ndimage.generate_binary_structure(2, 1)


class ClassHint(str, enum.Enum):
    BRIGHT = "Bright"
    RED = "Red"
    UNKNOWN = "Unknown"


@dataclass
class LesionCandidate:
    rows: np.ndarray
    cols: np.ndarray
    class_hint: ClassHint = ClassHint.UNKNOWN
    cid: int = 0

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=int)
        self.cols = np.asarray(self.cols, dtype=int)
        if self.rows.size == 0:
            raise ValueError("candidate region is empty")

    @property
    def area(self) -> int:
        return int(self.rows.size)

    @property
    def bbox(self) -> Tuple[int, int, int, int]:
        """(row_min, col_min, row_max, col_max), inclusive."""
        return int(self.rows.min()), int(self.cols.min()), int(self.rows.max()), int(self.cols.max())

    def mask(self, shape: Tuple[int, int]) -> np.ndarray:
        m = np.zeros(shape, bool)
        m[self.rows, self.cols] = True
        return m


@dataclass
class FeatureVector:
    values: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} values")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector has non-finite entries")


def to_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ np.array([0.299, 0.587, 0.114])
    if img.ndim == 3 and img.shape[2] == 1:
        return img[..., 0]
    raise ValueError(f"unsupported image shape {img.shape}")


def to_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        return np.repeat(img[..., None], 3, axis=2)
    if img.ndim == 3 and img.shape[2] == 1:
        return np.repeat(img, 3, axis=2)
    return img


def binarize(img: np.ndarray, threshold: float) -> np.ndarray:
    """Pixels at or above ``threshold`` become 1 (colour input is reduced to luma)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return to_gray(img) >= threshold


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), bool)


def erode(binary: np.ndarray, se_radius: int) -> np.ndarray:
    return ndimage.binary_erosion(binary, structure=_square(se_radius), border_value=0)


def dilate(binary: np.ndarray, se_radius: int) -> np.ndarray:
    return ndimage.binary_dilation(binary, structure=_square(se_radius), border_value=0)


def morph_open(binary: np.ndarray, se_radius: int = 1) -> np.ndarray:
    """Erosion followed by dilation with a (2r+1)^2 square."""
    if se_radius == 0:
        return np.asarray(binary, bool).copy()
    return dilate(erode(binary, se_radius), se_radius)


def morph_close(binary: np.ndarray, se_radius: int = 1) -> np.ndarray:
    """Dilation followed by erosion with a (2r+1)^2 square."""
    if se_radius == 0:
        return np.asarray(binary, bool).copy()
    return erode(dilate(binary, se_radius), se_radius)


def connected_components(binary: np.ndarray, class_hint: ClassHint = ClassHint.UNKNOWN) -> List[LesionCandidate]:
    """8-connected regions ordered by their first pixel in raster order."""
    labels, n = ndimage.label(np.asarray(binary, bool), structure=_EIGHT)
    if n == 0:
        return []
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_labels = flat[order]
    starts = np.searchsorted(sorted_labels, np.arange(1, n + 1))
    ends = np.searchsorted(sorted_labels, np.arange(1, n + 1), side="right")
    width = binary.shape[1]
    regions = []
    for s, e in zip(starts, ends):
        idx = order[s:e]
        regions.append((int(idx.min()), idx))
    regions.sort(key=lambda x: x[0])
    return [LesionCandidate(idx // width, idx % width, class_hint, cid=k)
            for k, (_, idx) in enumerate(regions)]


@dataclass(frozen=True)
class DetectionConfig:
    bright_threshold: float = 0.18
    red_threshold: float = 0.18
    se_radius: int = 1
    min_area: int = 2


def find_candidates(img: np.ndarray, config: DetectionConfig = DetectionConfig()) -> List[LesionCandidate]:
    """Bright and dark (red) candidates on a background-removed image.

    Contrast maps are luma deviations from the image median, so the input is
    expected to have optic disc and vessels already masked out. Each map is
    binarised, opened to drop speckle, closed to fill pinholes, and split
    into components. Bright candidates come first.
    """
    gray = to_gray(img)
    bg = float(np.median(gray))
    out: List[LesionCandidate] = []
    for hint, contrast, thr in ((ClassHint.BRIGHT, gray - bg, config.bright_threshold),
                                (ClassHint.RED, bg - gray, config.red_threshold)):
        binary = binarize(np.clip(contrast, 0.0, 1.0), thr)
        binary = morph_close(morph_open(binary, config.se_radius), config.se_radius)
        for cand in connected_components(binary, hint):
            if cand.area >= config.min_area:
                out.append(cand)
    for k, cand in enumerate(out):
        cand.cid = k
    return out


# ---------------------------------------------------------------------------
# features

STRUCTURAL_NAMES = (
    "area", "perimeter", "compactness", "roundness", "bbox_height", "bbox_width",
    "aspect_ratio", "extent", "equiv_diameter", "mu20", "mu02", "mu11",
    "major_axis", "minor_axis", "eccentricity", "orientation", "radial_mean",
    "radial_std", "radial_max", "boundary_radial_min", "boundary_pixels",
    "interior_pixels", "holes", "filled_ratio", "hu1", "hu2", "hu3",
)
_STATS = ("mean", "std", "min", "max", "q25", "q50", "q75")
COLOR_NAMES = tuple(f"{ch}_{s}" for ch in "rgb" for s in _STATS) + tuple(
    f"ring_{ch}_{s}" for ch in "rgb" for s in ("mean", "std"))
DERIVATIVE_NAMES = tuple(
    f"s{k}_{name}" for k in range(len(SCALES)) for name in (
        "grad_boundary_mean", "grad_boundary_std", "grad_boundary_max",
        "grad_interior_mean", "grad_interior_std", "grad_interior_max",
        "grad_ring_mean", "lap_region_mean", "lap_boundary_mean"))
FEATURE_NAMES = STRUCTURAL_NAMES + COLOR_NAMES + DERIVATIVE_NAMES
assert len(FEATURE_NAMES) == N_FEATURES


def _boundary(mask: np.ndarray) -> np.ndarray:
    # region pixels with a 4-neighbour outside the region
    return mask & ~ndimage.binary_erosion(mask, structure=_FOUR, border_value=0)


def _perimeter(mask: np.ndarray) -> int:
    """Number of pixel edges between region and background (1 pixel -> 4)."""
    m = np.pad(mask, 1).astype(np.int8)
    return int(np.abs(np.diff(m, axis=0)).sum() + np.abs(np.diff(m, axis=1)).sum())


def _stats(x: np.ndarray) -> List[float]:
    if x.size == 0:
        return [0.0, 0.0]
    return [float(x.mean()), float(x.std())]


def structural_features(mask: np.ndarray) -> List[float]:
    rr, cc = np.nonzero(mask)
    area = float(rr.size)
    perim = float(_perimeter(mask))
    h = float(rr.max() - rr.min() + 1)
    w = float(cc.max() - cc.min() + 1)
    r0, c0 = rr.mean(), cc.mean()
    dr, dc = rr - r0, cc - c0
    mu20, mu02, mu11 = float((dr ** 2).mean()), float((dc ** 2).mean()), float((dr * dc).mean())
    common = 0.5 * (mu20 + mu02)
    diff = math.sqrt(max(0.0, 0.25 * (mu20 - mu02) ** 2 + mu11 ** 2))
    lam1, lam2 = common + diff, max(0.0, common - diff)
    ecc = math.sqrt(1.0 - lam2 / lam1) if lam1 > 0 else 0.0
    orient = 0.5 * math.atan2(2 * mu11, mu20 - mu02) if lam1 > 0 else 0.0
    rad = np.hypot(dr, dc)
    bnd = _boundary(mask)
    br, bc = np.nonzero(bnd)
    brad = np.hypot(br - r0, bc - c0)
    filled = ndimage.binary_fill_holes(mask)
    _, holes = ndimage.label(filled & ~mask, structure=_FOUR)
    # scale-normalised central moments -> first three Hu invariants
    n20, n02, n11 = mu20 / area, mu02 / area, mu11 / area
    eta = {}
    for p, q in ((3, 0), (0, 3), (2, 1), (1, 2)):
        eta[p, q] = float((dr ** p * dc ** q).sum()) / area ** (1 + (p + q) / 2)
    hu1 = n20 + n02
    hu2 = (n20 - n02) ** 2 + 4 * n11 ** 2
    hu3 = (eta[3, 0] - 3 * eta[1, 2]) ** 2 + (3 * eta[2, 1] - eta[0, 3]) ** 2
    return [
        area, perim, 16.0 * area / perim ** 2, 4.0 * math.pi * area / perim ** 2, h, w,
        min(h, w) / max(h, w), area / (h * w), math.sqrt(4.0 * area / math.pi), mu20, mu02, mu11,
        4.0 * math.sqrt(lam1), 4.0 * math.sqrt(lam2), ecc, orient, float(rad.mean()),
        float(rad.std()), float(rad.max()), float(brad.min()), float(bnd.sum()),
        float(area - bnd.sum()), float(holes), float(filled.sum()) / area, hu1, hu2, hu3,
    ]


def _ring(mask: np.ndarray) -> np.ndarray:
    grown = ndimage.binary_dilation(mask, structure=_square(RING_WIDTH), border_value=0)
    return grown & ~mask


def color_features(rgb: np.ndarray, mask: np.ndarray, ring: np.ndarray) -> List[float]:
    out: List[float] = []
    for ch in range(3):
        v = rgb[..., ch][mask]
        q = np.percentile(v, [25, 50, 75])
        out += [float(v.mean()), float(v.std()), float(v.min()), float(v.max()),
                float(q[0]), float(q[1]), float(q[2])]
    for ch in range(3):
        out += _stats(rgb[..., ch][ring])
    return out


def derivative_features(gray: np.ndarray, mask: np.ndarray, ring: np.ndarray) -> List[float]:
    bnd = _boundary(mask)
    interior = mask & ~bnd
    out: List[float] = []
    for sigma in SCALES:
        sm = ndimage.gaussian_filter(gray, sigma, mode="nearest") if sigma > 0 else gray
        gr, gc = np.gradient(sm)
        mag = np.hypot(gr, gc)
        lap = ndimage.laplace(sm, mode="nearest")
        b = mag[bnd]
        i_ = mag[interior]
        out += [float(b.mean()), float(b.std()), float(b.max()),
                float(i_.mean()) if i_.size else 0.0, float(i_.std()) if i_.size else 0.0,
                float(i_.max()) if i_.size else 0.0,
                float(mag[ring].mean()) if ring.any() else 0.0,
                float(lap[mask].mean()), float(lap[bnd].mean())]
    return out


def extract_features(img: np.ndarray, candidate: LesionCandidate, margin: int = 12) -> FeatureVector:
    """27 structural + 27 colour + 27 derivative values for one candidate.

    Work happens on a crop around the candidate (``margin`` pixels, clipped
    to the image), so features do not depend on where the lesion sits.
    """
    img = np.asarray(img, dtype=float)
    H, W = img.shape[:2]
    if candidate.rows.min() < 0 or candidate.cols.min() < 0 or \
            candidate.rows.max() >= H or candidate.cols.max() >= W:
        raise ValueError("candidate lies outside the image")
    r0, c0, r1, c1 = candidate.bbox
    ra, ca = max(0, r0 - margin), max(0, c0 - margin)
    rb, cb = min(H, r1 + margin + 1), min(W, c1 + margin + 1)
    crop = img[ra:rb, ca:cb]
    mask = np.zeros(crop.shape[:2], bool)
    mask[candidate.rows - ra, candidate.cols - ca] = True
    rgb = to_rgb(crop)
    gray = to_gray(crop)
    ring = _ring(mask)
    values = structural_features(mask) + color_features(rgb, mask, ring) + derivative_features(gray, mask, ring)
    return FeatureVector(np.array(values), provenance=f"cand{candidate.cid}")


@dataclass
class FeatureScaler:
    """Per-dimension min/max scaling to [0, 1], fitted on training vectors."""

    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None

    def fit(self, x: np.ndarray) -> "FeatureScaler":
        x = np.asarray(x, dtype=float)
        self.lo, self.hi = x.min(axis=0), x.max(axis=0)
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        if self.lo is None:
            raise RuntimeError("scaler not fitted")
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        return np.clip((np.asarray(x, dtype=float) - self.lo) / span, 0.0, 1.0)

    def as_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        lo, hi = np.asarray(d["lo"], dtype=float), np.asarray(d["hi"], dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("scaler lo/hi must be equal-length vectors")
        return cls(lo, hi)
