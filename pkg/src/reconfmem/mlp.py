"""81x16x2 perceptron with sign-rule (Manhattan) training, in float or on crossbars.

In device mode every weight is a differential pair of crossbar cells,
``w = (g+ - g-) / (g_max - g_min)``, with an extra always-on input row for
the bias. Forward passes read the arrays with input voltages
``x * v_read``; gradients are computed in floating point and each weight
receives at most one programming pulse per batch, chosen by the gradient
sign.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .array import (ConductanceUpdateModel, CrossbarArray, VariationModel, program_pair,
                    read_mvm, sample_update_models)

LAYERS = (81, 16, 2)
CONFIDENCE = 0.75
LESION_TYPES = ("hemorrhage", "microaneurysm", "hard_exudate", "soft_exudate")


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class Dataset:
    x: np.ndarray  # (n, 81), scaled to [0, 1]
    y: np.ndarray  # (n,), 1 = lesion
    lesion_type: Optional[np.ndarray] = None
    ids: Optional[List[str]] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ValueError("x must be (n, d) with one label per row")
        if self.lesion_type is not None:
            self.lesion_type = np.asarray(self.lesion_type, dtype=object)

    def __len__(self) -> int:
        return int(self.y.shape[0])

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx],
                       None if self.lesion_type is None else self.lesion_type[idx],
                       None if self.ids is None else [self.ids[i] for i in idx])


class DevicePairs:
    """One weight matrix (n_out, n_in + 1) stored as differential pairs on a crossbar.

    Row r of the crossbar carries input r (the last row is the bias input);
    columns 2j and 2j+1 hold the + and - cells of output j.
    """

    def __init__(self, array: CrossbarArray, v_read: float = 0.1):
        self.array = array
        self.v_read = v_read
        self.n_in = array.rows
        self.n_out = array.cols // 2
        self.span = array.g_max[:, 0::2] - array.g_min[:, 0::2]

    @property
    def weights(self) -> np.ndarray:
        g = self.array.g
        return ((g[:, 0::2] - g[:, 1::2]) / self.span).T

    def forward(self, xb: np.ndarray) -> np.ndarray:
        i = read_mvm(self.array, xb * self.v_read)
        return (i[:, 0::2] - i[:, 1::2]) / (self.span[0] * self.v_read)

    def program(self, w: np.ndarray) -> None:
        for j in range(self.n_out):
            for r in range(self.n_in):
                program_pair(self.array, r, 2 * j, 2 * j + 1, float(np.clip(w[j, r], -1, 1)))

    def sign_update(self, grad: np.ndarray) -> int:
        """One pulse per weight with non-zero gradient; returns pulses issued.

        A weight can be raised by potentiating its + cell or depressing its
        - cell (and lowered the other way round). Whichever of the two moves
        the pair further is used, so the common-mode conductance stays
        bounded without refresh cycles. Dead cells never win the choice.
        """
        s = -np.sign(grad).T  # (n_in, n_out): +1 means raise the weight
        arr = self.array
        up_p, dn_p = arr.step_p(), arr.step_d()
        # a pulse that cannot move the cell (dead, or already at the rail) loses
        up_p = np.where(arr.functional & (arr.g < arr.g_max), np.minimum(up_p, arr.g_max - arr.g), -1.0)
        dn_p = np.where(arr.functional & (arr.g > arr.g_min), np.minimum(dn_p, arr.g - arr.g_min), -1.0)
        pulses = np.zeros(arr.g.shape, dtype=int)
        pp, pm = pulses[:, 0::2], pulses[:, 1::2]  # views
        raise_plus = up_p[:, 0::2] >= dn_p[:, 1::2]
        lower_minus = up_p[:, 1::2] >= dn_p[:, 0::2]
        up, down = s > 0, s < 0
        pp[up & raise_plus] = 1
        pm[up & ~raise_plus] = -1
        pm[down & lower_minus] = 1
        pp[down & ~lower_minus] = -1
        arr.pulse(pulses)
        return int(np.count_nonzero(pulses))


@dataclass
class MlpModel:
    """Weights ``w1`` (16, 82) and ``w2`` (2, 17); last column is the bias."""

    w1: np.ndarray
    w2: np.ndarray
    layers1: Optional[DevicePairs] = None
    layers2: Optional[DevicePairs] = None
    confidence: float = CONFIDENCE

    @classmethod
    def init(cls, seed: int = 0, scale: float = 0.1, sizes: Tuple[int, int, int] = LAYERS) -> "MlpModel":
        rng = np.random.default_rng(seed)
        n_in, n_hid, n_out = sizes
        return cls(rng.uniform(-scale, scale, (n_hid, n_in + 1)),
                   rng.uniform(-scale, scale, (n_out, n_hid + 1)))

    @property
    def device_backed(self) -> bool:
        return self.layers1 is not None

    def to_device(self, array1: CrossbarArray, array2: CrossbarArray, v_read: float = 0.1) -> "MlpModel":
        """Program the current float weights onto two crossbars."""
        n_hid, n_in1 = self.w1.shape
        n_out, n_in2 = self.w2.shape
        if array1.g.shape != (n_in1, 2 * n_hid) or array2.g.shape != (n_in2, 2 * n_out):
            raise ValueError("crossbar shapes do not match the layer sizes")
        l1, l2 = DevicePairs(array1, v_read), DevicePairs(array2, v_read)
        l1.program(self.w1)
        l2.program(self.w2)
        m = MlpModel(l1.weights, l2.weights, l1, l2, self.confidence)
        return m

    def sync(self) -> None:
        if self.device_backed:
            self.w1 = self.layers1.weights
            self.w2 = self.layers2.weights

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (input with bias, hidden with bias, output probabilities)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.w1.shape[1] - 1:
            raise ValueError(f"expected {self.w1.shape[1] - 1} features, got {x.shape[1]}")
        xb = np.hstack([x, np.ones((x.shape[0], 1))])
        z1 = self.layers1.forward(xb) if self.device_backed else xb @ self.w1.T
        h = sigmoid(z1)
        hb = np.hstack([h, np.ones((h.shape[0], 1))])
        z2 = self.layers2.forward(hb) if self.device_backed else hb @ self.w2.T
        return xb, hb, softmax(z2)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[2][:, 1]

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Lesion iff the lesion probability reaches the confidence level."""
        return (self.predict_proba(x) >= self.confidence).astype(int)

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        p = self.forward(x)[2]
        y = np.asarray(y, dtype=int)
        return float(-np.mean(np.log(np.clip(p[np.arange(len(y)), y], 1e-300, None))))

    def gradients(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Mean cross-entropy gradients w.r.t. w1 and w2 (float weights)."""
        xb, hb, p = self.forward(x)
        n = xb.shape[0]
        t = np.zeros_like(p)
        t[np.arange(n), np.asarray(y, dtype=int)] = 1.0
        d2 = (p - t) / n
        g2 = d2.T @ hb
        h = hb[:, :-1]
        d1 = (d2 @ self.w2[:, :-1]) * h * (1.0 - h)
        g1 = d1.T @ xb
        return g1, g2

    def accuracy(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(x) == np.asarray(y)))

    def as_dict(self) -> dict:
        return {"layers": list(LAYERS), "confidence": self.confidence,
                "device_backed": self.device_backed,
                "w1": self.w1.tolist(), "w2": self.w2.tolist()}


@dataclass
class TrainingReport:
    epochs: int
    loss: List[float] = field(default_factory=list)
    accuracy: List[float] = field(default_factory=list)
    pulses: List[int] = field(default_factory=list)
    mode: str = "float"

    @property
    def final_accuracy(self) -> Optional[float]:
        return self.accuracy[-1] if self.accuracy else None

    def first_epoch_reaching(self, acc: float) -> Optional[int]:
        for k, a in enumerate(self.accuracy, start=1):
            if a >= acc:
                return k
        return None

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def train_mlp(model: MlpModel, dataset: Dataset, epochs: int = 1000, batch_size: int = 16,
              step: float = 1.0 / 800, seed: int = 0,
              arrays: Optional[Tuple[CrossbarArray, CrossbarArray]] = None) -> TrainingReport:
    """Sign-rule training, in place.

    Float mode: ``w -= step * sign(grad)``, clipped to [-1, 1]; the default
    step is one mid-window pulse of the default update curve. Device mode
    (model built with ``to_device``, or ``arrays`` given, which programs the
    current weights onto them first): one potentiation or depression pulse
    per weight per batch. Batches are reshuffled every epoch from ``seed``.
    Accuracy uses the model's confidence threshold.
    """
    if arrays is not None:
        dev = model.to_device(*arrays)
        model.w1, model.w2, model.layers1, model.layers2 = dev.w1, dev.w2, dev.layers1, dev.layers2
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if dataset.x.shape[1] != model.w1.shape[1] - 1:
        raise ValueError("feature dimension does not match the network input")
    rng = np.random.default_rng(seed)
    report = TrainingReport(epochs, mode="device" if model.device_backed else "float")
    n = len(dataset)
    for _ in range(epochs):
        order = rng.permutation(n)
        pulses = 0
        for s in range(0, n, batch_size):
            idx = order[s:s + batch_size]
            g1, g2 = model.gradients(dataset.x[idx], dataset.y[idx])
            if model.device_backed:
                pulses += model.layers1.sign_update(g1) + model.layers2.sign_update(g2)
                model.sync()
            else:
                model.w1 = np.clip(model.w1 - step * np.sign(g1), -1.0, 1.0)
                model.w2 = np.clip(model.w2 - step * np.sign(g2), -1.0, 1.0)
        report.loss.append(model.loss(dataset.x, dataset.y))
        report.accuracy.append(model.accuracy(dataset.x, dataset.y))
        report.pulses.append(pulses)
    return report


def device_arrays(variation: VariationModel, n_models: int = 9, seed: int = 0,
                  base: ConductanceUpdateModel = ConductanceUpdateModel(),
                  sizes: Tuple[int, int, int] = LAYERS) -> Tuple[CrossbarArray, CrossbarArray]:
    """Two crossbars for the network, with yield from ``variation`` and
    ``n_models`` sampled update curves assigned round-robin."""
    from .array import sample_array

    models = sample_update_models(n_models, base, seed=seed)
    n_in, n_hid, n_out = sizes
    a1, _ = sample_array(variation, n_in + 1, 2 * n_hid, update_models=models)
    v2 = dataclasses.replace(variation, seed=variation.seed + 1)
    a2, _ = sample_array(v2, n_hid + 1, 2 * n_out, update_models=models)
    return a1, a2


@dataclass
class TypeMetrics:
    n: int
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @staticmethod
    def _ratio(a: int, b: int) -> Optional[float]:
        return a / b if b else None

    @property
    def accuracy(self) -> Optional[float]:
        return self._ratio(self.tp + self.tn, self.n)

    @property
    def sensitivity(self) -> Optional[float]:
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def specificity(self) -> Optional[float]:
        return self._ratio(self.tn, self.tn + self.fp)

    def as_dict(self) -> dict:
        def fmt(v):
            return "N/A" if v is None else v
        return {"n": self.n, "tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn,
                "accuracy": fmt(self.accuracy), "sensitivity": fmt(self.sensitivity),
                "specificity": fmt(self.specificity)}


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> TypeMetrics:
    y_true, y_pred = np.asarray(y_true, int), np.asarray(y_pred, int)
    return TypeMetrics(int(y_true.size),
                       tp=int(np.sum((y_true == 1) & (y_pred == 1))),
                       tn=int(np.sum((y_true == 0) & (y_pred == 0))),
                       fp=int(np.sum((y_true == 0) & (y_pred == 1))),
                       fn=int(np.sum((y_true == 1) & (y_pred == 0))))


def evaluate(model: MlpModel, dataset: Dataset,
             lesion_types: Sequence[str] = LESION_TYPES) -> Dict[str, TypeMetrics]:
    """Confusion-matrix metrics overall and per lesion type (types with no samples report N/A)."""
    pred = model.predict(dataset.x) if len(dataset) else np.zeros(0, int)
    return metrics_from_predictions(dataset, pred, lesion_types)


def metrics_from_predictions(dataset: Dataset, pred: np.ndarray,
                             lesion_types: Sequence[str] = LESION_TYPES) -> Dict[str, TypeMetrics]:
    out = {"overall": confusion(dataset.y, pred)}
    types = dataset.lesion_type
    for t in lesion_types:
        sel = np.zeros(len(dataset), bool) if types is None else (types == t)
        out[t] = confusion(dataset.y[sel], pred[sel])
    return out


def separable_dataset(n: int = 400, dim: int = 81, seed: int = 0, margin: float = 0.05) -> Dataset:
    """Points in [0, 1]^dim labelled by a random hyperplane, with a margin gap removed."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(dim)
    w /= np.linalg.norm(w)
    xs, ys = [], []
    while len(xs) < n:
        x = rng.random(dim)
        d = float(w @ (x - 0.5))
        if abs(d) < margin:
            continue
        xs.append(x)
        ys.append(int(d > 0))
    types = np.array([LESION_TYPES[k % 4] for k in range(n)], dtype=object)
    return Dataset(np.array(xs), np.array(ys), types)
