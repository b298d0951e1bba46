"""Hash function learning: one linear classifier per code bit.

Each bit column of the learned code matrix becomes the target of a binary
classification problem over the training features (raw, or RBF responses
against an anchor set). The resulting sign classifiers are the hash
functions applied to unseen points.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codegen import CodeMatrix
from .data import Dataset, KernelConfig, kernel_matrix
from .packed import PackedCodes, pack_signs

__all__ = [
    "LinearHash",
    "HashModel",
    "ClassifierConfig",
    "ModelFormatError",
    "train_bit_classifier",
    "train_model",
    "encode",
    "save_model",
    "load_model",
]

FEATURE_MODES = ("raw", "kernel")
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """Corrupt or inconsistent hash model data."""


@dataclass
class LinearHash:
    """One sign hash: x -> sign(w . x + b), with sign(0) = +1.

    `constant` marks classifiers produced from a single-valued target
    column, where no real decision boundary exists.
    """

    w: np.ndarray
    b: float
    constant: bool = False

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        if self.w.ndim != 1:
            raise ValueError("w must be a vector")
        if not (np.isfinite(self.w).all() and np.isfinite(self.b)):
            raise ValueError("weights must be finite")
        self.w.flags.writeable = False

    def scores(self, feats: np.ndarray) -> np.ndarray:
        return feats @ self.w + self.b

    def apply(self, feats: np.ndarray) -> np.ndarray:
        """Sign outputs (+1/-1) for a feature matrix."""
        return np.where(self.scores(feats) >= 0.0, 1, -1).astype(np.int8)


@dataclass
class HashModel:
    """Ordered per-bit hash functions plus the feature preprocessing step."""

    functions: list[LinearHash]
    feature_mode: str
    d: int
    kernel_cfg: KernelConfig | None = None

    def __post_init__(self):
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"feature_mode must be one of {FEATURE_MODES}")
        if (self.kernel_cfg is not None) != (self.feature_mode == "kernel"):
            raise ValueError("kernel_cfg must be present exactly when feature_mode is 'kernel'")
        if not self.functions:
            raise ValueError("need at least one hash function")
        p = self.d if self.feature_mode == "raw" else self.kernel_cfg.q
        for fn in self.functions:
            if fn.w.shape != (p,):
                raise ValueError(f"hash weight length {fn.w.shape} does not match p={p}")
        if self.kernel_cfg is not None and self.kernel_cfg.d != self.d:
            raise ValueError("anchor dimension does not match d")

    @property
    def m(self) -> int:
        return len(self.functions)


@dataclass
class ClassifierConfig:
    """Hinge-loss SGD settings; c is the SVM-style cost trade-off.

    When c is None it defaults to 1000/n at training time. The effective
    L2 coefficient of the objective is 1 / (c * n).
    """

    c: float | None = None
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.c is not None and not self.c > 0:
            raise ValueError("c must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def hinge_objective(feats: np.ndarray, column: np.ndarray, w: np.ndarray, b: float, reg: float) -> float:
    """L2-regularized mean hinge loss (the quantity SGD minimizes)."""
    margins = column * (feats @ w + b)
    return 0.5 * reg * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def train_bit_classifier(
    feats: np.ndarray, column: np.ndarray, cfg: ClassifierConfig
) -> LinearHash:
    """Train one sign hash on (features, bit column) by seeded subgradient SGD.

    Runs epoch passes over a reshuffled sample order with step size
    1 / (reg * (t + t0)), snapshots the weights after every epoch, and
    returns the snapshot with the lowest regularized hinge objective. The
    zero classifier is always a candidate, so the returned objective never
    exceeds that baseline.
    """
    feats = np.asarray(feats, dtype=np.float64)
    column = np.asarray(column, dtype=np.float64)
    n, p = feats.shape
    if column.shape != (n,):
        raise ValueError(f"column length {column.shape} does not match n={n}")
    if not np.isin(column, (-1.0, 1.0)).all():
        raise ValueError("column entries must be -1 or +1")

    if np.all(column == column[0]):
        return LinearHash(np.zeros(p), float(column[0]), constant=True)

    c = cfg.c if cfg.c is not None else 1000.0 / n
    reg = 1.0 / (c * n)
    rng = np.random.default_rng(cfg.seed)

    w = np.zeros(p)
    b = 0.0
    best_w, best_b = w.copy(), b
    best_obj = hinge_objective(feats, column, w, b, reg)

    t0 = 1.0 / reg  # keeps early steps bounded by ~1/reg * 1/(t + 1/reg) <= 1
    t = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for idx in order:
            t += 1
            lr = 1.0 / (reg * (t + t0))
            x = feats[idx]
            y = column[idx]
            if y * (x @ w + b) < 1.0:
                w *= 1.0 - lr * reg
                w += (lr * y) * x
                b += lr * y
            else:
                w *= 1.0 - lr * reg
        obj = hinge_objective(feats, column, w, b, reg)
        if obj < best_obj:
            best_obj = obj
            best_w, best_b = w.copy(), b
    return LinearHash(best_w, float(best_b))


def _feature_matrix(points: np.ndarray, mode: str, kcfg: KernelConfig | None) -> np.ndarray:
    if mode == "raw":
        return np.asarray(points, dtype=np.float64)
    return kernel_matrix(points, kcfg)


def train_model(
    ds: Dataset,
    codes: CodeMatrix,
    mode: str,
    kcfg: KernelConfig | None,
    ccfg: ClassifierConfig,
    threads: int = 1,
) -> HashModel:
    """Train all m bit classifiers independently and assemble the model.

    Per-bit RNG seeds are derived from ccfg.seed by bit index, so results
    are identical regardless of training order or worker count.
    """
    if codes.n != ds.n:
        raise ValueError("code matrix and dataset cover different point counts")
    if mode not in FEATURE_MODES:
        raise ValueError(f"feature mode must be one of {FEATURE_MODES}")
    feats = _feature_matrix(ds.features, mode, kcfg)

    def train_one(k: int) -> LinearHash:
        bit_seed = int(np.random.SeedSequence(ccfg.seed, spawn_key=(k,)).generate_state(1)[0])
        bit_cfg = ClassifierConfig(c=ccfg.c, epochs=ccfg.epochs, seed=bit_seed)
        return train_bit_classifier(feats, codes.bits[:, k], bit_cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            functions = list(pool.map(train_one, range(codes.m)))
    else:
        functions = [train_one(k) for k in range(codes.m)]
    return HashModel(functions, mode, ds.d, kcfg)


def encode(model: HashModel, points: np.ndarray) -> PackedCodes:
    """Hash a point matrix into packed codes (bit k set iff hash k is +1)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: points have d={points.shape[1]}, model d={model.d}")
    feats = _feature_matrix(points, model.feature_mode, model.kernel_cfg)
    weights = np.stack([fn.w for fn in model.functions], axis=1)
    biases = np.array([fn.b for fn in model.functions])
    scores = feats @ weights + biases
    return pack_signs(scores >= 0.0)


def save_model(model: HashModel, path) -> None:
    """Serialize to versioned JSON; float round-trips are exact."""
    doc = {
        "version": MODEL_VERSION,
        "m": model.m,
        "d": model.d,
        "feature_mode": model.feature_mode,
        "functions": [
            {"w": fn.w.tolist(), "b": fn.b, "constant": fn.constant} for fn in model.functions
        ],
    }
    if model.kernel_cfg is not None:
        doc["bandwidth"] = model.kernel_cfg.bandwidth
        doc["anchors"] = model.kernel_cfg.anchors.tolist()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> HashModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"corrupt model {path}: {exc}") from None
    try:
        if doc["version"] != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {doc['version']}")
        mode = doc["feature_mode"]
        kcfg = None
        if mode == "kernel":
            kcfg = KernelConfig(np.array(doc["anchors"], dtype=np.float64), doc["bandwidth"])
        functions = [
            LinearHash(np.array(fn["w"], dtype=np.float64), float(fn["b"]), bool(fn.get("constant", False)))
            for fn in doc["functions"]
        ]
        model = HashModel(functions, mode, int(doc["d"]), kcfg)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model {path}: {exc}") from None
    if model.m != doc["m"]:
        raise ModelFormatError(f"corrupt model {path}: m={doc['m']} but {model.m} functions")
    return model
