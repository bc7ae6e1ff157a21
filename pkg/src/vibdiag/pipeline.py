"""End-to-end diagnosis: feature tables, splitting, training every
classifier, confusion matrices and parameter sweeps."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import enn as enn_mod
from . import gmm as gmm_mod
from . import hmm as hmm_mod
from . import svm as svm_mod
from .cepstral import MfccConfig, mfcc_segment
from .errors import (
    ClassTooSmall,
    FeatureSpecMismatch,
    InvalidParameter,
    MissingClass,
    VibDiagError,
)
from .fractal import kurtosis, mfd
from .signal_io import FaultClass

log = logging.getLogger(__name__)

CLASSIFIERS = ("svm", "hmm", "gmm", "enn")
FEATURE_KINDS = ("mfd", "mfcc", "mfcc+kurtosis", "kurtosis")


@dataclass(frozen=True)
class FeatureSetSpec:
    kind: str = "mfd"
    mfd_k: int = 13
    eps_min: int = 1
    mfcc_l: int = 13
    n_filters: int = 26
    fft_size: int = 256
    n_frames: int = 14

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise InvalidParameter(f"feature kind must be one of {FEATURE_KINDS}, got {self.kind!r}")
        if self.kind == "mfd" and (self.mfd_k < 1 or self.eps_min < 1):
            raise InvalidParameter("MFD size and eps_min must be positive")
        if self.uses_mfcc and not 1 <= self.mfcc_l <= self.n_filters:
            raise InvalidParameter("MFCC count must lie in [1, n_filters]")

    @property
    def uses_mfcc(self) -> bool:
        return self.kind in ("mfcc", "mfcc+kurtosis")

    @property
    def mfcc_config(self) -> MfccConfig:
        return MfccConfig(self.n_frames, self.fft_size, self.n_filters, self.mfcc_l)

    def to_dict(self) -> dict:
        """Only the parameters that affect this kind of feature."""
        if self.kind == "mfd":
            return {"kind": "mfd", "mfd_k": self.mfd_k, "eps_min": self.eps_min}
        if self.kind == "kurtosis":
            return {"kind": "kurtosis"}
        return {"kind": self.kind, "mfcc_l": self.mfcc_l, "n_filters": self.n_filters,
                "fft_size": self.fft_size, "n_frames": self.n_frames}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSetSpec":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def same_features(self, other: "FeatureSetSpec") -> bool:
        return self.to_dict() == other.to_dict()

    @property
    def flat_dim(self) -> int:
        if self.kind == "mfd":
            return self.mfd_k
        if self.kind == "kurtosis":
            return 1
        return self.n_frames * self.mfcc_l + (self.kind == "mfcc+kurtosis")

    @property
    def frame_shape(self) -> tuple:
        """(T, d) of the observation sequence handed to HMMs."""
        if self.kind == "mfd":
            return (self.mfd_k, 1)
        if self.kind == "kurtosis":
            return (1, 1)
        return (self.n_frames, self.mfcc_l + (self.kind == "mfcc+kurtosis"))


def extract_segment(seg, spec: FeatureSetSpec) -> np.ndarray:
    """Flat feature vector of one segment."""
    if spec.kind == "mfd":
        return mfd(seg.samples, spec.mfd_k, spec.eps_min)
    if spec.kind == "kurtosis":
        return np.array([kurtosis(seg.samples)])
    coeffs = mfcc_segment(seg, spec.mfcc_config).ravel()
    if spec.kind == "mfcc+kurtosis":
        coeffs = np.append(coeffs, kurtosis(seg.samples))
    return coeffs


@dataclass(frozen=True)
class FeatureTable:
    labels: np.ndarray          # (n,) int class ordinals
    X: np.ndarray               # (n, flat_dim)
    spec: FeatureSetSpec
    ids: tuple = ()             # (source_id, segment index) per row

    def __len__(self):
        return self.labels.size

    def subset(self, idx) -> "FeatureTable":
        idx = np.asarray(idx, dtype=int)
        ids = tuple(self.ids[i] for i in idx) if self.ids else ()
        return FeatureTable(self.labels[idx], self.X[idx], self.spec, ids)

    def sequences(self) -> np.ndarray:
        """Frame-sequence form, shape (n, T, d)."""
        n = len(self)
        spec = self.spec
        if spec.kind == "mfd":
            return self.X[:, :, None]
        if spec.kind == "kurtosis":
            return self.X[:, None, :]
        F, L = spec.n_frames, spec.mfcc_l
        frames = self.X[:, : F * L].reshape(n, F, L)
        if spec.kind == "mfcc+kurtosis":
            kurt = np.broadcast_to(self.X[:, -1][:, None, None], (n, F, 1))
            frames = np.concatenate([frames, kurt], axis=2)
        return frames

    def derive(self, spec: FeatureSetSpec) -> "FeatureTable":
        """Cheaper re-extraction at a smaller MFD size or MFCC count.

        MFD entries do not depend on the total size and MFCC rows do not
        depend on how many are kept, so both can be sliced from a larger table.
        """
        src = self.spec
        if spec.same_features(src):
            return self
        if spec.kind == src.kind == "mfd" and spec.eps_min == src.eps_min and spec.mfd_k <= src.mfd_k:
            return FeatureTable(self.labels, self.X[:, : spec.mfd_k].copy(), spec, self.ids)
        same_frontend = (spec.n_filters, spec.fft_size, spec.n_frames) == (src.n_filters, src.fft_size, src.n_frames)
        if spec.uses_mfcc and spec.kind == src.kind and same_frontend and spec.mfcc_l <= src.mfcc_l:
            frames = self.X[:, : src.n_frames * src.mfcc_l].reshape(len(self), src.n_frames, src.mfcc_l)
            X = frames[:, :, : spec.mfcc_l].reshape(len(self), -1)
            if spec.kind == "mfcc+kurtosis":
                X = np.hstack([X, self.X[:, -1:]])
            return FeatureTable(self.labels, np.ascontiguousarray(X), spec, self.ids)
        raise FeatureSpecMismatch(f"cannot derive {spec.to_dict()} from {src.to_dict()}")

    def to_csv(self) -> str:
        import json

        buf = io.StringIO()
        buf.write("# " + json.dumps(self.spec.to_dict(), sort_keys=True) + "\n")
        buf.write(",".join(["label"] + [f"f{i}" for i in range(self.X.shape[1])]) + "\n")
        for lab, row in zip(self.labels, self.X):
            buf.write(",".join([FaultClass(int(lab)).slug] + [repr(float(v)) for v in row]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, spec: Optional[FeatureSetSpec] = None) -> "FeatureTable":
        import json

        lines = [ln for ln in text.splitlines() if ln.strip()]
        if lines and lines[0].startswith("#"):
            if spec is None:
                spec = FeatureSetSpec.from_dict(json.loads(lines[0][1:]))
            lines = lines[1:]
        if spec is None:
            raise FeatureSpecMismatch("feature table carries no spec line and none was given")
        if not lines or not lines[0].startswith("label"):
            raise InvalidParameter("feature table needs a 'label,f0,...' header")
        labels, rows = [], []
        for ln in lines[1:]:
            parts = ln.split(",")
            labels.append(int(FaultClass.parse(parts[0])))
            rows.append([float(v) for v in parts[1:]])
        X = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
        if X.shape[1] != spec.flat_dim:
            raise FeatureSpecMismatch(f"table has {X.shape[1]} columns, spec implies {spec.flat_dim}")
        return cls(np.array(labels, dtype=int), X, spec)


def extract_features(segments: Sequence, spec: FeatureSetSpec) -> FeatureTable:
    """Feature table for labelled segments; failing segments are logged and skipped."""
    labels, rows, ids = [], [], []
    for seg in segments:
        try:
            vec = extract_segment(seg, spec)
        except VibDiagError as exc:
            log.warning("skipping segment %s#%d: %s: %s", seg.parent_source_id, seg.index,
                        type(exc).__name__, exc)
            continue
        labels.append(int(seg.label))
        rows.append(vec)
        ids.append((seg.parent_source_id, seg.index))
    X = np.vstack(rows) if rows else np.zeros((0, spec.flat_dim))
    return FeatureTable(np.array(labels, dtype=int), X, spec, tuple(ids))


# ---------------------------------------------------------------------------
# splitting


def split_indices(labels, train_fraction: float = 0.7, seed: int = 0) -> tuple:
    """Stratified, seeded, disjoint split returning sorted (train, test) indices."""
    if not 0.0 < train_fraction < 1.0:
        raise InvalidParameter("train_fraction must lie strictly between 0 and 1")
    labels = np.asarray([int(c) for c in labels])
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise ClassTooSmall(f"class {FaultClass(c).display} has {idx.size} segment(s); need 2")
        idx = rng.permutation(idx)
        n_train = min(max(int(np.floor(train_fraction * idx.size + 0.5)), 1), idx.size - 1)
        train.extend(idx[:n_train].tolist())
        test.extend(idx[n_train:].tolist())
    return np.array(sorted(train), dtype=int), np.array(sorted(test), dtype=int)


def split(data, train_fraction: float = 0.7, seed: int = 0) -> tuple:
    """Split a FeatureTable or a list of labelled segments."""
    if isinstance(data, FeatureTable):
        tr, te = split_indices(data.labels, train_fraction, seed)
        return data.subset(tr), data.subset(te)
    tr, te = split_indices([s.label for s in data], train_fraction, seed)
    return [data[i] for i in tr], [data[i] for i in te]


# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        X = X.reshape(-1, X.shape[-1])
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > 1e-12, std, 1.0))

    def __call__(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


def gmm_view_is_sequence(spec: FeatureSetSpec) -> bool:
    """MFCC variants are scored frame by frame; MFD and kurtosis as one vector per segment."""
    return spec.uses_mfcc


# ---------------------------------------------------------------------------
# training and evaluation


@dataclass(frozen=True)
class TrainConfig:
    classifiers: tuple = CLASSIFIERS
    seed: int = 0
    svm_kernel: svm_mod.KernelSpec = svm_mod.KernelSpec.polynomial(5)
    svm_C: float = 10.0
    svm_tol: float = 1e-3
    svm_max_passes: int = 100
    gmm_M: int = 3
    gmm_max_iters: int = 200
    gmm_tol: float = 1e-6
    hmm_N: int = 2
    hmm_M: int = 10
    hmm_max_iters: int = 200
    hmm_tol: float = 1e-4
    enn_eta: float = enn_mod.DEFAULT_ETA
    enn_epochs: int = 50

    def __post_init__(self):
        bad = [c for c in self.classifiers if c not in CLASSIFIERS]
        if bad or not self.classifiers:
            raise InvalidParameter(f"classifiers must be a non-empty subset of {CLASSIFIERS}")
        object.__setattr__(self, "classifiers", tuple(c for c in CLASSIFIERS if c in self.classifiers))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["classifiers"] = list(self.classifiers)
        d["svm_kernel"] = self.svm_kernel.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "svm_kernel" in d and isinstance(d["svm_kernel"], dict):
            d["svm_kernel"] = svm_mod.KernelSpec(**d["svm_kernel"])
        if "classifiers" in d:
            d["classifiers"] = tuple(d["classifiers"])
        return cls(**d)


BUNDLE_VERSION = 1


@dataclass(frozen=True)
class ModelBundle:
    feature_spec: FeatureSetSpec
    flat_scaler: Standardizer
    frame_scaler: Standardizer
    classifiers: dict           # name -> trained model
    config: TrainConfig = TrainConfig()
    created_from: str = ""
    version: int = BUNDLE_VERSION

    def __post_init__(self):
        if self.flat_scaler.mean.size != self.feature_spec.flat_dim:
            raise FeatureSpecMismatch("flat standardization does not match the feature dimension")
        if self.frame_scaler.mean.size != self.feature_spec.frame_shape[1]:
            raise FeatureSpecMismatch("frame standardization does not match the frame dimension")


def svm_inputs(flat: np.ndarray) -> np.ndarray:
    """Standardized vectors shrunk by sqrt(dim) so polynomial kernels stay O(1)."""
    return flat / np.sqrt(flat.shape[-1])


def _by_class(labels, items) -> dict:
    return {FaultClass(c): items[labels == c] for c in sorted(set(labels.tolist()))}


def train_all(train: FeatureTable, config: TrainConfig = TrainConfig(), created_from: str = "") -> ModelBundle:
    """Fit standardization on ``train`` only, then every requested classifier."""
    missing = [c.display for c in FaultClass if not np.any(train.labels == c)]
    if missing:
        raise MissingClass(f"training data lacks {', '.join(missing)}")
    spec = train.spec
    flat_scaler = Standardizer.fit(train.X)
    frame_scaler = Standardizer.fit(train.sequences())
    flat = flat_scaler(train.X)
    seqs = frame_scaler(train.sequences())
    y = train.labels
    models = {}
    for name in config.classifiers:
        log.info("training %s on %d segments (%s)", name, len(train), spec.kind)
        if name == "svm":
            models[name] = svm_mod.train_multiclass(
                svm_inputs(flat), y, config.svm_kernel, config.svm_C, config.svm_tol, config.svm_max_passes)
        elif name == "gmm":
            if gmm_view_is_sequence(spec):
                data = {c: v.reshape(-1, v.shape[-1]) for c, v in _by_class(y, seqs).items()}
            else:
                data = _by_class(y, flat)
            models[name] = gmm_mod.train_classifier(
                data, config.gmm_M, config.seed, config.gmm_max_iters, config.gmm_tol)
        elif name == "hmm":
            models[name] = {
                c: hmm_mod.train_baum_welch(list(v), config.hmm_N, config.hmm_M, config.seed,
                                            config.hmm_max_iters, config.hmm_tol)
                for c, v in _by_class(y, seqs).items()
            }
        elif name == "enn":
            models[name], _ = enn_mod.fit(flat, y, config.enn_eta, config.enn_epochs)
    return ModelBundle(spec, flat_scaler, frame_scaler, models, config, created_from)


def predict(bundle: ModelBundle, table: FeatureTable) -> dict:
    """Per classifier: list of (predicted class, per-class scores) per row."""
    if not table.spec.same_features(bundle.feature_spec):
        raise FeatureSpecMismatch(
            f"table features {table.spec.to_dict()} differ from bundle features {bundle.feature_spec.to_dict()}")
    flat = bundle.flat_scaler(table.X)
    seqs = bundle.frame_scaler(table.sequences())
    out = {}
    for name, model in bundle.classifiers.items():
        rows = []
        for i in range(len(table)):
            if name == "svm":
                cls_, votes, _ = svm_mod.vote_multiclass(model, svm_inputs(flat[i]))
                rows.append((FaultClass(cls_), {c: float(v) for c, v in votes.items()}))
            elif name == "gmm":
                obs = seqs[i] if gmm_view_is_sequence(table.spec) else flat[i][None, :]
                rows.append(gmm_mod.classify(model, obs))
            elif name == "hmm":
                rows.append(hmm_mod.classify(model, seqs[i]))
            elif name == "enn":
                rows.append(enn_mod.classify(model, flat[i]))
        out[name] = rows
    return out


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray          # (4, 4) rows true, columns predicted

    @classmethod
    def from_labels(cls, true, pred) -> "ConfusionMatrix":
        counts = np.zeros((len(FaultClass), len(FaultClass)), dtype=np.int64)
        for t, p in zip(true, pred):
            counts[int(t), int(p)] += 1
        return cls(counts)

    @property
    def percentages(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = 100.0 * self.counts / rows
        return np.where(rows > 0, pct, 0.0)

    @property
    def recalls(self) -> np.ndarray:
        return np.diag(self.percentages)

    @property
    def accuracy(self) -> float:
        """Macro-averaged recall in percent over classes present in the test set."""
        present = self.counts.sum(axis=1) > 0
        return float(self.recalls[present].mean()) if np.any(present) else 0.0

    def to_csv(self) -> str:
        names = [c.display for c in FaultClass]
        lines = ["," + ",".join(names)]
        for name, row in zip(names, self.percentages):
            lines.append(name + "," + ",".join(f"{v:.4f}" for v in row))
        return "\n".join(lines) + "\n"

    def render(self, title: str = "") -> str:
        names = [c.display for c in FaultClass]
        out = [title] if title else []
        out.append(" " * 8 + "".join(f"{n:>8}" for n in names))
        for name, row in zip(names, self.percentages):
            out.append(f"{name:<8}" + "".join(f"{v:8.1f}" for v in row))
        return "\n".join(out)


def evaluate(bundle: ModelBundle, table: FeatureTable) -> dict:
    """Confusion matrix per classifier in the bundle."""
    preds = predict(bundle, table)
    return {
        name: ConfusionMatrix.from_labels(table.labels, [p for p, _ in rows])
        for name, rows in preds.items()
    }


# ---------------------------------------------------------------------------
# sweeps

SWEEP_RANGES = {"mfd_k": range(2, 21), "mfcc_l": range(9, 17)}


@dataclass(frozen=True)
class SweepResult:
    parameter_name: str
    values: tuple
    accuracy: dict = field(default_factory=dict)     # classifier -> tuple of percent per value

    def to_csv(self) -> str:
        names = [c for c in CLASSIFIERS if c in self.accuracy]
        lines = [",".join(["param_value"] + names)]
        for i, v in enumerate(self.values):
            lines.append(",".join([str(v)] + [f"{self.accuracy[n][i]:.4f}" for n in names]))
        return "\n".join(lines) + "\n"

    def spread(self, classifier: str) -> float:
        acc = self.accuracy[classifier]
        return float(max(acc) - min(acc))

    def best_value(self, classifier: str):
        acc = self.accuracy[classifier]
        return self.values[int(np.argmax(acc))]


def sweep(
    parameter: str,
    segments: Sequence,
    config: TrainConfig = TrainConfig(),
    base_spec: Optional[FeatureSetSpec] = None,
    values=None,
    train_fraction: float = 0.7,
    split_seed: int = 0,
) -> SweepResult:
    """Train and evaluate every classifier at each parameter value.

    The split and all seeds stay fixed across values. ``parameter`` is
    ``"mfd_k"`` (MFD size) or ``"mfcc_l"`` (MFCC count).
    """
    if parameter not in SWEEP_RANGES:
        raise InvalidParameter(f"sweep parameter must be one of {tuple(SWEEP_RANGES)}")
    values = tuple(SWEEP_RANGES[parameter] if values is None else values)
    if not values or min(values) < 1:
        raise InvalidParameter("sweep values must be positive")
    if base_spec is None:
        base_spec = FeatureSetSpec("mfd" if parameter == "mfd_k" else "mfcc")
    if (parameter == "mfd_k") != (base_spec.kind == "mfd"):
        raise InvalidParameter(f"{parameter} sweep does not apply to {base_spec.kind} features")
    train_segs, test_segs = split(list(segments), train_fraction, split_seed)
    top = replace(base_spec, **{parameter: max(values)})
    train_full = extract_features(train_segs, top)
    test_full = extract_features(test_segs, top)
    acc = {name: [] for name in config.classifiers}
    for v in values:
        spec = replace(base_spec, **{parameter: v})
        bundle = train_all(train_full.derive(spec), config)
        for name, cm in evaluate(bundle, test_full.derive(spec)).items():
            acc[name].append(cm.accuracy)
        log.info("%s=%s: %s", parameter, v, {n: round(a[-1], 2) for n, a in acc.items()})
    return SweepResult(parameter, values, {n: tuple(a) for n, a in acc.items()})
