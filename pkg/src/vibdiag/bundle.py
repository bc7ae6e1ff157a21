"""Binary persistence of trained model bundles.

Layout (all integers little-endian)::

    b"VDMB" | u8 version | u32 section count | sections | sha256 digest
    section = u16 name length | name | u32 header length | JSON header
              | u64 payload length | float64 payload

Each JSON header lists the arrays of its payload in order as
``[key, shape]`` pairs; the digest covers every preceding byte.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from . import enn as enn_mod
from . import gmm as gmm_mod
from . import hmm as hmm_mod
from . import svm as svm_mod
from .errors import CorruptBundle, IoFailure, VersionMismatch
from .pipeline import BUNDLE_VERSION, FeatureSetSpec, ModelBundle, Standardizer, TrainConfig
from .signal_io import FaultClass

MAGIC = b"VDMB"
_DIGEST_SIZE = 32


class _Section:
    """Collects JSON metadata and float64 arrays for one section."""

    def __init__(self, name: str, header: dict | None = None):
        self.name = name
        self.header = dict(header or {})
        self.arrays = []

    def add(self, key: str, arr) -> None:
        self.arrays.append((key, np.asarray(arr, dtype=np.float64)))

    def encode(self) -> bytes:
        header = dict(self.header, arrays=[[k, list(a.shape)] for k, a in self.arrays])
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        payload = b"".join(a.astype("<f8").tobytes() for _, a in self.arrays)
        name = self.name.encode()
        return (struct.pack("<H", len(name)) + name + struct.pack("<I", len(head)) + head
                + struct.pack("<Q", len(payload)) + payload)


def _decode_section(buf: bytes, pos: int):
    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise CorruptBundle("bundle truncated inside a section")
        out = buf[pos:pos + n]
        pos += n
        return out

    (name_len,) = struct.unpack("<H", take(2))
    name = take(name_len).decode()
    (head_len,) = struct.unpack("<I", take(4))
    header = json.loads(take(head_len))
    (payload_len,) = struct.unpack("<Q", take(8))
    payload = np.frombuffer(take(payload_len), dtype="<f8")
    arrays, off = {}, 0
    for key, shape in header.pop("arrays"):
        size = int(np.prod(shape, dtype=np.int64))
        if off + size > payload.size:
            raise CorruptBundle(f"section {name!r} payload shorter than declared")
        arrays[key] = payload[off:off + size].reshape(shape).astype(np.float64)
        off += size
    return name, header, arrays, pos


# ---------------------------------------------------------------------------
# per-classifier encoders


def _gmm_arrays(sec: _Section, prefix: str, g: gmm_mod.GaussianMixtureModel) -> dict:
    sec.add(prefix + "w", g.weights)
    sec.add(prefix + "mu", g.means)
    sec.add(prefix + "var", g.variances)
    sec.add(prefix + "ll", np.asarray(g.loglik_history))
    return {"converged": bool(g.converged), "n_iter": int(g.n_iter)}


def _gmm_from(arrays: dict, prefix: str, meta: dict) -> gmm_mod.GaussianMixtureModel:
    return gmm_mod.GaussianMixtureModel(
        arrays[prefix + "w"], arrays[prefix + "mu"], arrays[prefix + "var"],
        converged=meta["converged"], n_iter=meta["n_iter"],
        loglik_history=tuple(arrays[prefix + "ll"].tolist()),
    )


def _encode_svm(model: svm_mod.MulticlassSvmModel) -> _Section:
    sec = _Section("svm", {"classes": [int(c) for c in model.classes], "pairs": []})
    for i, ((a, b), m) in enumerate(sorted(model.pairwise.items())):
        sec.header["pairs"].append({
            "a": int(a), "b": int(b), "kernel": m.kernel.to_dict(), "C": m.C,
            "converged": bool(m.converged), "n_features": int(m.n_features),
        })
        sec.add(f"{i}.sv", m.support_vectors)
        sec.add(f"{i}.alpha", m.alphas)
        sec.add(f"{i}.y", m.labels)
        sec.add(f"{i}.b", [m.bias])
    return sec


def _decode_svm(header, arrays) -> svm_mod.MulticlassSvmModel:
    pairwise = {}
    for i, p in enumerate(header["pairs"]):
        pairwise[(FaultClass(p["a"]), FaultClass(p["b"]))] = svm_mod.BinarySvmModel(
            arrays[f"{i}.sv"], arrays[f"{i}.alpha"], arrays[f"{i}.y"], float(arrays[f"{i}.b"][0]),
            svm_mod.KernelSpec(**p["kernel"]), p["C"], p["converged"], p["n_features"],
        )
    return svm_mod.MulticlassSvmModel(pairwise, tuple(FaultClass(c) for c in header["classes"]))


def _encode_gmm(model: gmm_mod.GmmClassifier) -> _Section:
    sec = _Section("gmm", {"models": []})
    for c in model.classes:
        meta = _gmm_arrays(sec, f"{int(c)}.", model.per_class[c])
        sec.header["models"].append(dict(meta, cls=int(c)))
    return sec


def _decode_gmm(header, arrays) -> gmm_mod.GmmClassifier:
    return gmm_mod.GmmClassifier({
        FaultClass(m["cls"]): _gmm_from(arrays, f"{m['cls']}.", m) for m in header["models"]
    })


def _encode_hmm(bank: dict) -> _Section:
    sec = _Section("hmm", {"models": []})
    for c in sorted(bank):
        m = bank[c]
        p = f"{int(c)}."
        sec.add(p + "pi", m.pi)
        sec.add(p + "A", m.A)
        sec.add(p + "ll", np.asarray(m.loglik_history))
        states = [_gmm_arrays(sec, f"{p}{j}.", g) for j, g in enumerate(m.emissions)]
        sec.header["models"].append({
            "cls": int(c), "converged": bool(m.converged), "n_iter": int(m.n_iter), "states": states,
        })
    return sec


def _decode_hmm(header, arrays) -> dict:
    bank = {}
    for m in header["models"]:
        p = f"{m['cls']}."
        emissions = [_gmm_from(arrays, f"{p}{j}.", s) for j, s in enumerate(m["states"])]
        bank[FaultClass(m["cls"])] = hmm_mod.HmmModel(
            arrays[p + "pi"], arrays[p + "A"], emissions, converged=m["converged"],
            n_iter=m["n_iter"], loglik_history=tuple(arrays[p + "ll"].tolist()),
        )
    return bank


def _encode_enn(model: enn_mod.EnnModel) -> _Section:
    sec = _Section("enn", {"eta": model.eta, "classes": [int(c) for c in model.classes]})
    sec.add("lower", model.w_lower)
    sec.add("upper", model.w_upper)
    sec.add("centers", model.centers)
    return sec


def _decode_enn(header, arrays) -> enn_mod.EnnModel:
    return enn_mod.EnnModel(arrays["lower"], arrays["upper"], arrays["centers"], header["eta"],
                            tuple(FaultClass(c) for c in header["classes"]))


_CODECS = {
    "svm": (_encode_svm, _decode_svm),
    "gmm": (_encode_gmm, _decode_gmm),
    "hmm": (_encode_hmm, _decode_hmm),
    "enn": (_encode_enn, _decode_enn),
}


# ---------------------------------------------------------------------------


def dumps_bundle(bundle: ModelBundle) -> bytes:
    meta = _Section("meta", {
        "feature_spec": bundle.feature_spec.to_dict(),
        "config": bundle.config.to_dict(),
        "created_from": bundle.created_from,
    })
    meta.add("flat_mean", bundle.flat_scaler.mean)
    meta.add("flat_std", bundle.flat_scaler.std)
    meta.add("frame_mean", bundle.frame_scaler.mean)
    meta.add("frame_std", bundle.frame_scaler.std)
    sections = [meta] + [_CODECS[name][0](model) for name, model in bundle.classifiers.items()]
    body = MAGIC + struct.pack("<BI", bundle.version, len(sections))
    body += b"".join(s.encode() for s in sections)
    return body + hashlib.sha256(body).digest()


def loads_bundle(raw: bytes) -> ModelBundle:
    if len(raw) < len(MAGIC) + 5 + _DIGEST_SIZE:
        raise CorruptBundle("bundle too short")
    if raw[:4] != MAGIC:
        raise CorruptBundle(f"bad bundle magic {raw[:4]!r}")
    version, n_sections = struct.unpack_from("<BI", raw, 4)
    if version != BUNDLE_VERSION:
        raise VersionMismatch(f"bundle version {version}, this library reads {BUNDLE_VERSION}")
    body, digest = raw[:-_DIGEST_SIZE], raw[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptBundle("bundle checksum mismatch")
    pos = 9
    sections = []
    try:
        for _ in range(n_sections):
            name, header, arrays, pos = _decode_section(body, pos)
            sections.append((name, header, arrays))
    except (UnicodeDecodeError, json.JSONDecodeError, struct.error, KeyError, ValueError) as exc:
        if isinstance(exc, CorruptBundle):
            raise
        raise CorruptBundle(f"unreadable bundle section: {exc}") from exc
    if pos != len(body) or not sections or sections[0][0] != "meta":
        raise CorruptBundle("bundle layout is inconsistent")
    _, meta, arr = sections[0]
    classifiers = {}
    for name, header, arrays in sections[1:]:
        if name not in _CODECS:
            raise CorruptBundle(f"unknown classifier section {name!r}")
        classifiers[name] = _CODECS[name][1](header, arrays)
    return ModelBundle(
        feature_spec=FeatureSetSpec.from_dict(meta["feature_spec"]),
        flat_scaler=Standardizer(arr["flat_mean"], arr["flat_std"]),
        frame_scaler=Standardizer(arr["frame_mean"], arr["frame_std"]),
        classifiers=classifiers,
        config=TrainConfig.from_dict(meta["config"]),
        created_from=meta["created_from"],
        version=version,
    )


def save_bundle(bundle: ModelBundle, path) -> None:
    try:
        Path(path).write_bytes(dumps_bundle(bundle))
    except OSError as exc:
        raise IoFailure(f"cannot write bundle {path}: {exc}") from exc


def load_bundle(path) -> ModelBundle:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read bundle {path}: {exc}") from exc
    return loads_bundle(raw)
