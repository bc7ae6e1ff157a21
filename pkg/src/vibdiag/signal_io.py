"""Loading, validating, segmenting and framing vibration recordings.

Two on-disk signal formats are supported:

* CSV: one real per line in decimal notation, optionally preceded by
  header lines starting with ``#``.
* VSIG binary: ``b"VSIG"``, version byte ``0x01``, little-endian ``u32``
  sample count, then little-endian ``float32`` samples.

A manifest is a YAML document with an ``entries`` list; each entry has
exactly the keys ``path``, ``label``, ``rpm`` and ``sample_rate_hz``.
Relative paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .errors import (
    EmptySignal,
    InvalidParameter,
    MalformedRecord,
    MissingFile,
    SignalTooShort,
    TooFewSamples,
)

VSIG_MAGIC = b"VSIG"
VSIG_VERSION = 1
_VSIG_HEADER = struct.Struct("<4sBI")

DEFAULT_RPM = 1797.0
DEFAULT_SAMPLE_RATE_HZ = 12000.0


class FaultClass(enum.IntEnum):
    """Bearing condition. The ordinal fixes confusion-matrix order."""

    NORMAL = 0
    INNER_RACE = 1
    OUTER_RACE = 2
    BALL = 3

    @property
    def slug(self) -> str:
        """Spelling used in manifests and feature tables."""
        return _SLUGS[self]

    @property
    def display(self) -> str:
        return _DISPLAY[self]

    @classmethod
    def parse(cls, text) -> "FaultClass":
        if isinstance(text, FaultClass):
            return text
        key = str(text).strip().lower()
        for fc, slug in _SLUGS.items():
            if key in (slug, fc.name.lower(), _DISPLAY[fc].lower()):
                return fc
        raise MalformedRecord(f"unknown fault label {text!r}")


_SLUGS = {
    FaultClass.NORMAL: "normal",
    FaultClass.INNER_RACE: "inner",
    FaultClass.OUTER_RACE: "outer",
    FaultClass.BALL: "ball",
}
_DISPLAY = {
    FaultClass.NORMAL: "Normal",
    FaultClass.INNER_RACE: "Inner",
    FaultClass.OUTER_RACE: "Outer",
    FaultClass.BALL: "Ball",
}


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).ravel()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class VibrationSignal:
    samples: np.ndarray
    sample_rate_hz: float
    shaft_speed_rpm: float
    label: Optional[FaultClass] = None
    source_id: str = ""

    def __post_init__(self):
        samples = _frozen_array(self.samples)
        if samples.size == 0:
            raise EmptySignal(f"signal {self.source_id!r} has no samples")
        if not np.all(np.isfinite(samples)):
            raise MalformedRecord(f"signal {self.source_id!r} has non-finite samples")
        if not self.sample_rate_hz > 0:
            raise InvalidParameter("sample_rate_hz must be positive")
        if not self.shaft_speed_rpm > 0:
            raise InvalidParameter("shaft_speed_rpm must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def shaft_frequency_hz(self) -> float:
        return self.shaft_speed_rpm / 60.0


@dataclass(frozen=True)
class Segment:
    samples: np.ndarray
    parent_source_id: str
    index: int
    label: Optional[FaultClass] = None
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    shaft_speed_rpm: float = DEFAULT_RPM

    def __post_init__(self):
        samples = _frozen_array(self.samples)
        if not np.all(np.isfinite(samples)):
            raise MalformedRecord("segment has non-finite samples")
        if self.index < 0:
            raise InvalidParameter("segment index must be nonnegative")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Frame:
    samples: np.ndarray
    frame_index: int

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples))

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: FaultClass
    shaft_speed_rpm: float = DEFAULT_RPM
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def to_dict(self) -> dict:
        return {
            "path": str(self.path),
            "label": self.label.slug,
            "rpm": float(self.shaft_speed_rpm),
            "sample_rate_hz": float(self.sample_rate_hz),
        }


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple = field(default_factory=tuple)
    root: Path = Path(".")

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise MalformedRecord("manifest paths must be distinct")
        object.__setattr__(self, "entries", tuple(self.entries))

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p


_MANIFEST_KEYS = ("path", "label", "rpm", "sample_rate_hz")


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise MalformedRecord(f"manifest {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise MalformedRecord(f"manifest {path} needs an 'entries' list")
    entries = []
    for i, raw in enumerate(doc["entries"]):
        if not isinstance(raw, dict) or any(k not in raw for k in _MANIFEST_KEYS):
            raise MalformedRecord(f"manifest entry {i} must have keys {_MANIFEST_KEYS}")
        try:
            entries.append(
                ManifestEntry(
                    path=str(raw["path"]),
                    label=FaultClass.parse(raw["label"]),
                    shaft_speed_rpm=float(raw["rpm"]),
                    sample_rate_hz=float(raw["sample_rate_hz"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise MalformedRecord(f"manifest entry {i}: {exc}") from exc
    return DatasetManifest(entries=tuple(entries), root=path.parent)


def write_manifest(manifest: DatasetManifest, path) -> None:
    doc = {"entries": [e.to_dict() for e in manifest.entries]}
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


# ---------------------------------------------------------------------------
# signal files


def _parse_csv(path: Path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            token = line.strip()
            if not token or token.startswith("#"):
                continue
            try:
                values.append(float(token))
            except ValueError:
                raise MalformedRecord(f"{path}:{lineno}: not a number: {token!r}") from None
    return np.asarray(values, dtype=np.float64)


def _parse_vsig(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < _VSIG_HEADER.size:
        raise MalformedRecord(f"{path}: truncated VSIG header")
    magic, version, count = _VSIG_HEADER.unpack_from(raw)
    if magic != VSIG_MAGIC:
        raise MalformedRecord(f"{path}: bad magic {magic!r}")
    if version != VSIG_VERSION:
        raise MalformedRecord(f"{path}: unsupported VSIG version {version}")
    body = raw[_VSIG_HEADER.size:]
    if len(body) != 4 * count:
        raise MalformedRecord(f"{path}: expected {count} samples, found {len(body) / 4:g}")
    return np.frombuffer(body, dtype="<f4").astype(np.float64)


def read_samples(path) -> np.ndarray:
    """Parse a signal file into float64 samples (format sniffed from magic bytes)."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"signal file not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(4)
    samples = _parse_vsig(path) if head == VSIG_MAGIC else _parse_csv(path)
    if samples.size == 0:
        raise EmptySignal(f"{path}: no samples")
    return samples


def load_signal(path, meta: ManifestEntry, source_id: Optional[str] = None) -> VibrationSignal:
    samples = read_samples(path)
    return VibrationSignal(
        samples=samples,
        sample_rate_hz=meta.sample_rate_hz,
        shaft_speed_rpm=meta.shaft_speed_rpm,
        label=meta.label,
        source_id=source_id if source_id is not None else str(meta.path),
    )


def save_vsig(samples: Sequence[float], path) -> None:
    data = np.asarray(samples, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_VSIG_HEADER.pack(VSIG_MAGIC, VSIG_VERSION, data.size))
        fh.write(data.tobytes())


def save_csv(samples: Sequence[float], path, header: Optional[str] = None) -> None:
    lines = [f"# {header}"] if header else []
    lines.extend(format(float(v), ".9g") for v in np.asarray(samples).ravel())
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# segmentation


def segment_length(sample_rate_hz: float, shaft_speed_rpm: float, revolutions: float = 5) -> int:
    """Samples spanning ``revolutions`` shaft turns, rounded half-up."""
    if revolutions <= 0:
        raise InvalidParameter("revolutions must be positive")
    exact = revolutions * 60.0 / shaft_speed_rpm * sample_rate_hz
    return int(np.floor(exact + 0.5))


def segment(signal: VibrationSignal, revolutions: float = 5) -> list:
    seg_len = segment_length(signal.sample_rate_hz, signal.shaft_speed_rpm, revolutions)
    if seg_len < 1 or len(signal) < seg_len:
        raise SignalTooShort(
            f"{signal.source_id!r}: {len(signal)} samples, one segment needs {seg_len}"
        )
    n_seg = len(signal) // seg_len
    return [
        Segment(
            samples=signal.samples[i * seg_len:(i + 1) * seg_len],
            parent_source_id=signal.source_id,
            index=i,
            label=signal.label,
            sample_rate_hz=signal.sample_rate_hz,
            shaft_speed_rpm=signal.shaft_speed_rpm,
        )
        for i in range(n_seg)
    ]


def frame(seg, n_frames: int = 14) -> list:
    """Split into ``n_frames`` contiguous frames; leading frames absorb the remainder."""
    samples = seg.samples if hasattr(seg, "samples") else np.asarray(seg, dtype=np.float64)
    if n_frames < 1:
        raise InvalidParameter("n_frames must be positive")
    if samples.size < n_frames:
        raise TooFewSamples(f"{samples.size} samples cannot fill {n_frames} frames")
    return [Frame(samples=part, frame_index=i) for i, part in enumerate(np.array_split(samples, n_frames))]


# ---------------------------------------------------------------------------
# synthetic recordings


@dataclass(frozen=True)
class ImpulseProfile:
    rate_ratio: float      # impulses per shaft revolution
    amplitude: float       # in units of the noise sigma
    carrier_hz: float      # ringing frequency of each impulse


# Approximate defect-frequency ratios; amplitudes and carriers chosen only for separability.
SYNTHETIC_PROFILES = {
    FaultClass.INNER_RACE: ImpulseProfile(rate_ratio=3.58, amplitude=10.0, carrier_hz=5200.0),
    FaultClass.OUTER_RACE: ImpulseProfile(rate_ratio=5.42, amplitude=10.0, carrier_hz=3300.0),
    FaultClass.BALL: ImpulseProfile(rate_ratio=4.71, amplitude=10.0, carrier_hz=900.0),
}


def generate_synthetic(
    fault: FaultClass,
    duration_s: float,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    rpm: float = DEFAULT_RPM,
    seed: int = 0,
    noise_sigma: float = 0.05,
    shaft_amplitude: float = 0.1,
    decay_s: float = 2e-3,
) -> VibrationSignal:
    """Deterministic synthetic bearing recording.

    Normal is Gaussian noise plus a sinusoid at shaft frequency. Each fault
    adds a train of exponentially decaying ringing impulses at a
    class-specific repetition rate (see ``SYNTHETIC_PROFILES``), with a
    little timing jitter and amplitude scatter.

    Samples are rounded to float32 precision so that caching through the
    VSIG format is lossless.
    """
    fault = FaultClass.parse(fault)
    if not (duration_s > 0 and sample_rate_hz > 0 and rpm > 0):
        raise InvalidParameter("duration_s, sample_rate_hz and rpm must all be positive")
    n = int(round(duration_s * sample_rate_hz))
    if n < 1:
        raise InvalidParameter("duration too short for one sample")
    rng = np.random.default_rng([int(seed), int(fault)])
    t = np.arange(n) / sample_rate_hz
    f_shaft = rpm / 60.0
    x = noise_sigma * rng.standard_normal(n)
    x += shaft_amplitude * np.sin(2 * np.pi * f_shaft * t + rng.uniform(0, 2 * np.pi))

    profile = SYNTHETIC_PROFILES.get(fault)
    if profile is not None:
        period = 1.0 / (profile.rate_ratio * f_shaft)
        onsets = np.arange(rng.uniform(0, period), duration_s, period)
        onsets = onsets + rng.normal(0.0, 0.01 * period, onsets.size)
        amps = profile.amplitude * noise_sigma * rng.uniform(0.8, 1.2, onsets.size)
        ring = int(np.ceil(8 * decay_s * sample_rate_hz))
        tau = np.arange(ring) / sample_rate_hz
        for onset, amp in zip(onsets, amps):
            start = int(np.ceil(onset * sample_rate_hz))
            if start < 0 or start >= n:
                continue
            stop = min(n, start + ring)
            local = tau[: stop - start] + (start / sample_rate_hz - onset)
            x[start:stop] += amp * np.exp(-local / decay_s) * np.sin(2 * np.pi * profile.carrier_hz * local)

    x = x.astype(np.float32).astype(np.float64)
    return VibrationSignal(
        samples=x,
        sample_rate_hz=float(sample_rate_hz),
        shaft_speed_rpm=float(rpm),
        label=fault,
        source_id=f"synthetic-{fault.slug}-{seed}",
    )


def synthetic_benchmark(per_class: int = 200, seed: int = 7, revolutions: float = 5) -> list:
    """The first ``per_class`` segments of one synthetic recording per class."""
    seg_len = segment_length(DEFAULT_SAMPLE_RATE_HZ, DEFAULT_RPM, revolutions)
    duration = (per_class * seg_len + 1) / DEFAULT_SAMPLE_RATE_HZ
    out = []
    for fc in FaultClass:
        out.extend(segment(generate_synthetic(fc, duration, seed=seed), revolutions)[:per_class])
    return out
