import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibdiag.errors import (
    EmptySignal,
    InvalidParameter,
    MalformedRecord,
    MissingFile,
    SignalTooShort,
    TooFewSamples,
)
from vibdiag.fractal import kurtosis
from vibdiag.signal_io import (
    DatasetManifest,
    FaultClass,
    ManifestEntry,
    VibrationSignal,
    frame,
    generate_synthetic,
    load_signal,
    read_manifest,
    save_csv,
    save_vsig,
    segment,
    segment_length,
    write_manifest,
)

META = ManifestEntry("x", FaultClass.NORMAL, 1797.0, 12000.0)


def test_fault_class_ordinals_are_fixed():
    assert [int(c) for c in FaultClass] == [0, 1, 2, 3]
    assert [c.slug for c in FaultClass] == ["normal", "inner", "outer", "ball"]
    assert FaultClass.parse("Outer") is FaultClass.OUTER_RACE
    with pytest.raises(MalformedRecord):
        FaultClass.parse("cage")


def test_load_csv(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("# header\n0.1\n-0.2\n0.3")
    sig = load_signal(p, META)
    assert sig.samples.tolist() == [0.1, -0.2, 0.3]
    assert sig.sample_rate_hz == 12000.0 and sig.shaft_speed_rpm == 1797.0
    assert sig.label is FaultClass.NORMAL


def test_load_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(EmptySignal):
        load_signal(empty, META)
    bad = tmp_path / "b.csv"
    bad.write_text("1.0\nabc\n")
    with pytest.raises(MalformedRecord):
        load_signal(bad, META)
    with pytest.raises(MissingFile):
        load_signal(tmp_path / "none.csv", META)
    trunc = tmp_path / "t.vsig"
    trunc.write_bytes(struct.pack("<4sBI", b"VSIG", 1, 10) + b"\0" * 12)
    with pytest.raises(MalformedRecord):
        load_signal(trunc, META)


def test_vsig_round_trip_is_bit_exact(tmp_path):
    x = np.random.default_rng(0).standard_normal(2005).astype(np.float32)
    p = tmp_path / "s.vsig"
    save_vsig(x, p)
    raw = p.read_bytes()
    assert raw[:4] == b"VSIG" and raw[4] == 1 and struct.unpack("<I", raw[5:9])[0] == 2005
    back = load_signal(p, META).samples
    assert back.size == 2005
    assert np.array_equal(back.astype(np.float32).view(np.uint32), x.view(np.uint32))


def test_csv_round_trip_nine_digits(tmp_path):
    x = np.random.default_rng(1).standard_normal(500) * 1e3
    p = tmp_path / "s.csv"
    save_csv(x, p, header="test")
    back = load_signal(p, META).samples
    np.testing.assert_allclose(back, x, rtol=1e-8)


def test_signal_invariants():
    with pytest.raises(EmptySignal):
        VibrationSignal([], 12000.0, 1797.0)
    with pytest.raises(MalformedRecord):
        VibrationSignal([1.0, np.nan], 12000.0, 1797.0)
    with pytest.raises(InvalidParameter):
        VibrationSignal([1.0], 0.0, 1797.0)
    with pytest.raises(InvalidParameter):
        VibrationSignal([1.0], 12000.0, -1.0)


def test_segment_length_examples():
    # 5 * 60 / 1797 * 12000 = 2003.339...
    assert segment_length(12000, 1797) == 2003
    assert segment_length(12000, 1800) == 2000


def test_segment_exact_division():
    sig = VibrationSignal(np.arange(6000.0), 12000.0, 1800.0, FaultClass.BALL, "s")
    segs = segment(sig)
    assert len(segs) == 3
    assert all(len(s) == 2000 and s.label is FaultClass.BALL for s in segs)
    assert [s.index for s in segs] == [0, 1, 2]
    assert np.array_equal(np.concatenate([s.samples for s in segs]), sig.samples)


def test_segment_too_short():
    with pytest.raises(SignalTooShort):
        segment(VibrationSignal(np.ones(1000), 12000.0, 1797.0))


@given(n=st.integers(2003, 9000))
@settings(max_examples=30, deadline=None)
def test_segments_concatenate_to_prefix(n):
    sig = VibrationSignal(np.arange(float(n)), 12000.0, 1797.0)
    segs = segment(sig)
    assert len(segs) == n // 2003
    joined = np.concatenate([s.samples for s in segs])
    assert np.array_equal(joined, sig.samples[: len(segs) * 2003])


def test_frame_examples():
    frames = frame(np.arange(2003.0), 14)
    assert [len(f) for f in frames] == [144] + [143] * 13
    assert [f.frame_index for f in frames] == list(range(14))
    assert [len(f) for f in frame(np.arange(14.0), 14)] == [1] * 14
    with pytest.raises(TooFewSamples):
        frame(np.arange(13.0), 14)


@given(n=st.integers(1, 3000), k=st.integers(1, 40))
@settings(max_examples=60, deadline=None)
def test_frames_cover_segment(n, k):
    if n < k:
        with pytest.raises(TooFewSamples):
            frame(np.arange(float(n)), k)
        return
    frames = frame(np.arange(float(n)), k)
    lengths = [len(f) for f in frames]
    assert len(frames) == k and max(lengths) - min(lengths) <= 1
    assert lengths == sorted(lengths, reverse=True)
    assert np.array_equal(np.concatenate([f.samples for f in frames]), np.arange(float(n)))


def test_synthetic_is_deterministic():
    a = generate_synthetic(FaultClass.INNER_RACE, 1.0, seed=5)
    b = generate_synthetic(FaultClass.INNER_RACE, 1.0, seed=5)
    c = generate_synthetic(FaultClass.INNER_RACE, 1.0, seed=6)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_synthetic_ball_is_more_impulsive_than_normal():
    normal = generate_synthetic(FaultClass.NORMAL, 10.0, seed=0)
    ball = generate_synthetic(FaultClass.BALL, 10.0, seed=0)
    assert kurtosis(ball.samples) > kurtosis(normal.samples)


@pytest.mark.parametrize("kwargs", [{"duration_s": 0.0}, {"duration_s": 1.0, "rpm": 0.0},
                                    {"duration_s": 1.0, "sample_rate_hz": -5.0}])
def test_synthetic_rejects_bad_parameters(kwargs):
    with pytest.raises(InvalidParameter):
        generate_synthetic(FaultClass.NORMAL, **kwargs)


def test_manifest_round_trip(tmp_path):
    m = DatasetManifest((ManifestEntry("a.csv", FaultClass.NORMAL), ManifestEntry("b.vsig", FaultClass.BALL, 1750.0)))
    path = tmp_path / "m.yaml"
    write_manifest(m, path)
    text = path.read_text()
    assert "sample_rate_hz" in text and "rpm" in text and "ball" in text
    back = read_manifest(path)
    assert back.entries == m.entries
    assert back.resolve(back.entries[0]) == tmp_path / "a.csv"


def test_manifest_validation(tmp_path):
    with pytest.raises(MalformedRecord):
        DatasetManifest((ManifestEntry("a", FaultClass.NORMAL), ManifestEntry("a", FaultClass.BALL)))
    p = tmp_path / "m.yaml"
    p.write_text("entries:\n  - {path: a.csv, label: normal, rpm: 1797}\n")
    with pytest.raises(MalformedRecord):
        read_manifest(p)
    p.write_text("entries:\n  - {path: a.csv, label: cage, rpm: 1797, sample_rate_hz: 12000}\n")
    with pytest.raises(MalformedRecord):
        read_manifest(p)
    with pytest.raises(MissingFile):
        read_manifest(tmp_path / "missing.yaml")
