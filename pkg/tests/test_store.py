"""Embedding file format, manifest, and synthetic generator tests."""
from __future__ import annotations

import json

import numpy as np
import pytest

from efftok.store import (
    HEADER_SIZE,
    BadMagicError,
    FrameEmbedding,
    FrameSequence,
    LabeledInterval,
    LabelManifest,
    NonFiniteDataError,
    SyntheticSpec,
    TruncatedPayloadError,
    UnsupportedVersionError,
    generate_synthetic,
    read_sequence,
    write_sequence,
)


def seq_equal(a: FrameSequence, b: FrameSequence) -> bool:
    return (
        a.fps == b.fps
        and np.array_equal(a.patches, b.patches)
        and np.array_equal(a.class_embeddings, b.class_embeddings)
    )


class TestVaebFormat:
    def test_minimal_file_size(self, tmp_path):
        # T=1, N=1, C=1: 24 header bytes + (1 class + 1 patch) * 4 bytes
        seq = FrameSequence("tiny", 1.0, np.zeros((1, 1, 1)), np.zeros((1, 1)))
        path = tmp_path / "tiny.vaeb"
        write_sequence(seq, path)
        assert path.stat().st_size == HEADER_SIZE + 8

    def test_payload_length_arithmetic(self, tmp_path, make_sequence):
        # per frame: (C + N*C) floats = (3 + 12) * 4 bytes; T=2 -> 120
        seq = make_sequence(t=2, n=4, c=3)
        path = tmp_path / "s.vaeb"
        write_sequence(seq, path)
        assert path.stat().st_size - HEADER_SIZE == 2 * (3 + 12) * 4 == 120

    def test_round_trip_exact(self, tmp_path, make_sequence):
        for seed, (t, n, c) in enumerate([(1, 1, 1), (3, 5, 2), (7, 2, 9), (2, 16, 4)]):
            seq = make_sequence(t=t, n=n, c=c, seed=seed, fps=float(np.float32(23.97)))
            path = tmp_path / f"rt{seed}.vaeb"
            write_sequence(seq, path)
            assert seq_equal(read_sequence(path), seq)

    def test_round_trip_property(self, tmp_path, make_rng):
        rng = make_rng(123)
        for i in range(25):
            t, n, c = (int(rng.integers(1, 6)) for _ in range(3))
            patches = (rng.standard_normal((t, n, c)) * 100).astype(np.float32).astype(np.float64)
            cls_emb = (rng.standard_normal((t, c)) * 100).astype(np.float32).astype(np.float64)
            seq = FrameSequence("p", 30.0, patches, cls_emb)
            path = tmp_path / "p.vaeb"
            write_sequence(seq, path)
            assert seq_equal(read_sequence(path), seq)

    def test_write_is_byte_deterministic(self, tmp_path, make_sequence):
        seq = make_sequence(t=3, n=4, c=2, seed=9)
        a, b = tmp_path / "a.vaeb", tmp_path / "b.vaeb"
        write_sequence(seq, a)
        write_sequence(seq, b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic(self, tmp_path, make_sequence):
        path = tmp_path / "bad.vaeb"
        write_sequence(make_sequence(), path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(BadMagicError):
            read_sequence(path)

    def test_unsupported_version(self, tmp_path, make_sequence):
        path = tmp_path / "v9.vaeb"
        write_sequence(make_sequence(), path)
        data = bytearray(path.read_bytes())
        data[4] = 9
        path.write_bytes(bytes(data))
        with pytest.raises(UnsupportedVersionError):
            read_sequence(path)

    def test_truncated_mid_frame(self, tmp_path, make_sequence):
        seq = make_sequence(t=3, n=4, c=2)
        path = tmp_path / "cut.vaeb"
        write_sequence(seq, path)
        full = path.read_bytes()
        cut = HEADER_SIZE + (2 + 8) * 4 + 13  # one frame plus a partial second
        path.write_bytes(full[:cut])
        with pytest.raises(TruncatedPayloadError) as err:
            read_sequence(path)
        expected = 3 * (2 + 8) * 4
        assert str(expected) in str(err.value) and str(cut - HEADER_SIZE) in str(err.value)

    def test_nan_payload_detected(self, tmp_path, make_sequence):
        path = tmp_path / "nan.vaeb"
        write_sequence(make_sequence(t=2, n=2, c=2), path)
        data = bytearray(path.read_bytes())
        data[HEADER_SIZE : HEADER_SIZE + 4] = np.array([np.nan], dtype="<f4").tobytes()
        path.write_bytes(bytes(data))
        with pytest.raises(NonFiniteDataError):
            read_sequence(path)

    def test_write_rejects_invalid_before_touching_disk(self, tmp_path):
        path = tmp_path / "never.vaeb"
        bad_fps = FrameSequence("x", 0.0, np.zeros((1, 1, 1)), np.zeros((1, 1)))
        with pytest.raises(ValueError):
            write_sequence(bad_fps, path)
        nan_seq = FrameSequence("x", 1.0, np.full((1, 1, 1), np.nan), np.zeros((1, 1)))
        with pytest.raises(ValueError):
            write_sequence(nan_seq, path)
        assert not path.exists()

    def test_from_frames_checks_consistency(self):
        frames = [
            FrameEmbedding(np.zeros((2, 3)), np.zeros(3)),
            FrameEmbedding(np.zeros((4, 3)), np.zeros(3)),
        ]
        with pytest.raises(ValueError):
            FrameSequence.from_frames("x", 30.0, frames)


class TestLabelManifest:
    def test_json_round_trip(self, tmp_path):
        manifest = LabelManifest(
            video_id="v",
            num_frames=6,
            frame_labels=[0, 0, 1, 1, 0, 0],
            intervals=[LabeledInterval(2, 3, "Fighting")],
            categories=["Fighting"],
        )
        path = tmp_path / "m.json"
        manifest.save(path)
        assert LabelManifest.load(path) == manifest

    def test_schema_fields_exact(self, tmp_path):
        manifest = LabelManifest("v", 2, [0, 0])
        path = tmp_path / "m.json"
        manifest.save(path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"video_id", "num_frames", "frame_labels", "intervals", "categories"}

    def test_labels_must_match_intervals(self):
        manifest = LabelManifest("v", 4, [0, 1, 0, 0], intervals=[LabeledInterval(2, 2, "X")])
        with pytest.raises(ValueError):
            manifest.validate()

    def test_interval_bounds_checked(self):
        manifest = LabelManifest("v", 3, [0, 0, 1], intervals=[LabeledInterval(2, 3, "X")])
        with pytest.raises(ValueError):
            manifest.validate()

    def test_enclosing_interval(self):
        manifest = LabelManifest(
            "v", 10,
            LabelManifest.labels_from_intervals(10, [LabeledInterval(1, 2, "A"), LabeledInterval(7, 8, "B")]),
            intervals=[LabeledInterval(1, 2, "A"), LabeledInterval(7, 8, "B")],
        )
        assert manifest.enclosing_interval() == (1, 8)
        assert LabelManifest("v", 2, [0, 0]).enclosing_interval() is None


class TestSyntheticGenerator:
    def test_same_seed_bit_identical(self):
        spec = SyntheticSpec(10, 4, 3, anomaly_start=3, anomaly_end=5, anomaly_region=(0, 1), seed=5)
        seq_a, man_a = generate_synthetic(spec)
        seq_b, man_b = generate_synthetic(spec)
        assert np.array_equal(seq_a.patches, seq_b.patches)
        assert np.array_equal(seq_a.class_embeddings, seq_b.class_embeddings)
        assert man_a == man_b

    def test_generator_output_roundtrips_exactly(self, tmp_path):
        spec = SyntheticSpec(5, 3, 2, seed=11)
        seq, _ = generate_synthetic(spec)
        path = tmp_path / "g.vaeb"
        write_sequence(seq, path)
        back = read_sequence(path)
        assert np.array_equal(back.patches, seq.patches)
        assert np.array_equal(back.class_embeddings, seq.class_embeddings)

    def test_manifest_matches_planted_interval(self):
        spec = SyntheticSpec(20, 4, 3, anomaly_start=6, anomaly_end=9, anomaly_region=(0,), seed=2)
        _, manifest = generate_synthetic(spec)
        manifest.validate()
        assert manifest.frame_labels == LabelManifest.labels_from_intervals(20, manifest.intervals)
        assert manifest.enclosing_interval() == (6, 9)

    def test_zero_shift_keeps_distributions_identical(self):
        # labels still mark the interval, but embeddings carry no signal
        spec = SyntheticSpec(100, 6, 8, anomaly_start=40, anomaly_end=59,
                             anomaly_region=(0, 1), mean_shift=0.0, seed=3)
        seq, manifest = generate_synthetic(spec)
        labels = np.array(manifest.frame_labels, dtype=bool)
        assert labels.sum() == 20
        norms = np.linalg.norm(seq.class_embeddings, axis=1)
        assert abs(norms[labels].mean() - norms[~labels].mean()) < 0.3

    def test_mean_shift_separates_class_norms(self):
        spec = SyntheticSpec(100, 6, 8, anomaly_start=40, anomaly_end=59,
                             anomaly_region=(0, 1), mean_shift=2.0, noise_scale=1.0, seed=3)
        seq, manifest = generate_synthetic(spec)
        labels = np.array(manifest.frame_labels, dtype=bool)
        norms = np.linalg.norm(seq.class_embeddings, axis=1)
        assert norms[labels].mean() > norms[~labels].mean()

    def test_shift_confined_to_region_and_span(self):
        base = SyntheticSpec(12, 5, 2, anomaly_start=4, anomaly_end=6,
                             anomaly_region=(1, 3), mean_shift=7.0, seed=9)
        flat = SyntheticSpec(12, 5, 2, anomaly_start=4, anomaly_end=6,
                             anomaly_region=(1, 3), mean_shift=0.0, seed=9)
        shifted, _ = generate_synthetic(base)
        plain, _ = generate_synthetic(flat)
        delta = shifted.patches - plain.patches
        assert np.allclose(delta[4:7][:, [1, 3], :], 7.0, atol=1e-5)
        assert np.all(delta[:4] == 0) and np.all(delta[7:] == 0)
        assert np.all(delta[4:7][:, [0, 2, 4], :] == 0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"num_frames": 0},
            {"anomaly_start": 5, "anomaly_end": 2},
            {"anomaly_start": 0, "anomaly_end": 10},
            {"anomaly_region": (9,)},
            {"noise_scale": 0.0},
            {"mean_shift": -1.0},
        ],
    )
    def test_invalid_specs_rejected(self, kwargs):
        base = dict(num_frames=8, num_patches=4, num_channels=2)
        base.update(kwargs)
        with pytest.raises(ValueError):
            generate_synthetic(SyntheticSpec(**base))
