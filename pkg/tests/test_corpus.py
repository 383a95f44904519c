import numpy as np
import numpy.testing as npt
import pytest

from sensefuse.corpus import (
    Sample,
    SyntheticTaskSpec,
    generate_corpus,
    load_corpus,
    read_container,
    write_container,
    write_corpus,
)
from sensefuse.ctc import ctc_feasible
from sensefuse.errors import ConfigError, DataFormatError

SMALL = SyntheticTaskSpec(
    vocab_size=5,
    feature_dim=8,
    symbol_duration=(6, 10),
    symbols_per_seq=(1, 4),
    train_samples=40,
    test_samples=12,
    seed=3,
)


def test_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticTaskSpec(vocab_size=1).validate()
    with pytest.raises(ConfigError):
        SyntheticTaskSpec(symbol_duration=(2, 10)).validate()
    with pytest.raises(ConfigError):
        SyntheticTaskSpec(symbols_per_seq=(0, 3)).validate()


def test_generation_deterministic():
    a = generate_corpus(SMALL)
    b = generate_corpus(SMALL)
    for sa, sb in zip(a.train + a.test, b.train + b.test):
        npt.assert_array_equal(sa.features, sb.features)
        assert sa.labels == sb.labels
        assert sa.sample_id == sb.sample_id


def test_seed_changes_corpus():
    a = generate_corpus(SMALL)
    b = generate_corpus(
        SyntheticTaskSpec(**{**SMALL.__dict__, "seed": 4})
    )
    assert any(
        not np.array_equal(sa.features, sb.features)
        for sa, sb in zip(a.train, b.train)
    )


def test_normalization_per_dimension():
    corpus = generate_corpus(SMALL)
    frames = np.concatenate([s.features for s in corpus.train + corpus.test])
    npt.assert_allclose(frames.mean(axis=0), 0.0, atol=1e-6)
    npt.assert_allclose(frames.std(axis=0), 1.0, atol=1e-6)


def test_labels_and_durations_in_range():
    corpus = generate_corpus(SMALL)
    for s in corpus.train + corpus.test:
        assert 1 <= len(s.labels) <= 4
        assert all(1 <= c <= 5 for c in s.labels)
        T = s.features.shape[0]
        assert 6 * len(s.labels) <= T <= 10 * len(s.labels)
        assert ctc_feasible(T, s.labels)
        assert s.features.dtype == np.float32


def test_mean_sequence_length_matches_default_shape():
    # default spec: 1..7 symbols of 30..57 frames -> mean T around 175
    spec = SyntheticTaskSpec(train_samples=400, test_samples=1, seed=0)
    corpus = generate_corpus(spec)
    mean_t = np.mean([s.features.shape[0] for s in corpus.train])
    assert 150 < mean_t < 200


def test_train_test_streams_disjoint():
    corpus = generate_corpus(SMALL)
    train_ids = {s.sample_id for s in corpus.train}
    test_ids = {s.sample_id for s in corpus.test}
    assert not train_ids & test_ids
    # identical index, different split: different draws
    assert not np.array_equal(
        corpus.train[0].features[:6], corpus.test[0].features[:6]
    )


# -- container format ---------------------------------------------------------------


def test_container_roundtrip(tmp_path):
    corpus = generate_corpus(SMALL)
    sample = corpus.train[0]
    path = tmp_path / "sample.sfc"
    write_container(path, sample)
    back = read_container(path)
    npt.assert_array_equal(back.features, sample.features)
    assert back.labels == sample.labels
    assert back.sample_id == sample.sample_id


def test_container_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.sfc"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(DataFormatError):
        read_container(path)


def test_container_rejects_truncated_payload(tmp_path):
    corpus = generate_corpus(SMALL)
    path = tmp_path / "trunc.sfc"
    write_container(path, corpus.train[0])
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(DataFormatError):
        read_container(path)


def test_container_rejects_version_mismatch(tmp_path):
    import json
    import struct

    from sensefuse.corpus import MAGIC

    header = json.dumps(
        {"version": 99, "t": 1, "d": 1, "sample_id": "x", "labels": [],
         "normalized": True}
    ).encode()
    path = tmp_path / "vers.sfc"
    path.write_bytes(MAGIC + struct.pack("<I", len(header)) + header + b"\x00" * 4)
    with pytest.raises(DataFormatError):
        read_container(path)


def test_container_empty_labels_allowed(tmp_path):
    sample = Sample(
        features=np.zeros((5, 3), np.float32), labels=[], sample_id="empty"
    )
    path = tmp_path / "empty.sfc"
    write_container(path, sample)
    back = read_container(path)
    assert back.labels == []
    assert back.features.shape == (5, 3)


def test_corpus_write_load_roundtrip(tmp_path):
    corpus = generate_corpus(SMALL)
    manifest = write_corpus(corpus, tmp_path / "data")
    again = load_corpus(manifest)
    assert len(again.train) == len(corpus.train)
    assert len(again.test) == len(corpus.test)
    for sa, sb in zip(corpus.train + corpus.test, again.train + again.test):
        npt.assert_array_equal(sa.features, sb.features)
        assert sa.labels == sb.labels
    npt.assert_allclose(again.mean, corpus.mean)


def test_corpus_files_byte_identical_across_runs(tmp_path):
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    write_corpus(generate_corpus(SMALL), a_dir)
    write_corpus(generate_corpus(SMALL), b_dir)
    a_manifest = (a_dir / "manifest.json").read_bytes()
    b_manifest = (b_dir / "manifest.json").read_bytes()
    assert a_manifest == b_manifest
    sample = "train/train_00000.sfc"
    assert (a_dir / sample).read_bytes() == (b_dir / sample).read_bytes()
