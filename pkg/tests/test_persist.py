import struct
import zlib

import numpy as np
import pytest

from patchcatch.errors import ChecksumError, FormatError, VersionError
from patchcatch.persist import MAGIC, ModelBundle, decode, encode, load_model, save_model
from patchcatch.pipeline import SecurityPatchClassifier
from patchcatch.synth import generate


@pytest.fixture(scope="module")
def fitted():
    data = generate(8, 80, 0.1, seed=11)
    clf = SecurityPatchClassifier(iterations=4, epochs=80, seed=11).fit(data.labeled + data.unlabeled)
    return clf, data


@pytest.fixture
def saved(fitted, tmp_path):
    path = tmp_path / "model.pch"
    save_model(ModelBundle.from_classifier(fitted[0]), path)
    return path


def test_round_trip_equal(fitted, saved):
    bundle = ModelBundle.from_classifier(fitted[0])
    loaded = load_model(saved)
    assert loaded == bundle
    assert loaded.schema.n_features == 49
    assert loaded.schema == fitted[0].extractor_.schema_
    assert loaded.train_log_digest == fitted[0].train_log_.digest()


def test_loaded_model_predicts_identically(fitted, saved):
    clf, data = fitted
    restored = load_model(saved).to_classifier()
    assert np.array_equal(restored.predict_proba(data.unlabeled), clf.predict_proba(data.unlabeled))


def test_saves_are_byte_identical(fitted, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    save_model(ModelBundle.from_classifier(fitted[0]), a)
    save_model(load_model(a), b)
    assert a.read_bytes() == b.read_bytes()


def test_layout(saved):
    data = saved.read_bytes()
    magic, version, length = struct.unpack(">4sBI", data[:9])
    assert (magic, version) == (MAGIC, 1)
    body = data[9:9 + length]
    assert struct.unpack(">I", data[9 + length:])[0] == zlib.crc32(body)
    # floats are 17-significant-digit strings
    assert b'"bias":"' in body


def test_truncated_file(saved):
    data = saved.read_bytes()
    with pytest.raises(ChecksumError):
        decode(data[: len(data) // 2])


def test_flipped_bit(saved):
    data = bytearray(saved.read_bytes())
    data[20] ^= 0x01
    with pytest.raises(ChecksumError):
        decode(bytes(data))


def test_wrong_magic(saved):
    with pytest.raises(FormatError):
        decode(b"NOPE" + saved.read_bytes()[4:])


def test_version_mismatch_names_both(saved):
    data = bytearray(saved.read_bytes())
    data[4] = 2
    with pytest.raises(VersionError) as info:
        decode(bytes(data))
    assert "2" in str(info.value) and "1" in str(info.value)


def test_invariants_rechecked_on_load(fitted):
    bundle = ModelBundle.from_classifier(fitted[0])
    bad = ModelBundle(**{**bundle.__dict__, "nb_log_likelihood": bundle.nb_log_likelihood + 0.1})
    with pytest.raises(FormatError):
        decode(encode(bad))
    bad = ModelBundle(**{**bundle.__dict__, "lr_coef": bundle.lr_coef[:-1]})
    with pytest.raises(FormatError):
        decode(encode(bad))


def test_loaded_nb_is_normalized(saved):
    bundle = load_model(saved)
    assert np.all(np.abs(np.exp(bundle.nb_log_likelihood).sum(axis=1) - 1) <= 1e-9)


def test_non_finite_refused(fitted):
    bundle = ModelBundle.from_classifier(fitted[0])
    bundle.lr_intercept = float("nan")
    with pytest.raises(ValueError):
        encode(bundle)


def test_failed_save_leaves_no_temp_file(fitted, tmp_path):
    bundle = ModelBundle.from_classifier(fitted[0])
    bundle.lr_intercept = float("inf")
    with pytest.raises(ValueError):
        save_model(bundle, tmp_path / "m.pch")
    assert list(tmp_path.iterdir()) == []
