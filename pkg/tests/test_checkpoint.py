import numpy as np
import numpy.testing as npt
import pytest

from sensefuse.checkpoint import Checkpoint, graft, load_checkpoint, save_checkpoint
from sensefuse.errors import DataFormatError, GraftError
from sensefuse.model import ClassifierSpec, ModelSpec, SensorSpec, build_model
from sensefuse.rng import Prng


def attention_model(seed=1, d=6, dtype="float32"):
    spec = ModelSpec(
        "attention",
        (SensorSpec(feature_dim=d, attention_units=5),) * 2,
        ClassifierSpec(hidden=(10,)),
        num_classes=4,
        dtype=dtype,
    )
    return build_model(spec, Prng(seed))


def single_model(seed=2, d=6, hidden=(14, 10), dtype="float32"):
    spec = ModelSpec(
        "single",
        (SensorSpec(feature_dim=d),),
        ClassifierSpec(hidden=hidden),
        num_classes=4,
        dtype=dtype,
    )
    return build_model(spec, Prng(seed))


def test_save_load_roundtrip_bitexact(tmp_path):
    model = attention_model()
    ckpt = Checkpoint.from_model(model, metrics={"val": 1.25}, config_hash="abc")
    path = tmp_path / "model.sfck"
    save_checkpoint(path, ckpt)
    back = load_checkpoint(path)
    assert back.spec == model.spec
    assert back.metrics == {"val": 1.25}
    assert back.config_hash == "abc"
    for name, tensor in model.params().items():
        npt.assert_array_equal(back.tensors[name], tensor)

    x = [Prng(9).normal(5 * 2 * 6).reshape(5, 2, 6).astype(np.float32)] * 2
    before = model.forward(x, [5, 5]).logits
    after = back.build_model().forward(x, [5, 5]).logits
    npt.assert_array_equal(before, after)


def test_checkpoint_file_is_deterministic(tmp_path):
    model = attention_model()
    ckpt = Checkpoint.from_model(model)
    a, b = tmp_path / "a.sfck", tmp_path / "b.sfck"
    save_checkpoint(a, ckpt)
    save_checkpoint(b, ckpt)
    assert a.read_bytes() == b.read_bytes()


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.sfck"
    path.write_bytes(b"garbage-not-a-checkpoint")
    with pytest.raises(DataFormatError):
        load_checkpoint(path)


def test_subtree_extraction_by_prefix(tmp_path):
    model = attention_model()
    ckpt = Checkpoint.from_model(model)
    sensor_names = {k for k in ckpt.tensors if k.startswith("sensor.")}
    classifier_names = {k for k in ckpt.tensors if k.startswith("classifier.")}
    assert sensor_names and classifier_names
    assert sensor_names | classifier_names == set(ckpt.tensors)


def test_self_graft_is_identity():
    model = attention_model(dtype="float64")
    ckpt = Checkpoint.from_model(model)
    single = ModelSpec(
        "single",
        (SensorSpec(feature_dim=6),),
        ClassifierSpec(hidden=(10,)),
        num_classes=4,
        dtype="float64",
    )
    body = build_model(single, Prng(5))
    # body shares the donor's classifier weights exactly
    donor_params = model.params()
    for name, tensor in body.params().items():
        tensor[...] = donor_params[name]
    grafted = graft(ckpt, Checkpoint.from_model(body)).build_model()
    x = [Prng(11).normal(6 * 2 * 6).reshape(6, 2, 6)] * 2
    npt.assert_allclose(
        grafted.forward(x, [6, 6]).logits,
        model.forward(x, [6, 6]).logits,
        rtol=1e-6,
    )


def test_graft_fuses_front_and_body(tmp_path):
    front = Checkpoint.from_model(attention_model(seed=3), config_hash="front-hash")
    body = Checkpoint.from_model(
        single_model(seed=4, hidden=(14, 10)), config_hash="body-hash"
    )
    grafted = graft(front, body)
    assert grafted.spec.architecture == "attention"
    assert grafted.spec.classifier.hidden == (14, 10)
    for name, tensor in grafted.tensors.items():
        source = front.tensors if name.startswith("sensor.") else body.tensors
        npt.assert_array_equal(tensor, source[name])
    assert grafted.provenance == {
        "sensor.*": "front-hash",
        "classifier.*": "body-hash",
    }
    path = tmp_path / "graft.sfck"
    save_checkpoint(path, grafted)
    loaded = load_checkpoint(path)
    loaded.build_model()  # shapes must reassemble


def test_graft_dimension_mismatch_names_both_dims():
    front = Checkpoint.from_model(attention_model(d=6))
    body = Checkpoint.from_model(single_model(d=9))
    with pytest.raises(GraftError, match="6.*9"):
        graft(front, body)
