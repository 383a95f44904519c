import numpy as np
import numpy.testing as npt
import pytest

from sensefuse.corpus import Sample, SyntheticTaskSpec, generate_corpus
from sensefuse.errors import ConfigError
from sensefuse.model import ClassifierSpec, ModelSpec, SensorSpec, build_model
from sensefuse.rng import Prng
from sensefuse.train import TrainConfig, TrainResult, train

TINY_CORPUS = SyntheticTaskSpec(
    vocab_size=4,
    feature_dim=6,
    symbol_duration=(5, 8),
    symbols_per_seq=(1, 3),
    train_samples=24,
    test_samples=6,
    seed=9,
)


def tiny_model(seed=1, arch="attention"):
    if arch == "attention":
        sensors = (SensorSpec(feature_dim=6, attention_units=4),) * 2
    else:
        sensors = (SensorSpec(feature_dim=6),)
    spec = ModelSpec(arch, sensors, ClassifierSpec(hidden=(8,)), num_classes=5)
    return build_model(spec, Prng(seed).split("init"))


def tiny_config(**kw):
    base = dict(max_epochs=3, patience=2, batch_size=8, seed=5)
    base.update(kw)
    return TrainConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(max_epochs=5, patience=5).validate()
    with pytest.raises(ConfigError):
        TrainConfig(val_fraction=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0).validate()


def test_training_is_deterministic():
    corpus = generate_corpus(TINY_CORPUS)

    def run():
        model = tiny_model()
        result = train(model, corpus.train, tiny_config())
        return result, model

    res_a, model_a = run()
    res_b, model_b = run()
    assert [e["train_nll"] for e in res_a.log] == [e["train_nll"] for e in res_b.log]
    assert [e["val_nll"] for e in res_a.log] == [e["val_nll"] for e in res_b.log]
    for k, v in model_a.params().items():
        npt.assert_array_equal(v, model_b.params()[k])
    for k, v in res_a.checkpoint.tensors.items():
        npt.assert_array_equal(v, res_b.checkpoint.tensors[k])


def test_loss_decreases_on_easy_run():
    corpus = generate_corpus(TINY_CORPUS)
    model = tiny_model(arch="single")
    result = train(model, corpus.train, tiny_config(max_epochs=6, patience=5,
                                                    noise=None))
    assert result.log[-1]["train_nll"] < result.log[0]["train_nll"]


def test_patience_zero_stops_at_first_regression():
    corpus = generate_corpus(TINY_CORPUS)
    model = tiny_model()
    result = train(
        model, corpus.train, tiny_config(max_epochs=30, patience=0)
    )
    val = [e["val_nll"] for e in result.log]
    # every epoch before the last improved on the best so far
    best = np.inf
    for nll in val[:-1]:
        assert nll < best
        best = nll
    if len(val) < 30:  # stopped early: the last epoch failed to improve
        assert val[-1] >= best


def test_early_stop_restores_best_epoch():
    corpus = generate_corpus(TINY_CORPUS)
    model = tiny_model()
    result = train(model, corpus.train, tiny_config(max_epochs=8, patience=1))
    best = min(e["val_nll"] for e in result.log)
    assert result.log[result.best_epoch]["val_nll"] == best
    assert result.checkpoint.metrics["best_val_nll"] == pytest.approx(best)


def test_infeasible_samples_excluded_and_counted():
    corpus = generate_corpus(TINY_CORPUS)
    bad = Sample(
        features=np.zeros((2, 6), np.float32), labels=[1, 1, 2], sample_id="bad"
    )
    model = tiny_model()
    result = train(model, corpus.train + [bad], tiny_config())
    assert result.excluded == 1
    assert result.checkpoint.metrics["excluded_infeasible"] == 1


def test_log_records_losses_and_ser():
    corpus = generate_corpus(TINY_CORPUS)
    result = train(tiny_model(), corpus.train, tiny_config())
    for entry in result.log:
        assert set(entry) >= {"epoch", "train_nll", "val_nll"}
    assert "val_ser" in result.log[0]
