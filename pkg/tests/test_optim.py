import numpy as np
import numpy.testing as npt
import pytest

from sensefuse.errors import NumericError
from sensefuse.optim import AdamState, adam_step, clip_global_norm


def _params(values):
    return {"w": np.array(values, dtype=np.float64)}


def test_zero_gradient_leaves_params_moves_step():
    params = _params([1.0, -2.0, 3.0])
    state = AdamState.for_params(params)
    adam_step(params, {"w": np.zeros(3)}, state)
    npt.assert_array_equal(params["w"], [1.0, -2.0, 3.0])
    assert state.step == 1


def test_first_step_closed_form():
    # from zero moments, bias correction cancels: delta = -lr*g/(|g| + eps_hat)
    g = np.array([0.3, -1.7, 4.0])
    params = _params([0.0, 0.0, 0.0])
    state = AdamState.for_params(params, lr=1e-3)
    adam_step(params, {"w": g.copy()}, state)
    eps_hat = state.eps / np.sqrt(1.0 - state.beta2)
    expected = -state.lr * g / (np.abs(g) + eps_hat)
    npt.assert_allclose(params["w"], expected, rtol=1e-12)


def test_constant_gradient_asymptotic_step_size():
    g = np.array([0.02, -5.0])
    params = _params([0.0, 0.0])
    state = AdamState.for_params(params, lr=1e-3)
    previous = params["w"].copy()
    for _ in range(1000):
        previous = params["w"].copy()
        adam_step(params, {"w": g.copy()}, state)
    delta = params["w"] - previous
    npt.assert_allclose(np.abs(delta), state.lr, rtol=0.05)
    assert np.all(np.sign(delta) == -np.sign(g))


def test_nan_gradient_aborts_with_tensor_name():
    params = _params([1.0])
    state = AdamState.for_params(params)
    with pytest.raises(NumericError, match="'w'"):
        adam_step(params, {"w": np.array([np.nan])}, state)


def test_update_is_deterministic():
    def run():
        params = _params([0.5, -0.5])
        state = AdamState.for_params(params)
        for i in range(50):
            adam_step(params, {"w": np.array([0.1 * i, -0.2])}, state)
        return params["w"]

    npt.assert_array_equal(run(), run())


def test_clip_global_norm():
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([0.0, 4.0])}
    norm = clip_global_norm(grads, 2.5)
    assert norm == pytest.approx(5.0)
    total = np.sqrt(sum(float(np.sum(g**2)) for g in grads.values()))
    assert total == pytest.approx(2.5)
    # below the threshold, gradients are untouched
    grads = {"a": np.array([0.3, 0.4])}
    clip_global_norm(grads, 2.5)
    npt.assert_array_equal(grads["a"], [0.3, 0.4])
