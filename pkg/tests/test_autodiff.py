import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grnorder import autodiff as ad
from grnorder.errors import ContractError, DegenerateInputError, DimensionError, InvalidMaskError


def param(rng, *shape, name="p"):
    return ad.parameter(rng.normal(size=shape), name)


def assert_grads(f, params, tol=1e-7):
    errors = ad.check_gradients(f, params)
    assert max(errors.values()) < tol, errors


@pytest.mark.parametrize(
    "op",
    [
        lambda a, b: a + b,
        lambda a, b: a - b,
        lambda a, b: a * b,
        lambda a, b: ad.sigmoid(a) * ad.tanh(b),
        lambda a, b: ad.one_minus(a) * b,
        lambda a, b: ad.where(np.array([[True, False, True]] * 4), a, b),
        lambda a, b: ad.concat([a, b], axis=1),
        lambda a, b: ad.concat([a, b], axis=0),
        lambda a, b: ad.cols(a, 1, 3) * ad.cols(b, 0, 2),
        lambda a, b: ad.rows(a, [0, 0, 3]) + ad.rows(b, [1, 2, 2]),
        lambda a, b: ad.softmax(a * b),
        lambda a, b: ad.log_softmax(a + b),
        lambda a, b: ad.mean(a, axis=0) * ad.mean(b, axis=0),
        lambda a, b: ad.segment_sum(a * b, [2, 0, 2, 2], 3),
        lambda a, b: ad.segment_mean(a - b, [1, 1, 0, 3], 5),
        lambda a, b: ad.pick(a * b, [0, 5, 5, 11]),
        lambda a, b: ad.reshape(a, (2, 6)) * ad.reshape(b, (2, 6)),
    ],
)
def test_elementwise_and_structural_gradients(op, rng):
    a, b = param(rng, 4, 3, name="a"), param(rng, 4, 3, name="b")
    w = rng.normal(size=op(a, b).shape)
    assert_grads(lambda: ad.sum(op(a, b) * ad.constant(w)), {"a": a, "b": b})


def test_linear_and_matmul_gradients(rng):
    x, w, b = param(rng, 5, 3, name="x"), param(rng, 3, 4, name="w"), param(rng, 4, name="b")
    v = param(rng, 4, 2, name="v")
    fixed = ad.constant(rng.normal(size=(5, 2)))
    f = lambda: ad.sum(ad.matmul(ad.linear(x, w, b), v) * fixed)
    assert_grads(f, {"x": x, "w": w, "b": b, "v": v})


def test_masked_softmax_gradient_ignores_masked_entries(rng):
    x = param(rng, 3, 5)
    mask = np.array([[1, 1, 0, 1, 0], [0, 0, 0, 1, 0], [1, 1, 1, 1, 1]], dtype=bool)
    live = np.flatnonzero(mask)
    w = ad.constant(rng.normal(size=live.size))
    assert_grads(lambda: ad.sum(ad.pick(ad.log_softmax(x, mask), live) * w), [x])
    assert_grads(lambda: ad.sum(ad.pick(ad.softmax(x, mask), live) * w), [x])


def test_masked_softmax_values():
    x = ad.constant(np.array([[1.0, 2.0, 3.0]]))
    s = ad.softmax(x, np.array([[True, False, True]]))
    assert s.data[0, 1] == 0.0
    np.testing.assert_allclose(s.data[0, [0, 2]], np.exp([1, 3]) / np.exp([1, 3]).sum())
    ls = ad.log_softmax(x, np.array([[False, True, False]]))
    assert ls.data[0, 1] == 0.0 and np.isneginf(ls.data[0, 0])


def test_softmax_is_overflow_free():
    s = ad.softmax(ad.constant(np.array([1000.0, 1000.0, -1000.0])))
    np.testing.assert_allclose(s.data, [0.5, 0.5, 0.0])


def test_fully_masked_row_is_rejected():
    with pytest.raises(InvalidMaskError):
        ad.softmax(ad.constant(np.zeros((2, 3))), np.array([[1, 0, 0], [0, 0, 0]], dtype=bool))


def test_sigmoid_midpoint_is_exact():
    assert ad.sigmoid(ad.constant(np.zeros(3))).data.tolist() == [0.5, 0.5, 0.5]


def test_shape_errors():
    a, b = ad.constant(np.zeros((2, 3))), ad.constant(np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        a + b
    with pytest.raises(DimensionError):
        ad.matmul(a, a)
    with pytest.raises(DimensionError):
        ad.linear(a, ad.constant(np.zeros((3, 4))), ad.constant(np.zeros(3)))
    with pytest.raises(DimensionError):
        ad.concat([a, b], axis=1)
    with pytest.raises(DegenerateInputError):
        ad.concat([])
    with pytest.raises(DegenerateInputError):
        ad.mean(ad.constant(np.zeros((0, 3))))


def test_fan_out_accumulates(rng):
    x = param(rng, 3)
    with ad.Tape():
        y = x * x + x * 3.0 + ad.sigmoid(x) * x
        ad.backward(ad.sum(y))
    s = 0.5 * (1 + np.tanh(0.5 * x.data))
    np.testing.assert_allclose(x.grad, 2 * x.data + 3.0 + s + x.data * s * (1 - s))


def test_gradients_accumulate_across_backward_calls(rng):
    x = param(rng, 4)
    for _ in range(2):
        with ad.Tape():
            ad.backward(ad.sum(x * 2.0))
    np.testing.assert_array_equal(x.grad, np.full(4, 4.0))


def test_no_tape_records_nothing(rng):
    x = param(rng, 2)
    with ad.Tape() as tape:
        with ad.no_tape():
            y = x * x
        assert len(tape) == 0
    assert y.tape is None


def test_constants_do_not_receive_gradients(rng):
    x, c = param(rng, 3), ad.constant(rng.normal(size=3))
    with ad.Tape():
        ad.backward(ad.sum(x * c))
    assert c.grad is None
    np.testing.assert_array_equal(x.grad, c.data)


def test_backward_needs_scalar(rng):
    x = param(rng, 3)
    with ad.Tape():
        with pytest.raises(ContractError):
            ad.backward(x * 2.0)


def test_precision_switch():
    with ad.precision("float32"):
        assert ad.parameter(np.ones(2)).data.dtype == np.float32
    assert ad.parameter(np.ones(2)).data.dtype == np.float64
    with pytest.raises(ContractError):
        ad.set_precision("float16")


def test_dropout_is_identity_outside_training(rng):
    x = param(rng, 4, 4)
    assert ad.dropout(x, 0.5, rng, training=False) is x
    with pytest.raises(ContractError):
        ad.dropout(x, 1.0, rng)
    y = ad.dropout(x, 0.5, np.random.default_rng(0))
    kept = y.data != 0
    np.testing.assert_allclose(y.data[kept], 2.0 * x.data[kept])


def test_custom_op_backward_is_used(rng):
    x = param(rng, 3)
    y = lambda: ad.sum(ad.custom(x.data ** 3, (x,), lambda g: (3.0 * g * x.data ** 2,)))
    assert_grads(y, [x])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_segment_sum_matches_loop_and_ignores_row_order(n_rows, n_seg, seed):
    r = np.random.default_rng(seed)
    values = r.normal(size=(n_rows, 3))
    ids = r.integers(0, n_seg, size=n_rows)
    out = ad.segment_sum(ad.constant(values), ids, n_seg).data
    expected = np.zeros((n_seg, 3))
    for v, i in zip(values, ids):
        expected[i] += v
    np.testing.assert_allclose(out, expected, atol=1e-12)
    perm = r.permutation(n_rows)
    shuffled = ad.segment_sum(ad.constant(values[perm]), ids[perm], n_seg).data
    np.testing.assert_array_equal(out, shuffled)


def test_segment_mean_empty_segment_is_zero():
    out = ad.segment_mean(ad.constant(np.ones((2, 2))), [0, 0], 3).data
    np.testing.assert_array_equal(out, [[1, 1], [0, 0], [0, 0]])


def test_relative_error_helper():
    assert ad.relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert ad.relative_error(np.array([1.0, 0.0]), np.array([1.0, 1e-3])) == pytest.approx(1e-3)


def test_small_known_values():
    eye = ad.constant(np.eye(2))
    np.testing.assert_array_equal(ad.matmul(eye, ad.constant([[3.0], [4.0]])).data, [[3], [4]])
    np.testing.assert_array_equal(ad.matmul(ad.constant([[1.0, 2.0]]), ad.constant([[3.0], [4.0]])).data, [[11]])
    assert ad.tanh(ad.constant(0.0)).data == 0.0
    np.testing.assert_array_equal(ad.softmax(ad.constant(np.zeros(3))).data, np.full(3, 1 / 3))
    np.testing.assert_array_equal(ad.softmax(ad.constant([10.0, 10.0]), [True, False]).data, [1.0, 0.0])
    np.testing.assert_array_equal(ad.mean(ad.constant([[2.0, 4.0], [6.0, 8.0]])).data, [4, 6])


def test_saturated_gate_passes_state_through_exactly(rng):
    z = ad.constant(np.ones(4))
    u, k = ad.constant(rng.normal(size=4)), ad.constant(rng.normal(size=4))
    np.testing.assert_array_equal((ad.one_minus(z) * u + z * k).data, k.data)


def test_zero_dropout_is_identity_in_training(rng):
    x = param(rng, 3)
    assert ad.dropout(x, 0.0, rng, training=True) is x


def test_detached_parameter_gets_no_gradient(rng):
    x, unused = param(rng, 3), param(rng, 3)
    with ad.Tape():
        ad.backward(ad.sum(x))
    assert unused.grad is None


def test_outer_product_gradient(rng):
    w = param(rng, 2, 3)
    x = rng.normal(size=(3, 1))
    with ad.Tape():
        ad.backward(ad.sum(ad.matmul(w, ad.constant(x))))
    np.testing.assert_allclose(w.grad, np.ones((2, 1)) @ x.T)
    assert_grads(lambda: ad.sum(ad.matmul(w, ad.constant(x))), [w])


def test_tape_is_replayed_in_reverse(rng):
    x = param(rng, 2)
    with ad.Tape() as tape:
        a = x * 2.0
        b = ad.tanh(a)
        c = ad.sum(b)
    assert tape.records == [a, b, c]
    assert c.parents == (b,) and b.parents == (a,)
