import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clmn import tensor as T
from clmn.errors import GradientError, ShapeError
from clmn.gradcheck import gradcheck, gradcheck_params
from clmn.tensor import Tensor


def test_matmul_example():
    out = T.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0], [6.0]]))
    np.testing.assert_array_equal(out.data, [[17.0], [39.0]])


def test_softmax_symmetric():
    np.testing.assert_array_equal(T.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])


def test_softmax_empty_axis_errors():
    with pytest.raises(ShapeError):
        T.softmax(Tensor(np.zeros((2, 0))), axis=-1)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8))
def test_euclidean_self_distance_zero(v):
    t = Tensor(v)
    assert T.euclidean_distance(t, t).item() == 0.0


def test_shape_mismatch_is_descriptive():
    with pytest.raises(ShapeError, match="3"):
        T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 2))))
    with pytest.raises(ShapeError):
        T.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_backward_square():
    w = Tensor([3.0], requires_grad=True)
    T.tsum(w * w).backward()
    np.testing.assert_array_equal(w.grad, [6.0])


def test_backward_dot():
    a = Tensor([1.0, 2.0], requires_grad=True)
    b = Tensor([5.0, 7.0], requires_grad=True)
    T.dot(a, b).backward()
    np.testing.assert_array_equal(a.grad, [5.0, 7.0])
    np.testing.assert_array_equal(b.grad, [1.0, 2.0])


def test_backward_errors():
    with pytest.raises(GradientError):
        (Tensor([1.0, 2.0], requires_grad=True) * 2.0).backward()
    with pytest.raises(GradientError):
        Tensor(1.0).backward()


def test_two_path_accumulation():
    # y = x*a + x*b uses x twice; dy/dx = a + b
    x = Tensor(2.0, requires_grad=True)
    a, b = Tensor(3.0), Tensor(5.0)
    (x * a + x * b).backward()
    assert x.grad == 8.0
    # a tensor reused k times through one op accumulates k contributions
    z = Tensor([1.0, -2.0], requires_grad=True)
    T.tsum(z + z + z).backward()
    np.testing.assert_array_equal(z.grad, [3.0, 3.0])


def test_no_grad_tensors_never_accumulate():
    c = Tensor([1.0, 2.0])
    w = Tensor([1.0, 1.0], requires_grad=True)
    T.tsum(c * w).backward()
    assert c.grad is None
    with T.no_grad():
        out = T.tsum(w * w)
    assert out.tape_node is None


def test_determinism_bitwise():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(4, 5)), rng.normal(size=(5, 3))
    r1 = T.softmax(T.tanh(Tensor(a) @ Tensor(b))).data
    r2 = T.softmax(T.tanh(Tensor(a) @ Tensor(b))).data
    assert r1.tobytes() == r2.tobytes()


RNG = np.random.default_rng(0)

UNARY = {
    "tanh": T.tanh,
    "sigmoid": T.sigmoid,
    "exp": lambda x: T.exp(x * 0.3),
    "square": T.square,
    "neg": T.neg,
    "relu": T.relu,
    "log": lambda x: T.log(T.square(x) + 1.0),
    "sqrt": lambda x: T.sqrt(T.square(x) + 1.0),
    "softmax": lambda x: T.softmax(x, axis=-1) * Tensor(np.arange(12.0).reshape(3, 4)),
    "log_softmax": lambda x: T.log_softmax(x, axis=0) * Tensor(np.arange(12.0).reshape(3, 4)),
    "sum_axis": lambda x: T.tsum(x, axis=1) * Tensor([1.0, -2.0, 3.0]),
    "mean_axis": lambda x: T.mean(x, axis=0) * Tensor([1.0, 2.0, 3.0, 4.0]),
    "max_axis": lambda x: T.tmax(x, axis=1) * Tensor([1.0, 2.0, 3.0]),
    "transpose": lambda x: T.transpose(x) * Tensor(np.arange(12.0).reshape(4, 3)),
    "reshape": lambda x: T.reshape(x, (2, 6)) * Tensor(np.arange(12.0).reshape(2, 6)),
    "getitem": lambda x: x[1:, ::2] * Tensor([[1.0, 2.0], [3.0, 4.0]]),
    "fancy_index": lambda x: x[np.array([0, 0, 2])] * 2.0,
    "masked_max": lambda x: T.masked_max(x, np.array([[1, 0, 1, 1]] * 3, bool), axis=1),
    "masked_mean": lambda x: T.masked_mean(x, np.array([[1, 0, 1, 1]] * 3, bool), axis=1) * Tensor([1.0, 2.0, 3.0]),
    "cosine": lambda x: T.cosine_similarity(x, Tensor(np.arange(12.0).reshape(3, 4) - 5.0), axis=-1),
    "euclid": lambda x: T.euclidean_distance(x, Tensor(np.ones((3, 4))), axis=-1),
    "sq_dist": lambda x: T.squared_distance(x, Tensor(np.ones((3, 4))), axis=-1),
    "unfold": lambda x: T.unfold1d(x.reshape(1, 3, 4), 3) * Tensor(np.arange(36.0).reshape(1, 3, 12)),
    "scatter": lambda x: T.scatter_rows(x, np.array([4, 0, 2]), 5) * Tensor(np.arange(20.0).reshape(5, 4)),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_primitive_gradients(name):
    x = Tensor(RNG.normal(size=(3, 4)), requires_grad=True)
    fn = UNARY[name]
    err = gradcheck(lambda t: T.tsum(fn(t)), x)
    assert err < 1e-5, name


BINARY = {
    "add_broadcast": lambda a, b: a + b[0],
    "sub": lambda a, b: a - b,
    "mul_broadcast": lambda a, b: a * b[:, :1],
    "div": lambda a, b: a / (T.square(b) + 1.0),
    "matmul": lambda a, b: a @ T.transpose(b),
    "concat": lambda a, b: T.concat([a, b * 2.0], axis=0) * Tensor(np.arange(24.0).reshape(6, 4)),
    "stack": lambda a, b: T.stack([a, b], axis=1) * Tensor(np.arange(24.0).reshape(3, 2, 4)),
    "cross_entropy": lambda a, b: T.cross_entropy(a * b, np.array([0, 3, 1])),
}


@pytest.mark.parametrize("name", sorted(BINARY))
def test_binary_gradients(name):
    a = Tensor(RNG.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(RNG.normal(size=(3, 4)), requires_grad=True)
    fn = BINARY[name]
    worst, _ = gradcheck_params(lambda: T.tsum(fn(a, b)), {"a": a, "b": b})
    assert worst < 1e-5, name


def test_matmul_vector_gradients():
    v = Tensor(RNG.normal(size=4), requires_grad=True)
    m = Tensor(RNG.normal(size=(4, 3)), requires_grad=True)
    w = Tensor(RNG.normal(size=3), requires_grad=True)
    worst, _ = gradcheck_params(lambda: (v @ m) @ w + T.dot(v, v), {"v": v, "m": m, "w": w})
    assert worst < 1e-5


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 10_000))
def test_randomized_composite_gradients(rows, cols, seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=(rows, cols)), requires_grad=True)
    w = Tensor(rng.normal(size=(cols, 3)), requires_grad=True)
    labels = rng.integers(0, 3, size=rows)
    loss = lambda: T.mean(T.cross_entropy(T.tanh(x @ w), labels))
    worst, _ = gradcheck_params(loss, {"x": x, "w": w})
    assert worst < 1e-5


def test_masked_max_empty_is_zero():
    out = T.masked_max(Tensor(np.ones((2, 3))), np.zeros((2, 3), bool), axis=1)
    np.testing.assert_array_equal(out.data, [0.0, 0.0])


def test_scatter_rows_rejects_duplicates():
    with pytest.raises(ShapeError):
        T.scatter_rows(Tensor(np.ones((2, 3))), np.array([1, 1]), 4)


def test_euclidean_gradient_finite_at_zero():
    a = Tensor([1.0, 2.0], requires_grad=True)
    T.euclidean_distance(a, Tensor([1.0, 2.0])).backward()
    assert np.all(np.isfinite(a.grad))
