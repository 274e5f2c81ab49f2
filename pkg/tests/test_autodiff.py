"""Gradient, optimizer, and checkpoint checks for the autodiff core."""

import numpy as np
import pytest

from flower.autodiff import (Adam, CheckpointError, Mlp, ShapeError, Tensor,
                             concat, load_checkpoint, restore_parameters,
                             save_checkpoint)

from helpers import central_difference_gradient, relative_error

N_TRIALS = 100


def _scalarize(out, weights):
    # random linear functional makes the output gradient nontrivial
    return (out * Tensor(weights)).sum()


# name -> (build inputs, tensor expression, numpy reference)
PRIMITIVES = {
    "add": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)), rng.uniform(-2, 2, (3, 4))),
        lambda a, b: a + b,
        lambda a, b: a + b,
    ),
    "add_broadcast": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)), rng.uniform(-2, 2, (4,))),
        lambda a, b: a + b,
        lambda a, b: a + b,
    ),
    "sub": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)), rng.uniform(-2, 2, (3, 4))),
        lambda a, b: a - b,
        lambda a, b: a - b,
    ),
    "mul": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)), rng.uniform(-2, 2, (3, 4))),
        lambda a, b: a * b,
        lambda a, b: a * b,
    ),
    "div": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)), rng.uniform(0.5, 2.5, (3, 4))),
        lambda a, b: a / b,
        lambda a, b: a / b,
    ),
    "matmul": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)), rng.uniform(-2, 2, (4, 2))),
        lambda a, b: a.matmul(b),
        lambda a, b: a @ b,
    ),
    "sum": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: a.sum(),
        lambda a: a.sum(),
    ),
    "sum_axis": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: a.sum(axis=1),
        lambda a: a.sum(axis=1),
    ),
    "mean": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: a.mean(axis=0),
        lambda a: a.mean(axis=0),
    ),
    "exp": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: a.exp(),
        lambda a: np.exp(a),
    ),
    "log": (
        lambda rng: (rng.uniform(0.5, 2.5, (3, 4)),),
        lambda a: a.log(),
        lambda a: np.log(a),
    ),
    "tanh": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: a.tanh(),
        lambda a: np.tanh(a),
    ),
    "softplus": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: a.softplus(),
        lambda a: np.logaddexp(0.0, a),
    ),
    "softmax": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: a.softmax(axis=-1),
        lambda a: np.exp(a) / np.exp(a).sum(axis=-1, keepdims=True),
    ),
    "square": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: a.square(),
        lambda a: a * a,
    ),
    "concat": (
        lambda rng: (rng.uniform(-2, 2, (3, 2)), rng.uniform(-2, 2, (3, 3))),
        lambda a, b: concat([a, b], axis=1),
        lambda a, b: np.concatenate([a, b], axis=1),
    ),
    "slice": (
        lambda rng: (rng.uniform(-2, 2, (4, 5)),),
        lambda a: a[1:3, ::2],
        lambda a: a[1:3, ::2],
    ),
    "take": (
        lambda rng: (rng.uniform(-2, 2, (3, 5)),),
        lambda a: a.take(np.array([4, 0, 0, 2]), axis=-1),
        lambda a: np.take(a, [4, 0, 0, 2], axis=-1),
    ),
    "broadcast": (
        lambda rng: (rng.uniform(-2, 2, (1, 4)),),
        lambda a: a.broadcast_to((3, 4)),
        lambda a: np.broadcast_to(a, (3, 4)),
    ),
    "reshape": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: a.reshape(2, 6),
        lambda a: a.reshape(2, 6),
    ),
    "neg": (
        lambda rng: (rng.uniform(-2, 2, (3, 4)),),
        lambda a: -a,
        lambda a: -a,
    ),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients_match_finite_differences(name):
    build, t_fn, np_fn = PRIMITIVES[name]
    rng = np.random.default_rng(hash(name) % 2 ** 32)
    for _ in range(N_TRIALS):
        arrays = build(rng)
        out_shape = np.asarray(np_fn(*arrays)).shape
        weights = rng.standard_normal(out_shape) if out_shape else rng.standard_normal()
        for which in range(len(arrays)):
            tensors = [Tensor(a, requires_grad=(i == which)) for i, a in enumerate(arrays)]
            loss = _scalarize(t_fn(*tensors), weights)
            loss.backward()

            def f(values, which=which):
                inputs = [a.copy() for a in arrays]
                inputs[which] = values
                return float(np.sum(np.asarray(np_fn(*inputs)) * weights))

            numeric = central_difference_gradient(f, arrays[which])
            assert relative_error(tensors[which].grad, numeric) < 1e-4


def test_regression_gradient_matches_finite_differences():
    # loss = mean((W x - y)^2), checked against the oracle at step 1e-6
    rng = np.random.default_rng(0)
    w = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    x = rng.standard_normal((8, 4))
    y = rng.standard_normal((8, 3))
    loss = (Tensor(x).matmul(w) - Tensor(y)).square().mean()
    loss.backward()

    def f(wv):
        return float(np.mean((x @ wv - y) ** 2))

    numeric = central_difference_gradient(f, w.data, step=1e-6)
    assert relative_error(w.grad, numeric, floor=1e-8) < 1e-5


def test_constant_loss_gives_zero_gradients():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    loss = (x * 0.0).sum()
    loss.backward()
    assert np.array_equal(x.grad, np.zeros(3))


def test_exp_log_chain_gradient_is_one():
    x = Tensor(np.array([0.5, 1.0, 2.5]), requires_grad=True)
    y = x.log().exp().sum()
    y.backward()
    assert np.allclose(x.grad, 1.0, atol=1e-12)


def test_reuse_accumulates_sum_of_path_gradients():
    x = Tensor(np.array([3.0]), requires_grad=True)
    # x appears in three paths: d/dx (x*x + x) = 2x + 1
    loss = (x * x + x).sum()
    loss.backward()
    assert np.allclose(x.grad, 2 * 3.0 + 1.0)


def test_backward_requires_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        (x * 2.0).backward()


def test_shape_mismatch_error_names_both_shapes():
    a = Tensor(np.ones((2, 3)))
    b = Tensor(np.ones((4, 5)))
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 5\)"):
        _ = a + b
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 5\)"):
        a.matmul(b)


def test_elementwise_examples():
    assert np.array_equal((Tensor([1.0, 2.0]) + Tensor([3.0, 4.0])).data, [4.0, 6.0])
    ident = Tensor(np.eye(2))
    m = np.array([[5.0, 6.0], [7.0, 8.0]])
    assert np.array_equal(ident.matmul(Tensor(m)).data, m)
    x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    x.square().sum().backward()
    assert np.array_equal(x.grad, [2.0, 4.0, 6.0])


def test_graph_is_freed_after_backward():
    x = Tensor(np.array([1.0]), requires_grad=True)
    y = (x * 2.0).sum()
    y.backward()
    assert y._backward is None and y._parents == ()


class TestAdam:
    def test_quadratic_bowl_converges(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        opt = Adam([p], lr=0.1)
        for _ in range(200):
            opt.zero_grad()
            (p * p).sum().backward()
            opt.step()
        assert abs(p.data[0]) < 1e-2

    def test_zero_gradient_leaves_parameters_unchanged(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        before = p.data.copy()
        opt = Adam([p], lr=0.1)
        p.grad = np.zeros(2)
        opt.step()
        assert np.array_equal(p.data, before)
        assert opt.step_count == 1

    def test_default_learning_rate(self):
        assert Adam([Tensor(np.ones(1), requires_grad=True)]).lr == 1e-4

    def test_nonfinite_gradient_identifies_parameter(self):
        p = Tensor(np.ones(2), requires_grad=True, name="theta")
        p.grad = np.array([np.nan, 0.0])
        with pytest.raises(FloatingPointError, match="theta"):
            Adam([p]).step()

    def test_invalid_learning_rate(self):
        with pytest.raises(ValueError):
            Adam([], lr=0.0)


class TestMlp:
    def test_forward_shapes(self):
        mlp = Mlp([3, 8, 2], rng=np.random.default_rng(0))
        out = mlp(Tensor(np.zeros((5, 3))))
        assert out.shape == (5, 2)

    def test_zero_init_last_gives_zero_output(self):
        mlp = Mlp([3, 8, 2], rng=np.random.default_rng(0), zero_init_last=True)
        out = mlp(Tensor(np.random.default_rng(1).standard_normal((5, 3))))
        assert np.array_equal(out.data, np.zeros((5, 2)))

    def test_bad_widths_and_activations(self):
        with pytest.raises(ValueError):
            Mlp([3])
        with pytest.raises(ValueError):
            Mlp([3, 0, 2])
        with pytest.raises(ValueError):
            Mlp([3, 4, 2], activations=["tanh", "relu"])

    def test_composable_widths(self):
        mlp = Mlp([4, 7, 7, 3], rng=np.random.default_rng(0))
        dims = [(layer.weight.shape) for layer in mlp.layers]
        assert all(dims[i][1] == dims[i + 1][0] for i in range(len(dims) - 1))


def _train_fragment(seed):
    rng = np.random.default_rng(seed)
    mlp = Mlp([2, 8, 1], rng=np.random.default_rng(seed + 1))
    opt = Adam(mlp.parameters(), lr=1e-3)
    x = rng.standard_normal((16, 2))
    y = rng.standard_normal((16, 1))
    for _ in range(5):
        loss = (mlp(Tensor(x)) - Tensor(y)).square().mean()
        opt.zero_grad()
        loss.backward()
        opt.step()
    return np.concatenate([p.data.reshape(-1) for p in mlp.parameters()])


def test_training_is_bit_reproducible():
    assert np.array_equal(_train_fragment(7), _train_fragment(7))


class TestCheckpoint:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        tensors = {
            "a.weight": rng.standard_normal((3, 4)),
            "b.bias": Tensor(rng.standard_normal(5)),
            "scalar": np.array(2.5),
        }
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, tensors)
        loaded = load_checkpoint(path)
        assert set(loaded) == set(tensors)
        assert np.array_equal(loaded["a.weight"], tensors["a.weight"])
        assert np.array_equal(loaded["b.bias"], tensors["b.bias"].data)
        assert loaded["scalar"].shape == ()

    def test_restore_parameters(self, tmp_path):
        mlp = Mlp([2, 4, 1], rng=np.random.default_rng(0), name="net")
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, mlp.named_parameters())
        other = Mlp([2, 4, 1], rng=np.random.default_rng(9), name="net")
        restore_parameters(other.named_parameters(), load_checkpoint(path))
        for p, q in zip(mlp.parameters(), other.parameters()):
            assert np.array_equal(p.data, q.data)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_missing_and_mismatched_tensors(self, tmp_path):
        mlp = Mlp([2, 4, 1], rng=np.random.default_rng(0), name="net")
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, {"other": np.ones(3)})
        with pytest.raises(CheckpointError, match="missing"):
            restore_parameters(mlp.named_parameters(), load_checkpoint(path))
        save_checkpoint(path, {p.name: np.zeros((9, 9)) for p in mlp.parameters()})
        with pytest.raises(CheckpointError, match="shape"):
            restore_parameters(mlp.named_parameters(), load_checkpoint(path))
