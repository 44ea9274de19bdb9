"""Finite-difference checks for every registered primitive.

The oracle is central differences (h=1e-3) evaluated through the same forward
functions; analytic gradients must agree within relative error 1e-3 with an
absolute floor of 1e-5.
"""

import numpy as np
import pytest

from clardrec.numcore import PRIMITIVES, ParameterStore, Tensor, backprop
from clardrec.numcore import ops
from clardrec.numcore.tensor import working_precision

H = 1e-3
REL_TOL = 1e-3
ABS_FLOOR = 1e-5


def fd_check(build, arrays, n_points=4, seed=0):
    """Compare analytic grads of scalar-valued `build(*tensors)` against central
    differences, perturbing a few random elements of every input.

    Runs at float64 so the oracle measures formula error, not rounding.
    """
    with working_precision(np.float64):
        _fd_check_inner(build, arrays, n_points, seed)


def _fd_check_inner(build, arrays, n_points, seed):
    rng = np.random.default_rng(seed)
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build(*tensors)
    backprop(loss)
    for ti, t in enumerate(tensors):
        assert t.grad is not None, f"input {ti} received no gradient"
        flat = t.data.reshape(-1)
        n = min(n_points, flat.size)
        picks = rng.choice(flat.size, size=n, replace=False)
        for j in picks:
            orig = flat[j]
            flat[j] = orig + H
            up = build(*tensors).item()
            flat[j] = orig - H
            down = build(*tensors).item()
            flat[j] = orig
            fd = (up - down) / (2 * H)
            an = float(t.grad.reshape(-1)[j])
            err = abs(an - fd)
            tol = max(REL_TOL * max(abs(an), abs(fd)), ABS_FLOOR)
            assert err <= tol, f"input {ti} elem {j}: analytic {an} vs fd {fd} (err {err})"


def _scalarize(out):
    """Reduce any output to a scalar with fixed random weights so every output
    element influences the loss."""
    w = np.random.default_rng(99).uniform(-1, 1, size=out.data.shape).astype(np.float32)
    return ops.reduce_sum(ops.hadamard(out, Tensor(w)))


def _r(shape, seed, scale=1.0):
    return (np.random.default_rng(seed).uniform(-1, 1, size=shape) * scale).astype(np.float32)


def case_matmul(seed):
    return lambda a, b: _scalarize(ops.matmul(a, b)), [_r((4, 5), seed), _r((5, 3), seed + 1)]


def case_add(seed):
    return lambda a, b: _scalarize(ops.add(a, b)), [_r((4, 3), seed), _r((3,), seed + 1)]


def case_sub(seed):
    return lambda a, b: _scalarize(ops.sub(a, b)), [_r((4, 3), seed), _r((4, 3), seed + 1)]


def case_hadamard(seed):
    return lambda a, b: _scalarize(ops.hadamard(a, b)), [_r((4, 3), seed), _r((4, 1), seed + 1)]


def case_scale(seed):
    return lambda a: _scalarize(ops.scale(a, -2.5)), [_r((4, 3), seed)]


def case_concat(seed):
    return (
        lambda a, b, c: _scalarize(ops.concat([a, b, c], axis=-1)),
        [_r((3, 2), seed), _r((3, 4), seed + 1), _r((3, 1), seed + 2)],
    )


def case_relu(seed):
    return lambda a: _scalarize(ops.relu(a)), [_r((5, 4), seed)]


def case_tanh(seed):
    return lambda a: _scalarize(ops.tanh(a)), [_r((5, 4), seed)]


def case_sigmoid(seed):
    return lambda a: _scalarize(ops.sigmoid(a)), [_r((5, 4), seed, 2.0)]


def case_log_sigmoid(seed):
    return lambda a: _scalarize(ops.log_sigmoid(a)), [_r((5, 4), seed, 2.0)]


def case_softmax(seed):
    return lambda a: _scalarize(ops.softmax(a, axis=-1)), [_r((4, 6), seed, 2.0)]


def case_logsumexp(seed):
    return lambda a: _scalarize(ops.logsumexp(a, axis=-1)), [_r((4, 6), seed, 2.0)]


def case_mean_pool(seed):
    return lambda a: _scalarize(ops.mean_pool(a, axis=0)), [_r((6, 4), seed)]


def case_masked_mean_pool(seed):
    mask = np.array([[1, 1, 0, 0], [1, 1, 1, 1], [1, 0, 0, 0]], dtype=np.float32)
    return lambda a: _scalarize(ops.masked_mean_pool(a, mask)), [_r((3, 4, 5), seed)]


def case_embedding_gather(seed):
    idx = np.array([[0, 2], [3, 3]])
    return lambda t: _scalarize(ops.embedding_gather(t, idx)), [_r((5, 3), seed)]


def case_take_rows(seed):
    idx = np.array([1, 0, 3])
    return lambda a: _scalarize(ops.take_rows(a, idx)), [_r((3, 4, 5), seed)]


def case_slice_cols(seed):
    return lambda a: _scalarize(ops.slice_cols(a, 1, 4)), [_r((3, 6), seed)]


def case_reshape(seed):
    return lambda a: _scalarize(ops.reshape(a, (6, 2))), [_r((3, 4), seed)]


def case_sum(seed):
    return lambda a: ops.reduce_sum(a), [_r((4, 3), seed)]


def case_mean(seed):
    return lambda a: _scalarize(ops.reduce_mean(a, axis=1)), [_r((4, 3), seed)]


def case_dot_product(seed):
    return lambda a, b: _scalarize(ops.dot_product(a, b)), [_r((4, 6), seed), _r((4, 6), seed + 1)]


def case_gru_cell(seed):
    return (
        lambda x, h, wx, wh, b: _scalarize(ops.gru_cell(x, h, wx, wh, b)),
        [_r((3, 5), seed), _r((3, 4), seed + 1), _r((5, 12), seed + 2), _r((4, 12), seed + 3), _r((12,), seed + 4)],
    )


def case_causal_self_attention(seed):
    lengths = np.array([4, 2, 3])
    return (
        lambda q, k, v: _scalarize(ops.causal_self_attention(q, k, v, lengths=lengths)),
        [_r((3, 4, 6), seed), _r((3, 4, 6), seed + 1), _r((3, 4, 6), seed + 2)],
    )


def case_layer_norm(seed):
    return (
        lambda a, g, b: _scalarize(ops.layer_norm(a, g, b)),
        [_r((3, 8), seed), 1.0 + _r((8,), seed + 1, 0.3), _r((8,), seed + 2, 0.3)],
    )


CASES = {name[5:]: fn for name, fn in list(globals().items()) if name.startswith("case_")}


def test_every_primitive_has_a_case():
    assert set(CASES) == set(PRIMITIVES), (
        f"uncovered: {set(PRIMITIVES) - set(CASES)}, stale: {set(CASES) - set(PRIMITIVES)}"
    )


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients(name):
    # 10+ random points per primitive: 3 input draws x >=4 perturbed elements.
    for seed in (11, 23, 47):
        build, arrays = CASES[name](seed)
        fd_check(build, arrays, n_points=4, seed=seed)


def test_backward_square():
    x = Tensor(np.array([3.0], dtype=np.float32), requires_grad=True)
    loss = ops.reduce_sum(ops.hadamard(x, x))
    backprop(loss)
    assert np.allclose(x.grad, [6.0])


def test_backward_sigmoid_weight():
    w = Tensor(np.array([1.0], dtype=np.float32), requires_grad=True)
    loss = ops.reduce_sum(ops.hadamard(ops.sigmoid(Tensor(np.zeros(1, np.float32))), w))
    backprop(loss)
    assert np.allclose(w.grad, [0.5])


def test_gradients_accumulate_until_zeroed():
    store = ParameterStore()
    w = store.add("w", np.array([2.0], dtype=np.float32))
    for _ in range(3):
        loss = ops.reduce_sum(ops.hadamard(w, w))
        backprop(loss)
    assert np.allclose(w.grad, [12.0])  # three times d(w^2)/dw = 4
    store.zero_grads()
    assert w.grad is None


def test_backward_requires_scalar():
    from clardrec.errors import ContractError

    x = Tensor(np.ones((2, 2), dtype=np.float32), requires_grad=True)
    y = ops.relu(x)
    with pytest.raises(ContractError):
        backprop(y)


def test_shared_subexpression_gradient():
    # y = x*x used twice: loss = y + y => dloss/dx = 4x
    x = Tensor(np.array([1.5], dtype=np.float32), requires_grad=True)
    y = ops.hadamard(x, x)
    loss = ops.reduce_sum(ops.add(y, y))
    backprop(loss)
    assert np.allclose(x.grad, [6.0])
