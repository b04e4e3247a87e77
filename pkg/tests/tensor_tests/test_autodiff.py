import pytest
import torch
from guard.tensors import Rng, Record, grad, grad_check, tensor, ops
from guard.models import ModelSpec, Model


def test_grad_of_cubic():
    """
    Tests that grad returns 3x^2 for sum(x^3)
    """
    x = tensor([1.0, -2.0, 0.5])
    with Record() as record:
        leaf, = record.watch(x)
        g = grad((leaf ** 3).sum(), leaf, record)
    assert torch.allclose(g, 3 * x ** 2)


def test_second_order_record():
    """
    Tests that gradients taken in a depth-2 record can be differentiated again:
    d/dx sum(d/dx sum(x^3)) = 6x
    """
    x = tensor([1.0, -2.0, 0.5])
    with Record(depth=2) as record:
        leaf, = record.watch(x)
        g = grad((leaf ** 3).sum(), leaf, record)
        gg = grad(g.sum(), leaf, record)
    assert torch.allclose(gg, 6 * x)


def test_grad_of_unused_input_is_zero():
    """
    Tests that an input the scalar does not depend on gets a zero gradient
    """
    with Record() as record:
        a, b = record.watch(tensor([1.0, 2.0]), tensor([3.0]))
        ga, gb = grad((a ** 2).sum(), [a, b], record)
    assert torch.equal(gb, torch.zeros(1, dtype=gb.dtype))
    assert torch.allclose(ga, tensor([2.0, 4.0]))


def test_grad_needs_scalar():
    """
    Tests that grad rejects a non-scalar output
    """
    with Record() as record:
        leaf, = record.watch(tensor([1.0, 2.0]))
        with pytest.raises(ValueError):
            grad(leaf * 2, leaf, record)


def test_grad_check_smooth_functions():
    """
    Tests that autograd gradients of softplus and matrix expressions agree with
    central differences to 1e-5 relative error on 20 random points
    """
    rng = Rng(0, 'grad-check')
    A = rng.normal(4, 4)
    w = 1.0 + rng.uniform(4)

    def softplus_loss(x):
        return (ops.softplus(x, beta=1.0) * w).sum()

    def quadratic_loss(x):
        return ops.total(ops.matmul(x.reshape(1, 4), A) ** 2) + (x * w).sum()

    for _ in range(10):
        x = rng.normal(4)
        assert grad_check(softplus_loss, x) < 1e-5
        assert grad_check(quadratic_loss, x + 3.0) < 1e-5


def test_model_input_gradient():
    """
    Tests the input gradient of a softplus mlp's loss against central differences
    """
    model = Model(ModelSpec.mlp([3, 6, 2], activation='softplus'), Rng(1, 'init'))
    y = torch.tensor([0, 1])
    x = Rng(1, 'x').normal(2, 3)
    with Record() as record:
        leaf, = record.watch(x)
        analytic = grad(model.loss(leaf, y), leaf, record).reshape(-1)
    numeric = torch.zeros(6, dtype=x.dtype)
    with torch.no_grad():
        for i in range(6):
            step = torch.zeros(6, dtype=x.dtype)
            step[i] = 1e-6
            numeric[i] = (model.loss(x + step.reshape(2, 3), y) - model.loss(x - step.reshape(2, 3), y)) / 2e-6
    assert float((analytic - numeric).abs().max()) < 1e-7


def test_grad_check_step_must_be_positive():
    """
    Tests that grad_check asserts a positive step
    """
    with pytest.raises(AssertionError):
        grad_check(lambda x: x.sum(), tensor([1.0]), step=0.0)


def test_grad_check_convolution_and_pooling():
    """
    Tests autograd gradients through conv2d, max pooling and average pooling
    against central differences to 1e-5 relative error
    """
    rng = Rng(2, 'grad-check')
    weight = rng.normal(2, 1, 3, 3)
    bias = rng.normal(2)
    w = rng.normal(1, 2, 3, 3)

    def max_pooled(x):
        return ops.total(ops.max_pool2d(ops.softplus(ops.conv2d(x, weight, bias, padding=1), beta=1.0)) * w)

    def avg_pooled(x):
        return ops.total(ops.avg_pool2d(ops.softplus(ops.conv2d(x, weight, bias, padding=1), beta=1.0)) * w)

    for _ in range(3):
        x = rng.normal(1, 1, 6, 6)
        assert grad_check(max_pooled, x) < 1e-5
        assert grad_check(avg_pooled, x) < 1e-5


def test_hessian_vector_product_by_double_grad():
    """
    Tests that differentiating grad(f) . u again gives A u for f = 1/2 x^T A x
    """
    A = tensor([[2.0, 0.5, -1.0], [0.5, 3.0, 0.25], [-1.0, 0.25, 1.5]])
    u = tensor([0.3, -1.2, 0.7])
    x = tensor([1.0, -0.5, 2.0])
    with Record(depth=2) as record:
        leaf, = record.watch(x)
        g = grad(0.5 * (leaf @ A @ leaf), leaf, record)
        hu = grad((g * u).sum(), leaf, record)
    assert torch.allclose(g, A @ x)
    assert torch.allclose(hu, A @ u, atol=1e-12)


def test_graph_retention_by_depth():
    """
    Tests that depth-1 gradients free the graph and depth-2 gradients keep it
    """
    x = tensor([1.0, -2.0, 0.5])
    with Record() as record:
        leaf, = record.watch(x)
        value = (leaf ** 3).sum()
        grad(value, leaf, record)
        with pytest.raises(RuntimeError):
            grad(value, leaf, record)
    with Record(depth=2) as record:
        leaf, = record.watch(x)
        value = (leaf ** 3).sum()
        first = grad(value, leaf, record)
        assert torch.equal(grad(value, leaf, record), first)
