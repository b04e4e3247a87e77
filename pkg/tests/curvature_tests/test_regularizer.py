import pytest
import torch
from guard.tensors import Rng, Record, grad, grad_check, tensor, row_norms, ops
from guard.curvature import RegularizerConfig, Surface, QuadraticSurface, LinearSurface
from guard.curvature import normalized_grad, guard_penalty, guard_loss, gradient_penalty, grad_penalty_loss
from guard.models import get_objective


class FlatSoftplusNet(Surface):
    """
    2-4-2 softplus network whose 22 parameters are one flat vector
    """
    size = 2 * 4 + 4 + 4 * 2 + 2

    def __init__(self, theta):
        self.theta = theta

    def sample_losses(self, x, y=None):
        w1, b1 = self.theta[:8].reshape(4, 2), self.theta[8:12]
        w2, b2 = self.theta[12:20].reshape(2, 4), self.theta[20:]
        hidden = ops.softplus(ops.linear(x, w1, b1), beta=1.0)
        return ops.softmax_cross_entropy(ops.linear(hidden, w2, b2), y, reduction='none')


def quadratic():
    A = tensor([[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 3.0]])
    return QuadraticSurface(A, b=[0.1, -0.2, 0.3], c=1.0), A


def test_penalty_on_quadratic():
    """
    Tests that the penalty on a quadratic is h^2 ||A z||^2 averaged over the batch
    """
    surface, A = quadratic()
    x = Rng(0).normal(5, 3)
    cfg = RegularizerConfig(lam=1.0, h=0.1)
    z = normalized_grad(surface, x, None)
    expected = (0.01 * ((z @ A) ** 2).sum(dim=1)).mean()
    assert abs(float(guard_penalty(surface, x, None, cfg)) - float(expected)) < 1e-10


def test_central_stencil_on_quadratic():
    """
    Tests that the 4-point stencil gives the same penalty on a quadratic
    """
    surface, _ = quadratic()
    x = Rng(1).normal(4, 3)
    forward = guard_penalty(surface, x, None, RegularizerConfig(h=0.2))
    central = guard_penalty(surface, x, None, RegularizerConfig(h=0.2, stencil='central'))
    assert abs(float(forward) - float(central)) < 1e-10


def test_penalty_vanishes_on_linear_loss():
    """
    Tests that an input-linear loss has zero curvature penalty
    """
    surface = LinearSurface([1.0, -2.0, 0.5])
    x = Rng(2).normal(6, 3)
    assert float(guard_penalty(surface, x, None, RegularizerConfig(h=0.5))) == 0.0


def test_zero_gradient_gives_zero_direction():
    """
    Tests that a sample whose input gradient vanishes gets z = 0 and no penalty
    """
    surface = QuadraticSurface([[1.0, 0.0], [0.0, 4.0]])
    x = tensor([[0.0, 0.0], [1.0, 1.0]])
    z = normalized_grad(surface, x, None)
    assert torch.equal(z[0], torch.zeros(2, dtype=z.dtype))
    assert float(row_norms(z)[1]) == pytest.approx(1.0)
    penalty = guard_penalty(surface, x[:1], None, RegularizerConfig(h=0.1))
    assert float(penalty) == 0.0


def test_fixed_direction():
    """
    Tests that a given direction replaces the normalized gradient
    """
    surface, A = quadratic()
    x = Rng(3).normal(2, 3)
    z = tensor([1.0, 0.0, 0.0])
    penalty = guard_penalty(surface, x, None, RegularizerConfig(h=0.1), z=z)
    assert float(penalty) == pytest.approx(0.01 * float((A[0] ** 2).sum()), abs=1e-12)


def test_lambda_zero_is_plain_loss(mlp, moons):
    """
    Tests that lambda = 0 gives exactly the plain loss
    """
    train, _ = moons
    x, y = train.inputs[:16], train.labels[:16]
    assert torch.equal(guard_loss(mlp, x, y, RegularizerConfig(lam=0.0, h=0.1)), mlp.loss(x, y))
    assert torch.equal(grad_penalty_loss(mlp, x, y, RegularizerConfig(lam_g=0.0)), mlp.loss(x, y))


def test_penalty_is_differentiable(mlp, moons):
    """
    Tests that the regularized loss has finite parameter gradients that differ from the plain ones
    """
    train, _ = moons
    x, y = train.inputs[:16], train.labels[:16]
    loss = guard_loss(mlp, x, y, RegularizerConfig(lam=10.0, h=0.1))
    regularized = torch.autograd.grad(loss, mlp.parameters())
    plain = torch.autograd.grad(mlp.loss(x, y), mlp.parameters())
    assert all(bool(torch.isfinite(g).all()) for g in regularized)
    assert any(not torch.allclose(a, b) for a, b in zip(regularized, plain))
    assert float(loss) > float(mlp.loss(x, y))


def test_regularized_loss_parameter_gradient():
    """
    Tests the parameter gradient of the whole regularized loss against central
    differences (direction z held fixed) to 1e-4 relative error
    """
    rng = Rng(7, 'grad-check')
    theta = 0.5 * rng.normal(FlatSoftplusNet.size)
    x = rng.normal(6, 2)
    y = torch.tensor([0, 1, 1, 0, 1, 0])
    cfg = RegularizerConfig(lam=5.0, h=0.1)
    z = normalized_grad(FlatSoftplusNet(theta), x, y)

    def regularized(flat):
        return guard_loss(FlatSoftplusNet(flat), x, y, cfg, z=z)

    assert grad_check(regularized, theta) < 1e-4


def test_penalty_matches_explicit_gradients(mlp, moons):
    """
    Tests that the penalty equals the batch mean of ||grad l(x + h z) - grad l(x)||^2
    computed with two separate gradient calls
    """
    train, _ = moons
    x, y = train.inputs[:8], train.labels[:8]
    h = 0.1
    z = normalized_grad(mlp, x, y)
    with Record() as record:
        clean, = record.watch(x)
        g0 = grad(mlp.sample_losses(clean, y).sum(), clean, record)
    with Record() as record:
        shifted, = record.watch(x + h * z)
        g1 = grad(mlp.sample_losses(shifted, y).sum(), shifted, record)
    expected = float(((g1 - g0) ** 2).sum(dim=1).mean())
    assert expected > 0
    assert float(guard_penalty(mlp, x, y, RegularizerConfig(h=h))) == pytest.approx(expected, rel=1e-9)


def test_regularized_loss_grows_with_lambda(mlp, moons):
    """
    Tests that the regularized loss is non-decreasing in lambda and starts at the plain loss
    """
    train, _ = moons
    x, y = train.inputs[:16], train.labels[:16]
    values = [float(guard_loss(mlp, x, y, RegularizerConfig(lam=lam, h=0.1))) for lam in [0.0, 0.5, 1.0, 2.0, 10.0]]
    assert values[0] == float(mlp.loss(x, y))
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_parameter_space_penalty(mlp, moons):
    """
    Tests the parameter-space variant: non-negative and differentiable
    """
    train, _ = moons
    x, y = train.inputs[:8], train.labels[:8]
    penalty = guard_penalty(mlp, x, y, RegularizerConfig(h=0.1, space='parameter'))
    assert float(penalty) >= 0
    assert penalty.requires_grad


def test_penalty_keeps_running_statistics(convnet, digits):
    """
    Tests that the penalty's forward passes leave batch-norm running statistics unchanged
    """
    train, _ = digits
    x, y = train.inputs[:8], train.labels[:8]
    before = [layer.running_mean.clone() for layer in convnet.batch_norm_layers()]
    guard_penalty(convnet.train(), x, y, RegularizerConfig(h=0.05))
    after = [layer.running_mean for layer in convnet.batch_norm_layers()]
    assert all(torch.equal(a, b) for a, b in zip(before, after))


def test_gradient_penalty_on_linear():
    """
    Tests that the gradient penalty of a linear loss is ||w||^2
    """
    surface = LinearSurface([3.0, 4.0])
    x = Rng(4).normal(3, 2)
    assert float(gradient_penalty(surface, x, None)) == pytest.approx(25.0)


def test_objectives_by_nickname(mlp, moons):
    """
    Tests that the guard objective matches guard_loss and unknown names are refused
    """
    train, _ = moons
    x, y = train.inputs[:8], train.labels[:8]
    cfg = RegularizerConfig(lam=2.0, h=0.1)
    objective = get_objective('guard', regularizer=cfg)
    assert torch.allclose(objective(mlp, x, y, Rng(0)), guard_loss(mlp, x, y, cfg))
    with pytest.raises(AssertionError):
        get_objective('mixup')


def test_regularizer_config():
    """
    Tests step resolution, the full-scale preset and argument validation
    """
    cfg = RegularizerConfig(h_scale=0.5)
    with pytest.raises(AssertionError):
        cfg.step
    inputs = tensor([0.0, 2.0, 0.0, 2.0])
    assert cfg.resolve(inputs).step == pytest.approx(0.5 * float(inputs.std()))
    assert cfg.h is None
    preset = RegularizerConfig.full_scale()
    assert preset.lam == 100.0 and preset.h == 3.0
    assert RegularizerConfig.from_dict(preset.to_dict()).to_dict() == preset.to_dict()
    with pytest.raises(AssertionError):
        RegularizerConfig(lam=-1.0)
    with pytest.raises(AssertionError):
        RegularizerConfig(stencil='backward')
