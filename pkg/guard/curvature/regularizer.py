"""
Curvature regularizer

The penalty is the squared change of the input gradient along the normalized
gradient direction z, ||grad l(x + h z) - grad l(x)||^2, averaged over the batch.
z is detached, so outer differentiation sees the penalty as a function of the
perturbed gradient only. Gradients are taken per sample: row i of the input
gradient of sum_i l_i is grad l_i.
"""
import torch
from guard.tensors import check_finite, flatten_rows, row_norms

GRAD_FLOOR = 1e-12

# 4-point central stencil for h * (H z): offsets and weights
CENTRAL_STENCIL = [(-2.0, 1.0 / 12.0), (-1.0, -2.0 / 3.0), (1.0, 2.0 / 3.0), (2.0, -1.0 / 12.0)]


def input_gradients(model, x, y, create_graph=False):
    """
    Per-sample losses and their input gradients
    :param model: Model or Surface
    :param x: (torch.Tensor) (B, ...) inputs; used as-is if it already requires grad
    :param y: labels
    :param create_graph: (bool) keep the gradient differentiable
    :return: (torch.Tensor, torch.Tensor) (B,) losses and (B, ...) gradients
    """
    with torch.enable_grad():
        if not x.requires_grad:
            x = x.detach().requires_grad_(True)
        losses = model.sample_losses(x, y)
        gradient, = torch.autograd.grad(losses.sum(), x, create_graph=create_graph)
    check_finite(gradient, name='input gradient')
    return losses, gradient


def _unit_rows(gradient, policy='zero'):
    norms = row_norms(gradient)
    shape = (-1,) + (1,) * (gradient.dim() - 1)
    safe = torch.where(norms < GRAD_FLOOR, torch.ones_like(norms), norms)
    z = gradient / safe.reshape(shape)
    if policy == 'zero':
        z = torch.where((norms < GRAD_FLOOR).reshape(shape), torch.zeros_like(z), z)
    return z.detach()


def normalized_grad(model, x, y, policy='zero'):
    """
    Per-sample normalized input gradient z = grad l / ||grad l||, detached
    Rows whose gradient norm is below 1e-12 are set to zero (the penalty then vanishes).
    :param model: Model or Surface
    :param x: (torch.Tensor) (B, ...) inputs
    :param y: labels
    :param policy: (str) zero-gradient policy
    :return: (torch.Tensor) z with the shape of x
    """
    _, gradient = input_gradients(model, x, y)
    return _unit_rows(gradient.detach(), policy)


def _expand_direction(z, x):
    if tuple(z.shape) == tuple(x.shape[1:]):
        z = z.unsqueeze(0).expand_as(x)
    if tuple(z.shape) != tuple(x.shape):
        raise ValueError('Direction of shape %s cannot perturb inputs of shape %s' % (tuple(z.shape), tuple(x.shape)))
    return z.detach()


def _shifted_input_gradient(model, x_leaf, y, shift):
    losses = model.sample_losses(x_leaf + shift, y)
    gradient, = torch.autograd.grad(losses.sum(), x_leaf, create_graph=True)
    check_finite(gradient, name='input gradient')
    return gradient


def _gradient_change(model, x_leaf, y, g0, z, cfg):
    h = cfg.step
    if cfg.stencil == 'forward':
        return _shifted_input_gradient(model, x_leaf, y, h * z) - g0
    change = torch.zeros_like(g0)
    for offset, weight in CENTRAL_STENCIL:
        change = change + weight * _shifted_input_gradient(model, x_leaf, y, offset * h * z)
    return change


def _parameter_change(model, x_leaf, y, losses, z, cfg):
    params = [p for p in model.parameters() if p.requires_grad]
    assert params, 'Parameter-space penalty needs a model with parameters'
    base = torch.autograd.grad(losses.mean(), params, create_graph=True)
    shifted_losses = model.sample_losses(x_leaf + cfg.step * z, y)
    shifted = torch.autograd.grad(shifted_losses.mean(), params, create_graph=True)
    return sum(((a - b) ** 2).sum() for a, b in zip(shifted, base))


def _penalty(model, x_leaf, y, losses, g0, z, cfg):
    if z is None:
        z = _unit_rows(g0.detach(), cfg.zero_grad_policy)
    z = _expand_direction(z, x_leaf)
    with model.frozen_statistics():
        if cfg.space == 'parameter':
            penalty = _parameter_change(model, x_leaf, y, losses, z, cfg)
        else:
            change = _gradient_change(model, x_leaf, y, g0, z, cfg)
            penalty = (flatten_rows(change) ** 2).sum(dim=1).mean()
    check_finite(penalty, name='curvature penalty')
    return penalty


def guard_penalty(model, x, y, cfg, z=None):
    """
    ||grad l(x + h z) - grad l(x)||^2 summed over input coordinates, mean over the batch
    Differentiable with respect to the model parameters. No forward pass here
    updates batch-norm running statistics.
    :param model: Model or Surface
    :param x: (torch.Tensor) (B, ...) inputs
    :param y: labels
    :param cfg: (RegularizerConfig) step h, stencil and space
    :param z: (torch.Tensor) optional fixed direction (one sample's shape or the batch's)
    :return: (torch.Tensor) 0-d penalty
    """
    with torch.enable_grad():
        x_leaf = x.detach().requires_grad_(True)
        with model.frozen_statistics():
            losses, g0 = input_gradients(model, x_leaf, y, create_graph=True)
        return _penalty(model, x_leaf, y, losses, g0, z, cfg)


def guard_loss(model, x, y, cfg, z=None):
    """
    Regularized loss l + lambda * guard_penalty; exactly the plain loss when lambda = 0
    :param model: Model or Surface
    :param x: (torch.Tensor) (B, ...) inputs
    :param y: labels
    :param cfg: (RegularizerConfig) regularizer settings
    :param z: (torch.Tensor) optional fixed direction
    :return: (torch.Tensor) 0-d loss
    """
    if cfg.lam == 0:
        return model.loss(x, y)
    with torch.enable_grad():
        x_leaf = x.detach().requires_grad_(True)
        losses, g0 = input_gradients(model, x_leaf, y, create_graph=True)
        return losses.mean() + cfg.lam * _penalty(model, x_leaf, y, losses, g0, z, cfg)


def gradient_penalty(model, x, y):
    """
    Mean over the batch of ||grad_x l||^2, differentiable with respect to the parameters
    """
    _, gradient = input_gradients(model, x, y, create_graph=True)
    return (flatten_rows(gradient) ** 2).sum(dim=1).mean()


def grad_penalty_loss(model, x, y, cfg):
    """
    l + lambda_g * ||grad_x l||^2 (mean over the batch); the plain loss when lambda_g = 0
    """
    if cfg.lam_g == 0:
        return model.loss(x, y)
    with torch.enable_grad():
        x_leaf = x.detach().requires_grad_(True)
        losses, gradient = input_gradients(model, x_leaf, y, create_graph=True)
        return losses.mean() + cfg.lam_g * (flatten_rows(gradient) ** 2).sum(dim=1).mean()
