import torch
from guard.tensors import flatten_rows, row_norms

NORM_SLACK = 1e-12


def _rows(values, like):
    return values.reshape((-1,) + (1,) * (like.dim() - 1))


def project(x_adv, x, spec):
    """
    Projects onto the eps-ball around x, then into the valid input range
    Clipping into the range moves every coordinate toward x, so the result stays in the ball.
    """
    delta = x_adv - x
    if spec.norm == 'linf':
        delta = delta.clamp(-spec.eps, spec.eps)
    else:
        norms = row_norms(delta)
        factor = torch.where(norms > spec.eps, spec.eps / norms.clamp_min(1e-300), torch.ones_like(norms))
        delta = delta * _rows(factor, delta)
    return (x + delta).clamp(spec.lower, spec.upper)


def perturbation_norm(x_adv, x, norm):
    delta = flatten_rows(x_adv - x)
    if norm == 'linf':
        return delta.abs().max(dim=1).values if delta.shape[1] else torch.zeros(delta.shape[0])
    return delta.norm(dim=1)


def steepest_step(gradient, norm):
    """
    Unit step in the direction of steepest ascent for the given norm
    """
    if norm == 'linf':
        return gradient.sign()
    norms = row_norms(gradient).clamp_min(1e-12)
    return gradient / _rows(norms, gradient)


def random_in_ball(x, spec, rng):
    if spec.norm == 'linf':
        return rng.uniform(*x.shape, low=-spec.eps, high=spec.eps)
    direction = rng.normal(*x.shape)
    direction = direction / _rows(row_norms(direction).clamp_min(1e-12), direction)
    dimension = x[0].numel()
    radius = spec.eps * rng.uniform(x.shape[0]) ** (1.0 / dimension)
    return direction * _rows(radius, direction)


def margins(model, x, y):
    """
    Z_y - max_{j != y} Z_j per sample; negative means misclassified
    """
    logits = model.logits(x)
    true = logits.gather(1, y.reshape(-1, 1)).squeeze(1)
    others = logits.clone()
    others.scatter_(1, y.reshape(-1, 1), float('-inf'))
    return true - others.max(dim=1).values


def invariant_violations(x, x_adv, spec):
    """
    Counts samples outside the eps-ball or the valid range
    :return: (dict) 'ball' and 'range' violation counts
    """
    norms = perturbation_norm(x_adv, x, spec.norm)
    outside = (flatten_rows(x_adv) < spec.lower) | (flatten_rows(x_adv) > spec.upper)
    return {
        'ball': int((norms > spec.eps + NORM_SLACK).sum()),
        'range': int(outside.any(dim=1).sum()),
    }
