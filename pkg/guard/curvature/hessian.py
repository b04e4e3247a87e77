"""
Input-space Hessian estimation from finite differences of input gradients
"""
import collections
import torch
from guard.tensors import Rng, row_norms
from guard.curvature.regularizer import input_gradients

EigenEstimate = collections.namedtuple(
    'EigenEstimate', ['value', 'vector', 'residual', 'converged', 'iterations', 'radius'])


def hvp_fd(model, x, y, v, h=1e-4):
    """
    Finite-difference Hessian-vector product (grad l(x + h v) - grad l(x)) / h
    Exact (to round-off) for quadratic losses, whatever h.
    :param model: Model or Surface
    :param x: (torch.Tensor) (B, ...) inputs
    :param y: labels
    :param v: (torch.Tensor) directions, shaped like x
    :param h: (float) difference step
    :return: (torch.Tensor) H v per sample, detached
    """
    assert h > 0, 'h must be positive'
    if tuple(v.shape) != tuple(x.shape):
        raise ValueError('Direction of shape %s does not match inputs %s' % (tuple(v.shape), tuple(x.shape)))
    if bool((row_norms(v) == 0).any()):
        raise ValueError('Direction vector must be non-zero')
    with model.frozen_statistics():
        _, base = input_gradients(model, x, y)
        _, shifted = input_gradients(model, x.detach() + h * v.detach(), y)
    return ((shifted - base) / h).detach()


def _orthogonalize(v, basis):
    for b in basis:
        v = v - torch.dot(v, b) * b
    return v


def _relative_residual(absolute, value):
    if absolute == 0.0:
        return 0.0
    return absolute / abs(value) if value != 0.0 else float('inf')


def power_iteration(apply, start, iters, tol, shift=0.0, basis=()):
    """
    Power iteration on (H + shift I) restricted to the complement of an orthonormal basis
    :param apply: callable v -> H v on flat vectors
    :param start: (torch.Tensor) flat starting vector
    :param iters: (int) iteration budget
    :param tol: (float) relative residual ||Hv - lambda v|| / |lambda| accepted as converged
    :param shift: (float) spectral shift mu
    :param basis: (list[torch.Tensor]) unit vectors already found
    :return: (EigenEstimate) Rayleigh quotient of H (unshifted) and its relative residual, best over the run
    """
    assert iters >= 1, 'iters must be at least 1'
    v = _orthogonalize(start, basis)
    best = None
    radius = 0.0
    for i in range(1, iters + 1):
        norm = float(v.norm())
        if norm == 0.0:
            break
        v = v / norm
        hv = apply(v)
        value = float(torch.dot(v, hv))
        residual = _relative_residual(float((hv - value * v).norm()), value)
        radius = max(radius, float(hv.norm()))
        converged = residual <= tol
        if best is None or residual < best.residual or converged:
            best = EigenEstimate(value, v.clone(), residual, converged, i, radius)
        if converged:
            break
        v = _orthogonalize(hv + shift * v, basis)
    if best is None:
        zero = torch.zeros_like(start)
        return EigenEstimate(0.0, zero, 0.0, True, 0, 0.0)
    return best._replace(radius=radius, iterations=i)


def _flat_operator(model, x, y, h):
    shape = x.shape

    def apply(v):
        return hvp_fd(model, x, y, v.reshape(shape), h).reshape(-1)
    return apply


def lambda1_power(model, x, y, iters=100, tol=1e-6, rng=None, h=1e-4):
    """
    Largest (algebraic) eigenvalue of the input Hessian of a single sample
    Plain power iteration first; when the dominant eigenvalue is negative, or the
    iteration does not settle, it is repeated on H + mu I with mu the spectral
    radius estimate, and the shift removed from the result.
    :param model: Model or Surface
    :param x: (torch.Tensor) (1, ...) one input
    :param y: label of that input
    :param iters: (int) iteration budget per phase
    :param tol: (float) relative residual tolerance
    :param rng: (Rng) stream for the starting vector
    :param h: (float) finite-difference step of the Hessian-vector products
    :return: (EigenEstimate) value, unit eigenvector (flat), residual, converged flag
    """
    assert x.shape[0] == 1, 'lambda1_power works on one sample at a time'
    rng = rng if rng is not None else Rng(0)
    apply = _flat_operator(model, x, y, h)
    with model.evaluating():
        estimate = power_iteration(apply, rng.normal(x[0].numel()), iters, tol)
        if (estimate.converged and estimate.value >= 0) or estimate.radius == 0.0:
            return estimate
        shifted = power_iteration(apply, rng.normal(x[0].numel()), iters, tol, shift=estimate.radius)
    return shifted._replace(iterations=estimate.iterations + shifted.iterations,
                            radius=max(estimate.radius, shifted.radius))
