"""
Reverse-mode differentiation on top of torch autograd

A Record marks a region whose ops are kept for differentiation. At depth 2 the
gradients returned by grad() are themselves recorded, so a penalty built from
input gradients can be differentiated again with respect to the parameters.
"""
import torch
from guard.tensors.tensor import DTYPE, check_finite


class Record:
    """
    Computation record context

    Attributes:
        depth: (int) 1 for plain gradients, 2 when gradients must stay differentiable
    """
    def __init__(self, depth=1):
        assert depth in [1, 2], 'Record depth must be 1 or 2'
        self.depth = depth
        self._guard = None

    def __enter__(self):
        self._guard = torch.enable_grad()
        self._guard.__enter__()
        return self

    def __exit__(self, *exc):
        self._guard.__exit__(*exc)
        return False

    def watch(self, *tensors):
        """
        Makes tensors record inputs (differentiable leaves)
        :return: list of watched tensors
        """
        return [t.detach().to(DTYPE).requires_grad_(True) for t in tensors]


def grad(scalar, wrt, record=None):
    """
    Gradient of a 0-d tensor with respect to a list of record inputs
    :param scalar: (torch.Tensor) 0-d output of the record
    :param wrt: (list[torch.Tensor]) tensors to differentiate with respect to
    :param record: (Record) active record; depth 2 keeps the result differentiable and the graph alive,
        depth 1 frees the graph
    :return: (list[torch.Tensor]) gradients, zeros where scalar does not depend on an input
    """
    single = isinstance(wrt, torch.Tensor)
    if single:
        wrt = [wrt]
    if scalar.dim() != 0:
        raise ValueError('grad: expected a 0-d scalar, got shape %s' % (tuple(scalar.shape),))
    for w in wrt:
        if not w.requires_grad:
            raise ValueError('grad: tensor of shape %s is not a record input' % (tuple(w.shape),))
    if not scalar.requires_grad:
        grads = [torch.zeros_like(w) for w in wrt]
    else:
        create_graph = record is not None and record.depth == 2
        grads = torch.autograd.grad(scalar, wrt, create_graph=create_graph, retain_graph=create_graph,
                                    allow_unused=True)
        grads = [torch.zeros_like(w) if g is None else g for w, g in zip(wrt, grads)]
    check_finite(*grads, name='gradient')
    return grads[0] if single else grads


def grad_check(f, x, step=1e-5):
    """
    Compares the autograd gradient of a scalar function with central differences
    :param f: callable mapping a tensor shaped like x to a 0-d tensor
    :param x: (torch.Tensor) point of evaluation
    :param step: (float) finite-difference step
    :return: (float) max over coordinates of |analytic - numeric| / (|analytic| + 1e-12)
    """
    assert step > 0, 'step must be positive'
    x = x.detach().to(DTYPE)
    with Record(depth=1) as record:
        leaf, = record.watch(x)
        value = f(leaf)
        analytic = grad(value, leaf, record).detach().reshape(-1)
    flat = x.reshape(-1)
    numeric = torch.zeros_like(flat)
    with torch.no_grad():
        for i in range(flat.numel()):
            forward = flat.clone()
            backward = flat.clone()
            forward[i] += step
            backward[i] -= step
            f_plus = f(forward.reshape(x.shape))
            f_minus = f(backward.reshape(x.shape))
            if not (torch.isfinite(f_plus) and torch.isfinite(f_minus)):
                raise ValueError('grad_check: non-finite evaluation at coordinate %d' % i)
            numeric[i] = (f_plus - f_minus) / (2.0 * step)
    error = (analytic - numeric).abs() / (analytic.abs() + 1e-12)
    return float(error.max()) if error.numel() else 0.0


def flatten_grads(grads):
    return torch.cat([g.reshape(-1) for g in grads])
