"""
Tensor conventions shared by the whole package

Every tensor is a dense row-major torch tensor of 64-bit floats. Checked mode
rejects NaN/Inf at op boundaries.
"""
import contextlib
import numpy as np
import torch

DTYPE = torch.float64

_checked = True


def set_checked(enabled):
    """
    Turns checked mode (finite-value validation in every op) on or off
    :param enabled: (bool) whether ops validate their inputs
    """
    global _checked
    _checked = bool(enabled)


def is_checked():
    return _checked


@contextlib.contextmanager
def checked(enabled=True):
    """
    Context manager that temporarily sets checked mode
    :param enabled: (bool) checked mode inside the block
    """
    previous = _checked
    set_checked(enabled)
    try:
        yield
    finally:
        set_checked(previous)


def tensor(data, shape=None):
    """
    Builds a float64 tensor from nested lists, numpy arrays or tensors
    :param data: values
    :param shape: (tuple) optional shape to reshape the row-major data into
    :return: (torch.Tensor) float64 tensor
    """
    if isinstance(data, torch.Tensor):
        out = data.to(DTYPE)
    else:
        out = torch.as_tensor(np.asarray(data, dtype=np.float64))
    if shape is not None:
        shape = tuple(int(d) for d in shape)
        if int(np.prod(shape)) != out.numel():
            raise ValueError('Data length %d does not equal product of shape %s' % (out.numel(), shape))
        out = out.reshape(shape)
    check_finite(out)
    return out


def zeros(*shape):
    return torch.zeros(*shape, dtype=DTYPE)


def check_finite(*tensors, name='input'):
    """
    Raises ValueError if checked mode is on and any tensor holds NaN or Inf
    :param tensors: (torch.Tensor) tensors to validate
    :param name: (str) what the tensors are, used in the message
    """
    if not _checked:
        return
    for t in tensors:
        if t is None or not torch.is_floating_point(t):
            continue
        if not bool(torch.isfinite(t.detach()).all()):
            raise ValueError('Non-finite %s of shape %s' % (name, tuple(t.shape)))


def check_same_shape(a, b, op):
    if tuple(a.shape) != tuple(b.shape):
        raise ValueError('%s: shape mismatch %s vs %s' % (op, tuple(a.shape), tuple(b.shape)))


def flatten_rows(t):
    """
    Views a batch tensor (B, ...) as a matrix (B, d)
    """
    return t.reshape(t.shape[0], -1)


def row_norms(t):
    return flatten_rows(t).norm(dim=1)
