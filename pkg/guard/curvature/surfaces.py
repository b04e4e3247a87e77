"""
Closed-form loss surfaces

They expose the same protocol the curvature and attack code expects from a
Model (sample_losses, frozen_statistics, evaluating), which makes them exact
oracles: a quadratic has a constant Hessian, a linear surface has none.
"""
import contextlib
import torch
from guard.tensors import tensor, DTYPE


class Surface:
    """
    Base class for closed-form surfaces over flat inputs x of shape (B, d)
    """
    def sample_losses(self, x, y=None):
        raise NotImplementedError

    def loss(self, x, y=None):
        return self.sample_losses(x, y).mean()

    def parameters(self):
        return []

    @contextlib.contextmanager
    def frozen_statistics(self):
        yield

    @contextlib.contextmanager
    def evaluating(self):
        yield self


class QuadraticSurface(Surface):
    """
    l(x) = 1/2 x^T A x + b^T x + c, with A symmetric
    """
    def __init__(self, A, b=None, c=0.0):
        A = tensor(A)
        assert A.dim() == 2 and A.shape[0] == A.shape[1], 'A must be square'
        assert torch.allclose(A, A.T, atol=1e-10), 'A must be symmetric'
        self.A = A
        self.b = torch.zeros(A.shape[0], dtype=DTYPE) if b is None else tensor(b)
        self.c = float(c)

    def sample_losses(self, x, y=None):
        x = x.reshape(x.shape[0], -1)
        return 0.5 * ((x @ self.A) * x).sum(dim=1) + x @ self.b + self.c

    def gradient(self, x):
        return x.reshape(x.shape[0], -1) @ self.A + self.b


class LinearSurface(Surface):
    """
    l(x) = w^T x + c
    """
    def __init__(self, w, c=0.0):
        self.w = tensor(w).reshape(-1)
        self.c = float(c)

    def sample_losses(self, x, y=None):
        return x.reshape(x.shape[0], -1) @ self.w + self.c
