import numpy as np
import torch
from guard.tensors import DTYPE

SYMMETRY_TOLERANCE = 1e-10
MAX_DIMENSION = 32


class QuadModel:
    """
    Second-order model of a loss around one input:
    q(v) = loss + g.v + 1/2 v.H v over the ball ||v|| <= rho

    Attributes:
        loss: (float) l(x)
        g:    (np.ndarray) (d,) input gradient
        H:    (np.ndarray) (d, d) symmetric input Hessian
        rho:  (float) ball radius
    """
    def __init__(self, loss, g, H, rho, max_dimension=MAX_DIMENSION):
        """
        :param max_dimension: (int) largest accepted d (None for no limit)
        """
        g = np.asarray(g, dtype=np.float64).reshape(-1)
        H = np.asarray(H, dtype=np.float64)
        assert rho >= 0, 'rho must be non-negative'
        if H.shape != (g.shape[0], g.shape[0]):
            raise ValueError('Hessian of shape %s does not match gradient of length %d' % (H.shape, g.shape[0]))
        if max_dimension is not None and g.shape[0] > max_dimension:
            raise ValueError('Dimension %d exceeds the dense limit %d' % (g.shape[0], max_dimension))
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H)) and np.isfinite(loss)):
            raise ValueError('Quadratic model has non-finite entries')
        asymmetry = float(np.abs(H - H.T).max()) if H.size else 0.0
        if asymmetry > SYMMETRY_TOLERANCE * max(1.0, float(np.abs(H).max())):
            raise ValueError('Hessian is not symmetric (max asymmetry %.3g)' % asymmetry)
        self.loss = float(loss)
        self.g = g
        self.H = 0.5 * (H + H.T)
        self.rho = float(rho)
        self._eigen = None

    @property
    def dimension(self):
        return self.g.shape[0]

    def eigen(self):
        """
        :return: (np.ndarray, np.ndarray) eigenvalues ascending and orthonormal eigenvectors (columns)
        """
        if self._eigen is None:
            try:
                self._eigen = np.linalg.eigh(self.H)
            except np.linalg.LinAlgError as e:
                raise ValueError('Eigendecomposition failed: %s' % e)
        return self._eigen

    @property
    def lambda1(self):
        return float(self.eigen()[0][-1])

    def value_at(self, v):
        """
        q(v) for one step (d,) or a batch of steps (n, d)
        """
        v = np.asarray(v, dtype=np.float64)
        return self.loss + v @ self.g + 0.5 * np.einsum('...i,ij,...j->...', v, self.H, v)

    def with_radius(self, rho):
        return QuadModel(self.loss, self.g, self.H, rho, max_dimension=None)

    @classmethod
    def from_model(cls, model, x, y, rho, max_dimension=MAX_DIMENSION):
        """
        Exact second-order model of a network's loss at one input, by double differentiation
        :param model: Model or Surface
        :param x: (torch.Tensor) (1, ...) single input
        :param y: (torch.Tensor) (1,) label
        """
        assert x.shape[0] == 1, 'QuadModel.from_model expects a single sample'
        shape = x.shape
        flat = x.detach().reshape(-1).to(DTYPE)

        def loss(point):
            return model.sample_losses(point.reshape(shape), y).sum()

        with model.evaluating(), model.frozen_statistics():
            value = float(loss(flat))
            with torch.enable_grad():
                leaf = flat.clone().requires_grad_(True)
                gradient, = torch.autograd.grad(loss(leaf), leaf)
                hessian = torch.autograd.functional.hessian(loss, flat)
        return cls(value, gradient.numpy(), hessian.numpy(), rho, max_dimension=max_dimension)
