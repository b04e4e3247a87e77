"""
Loss families over flat inputs x of shape (n, d)

Each family gives per-sample losses, input gradients, input Hessians, the
maximum of the second-order model over a ball of radius rho
(taylor_adversarial) and the adversarial loss itself (adversarial), which
is exact where a closed form exists.
"""
from abc import ABC, abstractmethod
import numpy as np
import torch
from scipy.special import expit
from guard.theory.quad_model import QuadModel
from guard.theory.trust_region import trust_region_max


def softplus(t):
    return np.logaddexp(0.0, t)


class LossFamily(ABC):
    """
    The LossFamily abstract class describes a loss l(x) on flat inputs

    Attributes:
        convex: (bool) whether the adversarial loss returned by `adversarial` is convex in x
    """
    nickname = None
    convex = False

    @abstractmethod
    def loss(self, x):
        """
        :param x: (np.ndarray) (n, d) inputs
        :return: (np.ndarray) (n,) losses
        """
        pass

    @abstractmethod
    def gradient(self, x):
        """
        :return: (np.ndarray) (n, d) input gradients
        """
        pass

    @abstractmethod
    def hessian(self, x):
        """
        :return: (np.ndarray) (n, d, d) input Hessians
        """
        pass

    def quad_model(self, x, rho, i):
        """
        Second-order model of the loss around sample i
        """
        row = x[i:i + 1]
        return QuadModel(self.loss(row)[0], self.gradient(row)[0], self.hessian(row)[0], rho, max_dimension=None)

    def gradient_norms(self, x):
        return np.linalg.norm(self.gradient(x), axis=1)

    def lambda1(self, x):
        return np.array([np.linalg.eigvalsh(H)[-1] for H in self.hessian(x)])

    def taylor_adversarial(self, x, rho):
        """
        Maximum of the second-order model over the ball, per sample
        """
        return np.array([trust_region_max(self.quad_model(x, rho, i))[0] for i in range(x.shape[0])])

    def adversarial(self, x, rho):
        return self.taylor_adversarial(x, rho)


class QuadraticFamily(LossFamily):
    """
    l(x) = 1/2 x.A x + b.x + c; its second-order model is exact
    """
    nickname = 'quadratic'

    def __init__(self, A, b=None, c=0.0):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        self.A = 0.5 * (A + A.T)
        self.b = np.zeros(self.A.shape[0]) if b is None else np.asarray(b, dtype=np.float64).reshape(-1)
        self.c = float(c)
        self.convex = bool(np.linalg.eigvalsh(self.A)[0] >= -1e-12)

    def loss(self, x):
        return 0.5 * np.einsum('ni,ij,nj->n', x, self.A, x) + x @ self.b + self.c

    def gradient(self, x):
        return x @ self.A + self.b

    def hessian(self, x):
        return np.repeat(self.A[None], x.shape[0], axis=0)


class LinearFamily(LossFamily):
    """
    l(x) = w.x + c; adversarial loss l(x) + rho ||w||
    """
    nickname = 'linear'
    convex = True

    def __init__(self, w, c=0.0):
        self.w = np.asarray(w, dtype=np.float64).reshape(-1)
        self.c = float(c)

    def loss(self, x):
        return x @ self.w + self.c

    def gradient(self, x):
        return np.repeat(self.w[None], x.shape[0], axis=0)

    def hessian(self, x):
        return np.zeros((x.shape[0], self.w.shape[0], self.w.shape[0]))

    def lambda1(self, x):
        return np.zeros(x.shape[0])

    def taylor_adversarial(self, x, rho):
        return self.loss(x) + rho * np.linalg.norm(self.w)


class LogisticFamily(LossFamily):
    """
    Logistic loss l(x) = softplus(-m) of the margin m = y (w.x + b), y in {-1, +1}

    Everything depends on x through m only. With a = rho ||w|| and s the
    logistic sigmoid, the exact adversarial loss is softplus(a - m) and the
    second-order maximum is softplus(-m) + a s(-m) + 1/2 a^2 s(m) s(-m).
    """
    nickname = 'logistic'
    convex = True

    def __init__(self, w, b=0.0, y=1):
        assert y in [-1, 1], 'y must be -1 or +1'
        self.w = np.asarray(w, dtype=np.float64).reshape(-1)
        self.b = float(b)
        self.y = y

    @property
    def w_norm(self):
        return float(np.linalg.norm(self.w))

    def margin(self, x):
        return self.y * (x @ self.w + self.b)

    def loss(self, x):
        return softplus(-self.margin(x))

    def gradient(self, x):
        return (-self.y * expit(-self.margin(x)))[:, None] * self.w[None]

    def hessian(self, x):
        m = self.margin(x)
        return (expit(m) * expit(-m))[:, None, None] * np.outer(self.w, self.w)[None]

    def gradient_norms(self, x):
        return expit(-self.margin(x)) * self.w_norm

    def lambda1(self, x):
        m = self.margin(x)
        return expit(m) * expit(-m) * self.w_norm ** 2

    def margin_taylor_value(self, m, rho):
        a = rho * self.w_norm
        return softplus(-m) + a * expit(-m) + 0.5 * a ** 2 * expit(m) * expit(-m)

    def margin_taylor_slope(self, m, rho):
        a = rho * self.w_norm
        p = expit(m) * expit(-m)
        return -expit(-m) - a * p + 0.5 * a ** 2 * p * (expit(-m) - expit(m))

    def taylor_adversarial(self, x, rho):
        return self.margin_taylor_value(self.margin(x), rho)

    def adversarial(self, x, rho):
        return softplus(rho * self.w_norm - self.margin(x))

    def taylor_lipschitz(self, rho, grid=200001, span=60.0):
        """
        Lipschitz constant in x of the second-order adversarial loss:
        ||w|| times the largest slope in the margin, taken on a dense margin grid
        :return: (float) L
        """
        m = np.linspace(-span, span, grid)
        return float(self.w_norm * np.abs(self.margin_taylor_slope(m, rho)).max())


class SoftmaxHeadFamily(LossFamily):
    """
    Cross-entropy for class c of a linear softmax head W h + b, over features h
    """
    nickname = 'softmax-head'

    def __init__(self, W, b, c):
        self.W = np.asarray(W, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.c = int(c)
        assert 0 <= self.c < self.W.shape[0], 'Class %d out of range' % self.c

    def logits(self, h):
        return h @ self.W.T + self.b

    def probabilities(self, h):
        logits = self.logits(h)
        p = np.exp(logits - logits.max(axis=1, keepdims=True))
        return p / p.sum(axis=1, keepdims=True)

    def loss(self, h):
        logits = self.logits(h)
        top = logits.max(axis=1)
        return top + np.log(np.exp(logits - top[:, None]).sum(axis=1)) - logits[:, self.c]

    def gradient(self, h):
        p = self.probabilities(h)
        p[:, self.c] -= 1.0
        return p @ self.W

    def hessian(self, h):
        p = self.probabilities(h)
        covariance = np.einsum('nk,kl->nkl', p, np.eye(p.shape[1])) - np.einsum('nk,nl->nkl', p, p)
        return np.einsum('ki,nkl,lj->nij', self.W, covariance, self.W)

    @classmethod
    def from_model(cls, model, c):
        """
        The last linear layer of a Model, as a loss over its penultimate features
        :param model: (Model) mlp or convnet-s
        :param c: (int) class
        """
        network = model.network
        head = network.layers[-1] if hasattr(network, 'layers') else network.fc
        return cls(head.weight.detach().numpy(), head.bias.detach().numpy(), c)


class ModelFamily(LossFamily):
    """
    A network's cross-entropy for a fixed class, over flattened inputs; not convex
    """
    nickname = 'model'

    def __init__(self, model, c):
        self.model = model
        self.c = int(c)

    def _inputs(self, x):
        return torch.from_numpy(np.ascontiguousarray(x, dtype=np.float64)).reshape(
            (x.shape[0],) + self.model.spec.input_shape)

    def _labels(self, n):
        return torch.full((n,), self.c, dtype=torch.long)

    def loss(self, x):
        with torch.no_grad(), self.model.evaluating():
            return self.model.sample_losses(self._inputs(x), self._labels(x.shape[0])).numpy()

    def quad_model(self, x, rho, i):
        return QuadModel.from_model(self.model, self._inputs(x[i:i + 1]), self._labels(1), rho, max_dimension=None)

    def gradient(self, x):
        return np.stack([self.quad_model(x, 0.0, i).g for i in range(x.shape[0])])

    def hessian(self, x):
        return np.stack([self.quad_model(x, 0.0, i).H for i in range(x.shape[0])])


def _all_subclasses(cls):
    for subclass in cls.__subclasses__():
        yield subclass
        yield from _all_subclasses(subclass)


def get_family(nickname, **params):
    """
    :param nickname: (str) 'quadratic', 'linear', 'logistic', 'softmax-head' or 'model'
    :param params: constructor arguments of the family
    """
    for family in _all_subclasses(LossFamily):
        if family.nickname == nickname:
            return family(**params)
    raise AssertionError('Loss family must be \'quadratic\', \'linear\', \'logistic\', \'softmax-head\' or \'model\'')
