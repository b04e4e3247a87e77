"""
Forward ops of the tensor core

Thin, shape-strict wrappers over torch: no broadcasting beyond scalar-tensor,
finite-value checks in checked mode. torch autograd records every op while a
gradient is required, so all of these are differentiable (twice where a
Record of depth 2 is active).
"""
import torch
import torch.nn.functional as F
from guard.tensors.tensor import check_finite, check_same_shape

SOFTPLUS_BETA = 10.0


def _reduce(values, reduction):
    assert reduction in ['mean', 'sum', 'none'], 'reduction must be \'mean\', \'sum\' or \'none\''
    if reduction == 'mean':
        return values.mean()
    if reduction == 'sum':
        return values.sum()
    return values


def add(a, b):
    check_same_shape(a, b, 'add')
    check_finite(a, b)
    return a + b


def sub(a, b):
    check_same_shape(a, b, 'sub')
    check_finite(a, b)
    return a - b


def scale(a, c):
    """
    Scalar-tensor multiplication (the only broadcast allowed)
    """
    check_finite(a)
    if isinstance(c, torch.Tensor) and c.dim() != 0:
        raise ValueError('scale: expected a 0-d scalar, got shape %s' % (tuple(c.shape),))
    return a * c


def mul(a, b):
    check_same_shape(a, b, 'mul')
    check_finite(a, b)
    return a * b


def matmul(a, b):
    if a.dim() != 2 or b.dim() != 2 or a.shape[1] != b.shape[0]:
        raise ValueError('matmul: shapes %s and %s do not conform' % (tuple(a.shape), tuple(b.shape)))
    check_finite(a, b)
    return a @ b


def linear(x, weight, bias=None):
    """
    Affine map x W^T + b for a batch x of shape (B, in)
    """
    if x.dim() != 2 or weight.dim() != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError('linear: input %s does not conform to weight %s' % (tuple(x.shape), tuple(weight.shape)))
    if bias is not None and tuple(bias.shape) != (weight.shape[0],):
        raise ValueError('linear: bias shape %s, expected (%d,)' % (tuple(bias.shape), weight.shape[0]))
    check_finite(x, weight, bias)
    return F.linear(x, weight, bias)


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """
    2-d cross-correlation of x (B, C, H, W) with weight (O, C, kh, kw)
    """
    if x.dim() != 4 or weight.dim() != 4 or x.shape[1] != weight.shape[1]:
        raise ValueError('conv2d: input %s does not conform to kernel %s' % (tuple(x.shape), tuple(weight.shape)))
    out_h = (x.shape[2] + 2 * padding - weight.shape[2]) // stride + 1
    out_w = (x.shape[3] + 2 * padding - weight.shape[3]) // stride + 1
    if out_h < 1 or out_w < 1:
        raise ValueError('conv2d: kernel %s larger than padded input %s' % (tuple(weight.shape), tuple(x.shape)))
    check_finite(x, weight, bias)
    return F.conv2d(x, weight, bias, stride=stride, padding=padding)


def max_pool2d(x, kernel=2, stride=None):
    if x.dim() != 4:
        raise ValueError('max_pool2d: expected (B, C, H, W), got %s' % (tuple(x.shape),))
    check_finite(x)
    return F.max_pool2d(x, kernel, stride=stride)


def avg_pool2d(x, kernel=2, stride=None):
    if x.dim() != 4:
        raise ValueError('avg_pool2d: expected (B, C, H, W), got %s' % (tuple(x.shape),))
    check_finite(x)
    return F.avg_pool2d(x, kernel, stride=stride)


def relu(x):
    # second derivative is zero everywhere, the kink included
    check_finite(x)
    return F.relu(x)


def softplus(x, beta=SOFTPLUS_BETA):
    check_finite(x)
    return F.softplus(x, beta=beta)


def batch_norm(x, running_mean, running_var, weight, bias, training, momentum=0.1, eps=1e-5):
    """
    Batch normalisation over all but the channel axis (axis 1)
    In training mode batch statistics are used and, when running buffers are
    given, folded into them in place; in eval mode the frozen running
    statistics are used.
    """
    if x.dim() not in [2, 4] or x.shape[1] != weight.shape[0]:
        raise ValueError('batch_norm: input %s does not conform to %d channels' % (tuple(x.shape), weight.shape[0]))
    check_finite(x)
    return F.batch_norm(x, running_mean, running_var, weight, bias, training=training, momentum=momentum, eps=eps)


def channel_statistics(x):
    """
    Per-channel batch mean and (biased) variance of x, differentiable
    :return: (mean, var) tensors of shape (C,)
    """
    dims = [0] if x.dim() == 2 else [0, 2, 3]
    mean = x.mean(dim=dims)
    var = x.var(dim=dims, unbiased=False)
    return mean, var


def _check_labels(logits, labels):
    if logits.dim() != 2:
        raise ValueError('cross-entropy: logits must be (B, C), got %s' % (tuple(logits.shape),))
    if labels.shape[0] != logits.shape[0]:
        raise ValueError('cross-entropy: %d labels for %d logits' % (labels.shape[0], logits.shape[0]))


def softmax_cross_entropy(logits, labels, reduction='mean'):
    """
    Cross-entropy of hard integer labels against softmax(logits)
    :param logits: (torch.Tensor) (B, C)
    :param labels: (torch.Tensor) (B,) integer class indices
    :param reduction: (str) 'mean', 'sum' or 'none'
    """
    _check_labels(logits, labels)
    num_classes = logits.shape[1]
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= num_classes):
        raise ValueError('Label out of range [0, %d)' % num_classes)
    check_finite(logits, name='logits')
    values = F.cross_entropy(logits, labels.long(), reduction='none')
    return _reduce(values, reduction)


def soft_cross_entropy(logits, targets, reduction='mean'):
    """
    -sum p log softmax(logits) for soft label vectors p (B, C)
    """
    _check_labels(logits, targets)
    check_same_shape(logits, targets, 'soft_cross_entropy')
    check_finite(logits, name='logits')
    values = -(targets * F.log_softmax(logits, dim=1)).sum(dim=1)
    return _reduce(values, reduction)


def l2_norm(x):
    check_finite(x)
    return x.reshape(-1).norm()


def total(x):
    check_finite(x)
    return x.sum()


def mean(x):
    check_finite(x)
    return x.mean()

