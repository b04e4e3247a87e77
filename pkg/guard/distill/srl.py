"""
Squeeze, recover and relabel

squeeze trains a teacher on the real data with the method's objective,
recover optimizes noise inputs against the frozen teacher, and relabel
replaces the hard labels by the teacher's soft predictions.
"""
import math
import pandas as pd
import torch
from tqdm import tqdm
from guard.config import config_hash
from guard.models import init_model, get_objective, Learner, DivergenceError
from guard.distill.synthetic_set import SyntheticSet

MIN_STEP = 1e-10


def squeeze(real, spec, cfg, rng, verbose=False):
    """
    Trains the teacher
    :param real: (Dataset) real training data
    :param spec: (ModelSpec) teacher architecture
    :param cfg: (DistillConfig) a squeeze-recover-relabel family method
    :param rng: (Rng) random stream (initialisation and training use separate children)
    :return: (Model) trained teacher in eval mode
    """
    objective = get_objective(cfg.squeeze_objective, regularizer=cfg.regularizer, attack=cfg.attack)
    learner = Learner(objective=objective, epochs=cfg.squeeze_epochs, lr=cfg.squeeze_lr,
                      momentum=cfg.squeeze_momentum, batch_size=cfg.squeeze_batch_size,
                      decay_epochs=cfg.decay_epochs, verbose=verbose)
    if verbose:
        print('Training teacher with the %s objective...' % objective.nickname)
    teacher = learner.fit(init_model(spec, rng.spawn('init')), real, rng.spawn('train'))
    return teacher


def total_variation(x):
    """
    Squared anisotropic total variation per sample, averaged over the batch;
    zero for non-image inputs
    :param x: (torch.Tensor) (B, C, H, W) images or (B, d) vectors
    """
    if x.dim() != 4:
        return torch.zeros((), dtype=x.dtype)
    vertical = ((x[:, :, 1:, :] - x[:, :, :-1, :]) ** 2).sum(dim=(1, 2, 3))
    horizontal = ((x[:, :, :, 1:] - x[:, :, :, :-1]) ** 2).sum(dim=(1, 2, 3))
    return (vertical + horizontal).mean()


def recover_objective(teacher, x, c, cfg):
    """
    CE(teacher(x), c) + alpha_tv TV(x) + alpha_l2 ||x||^2 + alpha_bn * batch-norm statistic misalignment
    :return: (torch.Tensor, torch.Tensor) objective and its cross-entropy part
    """
    y = torch.full((x.shape[0],), c, dtype=torch.long)
    with teacher.recorded_batch_statistics() as layers:
        cross_entropy = teacher.loss(x, y)
        alignment = torch.zeros((), dtype=x.dtype)
        if cfg.alpha_bn > 0:
            for layer in layers:
                alignment = alignment + ((layer.batch_mean - layer.running_mean) ** 2).sum() \
                    + ((layer.batch_var - layer.running_var) ** 2).sum()
    l2 = (x.reshape(x.shape[0], -1) ** 2).sum(dim=1).mean()
    value = cross_entropy + cfg.alpha_tv * total_variation(x) + cfg.alpha_l2 * l2 + cfg.alpha_bn * alignment
    return value, cross_entropy


def _evaluate(teacher, x, c, cfg, with_gradient):
    with torch.enable_grad():
        x = x.detach().requires_grad_(with_gradient)
        value, cross_entropy = recover_objective(teacher, x, c, cfg)
        gradient = torch.autograd.grad(value, x)[0] if with_gradient else None
    return float(value), float(cross_entropy), gradient


def recover_class(teacher, x, c, cfg, verbose=False):
    """
    Gradient descent with backtracking on one class batch: a step that would
    raise the objective is halved until it does not, so the objective never increases
    :param teacher: (Model) frozen teacher, eval mode
    :param x: (torch.Tensor) initial inputs of the class batch
    :param c: (int) class
    :param cfg: (DistillConfig) recover weights, iterations and step size
    :return: (torch.Tensor, list[dict]) optimized inputs and the per-iteration trace
    """
    step = cfg.recover_lr
    value, cross_entropy, gradient = _evaluate(teacher, x, c, cfg, True)
    trace = [{'class': c, 'iteration': 0, 'objective': value, 'cross_entropy': cross_entropy, 'step': step}]
    for it in tqdm(range(1, cfg.recover_iters + 1), disable=not verbose, desc='Recover class %d' % c):
        if not math.isfinite(value):
            raise DivergenceError('Recover objective is %s' % value, c, it, stage='class')
        while True:
            candidate = (x - step * gradient).clamp(0.0, 1.0)
            new_value, new_cross_entropy, _ = _evaluate(teacher, candidate, c, cfg, False)
            if new_value <= value or step < MIN_STEP:
                break
            step /= 2.0
        if new_value <= value:
            x = candidate
            value, cross_entropy, gradient = _evaluate(teacher, x, c, cfg, True)
        trace.append({'class': c, 'iteration': it, 'objective': value, 'cross_entropy': cross_entropy, 'step': step})
    return x.detach(), trace


def recover(teacher, ipc, cfg, rng, verbose=False):
    """
    Synthesizes ipc inputs per class from uniform noise against the frozen teacher
    :param teacher: (Model) trained teacher
    :param ipc: (int) samples per class
    :param cfg: (DistillConfig) recover settings
    :param rng: (Rng) random stream for the noise initialisation
    :return: (SyntheticSet) hard-labelled set whose trace holds the per-iteration objectives
    """
    assert ipc >= 1, 'ipc must be at least 1'
    teacher = teacher.copy().eval()
    for p in teacher.parameters():
        p.requires_grad_(False)
    num_classes = teacher.spec.num_classes
    inputs = rng.spawn('init').uniform(ipc * num_classes, *teacher.spec.input_shape)
    rows = []
    for c in range(num_classes):
        block = slice(c * ipc, (c + 1) * ipc)
        inputs[block], trace = recover_class(teacher, inputs[block], c, cfg, verbose=verbose)
        rows.extend(trace)
    provenance = {'method': cfg.method, 'config_hash': config_hash(cfg.to_dict()), 'seed': rng.seed}
    synthetic = SyntheticSet(inputs, SyntheticSet.class_labels(ipc, num_classes), ipc, num_classes, provenance)
    synthetic.trace = pd.DataFrame(rows, columns=['class', 'iteration', 'objective', 'cross_entropy', 'step'])
    return synthetic


def relabel(teacher, synthetic):
    """
    Replaces the labels of a synthetic set by softmax(teacher logits)
    :param teacher: (Model) trained teacher
    :param synthetic: (SyntheticSet) recovered set
    :return: (SyntheticSet) soft-labelled copy
    """
    with torch.no_grad(), teacher.evaluating():
        soft = torch.softmax(teacher.logits(synthetic.inputs), dim=1)
    soft = soft / soft.sum(dim=1, keepdim=True)
    return synthetic.with_labels(soft, relabelled=True)
