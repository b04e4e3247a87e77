"""
Gradient-matching distillation with the curvature-regularized real loss

For every fresh network initialisation (outer step) and every matching
round (inner step), each class's synthetic batch is moved so that its
parameter gradient matches the gradient of the regularized loss on a real
batch of the same class; the network then trains on the synthetic set.
"""
import pandas as pd
import torch
from tqdm import tqdm
from guard.config import config_hash
from guard.curvature import guard_loss, normalized_grad
from guard.models import init_model, DivergenceError
from guard.distill.matching import layer_distances, matching_distance
from guard.distill.synthetic_set import SyntheticSet


def real_initialisation(real, ipc, rng):
    """
    ipc random real samples per class, class-major
    :param real: (Dataset) real training data
    :param ipc: (int) samples per class
    :param rng: (Rng) random stream
    :return: (torch.Tensor) (ipc * C, ...) inputs
    """
    chunks = []
    for c in range(real.num_classes):
        indices = real.class_indices(c)
        if len(indices) < ipc:
            raise ValueError('Class %d has %d samples, fewer than ipc %d' % (c, len(indices), ipc))
        chunks.append(real.inputs[rng.spawn('class', c).choice(indices, ipc)])
    return torch.cat(chunks).clone()


def synthetic_direction(model, x_syn, y_syn):
    """
    One shared direction taken from the synthetic batch: the normalized mean
    of its per-sample normalized input gradients (zero if that mean vanishes)
    """
    z = normalized_grad(model, x_syn, y_syn).mean(dim=0)
    norm = float(z.norm())
    return torch.zeros_like(z) if norm < 1e-12 else z / norm


def real_gradients(model, x, y, regularizer, z=None):
    """
    Parameter gradient of the (regularized) real loss, detached
    """
    loss = guard_loss(model, x, y, regularizer, z=z)
    return [g.detach() for g in torch.autograd.grad(loss, model.parameters())], float(loss)


def class_distances(model, x_syn, y_syn, real_batches, cfg, regularizer):
    """
    Matching distance of every class for the current network
    :return: (list[torch.Tensor], int) per-class distances and the number of degenerate layers
    """
    distances = []
    degenerate = 0
    for c, (x_real, y_real) in enumerate(real_batches):
        block = slice(c * cfg.ipc, (c + 1) * cfg.ipc)
        xs, ys = x_syn[block], y_syn[block]
        z = synthetic_direction(model, xs.detach(), ys) if regularizer.direction_from_synthetic else None
        gT, _ = real_gradients(model, x_real, y_real, regularizer, z)
        gS = torch.autograd.grad(model.loss(xs, ys), model.parameters(), create_graph=True)
        _, flagged = layer_distances([g.detach() for g in gS], gT, cfg.distance)
        degenerate += len(flagged)
        distances.append(matching_distance(gS, gT, cfg.distance))
    return distances, degenerate


def dc_guard(real, spec, cfg, rng, verbose=False):
    """
    Distills real into ipc samples per class by gradient matching
    :param real: (Dataset) real training data, hard labels
    :param spec: (ModelSpec) matching network architecture
    :param cfg: (DistillConfig) method dc-guard or dc-plain
    :param rng: (Rng) random stream
    :param verbose: (bool) progress bars and status lines
    :return: (SyntheticSet) distilled set with provenance and a per-round trace
    """
    assert cfg.is_gradient_matching, 'dc_guard runs the dc-guard and dc-plain methods only'
    regularizer = cfg.matching_regularizer().resolve(real.inputs)
    labels = SyntheticSet.class_labels(cfg.ipc, real.num_classes)
    x_syn = real_initialisation(real, cfg.ipc, rng.spawn('init')).requires_grad_(True)
    syn_optimizer = torch.optim.SGD([x_syn], lr=cfg.lr_syn, momentum=cfg.syn_momentum)
    trace = []

    for k in tqdm(range(cfg.outer_steps), disable=not verbose, desc='Outer steps'):
        model = init_model(spec, rng.spawn('theta0', k)).train()
        net_optimizer = torch.optim.SGD(model.parameters(), lr=cfg.lr_net, momentum=cfg.net_momentum)
        for t in range(cfg.inner_steps):
            step_rng = rng.spawn('outer', k, 'inner', t)
            real_batches = []
            for c in range(real.num_classes):
                indices = real.class_indices(c)
                chosen = step_rng.spawn('real', c).choice(indices, min(cfg.batch_real, len(indices)))
                real_batches.append((real.inputs[chosen], real.labels[chosen]))

            for s in range(cfg.syn_steps):
                distances, degenerate = class_distances(model, x_syn, labels, real_batches, cfg, regularizer)
                total = torch.stack(distances).sum()
                if not bool(torch.isfinite(total)):
                    raise DivergenceError('Matching distance is %s' % float(total), k, t, stage='outer step')
                syn_optimizer.zero_grad()
                total.backward()
                syn_optimizer.step()
                with torch.no_grad():
                    x_syn.clamp_(0.0, 1.0)
                trace.append({'outer': k, 'inner': t, 'syn_step': s, 'distance': float(total),
                              'degenerate_layers': degenerate})

            for _ in range(cfg.net_steps):
                loss = model.loss(x_syn.detach(), labels)
                if not bool(torch.isfinite(loss)):
                    raise DivergenceError('Synthetic-set loss is %s' % float(loss), k, t, stage='outer step')
                net_optimizer.zero_grad()
                loss.backward()
                net_optimizer.step()
        if verbose:
            print('Outer step %d matching distance: %.4f' % (k, trace[-1]['distance']))

    provenance = {'method': cfg.method, 'config_hash': config_hash(cfg.to_dict()), 'seed': rng.seed}
    synthetic = SyntheticSet(x_syn.detach(), labels, cfg.ipc, real.num_classes, provenance)
    synthetic.trace = pd.DataFrame(trace, columns=['outer', 'inner', 'syn_step', 'distance', 'degenerate_layers'])
    return synthetic
