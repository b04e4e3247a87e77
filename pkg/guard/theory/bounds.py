"""
Checks of the adversarial-loss bounds

For a loss l with gradient g and top Hessian eigenvalue lambda1 at x, the
maximum of the second-order model over the rho-ball is at most
l + rho ||g|| + 1/2 rho^2 lambda1 (per sample, and in expectation over a
class). For a distilled point x' whose features lie at distance sigma from
the class feature mean, the bound picks up an extra L sigma term, L being
the Lipschitz constant of the adversarial loss in feature space.
"""
import numpy as np
import torch
from guard.tensors import Rng
from guard.theory.trust_region import trust_region_max
from guard.theory.families import LossFamily, LogisticFamily, SoftmaxHeadFamily
from guard.theory.bound_report import BoundReport

MIN_SAMPLES = 30
TOLERANCE = 1e-9
ERROR_BARS = 3.0


def _tolerance(*values):
    return TOLERANCE * max([1.0] + [abs(float(v)) for v in values])


def _rows(x):
    if isinstance(x, torch.Tensor):
        x = x.detach().numpy()
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(x.shape[0], -1) if x.ndim > 1 else x.reshape(1, -1)


def _standard_error(values):
    return float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0


def per_sample_bound(q):
    """
    Compares the exact maximum of a quadratic model over its ball with
    loss + rho ||g|| + 1/2 rho^2 lambda1

    With lambda1 < 0 the literal bound can drop below the maximum (g = 0 and
    H negative definite leave the maximum at the loss itself). The bound
    with lambda1 clamped at 0 holds for every symmetric H and is asserted.
    :param q: (QuadModel) quadratic model and radius
    :return: (dict) exact, bound, clamped_bound, lambda1, violated (literal bound below the maximum)
    """
    exact, _ = trust_region_max(q)
    lambda1 = q.lambda1
    base = q.loss + q.rho * float(np.linalg.norm(q.g))
    bound = base + 0.5 * lambda1 * q.rho ** 2
    clamped = base + 0.5 * max(lambda1, 0.0) * q.rho ** 2
    assert clamped >= exact - _tolerance(exact, clamped), \
        'Adversarial value %.17g exceeds the curvature bound %.17g' % (exact, clamped)
    return {
        'exact': exact,
        'bound': bound,
        'clamped_bound': clamped,
        'lambda1': lambda1,
        'violated': bool(bound < exact - _tolerance(exact, bound)),
    }


def expectation_bound(family, x, rho):
    """
    Monte-Carlo estimate of both sides of
    E[adv(x)] <= E[l(x)] + rho E||g(x)|| + 1/2 rho^2 E[lambda1(x)]
    over the samples of one class, adv being the second-order adversarial loss
    :param family: (LossFamily) loss over flat inputs
    :param x: (np.ndarray) (n, d) class samples, n = 1 or n >= 30
    :param rho: (float) radius
    :return: (dict) lhs, rhs, their standard errors, the means, both bound terms, their ratio and violated
    """
    x = _rows(x)
    n = x.shape[0]
    assert n == 1 or n >= MIN_SAMPLES, 'Expectation bound needs one sample or at least %d' % MIN_SAMPLES
    adversarial = family.taylor_adversarial(x, rho)
    losses = family.loss(x)
    gradient_norms = family.gradient_norms(x)
    lambda1 = family.lambda1(x)
    bounds = losses + rho * gradient_norms + 0.5 * rho ** 2 * lambda1
    lhs = float(adversarial.mean())
    rhs = float(bounds.mean())
    gradient_term = float(rho * gradient_norms.mean())
    curvature_term = float(0.5 * rho ** 2 * lambda1.mean())
    error_bar = ERROR_BARS * _standard_error(bounds - adversarial)
    return {
        'samples': n,
        'lhs': lhs,
        'rhs': rhs,
        'lhs_se': _standard_error(adversarial),
        'rhs_se': _standard_error(bounds),
        'gap': rhs - lhs,
        'mean_loss': float(losses.mean()),
        'mean_gradient_norm': float(gradient_norms.mean()),
        'mean_lambda1': float(lambda1.mean()),
        'gradient_term': gradient_term,
        'curvature_term': curvature_term,
        'term_ratio': gradient_term / curvature_term if curvature_term > 0 else None,
        'violated': bool(lhs > rhs + error_bar + _tolerance(lhs, rhs)),
    }


def jensen_check(family, x, rho):
    """
    Jensen step for a convex adversarial loss: adv(E x) <= E adv(x)
    :param family: (LossFamily) family whose adversarial loss is convex
    :param x: (np.ndarray) (n, d) samples
    :param rho: (float) radius
    :return: (float) gap E adv(x) - adv(E x), non-negative up to round-off
    """
    if not family.convex:
        raise ValueError('Jensen check needs a convex adversarial loss; the %s family is not convex' % family.nickname)
    x = _rows(x)
    at_mean = float(family.adversarial(x.mean(axis=0, keepdims=True), rho)[0])
    return float(family.adversarial(x, rho).mean()) - at_mean


def estimate_lipschitz(family, anchors, radius, rho, rng, neighbours=16):
    """
    Largest observed |adv(a) - adv(b)| / ||a - b|| of the second-order
    adversarial loss, over pairs of anchors and over each anchor with random
    neighbours within the radius; a lower estimate, not a certificate
    :param anchors: (np.ndarray) (n, k) feature points
    :param radius: (float) neighbour distance scale
    :param rng: (Rng) stream for the neighbour draws
    """
    n, k = anchors.shape
    radius = radius if radius > 0 else 1.0
    directions = rng.normal(n, neighbours, k).numpy()
    directions /= np.maximum(np.linalg.norm(directions, axis=2, keepdims=True), 1e-12)
    lengths = radius * np.maximum(rng.uniform(n, neighbours, 1).numpy(), 1e-3)
    points = (anchors[:, None, :] + directions * lengths).reshape(-1, k)
    at_anchors = family.taylor_adversarial(anchors, rho)
    at_points = family.taylor_adversarial(points, rho).reshape(n, neighbours)
    ratios = [np.abs(at_points - at_anchors[:, None]) / lengths[..., 0]]
    distances = np.linalg.norm(anchors[:, None, :] - anchors[None, :, :], axis=2)
    apart = distances > 1e-12
    if apart.any():
        ratios.append(np.abs(at_anchors[:, None] - at_anchors[None, :])[apart] / distances[apart])
    return float(max(r.max() for r in ratios))


def _features(model, x):
    with torch.no_grad(), model.evaluating():
        return model.features(x).numpy()


def distilled_bound_slack(teacher, real, distilled, rho, c=None, rng=None, neighbours=16, report=None,
                          check='distilled'):
    """
    Evaluates both sides of adv(h(x')) <= E[l] + rho E||g|| + 1/2 rho^2 E[lambda1] + L sigma
    for each distilled point x' of one class, where h is the feature map,
    sigma = ||h(x') - mean h(x)|| and the expectations run over the real class samples

    A LossFamily teacher is taken with identity features. For a LogisticFamily
    L is computed exactly and violations are counted; for anything else L is
    estimated from sampled neighbours and the slack is only reported.
    A Model teacher contributes its penultimate features and its last linear layer.
    :param teacher: (LossFamily|Model) loss over features
    :param real: (np.ndarray|torch.Tensor) real samples of class c
    :param distilled: (np.ndarray|torch.Tensor) distilled points of class c
    :param rho: (float) radius
    :param c: (int) class, required for a Model teacher
    :param rng: (Rng) stream for the Lipschitz estimate
    :param report: (BoundReport) report to extend (a new one if omitted)
    :param check: (str) check name of the records
    :return: (BoundReport) with one record per distilled point
    """
    if isinstance(teacher, LossFamily):
        family = teacher
        real, distilled = _rows(real), _rows(distilled)
    else:
        assert c is not None, 'A model teacher needs the class of the samples'
        family = SoftmaxHeadFamily.from_model(teacher, c)
        real, distilled = _features(teacher, real), _features(teacher, distilled)
    expectation = expectation_bound(family, real, rho)
    centre = real.mean(axis=0)
    sigmas = np.linalg.norm(distilled - centre, axis=1)
    lhs = family.taylor_adversarial(distilled, rho)
    exact = isinstance(family, LogisticFamily)
    if exact:
        lipschitz = family.taylor_lipschitz(rho)
    else:
        spread = float(np.linalg.norm(real - centre, axis=1).mean())
        lipschitz = estimate_lipschitz(family, np.vstack([distilled, centre[None]]), max(spread, sigmas.max()), rho,
                                       rng if rng is not None else Rng(0, 'lipschitz'), neighbours)
    lambda1 = family.lambda1(distilled)
    rows = []
    for i in range(distilled.shape[0]):
        rhs = expectation['rhs'] + lipschitz * sigmas[i]
        rows.append({
            'index': i,
            'lhs': float(lhs[i]),
            'rhs': float(rhs),
            'slack': float(rhs - lhs[i]),
            'sigma': float(sigmas[i]),
            'lipschitz': lipschitz,
            'lambda1': float(lambda1[i]),
            'violated': bool(exact and rhs < lhs[i] - _tolerance(rhs, lhs[i])),
        })
    slack = np.array([row['slack'] for row in rows])
    summary = {
        'lipschitz': lipschitz,
        'lipschitz_kind': 'exact' if exact else 'estimate',
        'expectation_rhs': expectation['rhs'],
        'term_ratio': expectation['term_ratio'],
        'mean_sigma': float(sigmas.mean()) if len(sigmas) else 0.0,
        'mean_slack': float(slack.mean()) if len(slack) else 0.0,
        'positive_rate': float((slack >= 0).mean()) if len(slack) else 1.0,
    }
    key = check if c is None else '%s class %d' % (check, c)
    report = report if report is not None else BoundReport()
    return report.add(check, rows, summary=summary, summary_key=key)
