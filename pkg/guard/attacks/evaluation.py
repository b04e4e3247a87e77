import pandas as pd
import torch
from tqdm import tqdm
from guard.attacks.attack import get_attack
from guard.attacks.utils import perturbation_norm, invariant_violations


def perturb(model, x, y, spec, rng):
    """
    Adversarial inputs for one batch
    :param model: Model (switched to eval mode for the attack)
    :param x: (torch.Tensor) (B, ...) inputs in the valid range
    :param y: (torch.Tensor) (B,) hard labels
    :param spec: (AttackSpec) attack settings
    :param rng: (Rng) random stream
    :return: (torch.Tensor, torch.Tensor) adversarial inputs and per-sample non-finite flags
    """
    return get_attack(spec).perturb(model, x, y, rng)


def attack_dataset(model, dataset, spec, rng, batch_size=256, verbose=False):
    """
    Attacks every sample of a dataset, batch by batch
    A sample counts as robust only if it is classified correctly both before and
    after the attack, so robust accuracy never exceeds clean accuracy.
    :param model: Model
    :param dataset: (Dataset) labelled inputs
    :param spec: (AttackSpec) attack settings
    :param rng: (Rng) random stream; batch i draws from rng.spawn('batch', i)
    :param batch_size: (int) samples per attacked batch
    :param verbose: (bool) progress bar
    :return: (pd.DataFrame, dict) per-sample results (sample_id, family, success, final_loss,
        perturbation_norm, flagged, robust) and invariant violation counts
    """
    labels = dataset.hard_labels()
    rows = []
    violations = {'ball': 0, 'range': 0}
    batches = range(0, len(dataset), batch_size)
    for b, start in enumerate(tqdm(batches, disable=not verbose, desc=spec.family)):
        x = dataset.inputs[start:start + batch_size]
        y = labels[start:start + batch_size]
        x_adv, flags = perturb(model, x, y, spec, rng.spawn('batch', b))
        for key, count in invariant_violations(x, x_adv, spec).items():
            violations[key] += count
        with torch.no_grad(), model.evaluating():
            clean_correct = model.logits(x).argmax(dim=1) == y
            adv_logits = model.logits(x_adv)
            adv_correct = adv_logits.argmax(dim=1) == y
            losses = model.sample_losses(x_adv, y)
        robust = clean_correct & adv_correct & ~flags
        norms = perturbation_norm(x_adv, x, spec.norm)
        for i in range(x.shape[0]):
            rows.append({
                'sample_id': start + i,
                'family': spec.family,
                'success': not bool(robust[i]),
                'final_loss': float(losses[i]),
                'perturbation_norm': float(norms[i]),
                'flagged': bool(flags[i]),
                'robust': bool(robust[i]),
            })
    columns = ['sample_id', 'family', 'success', 'final_loss', 'perturbation_norm', 'flagged', 'robust']
    return pd.DataFrame(rows, columns=columns), violations


def robust_accuracy(model, dataset, spec, rng, batch_size=256, verbose=False):
    """
    Fraction of samples still classified correctly after the attack
    (clean accuracy when spec.family is 'none')
    :return: (float) accuracy in [0, 1]
    """
    if len(dataset) == 0:
        return 0.0
    results, _ = attack_dataset(model, dataset, spec, rng, batch_size=batch_size, verbose=verbose)
    return float(results['robust'].mean())
