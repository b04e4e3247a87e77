import torch
from guard.attacks.attack import Attack, get_attack


class AutoLiteAttack(Attack):
    """
    Per-sample worst case over pgd, mim and square run with this spec's budget
    A misclassifying candidate beats any correctly classified one; among equals
    the highest loss wins. Components draw from the same streams they use on
    their own, so this attack is never weaker than the strongest of them.
    """
    nickname = 'auto-lite'
    components = ['pgd', 'mim', 'square']

    def stream(self, rng):
        return rng

    def run(self, model, x, y, rng):
        best = x.clone()
        best_wrong = torch.zeros(x.shape[0], dtype=torch.bool)
        best_loss = torch.full((x.shape[0],), float('-inf'), dtype=x.dtype)
        for family in self.components:
            candidate, flags = get_attack(self.spec.replace(family=family)).perturb(model, x, y, rng)
            with torch.no_grad():
                losses = model.sample_losses(candidate, y)
                wrong = (model.logits(candidate).argmax(dim=1) != y) & ~flags
            better = (wrong & ~best_wrong) | ((wrong == best_wrong) & (losses > best_loss))
            better &= ~flags
            best[better] = candidate[better]
            best_wrong = torch.where(better, wrong, best_wrong)
            best_loss = torch.where(better, losses, best_loss)
        return best
