import torch
from guard.attacks.attack import Attack
from guard.attacks.utils import margins
from guard.tensors import flatten_rows

TANH_CLAMP = 1.0 - 1e-6


class CWL2Attack(Attack):
    """
    Carlini-Wagner L2 attack with a fixed margin weight c (no search over c),
    solved by gradient descent on the tanh-reparameterised input for a fixed
    number of iterations; the closest misclassified iterate is kept
    """
    nickname = 'cw-l2'
    confidence = 0.0

    def _to_box(self, w):
        return self.spec.lower + (self.spec.upper - self.spec.lower) * (torch.tanh(w) + 1.0) / 2.0

    def run(self, model, x, y, rng):
        scaled = (x - self.spec.lower) / (self.spec.upper - self.spec.lower) * 2.0 - 1.0
        w = torch.atanh(scaled.clamp(-TANH_CLAMP, TANH_CLAMP)).detach().requires_grad_(True)
        optimizer = torch.optim.SGD([w], lr=self.spec.cw_lr)
        best = x.clone()
        best_distance = torch.full((x.shape[0],), float('inf'), dtype=x.dtype)
        for _ in range(self.spec.cw_iters):
            with torch.enable_grad():
                x_adv = self._to_box(w)
                distance = (flatten_rows(x_adv - x) ** 2).sum(dim=1)
                margin = margins(model, x_adv, y)
                objective = (distance + self.spec.c * margin.clamp_min(-self.confidence)).sum()
                optimizer.zero_grad()
                objective.backward()
            with torch.no_grad():
                better = (margin < 0) & (distance < best_distance)
                best[better] = x_adv.detach()[better]
                best_distance = torch.where(better, distance.detach(), best_distance)
            optimizer.step()
        with torch.no_grad():
            final = self._to_box(w)
        unsolved = torch.isinf(best_distance)
        best[unsolved] = final[unsolved]
        return best
