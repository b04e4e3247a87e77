import torch
from guard.attacks.attack import Attack
from guard.attacks.utils import project, steepest_step, random_in_ball
from guard.tensors import flatten_rows


class NoAttack(Attack):
    """
    Identity attack; robust accuracy under it is clean accuracy
    """
    nickname = 'none'

    def run(self, model, x, y, rng):
        return x.clone()

    def perturb(self, model, x, y, rng):
        return x.clone(), torch.zeros(x.shape[0], dtype=torch.bool)


class FGSMAttack(Attack):
    """
    One steepest-ascent step of full size eps
    """
    nickname = 'fgsm'

    def run(self, model, x, y, rng):
        _, gradient = self.loss_and_gradient(model, x, y)
        return x + self.spec.eps * steepest_step(gradient, self.spec.norm)


class PGDAttack(Attack):
    """
    Projected gradient ascent from a random start, keeping the worst restart per sample
    """
    nickname = 'pgd'
    step_factor = 2.5

    def run(self, model, x, y, rng):
        alpha = self.spec.step_size(self.step_factor)
        best = x.clone()
        best_loss = torch.full((x.shape[0],), float('-inf'), dtype=x.dtype)
        for restart in range(self.spec.restarts):
            x_adv = project(x + random_in_ball(x, self.spec, rng), x, self.spec)
            for _ in range(self.spec.steps):
                _, gradient = self.loss_and_gradient(model, x_adv, y)
                x_adv = project(x_adv + alpha * steepest_step(gradient, self.spec.norm), x, self.spec)
            with torch.no_grad():
                losses = model.sample_losses(x_adv, y)
            improved = losses > best_loss
            best[improved] = x_adv[improved]
            best_loss = torch.where(improved, losses, best_loss)
        return best


class MIMAttack(Attack):
    """
    Momentum iterative attack: steps along the sign of an accumulated,
    L1-normalised gradient
    """
    nickname = 'mim'
    step_factor = 1.0

    def run(self, model, x, y, rng):
        alpha = self.spec.step_size(self.step_factor)
        x_adv = x.clone()
        accumulated = torch.zeros_like(x)
        for _ in range(self.spec.steps):
            _, gradient = self.loss_and_gradient(model, x_adv, y)
            l1 = flatten_rows(gradient).abs().sum(dim=1).clamp_min(1e-12)
            gradient = gradient / l1.reshape((-1,) + (1,) * (x.dim() - 1))
            accumulated = self.spec.momentum * accumulated + gradient
            x_adv = project(x_adv + alpha * steepest_step(accumulated, self.spec.norm), x, self.spec)
        return x_adv
