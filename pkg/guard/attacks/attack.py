"""
Attacks perturb a batch of inputs inside an eps-ball to raise a model's loss

Every Attack subclass declares a nickname (the AttackSpec family it
implements) and is found through Attack.__subclasses__(), so adding a family
means adding a subclass.
"""
from abc import ABC, abstractmethod
import torch
from guard.attacks.utils import project
from guard.curvature import input_gradients


class Attack(ABC):
    """
    The Attack abstract class describes what every attack family provides

    Attributes:
        spec: (AttackSpec) family, norm, budget and step settings
    """
    nickname = None  # AttackSpec family this attack implements

    def __init__(self, spec):
        """
        Standard constructor for all attacks
        :param spec: (AttackSpec) attack settings
        """
        assert spec.family == self.nickname, 'Spec family %s given to %s attack' % (spec.family, self.nickname)
        self.spec = spec

    @abstractmethod
    def run(self, model, x, y, rng):
        """
        Produces adversarial inputs; the caller projects and validates them
        :param model: Model in eval mode
        :param x: (torch.Tensor) (B, ...) clean inputs
        :param y: (torch.Tensor) (B,) hard labels
        :param rng: (Rng) stream owned by this attack
        :return: (torch.Tensor) adversarial inputs shaped like x
        """
        pass

    def stream(self, rng):
        """
        Stream the attack draws from; each family gets its own child stream
        """
        return rng.spawn(self.nickname)

    def perturb(self, model, x, y, rng):
        """
        Runs the attack in eval mode and enforces ball and range containment
        Samples whose logits are non-finite are returned unperturbed and flagged.
        :return: (torch.Tensor, torch.Tensor) adversarial inputs and (B,) bool flags
        """
        flags = torch.zeros(x.shape[0], dtype=torch.bool)
        if self.spec.eps == 0 or x.shape[0] == 0:
            return x.clone(), flags
        with model.evaluating():
            with torch.no_grad():
                flags |= ~torch.isfinite(model.logits(x)).all(dim=1)
            x_adv = project(self.run(model, x, y, self.stream(rng)).detach(), x, self.spec)
            with torch.no_grad():
                flags |= ~torch.isfinite(model.logits(x_adv)).all(dim=1)
        if bool(flags.any()):
            x_adv[flags] = x[flags]
        return x_adv, flags

    @staticmethod
    def loss_and_gradient(model, x_adv, y):
        return input_gradients(model, x_adv, y)


def _all_subclasses(cls):
    for sub in cls.__subclasses__():
        yield sub
        yield from _all_subclasses(sub)


def get_attack(spec):
    """
    Finds the Attack subclass whose nickname matches spec.family
    :param spec: (AttackSpec) attack settings
    :return: (Attack) attack instance
    """
    for attack in _all_subclasses(Attack):
        if attack.nickname == spec.family:
            return attack(spec)
    raise AssertionError('No attack implements family %s' % spec.family)
