"""
Training objectives

Each Objective turns a model and a batch into the scalar that training
minimises. They are looked up by nickname the same way attacks are.
"""
from abc import ABC, abstractmethod
import torch
from guard.curvature import RegularizerConfig, guard_loss, grad_penalty_loss
from guard.attacks import AttackSpec, perturb


class Objective(ABC):
    """
    The Objective abstract class is a template for training losses

    Attributes:
        regularizer: (RegularizerConfig) settings of the curvature / gradient penalties
        attack:      (AttackSpec) inner attack for adversarial training
    """
    nickname = None

    def __init__(self, regularizer=None, attack=None):
        self.regularizer = regularizer if regularizer is not None else RegularizerConfig()
        self.attack = attack if attack is not None else AttackSpec('pgd', eps=1.0 / 255, steps=10)

    def prepare(self, inputs):
        """
        Resolves data-dependent settings (h from the input scale) before training
        :param inputs: (torch.Tensor) training inputs
        """
        self.regularizer = self.regularizer.resolve(inputs)
        return self

    @abstractmethod
    def __call__(self, model, x, y, rng):
        """
        :param model: (Model) model in training mode
        :param x: (torch.Tensor) input batch
        :param y: (torch.Tensor) label batch
        :param rng: (Rng) stream for stochastic objectives
        :return: (torch.Tensor) 0-d loss
        """
        pass


class PlainObjective(Objective):
    nickname = 'plain'

    def __call__(self, model, x, y, rng):
        return model.loss(x, y)


class GuardObjective(Objective):
    """
    Cross-entropy plus the curvature penalty along the gradient direction
    """
    nickname = 'guard'

    def __call__(self, model, x, y, rng):
        return guard_loss(model, x, y, self.regularizer)


class GradPenaltyObjective(Objective):
    """
    Cross-entropy plus lambda_g times the squared input-gradient norm
    """
    nickname = 'grad-penalty'

    def __call__(self, model, x, y, rng):
        return grad_penalty_loss(model, x, y, self.regularizer)


class AdversarialObjective(Objective):
    """
    Cross-entropy on adversarial inputs crafted against the current model
    """
    nickname = 'adversarial'

    def __call__(self, model, x, y, rng):
        targets = y.argmax(dim=1) if torch.is_floating_point(y) else y
        x_adv, _ = perturb(model, x, targets, self.attack, rng)
        return model.loss(x_adv, y)


def get_objective(nickname, regularizer=None, attack=None):
    """
    Finds the Objective subclass with the given nickname
    :param nickname: (str) 'plain', 'guard', 'grad-penalty' or 'adversarial'
    """
    for objective in Objective.__subclasses__():
        if objective.nickname == nickname:
            return objective(regularizer=regularizer, attack=attack)
    raise AssertionError('Objective must be \'plain\', \'guard\', \'grad-penalty\' or \'adversarial\'')
