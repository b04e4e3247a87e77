import copy
from guard.config import ConfigError
from guard.curvature import RegularizerConfig
from guard.attacks import AttackSpec


class DistillConfig:
    """
    Settings of a distillation pipeline

    Attributes:
        method:             (str) dc-guard | dc-plain | squeeze-recover-relabel | srl-plain | adv-squeeze
                            | srl-grad-penalty
        ipc:                (int) synthetic samples per class
        outer_steps:        (int) K, fresh network initialisations (gradient matching)
        inner_steps:        (int) T, matching rounds per initialisation
        lr_syn:             (float) eta_S, synthetic-input learning rate
        lr_net:             (float) eta_theta, network learning rate on the synthetic set
        syn_steps:          (int) varsigma_S, synthetic updates per inner round
        net_steps:          (int) varsigma_theta, network updates per inner round
        syn_momentum:       (float) momentum of the synthetic-input optimizer
        net_momentum:       (float) momentum of the inner network optimizer
        batch_real:         (int) real samples per class and round
        distance:           (str) 'layerwise-cosine' or 'euclidean'
        regularizer:        (RegularizerConfig) curvature / gradient penalty settings
        attack:             (AttackSpec) inner attack of adv-squeeze
        squeeze_epochs:     (int) teacher training epochs
        squeeze_lr:         (float) teacher learning rate
        squeeze_batch_size: (int) teacher batch size
        squeeze_momentum:   (float) teacher SGD momentum
        decay_epochs:       (int) teacher step-decay period (None for constant)
        alpha_tv:           (float) total-variation weight of recover
        alpha_l2:           (float) l2 weight of recover
        alpha_bn:           (float) batch-norm statistic alignment weight of recover
        recover_iters:      (int) recover iterations per class
        recover_lr:         (float) initial recover step size
        relabel:            (bool) replace hard labels by teacher soft labels
    """
    dc_methods = ['dc-guard', 'dc-plain']
    squeeze_objectives = {
        'squeeze-recover-relabel': 'guard',
        'srl-plain': 'plain',
        'adv-squeeze': 'adversarial',
        'srl-grad-penalty': 'grad-penalty',
    }
    methods = dc_methods + list(squeeze_objectives)
    distances = ['layerwise-cosine', 'euclidean']

    def __init__(self, method='dc-guard', ipc=10, outer_steps=10, inner_steps=10, lr_syn=0.1, lr_net=0.01,
                 syn_steps=1, net_steps=1, syn_momentum=0.5, net_momentum=0.5, batch_real=64,
                 distance='layerwise-cosine', regularizer=None, attack=None, squeeze_epochs=30, squeeze_lr=0.025,
                 squeeze_batch_size=64, squeeze_momentum=0.9, decay_epochs=None, alpha_tv=1e-3, alpha_l2=1e-4,
                 alpha_bn=0.01, recover_iters=200, recover_lr=0.1, relabel=True):
        if method not in self.methods:
            raise ConfigError('unknown method %s' % method, 'distill.method')
        if distance not in self.distances:
            raise ConfigError('must be \'layerwise-cosine\' or \'euclidean\'', 'distill.distance')
        for key, value in [('ipc', ipc), ('outer_steps', outer_steps), ('inner_steps', inner_steps),
                           ('syn_steps', syn_steps), ('net_steps', net_steps), ('batch_real', batch_real),
                           ('squeeze_batch_size', squeeze_batch_size)]:
            if value < 1:
                raise ConfigError('must be at least 1, got %s' % value, 'distill.' + key)
        for key, value in [('lr_net', lr_net), ('squeeze_lr', squeeze_lr), ('recover_lr', recover_lr)]:
            if value <= 0:
                raise ConfigError('must be positive, got %s' % value, 'distill.' + key)
        if lr_syn < 0:
            raise ConfigError('must be non-negative, got %s' % lr_syn, 'distill.lr_syn')
        if recover_iters < 0 or squeeze_epochs < 0:
            raise ConfigError('iteration counts must be non-negative', 'distill')
        self.method = method
        self.ipc = int(ipc)
        self.outer_steps = int(outer_steps)
        self.inner_steps = int(inner_steps)
        self.lr_syn = float(lr_syn)
        self.lr_net = float(lr_net)
        self.syn_steps = int(syn_steps)
        self.net_steps = int(net_steps)
        self.syn_momentum = float(syn_momentum)
        self.net_momentum = float(net_momentum)
        self.batch_real = int(batch_real)
        self.distance = distance
        self.regularizer = regularizer if regularizer is not None else RegularizerConfig()
        self.attack = attack if attack is not None else AttackSpec('pgd', eps=1.0 / 255, steps=10)
        self.squeeze_epochs = int(squeeze_epochs)
        self.squeeze_lr = float(squeeze_lr)
        self.squeeze_batch_size = int(squeeze_batch_size)
        self.squeeze_momentum = float(squeeze_momentum)
        self.decay_epochs = decay_epochs
        self.alpha_tv = float(alpha_tv)
        self.alpha_l2 = float(alpha_l2)
        self.alpha_bn = float(alpha_bn)
        self.recover_iters = int(recover_iters)
        self.recover_lr = float(recover_lr)
        self.relabel = bool(relabel)

    @property
    def is_gradient_matching(self):
        return self.method in self.dc_methods

    @property
    def squeeze_objective(self):
        """
        Objective nickname the squeeze step trains the teacher with
        """
        if self.method not in self.squeeze_objectives:
            raise ConfigError('%s is not a squeeze-recover-relabel method' % self.method, 'distill.method')
        return self.squeeze_objectives[self.method]

    def matching_regularizer(self):
        """
        Regularizer used on the real-data loss of gradient matching (lambda = 0 for dc-plain)
        """
        if self.method == 'dc-plain':
            return self.regularizer.replace(lam=0.0)
        return self.regularizer

    def replace(self, **changes):
        updated = copy.copy(self)
        for key, value in changes.items():
            assert hasattr(updated, key), 'Unknown distillation setting %s' % key
            setattr(updated, key, value)
        return updated

    def to_dict(self):
        d = {key: value for key, value in self.__dict__.items() if key not in ['regularizer', 'attack']}
        d['regularizer'] = self.regularizer.to_dict()
        d['attack'] = self.attack.to_dict()
        return d

    @classmethod
    def from_dict(cls, d, regularizer=None, attack=None):
        """
        :param d: (dict) distill section (may embed 'regularizer' and 'attack' sections)
        :param regularizer: (dict) regularizer section, used when d has none
        :param attack: (dict) attack section, used when d has none
        """
        d = dict(d)
        regularizer = d.pop('regularizer', regularizer)
        attack = d.pop('attack', attack)
        try:
            return cls(regularizer=RegularizerConfig.from_dict(regularizer) if regularizer is not None else None,
                       attack=AttackSpec.from_dict(attack) if attack is not None else None, **d)
        except TypeError as e:
            raise ConfigError(str(e), 'distill')

    def __repr__(self):
        return 'DistillConfig(method=%s, ipc=%d)' % (self.method, self.ipc)
