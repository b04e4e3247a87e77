import copy


class AttackSpec:
    """
    Description of one adversarial attack

    Attributes:
        family:   (str) fgsm | pgd | mim | cw-l2 | square | auto-lite | none
        norm:     (str) 'linf' or 'l2'
        eps:      (float) budget in input units
        steps:    (int) iterations of the iterative gradient families
        alpha:    (float) step size; None picks the family default (2.5 eps / steps for pgd)
        restarts: (int) random restarts (pgd)
        momentum: (float) decay factor mu (mim)
        c:        (float) weight of the margin term (cw-l2)
        cw_iters: (int) gradient steps of cw-l2
        cw_lr:    (float) learning rate of cw-l2
        queries:  (int) model queries of the square attack
        p_init:   (float) initial fraction of the input covered by a square
        lower:    (float) lower bound of valid inputs
        upper:    (float) upper bound of valid inputs
    """
    families = ['fgsm', 'pgd', 'mim', 'cw-l2', 'square', 'auto-lite', 'none']
    norms = ['linf', 'l2']

    def __init__(self, family='pgd', norm='linf', eps=1.0 / 255, steps=20, alpha=None, restarts=1, momentum=1.0,
                 c=1e-5, cw_iters=100, cw_lr=0.01, queries=100, p_init=0.05, lower=0.0, upper=1.0):
        assert family in self.families, 'Unknown attack family %s' % family
        assert norm in self.norms, 'norm must be \'linf\' or \'l2\''
        assert eps >= 0, 'eps must be non-negative'
        assert steps >= 1 and cw_iters >= 1 and queries >= 1, 'Iterative attacks need at least one step'
        assert restarts >= 1, 'restarts must be at least 1'
        assert alpha is None or alpha > 0, 'alpha must be positive'
        assert lower < upper, 'Input range must be non-empty'
        self.family = family
        self.norm = norm
        self.eps = float(eps)
        self.steps = int(steps)
        self.alpha = None if alpha is None else float(alpha)
        self.restarts = int(restarts)
        self.momentum = float(momentum)
        self.c = float(c)
        self.cw_iters = int(cw_iters)
        self.cw_lr = float(cw_lr)
        self.queries = int(queries)
        self.p_init = float(p_init)
        self.lower = float(lower)
        self.upper = float(upper)

    @property
    def name(self):
        """
        Label used in reports, e.g. 'pgd' or 'none'
        """
        return self.family

    def step_size(self, default_factor):
        if self.alpha is not None:
            return self.alpha
        return default_factor * self.eps / self.steps

    def replace(self, **changes):
        updated = copy.copy(self)
        for key, value in changes.items():
            assert hasattr(updated, key), 'Unknown attack setting %s' % key
            setattr(updated, key, value)
        return updated

    def to_dict(self):
        return {
            'family': self.family, 'norm': self.norm, 'eps': self.eps, 'steps': self.steps, 'alpha': self.alpha,
            'restarts': self.restarts, 'momentum': self.momentum, 'c': self.c, 'cw_iters': self.cw_iters,
            'cw_lr': self.cw_lr, 'queries': self.queries, 'p_init': self.p_init, 'lower': self.lower,
            'upper': self.upper,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def __repr__(self):
        return 'AttackSpec(%s)' % ', '.join('%s=%s' % (k, v) for k, v in self.to_dict().items())
