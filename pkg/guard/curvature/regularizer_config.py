import copy


class RegularizerConfig:
    """
    Settings of the curvature regularizer and of the gradient-penalty ablation

    Attributes:
        lam:                      (float) curvature penalty weight (lambda)
        h:                        (float) discretization step in input units; None resolves to h_scale * input std
        h_scale:                  (float) multiplier used when h is resolved from data
        lam_g:                    (float) gradient-penalty weight
        zero_grad_policy:         (str) what z is when the input gradient vanishes ('zero')
        space:                    (str) 'input' (gradients w.r.t. the input) or 'parameter'
        stencil:                  (str) 'forward' difference of gradients or 'central' 4-point stencil
        direction_from_synthetic: (bool) in gradient matching, take z from the synthetic batch
    """
    zero_grad_policies = ['zero']
    spaces = ['input', 'parameter']
    stencils = ['forward', 'central']

    def __init__(self, lam=1.0, h=None, h_scale=0.1, lam_g=0.0, zero_grad_policy='zero', space='input',
                 stencil='forward', direction_from_synthetic=False):
        assert lam >= 0, 'lambda must be non-negative'
        assert h is None or h > 0, 'h must be positive'
        assert h_scale > 0, 'h_scale must be positive'
        assert lam_g >= 0, 'lambda_g must be non-negative'
        assert zero_grad_policy in self.zero_grad_policies, 'Unknown zero-gradient policy %s' % zero_grad_policy
        assert space in self.spaces, 'space must be \'input\' or \'parameter\''
        assert stencil in self.stencils, 'stencil must be \'forward\' or \'central\''
        self.lam = float(lam)
        self.h = None if h is None else float(h)
        self.h_scale = float(h_scale)
        self.lam_g = float(lam_g)
        self.zero_grad_policy = zero_grad_policy
        self.space = space
        self.stencil = stencil
        self.direction_from_synthetic = bool(direction_from_synthetic)

    @classmethod
    def full_scale(cls):
        """
        The preset tuned for 224x224 images: h = 3, lambda = 100
        """
        return cls(lam=100.0, h=3.0)

    @property
    def step(self):
        assert self.h is not None, 'Regularizer step h is unresolved; call resolve() with the training inputs'
        return self.h

    def resolve(self, inputs):
        """
        Returns a copy whose h is fixed, using h_scale * std(inputs) when h is unset
        :param inputs: (torch.Tensor) training inputs
        """
        resolved = self.replace()
        if resolved.h is None:
            resolved.h = max(self.h_scale * float(inputs.std()), 1e-8)
        return resolved

    def replace(self, **changes):
        updated = copy.copy(self)
        for key, value in changes.items():
            assert hasattr(updated, key), 'Unknown regularizer setting %s' % key
            setattr(updated, key, value)
        return updated

    def to_dict(self):
        return {
            'lam': self.lam, 'h': self.h, 'h_scale': self.h_scale, 'lam_g': self.lam_g,
            'zero_grad_policy': self.zero_grad_policy, 'space': self.space, 'stencil': self.stencil,
            'direction_from_synthetic': self.direction_from_synthetic,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def __repr__(self):
        return 'RegularizerConfig(%s)' % ', '.join('%s=%s' % (k, v) for k, v in self.to_dict().items())
