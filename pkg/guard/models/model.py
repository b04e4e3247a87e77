import contextlib
import copy
import torch
from guard.tensors import DTYPE, Rng, ops, write_container, read_container, ParseError
from guard.models.model_spec import ModelSpec
from guard.models.networks import build_network, initialize, batch_norm_layers
from guard.models.networks import frozen_statistics, recorded_batch_statistics

MODEL_MAGIC = b'GMDL'


class Model:
    """
    Model holds a ModelSpec together with the network built from it (parameters
    and batch-norm running statistics), and provides the loss used everywhere else

    Attributes:
        spec:    (ModelSpec) architecture description
        network: (nn.Module) MLP or ConvNetS
        loss_curve: (list[float]) per-epoch mean training loss of the fit that produced the model
    """
    def __init__(self, spec, rng=None):
        """
        Constructor for Model
        :param spec: (ModelSpec) architecture description
        :param rng: (Rng) stream used for weight initialisation (seed 0 if omitted)
        """
        self.spec = spec
        self.network = build_network(spec)
        initialize(self.network, rng if rng is not None else Rng(0))
        self.network.train()
        self.loss_curve = []

    def parameters(self):
        return list(self.network.parameters())

    @property
    def num_parameters(self):
        return sum(p.numel() for p in self.network.parameters())

    @property
    def training(self):
        return self.network.training

    def train(self):
        self.network.train()
        return self

    def eval(self):
        self.network.eval()
        return self

    @contextlib.contextmanager
    def evaluating(self):
        """
        Runs the block in eval mode and restores the previous mode afterwards
        """
        previous = self.network.training
        self.network.eval()
        try:
            yield self
        finally:
            self.network.train(previous)

    def frozen_statistics(self):
        return frozen_statistics(self.network)

    def recorded_batch_statistics(self):
        return recorded_batch_statistics(self.network)

    def batch_norm_layers(self):
        return batch_norm_layers(self.network)

    def _check_input(self, x):
        if tuple(x.shape[1:]) != self.spec.input_shape:
            raise ValueError('Input batch of shape %s does not match model input shape %s' % (
                tuple(x.shape), self.spec.input_shape))

    def logits(self, x):
        """
        :param x: (torch.Tensor) (B, *input_shape) inputs
        :return: (torch.Tensor) (B, C) class logits
        """
        self._check_input(x)
        return self.network(x)

    __call__ = logits

    def features(self, x):
        """
        Penultimate-layer activations, (B, k)
        """
        self._check_input(x)
        return self.network.features(x)

    def sample_losses(self, x, y):
        """
        Per-sample cross-entropy
        :param x: (torch.Tensor) (B, *input_shape) inputs
        :param y: (torch.Tensor) (B,) hard labels or (B, C) soft labels
        :return: (torch.Tensor) (B,) losses
        """
        logits = self.logits(x)
        if torch.is_floating_point(y):
            return ops.soft_cross_entropy(logits, y, reduction='none')
        return ops.softmax_cross_entropy(logits, y, reduction='none')

    def loss(self, x, y):
        """
        Mean cross-entropy over the batch (soft-label cross-entropy for soft labels)
        """
        return self.sample_losses(x, y).mean()

    def predict(self, x, batch_size=512):
        """
        :return: (torch.Tensor) (B,) predicted classes, computed in eval mode
        """
        predictions = []
        with torch.no_grad(), self.evaluating():
            for start in range(0, x.shape[0], batch_size):
                predictions.append(self.logits(x[start:start + batch_size]).argmax(dim=1))
        if not predictions:
            return torch.zeros(0, dtype=torch.long)
        return torch.cat(predictions)

    def accuracy(self, dataset):
        """
        Fraction of the dataset's samples classified correctly
        :param dataset: (Dataset) labelled data
        """
        if len(dataset) == 0:
            return 0.0
        predictions = self.predict(dataset.inputs)
        return float((predictions == dataset.hard_labels()).to(DTYPE).mean())

    def copy(self):
        return copy.deepcopy(self)

    def state(self):
        """
        Named parameter and buffer tensors, in a fixed order
        """
        return [(name, t.detach().clone()) for name, t in self.network.state_dict().items()]

    def save_model(self, path, extra=None):
        """
        Saves the model to a GMDL container
        :param path: (str) output file
        :param extra: (dict) additional header entries (config hash, seed, ...)
        """
        header = {'spec': self.spec.to_dict()}
        header.update(extra or {})
        write_container(path, MODEL_MAGIC, header, self.state())

    @classmethod
    def load_model(cls, path):
        """
        Loads a model from a GMDL container
        :param path: (str) GMDL file
        :return: (Model, dict) loaded model (eval mode) and the container header
        """
        header, blocks = read_container(path, MODEL_MAGIC)
        if 'spec' not in header:
            raise ParseError('GMDL header has no model spec', 12)
        model = cls(ModelSpec.from_dict(header['spec']))
        state = model.network.state_dict()
        loaded = dict(blocks)
        missing = [name for name in state if name not in loaded]
        if missing:
            raise ParseError('GMDL file is missing tensors: %s' % ', '.join(missing), 12)
        model.network.load_state_dict({name: loaded[name].to(state[name].dtype) for name in state})
        model.eval()
        return model, header


def init_model(spec, rng):
    """
    Builds a freshly initialised Model
    :param spec: (ModelSpec) architecture
    :param rng: (Rng) initialisation stream
    """
    return Model(spec, rng)
