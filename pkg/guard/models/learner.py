import time
import torch
from tqdm import tqdm
from guard.tensors import Rng
from guard.models.data_iterator import DataIterator
from guard.models.objectives import PlainObjective


class DivergenceError(RuntimeError):
    """
    Raised when a training or distillation loss becomes non-finite

    Attributes:
        iteration: (int) epoch or outer iteration index
        step:      (int) batch or inner iteration index
    """
    def __init__(self, message, iteration, step=None, stage='epoch'):
        where = '%s %d' % (stage, iteration) if step is None else '%s %d, step %d' % (stage, iteration, step)
        super().__init__('%s (%s)' % (message, where))
        self.iteration = iteration
        self.step = step


def fold_single_sample(batches):
    """
    Merges a trailing one-sample batch into the batch before it
    :param batches: (list[tuple]) (inputs, labels) chunks in iteration order
    :return: (list[tuple]) chunks with at least 2 samples each, unless there is only one chunk
    """
    if len(batches) < 2 or batches[-1][0].shape[0] != 1:
        return batches
    (x1, y1), (x2, y2) = batches[-2], batches[-1]
    return batches[:-2] + [(torch.cat([x1, x2]), torch.cat([y1, y2]))]


class Learner:
    """
    Learner trains Models with SGD and momentum on a chosen Objective

    Attributes:
        objective:    (Objective) loss to minimise
        epochs:       (int) passes over the data
        lr:           (float) learning rate
        momentum:     (float) SGD momentum
        weight_decay: (float) L2 weight decay
        batch_size:   (int) samples per step
        decay_epochs: (int) step-decay period in epochs (None for a constant rate)
        decay_rate:   (float) multiplicative decay at each period
        loss_curve:   (list[float]) mean loss per epoch of the last fit
        step_times:   (list[float]) wall time in seconds of every optimizer step of the last fit
    """
    def __init__(self, objective=None, epochs=10, lr=0.01, momentum=0.9, weight_decay=0.0, batch_size=64,
                 decay_epochs=None, decay_rate=0.1, verbose=True):
        assert epochs >= 0, 'epochs must be non-negative'
        assert lr >= 0, 'learning rate must be non-negative'
        assert batch_size >= 1, 'batch size must be at least 1'
        self.objective = objective if objective is not None else PlainObjective()
        self.epochs = epochs
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.decay_epochs = decay_epochs
        self.decay_rate = decay_rate
        self.verbose = verbose
        self.loss_curve = []
        self.step_times = []

    def optimizer(self, model):
        return torch.optim.SGD(model.parameters(), lr=self.lr, momentum=self.momentum,
                               weight_decay=self.weight_decay)

    def fit(self, model, dataset, rng=None):
        """
        Trains a private copy of a model
        :param model: (Model) starting model (left unchanged)
        :param dataset: (Dataset) training data, hard or soft labels
        :param rng: (Rng) stream for shuffling and stochastic objectives
        :return: (Model) trained copy, in eval mode
        """
        rng = rng if rng is not None else Rng(0)
        model = model.copy().train()
        self.objective.prepare(dataset.inputs)
        optimizer = self.optimizer(model)
        scheduler = None
        if self.decay_epochs:
            scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=self.decay_epochs, gamma=self.decay_rate)
        self.loss_curve = []
        self.step_times = []

        for epoch in range(1, self.epochs + 1):
            epoch_rng = rng.spawn('epoch', epoch)
            epoch_losses = []
            batches = list(DataIterator(dataset.inputs, dataset.labels, n=self.batch_size,
                                        order=epoch_rng.permutation(len(dataset))))
            if model.batch_norm_layers():
                batches = fold_single_sample(batches)
            for step, (x, y) in enumerate(tqdm(batches, disable=not self.verbose, desc='Epoch %d' % epoch)):
                if x.shape[0] < 2 and model.batch_norm_layers():
                    if self.verbose:
                        print('Skipping a one-sample batch: batch norm needs at least 2 samples')
                    continue
                started = time.perf_counter()
                loss = self.objective(model, x, y, epoch_rng.spawn('step', step))
                if not bool(torch.isfinite(loss)):
                    raise DivergenceError('Training loss is %s' % float(loss), epoch, step)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                self.step_times.append(time.perf_counter() - started)
                epoch_losses.append(float(loss))
            if scheduler is not None:
                scheduler.step()
            average_loss = sum(epoch_losses) / max(len(epoch_losses), 1)
            self.loss_curve.append(average_loss)
            if self.verbose:
                print('Epoch {} average loss: {:.4f}'.format(epoch, average_loss))

        model.loss_curve = list(self.loss_curve)
        return model.eval()


def train(model, dataset, objective=None, epochs=10, lr=0.01, momentum=0.9, batch_size=64, rng=None, verbose=False):
    """
    Trains a copy of model on dataset and returns it with its per-epoch loss curve
    :return: (Model, list[float]) trained model and loss curve
    """
    learner = Learner(objective=objective, epochs=epochs, lr=lr, momentum=momentum, batch_size=batch_size,
                      verbose=verbose)
    trained = learner.fit(model, dataset, rng)
    return trained, learner.loss_curve
