"""
Class for holding, slicing and writing labelled tensor datasets
"""
import hashlib
import numpy as np
import pandas as pd
import torch
from guard.tensors import DTYPE, check_finite

SOFT_LABEL_TOLERANCE = 1e-9


class Dataset:
    """
    The Dataset class holds inputs and labels for training, evaluation and distillation
    An instance of the Dataset class can be passed to a Learner, an attack evaluation
    or a distillation pipeline

    Attributes:
        inputs:      (torch.Tensor) (N, *input_shape) float64 inputs
        labels:      (torch.Tensor) (N,) hard class indices or (N, C) soft labels
        num_classes: (int) class count C
        split:       (str) 'train' or 'test'
    """
    splits = ['train', 'test']

    def __init__(self, inputs, labels, num_classes, split='train'):
        """
        Constructor for Dataset
        :param inputs: (torch.Tensor) (N, ...) inputs
        :param labels: (torch.Tensor) (N,) integer labels or (N, C) probability vectors
        :param num_classes: (int) class count
        :param split: (str) 'train' or 'test'
        """
        assert split in self.splits, 'split must be \'train\' or \'test\''
        assert num_classes >= 2, 'Class count must be at least 2'
        self.inputs = torch.as_tensor(inputs).to(DTYPE)
        labels = torch.as_tensor(labels)
        self.labels = labels.to(DTYPE) if torch.is_floating_point(labels) else labels.to(torch.long)
        self.num_classes = int(num_classes)
        self.split = split
        self._validate()

    def _validate(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError('Dataset has %d inputs but %d labels' % (self.inputs.shape[0], self.labels.shape[0]))
        check_finite(self.inputs, name='dataset inputs')
        if self.is_soft:
            if self.labels.dim() != 2 or self.labels.shape[1] != self.num_classes:
                raise ValueError('Soft labels must have shape (N, %d), got %s' % (
                    self.num_classes, tuple(self.labels.shape)))
            if bool((self.labels < 0).any()):
                raise ValueError('Soft labels must be non-negative')
            sums = self.labels.sum(dim=1)
            if len(sums) and float((sums - 1.0).abs().max()) > SOFT_LABEL_TOLERANCE:
                raise ValueError('Soft labels must sum to 1')
        else:
            if self.labels.dim() != 1:
                raise ValueError('Hard labels must be a vector, got shape %s' % (tuple(self.labels.shape),))
            if len(self.labels) and (int(self.labels.min()) < 0 or int(self.labels.max()) >= self.num_classes):
                raise ValueError('Labels must lie in [0, %d), found range [%d, %d]' % (
                    self.num_classes, int(self.labels.min()), int(self.labels.max())))

    def __len__(self):
        return int(self.inputs.shape[0])

    @property
    def is_soft(self):
        return torch.is_floating_point(self.labels)

    @property
    def input_shape(self):
        return tuple(self.inputs.shape[1:])

    def hard_labels(self):
        """
        Class indices (argmax for soft labels)
        """
        if self.is_soft:
            return self.labels.argmax(dim=1)
        return self.labels

    def class_indices(self, c):
        """
        :param c: (int) class
        :return: (torch.Tensor) indices of the samples of class c, ascending
        """
        return torch.nonzero(self.hard_labels() == c, as_tuple=False).flatten()

    def class_counts(self):
        return [len(self.class_indices(c)) for c in range(self.num_classes)]

    def subset(self, indices, split=None):
        """
        :param indices: (torch.Tensor|list[int]) rows to keep, in order
        :param split: (str) split tag of the result (defaults to this dataset's)
        :return: (Dataset) the selected rows
        """
        indices = torch.as_tensor(indices, dtype=torch.long)
        return Dataset(self.inputs[indices], self.labels[indices], self.num_classes, split or self.split)

    def with_labels(self, labels):
        return Dataset(self.inputs, labels, self.num_classes, self.split)

    def head(self, n):
        return self.subset(torch.arange(min(n, len(self))))

    def to_frame(self):
        """
        One row per sample: flattened input columns x0..x{d-1} then the label column(s)
        """
        flat = self.inputs.reshape(len(self), -1).numpy()
        frame = pd.DataFrame(flat, columns=['x%d' % i for i in range(flat.shape[1])])
        if self.is_soft:
            for c in range(self.num_classes):
                frame['p%d' % c] = self.labels[:, c].numpy()
        else:
            frame['label'] = self.labels.numpy()
        return frame

    def write_file(self, output_file):
        """
        Writes the dataset as a csv file (flattened inputs plus labels)
        :param output_file: (str) path of the csv to write
        """
        self.to_frame().to_csv(output_file, index=False)

    def print_stats(self):
        """
        Prints stats about the current Dataset, including the number of samples
        and the number of samples per class (and percentages)
        """
        counts = self.class_counts()
        print('\n******************************************************************************************\n')
        print('Dataset Stats (%s split):\n' % self.split)
        print('Total samples: %d' % len(self))
        print('Input shape: %s\tInput range: [%.4f, %.4f]' % (
            self.input_shape, float(self.inputs.min()) if len(self) else 0.0,
            float(self.inputs.max()) if len(self) else 0.0))
        print('Number of Classes: %d\t(%s labels)\n' % (self.num_classes, 'soft' if self.is_soft else 'hard'))
        print('Label Stats:')
        for c, count in enumerate(counts):
            percent = 100 * (count / len(self)) if len(self) else 0.0
            print('\tLabel: %d\t\tNumber of Instances: %d\t\tPercent of Instances: %.2f%%' % (c, count, percent))
        print('\n******************************************************************************************\n')

    def fingerprint(self):
        """
        Short content hash of inputs and labels
        """
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.inputs.numpy(), dtype='<f8').tobytes())
        digest.update(np.ascontiguousarray(self.labels.numpy()).tobytes())
        return digest.hexdigest()[:16]
