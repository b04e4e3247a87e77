"""
Distilled datasets and their GSET container

GSET: container header {ipc, num_classes, method, config_hash, seed, soft}
followed by the 'inputs' and 'labels' GTEN blocks.
"""
import os
import numpy as np
import torch
from guard.tensors import DTYPE, ParseError, write_container, read_container
from guard.datasets import Dataset

SET_MAGIC = b'GSET'


class SyntheticSet:
    """
    A distilled dataset: ipc inputs per class, class-major order

    Attributes:
        inputs:      (torch.Tensor) (m, *input_shape) inputs in [0, 1]
        labels:      (torch.Tensor) (m,) hard labels or (m, C) soft labels
        ipc:         (int) samples per class
        num_classes: (int) class count C
        provenance:  (dict) method, config_hash and seed that produced the set
        trace:       (pd.DataFrame) optimisation trace of the producing step (not saved)
    """
    def __init__(self, inputs, labels, ipc, num_classes, provenance=None):
        inputs = torch.as_tensor(inputs).to(DTYPE)
        if inputs.shape[0] != ipc * num_classes:
            raise ValueError('A synthetic set with ipc %d and %d classes holds %d samples, got %d' % (
                ipc, num_classes, ipc * num_classes, inputs.shape[0]))
        self.inputs = inputs.detach().clamp(0.0, 1.0)
        self.labels = torch.as_tensor(labels)
        self.ipc = int(ipc)
        self.num_classes = int(num_classes)
        self.provenance = dict(provenance or {})
        self.trace = None
        self.to_dataset()

    @staticmethod
    def class_labels(ipc, num_classes):
        return torch.arange(num_classes).repeat_interleave(ipc)

    def __len__(self):
        return int(self.inputs.shape[0])

    @property
    def is_soft(self):
        return torch.is_floating_point(self.labels)

    def class_slice(self, c):
        return slice(c * self.ipc, (c + 1) * self.ipc)

    def to_dataset(self):
        """
        :return: (Dataset) the synthetic samples as a training set
        """
        return Dataset(self.inputs, self.labels, self.num_classes, 'train')

    def with_labels(self, labels, **provenance):
        updated = SyntheticSet(self.inputs, labels, self.ipc, self.num_classes, self.provenance)
        updated.provenance.update(provenance)
        return updated

    def save(self, path):
        """
        Writes the set to a GSET container
        :param path: (str) output file
        """
        header = {'ipc': self.ipc, 'num_classes': self.num_classes, 'soft': self.is_soft}
        header.update(self.provenance)
        write_container(path, SET_MAGIC, header, [('inputs', self.inputs), ('labels', self.labels.to(DTYPE))])

    @classmethod
    def load(cls, path):
        """
        Reads a GSET container
        :param path: (str) GSET file
        :return: (SyntheticSet)
        """
        header, blocks = read_container(path, SET_MAGIC)
        blocks = dict(blocks)
        for key in ['ipc', 'num_classes', 'soft']:
            if key not in header:
                raise ParseError('GSET header has no %s' % key, 12)
        if 'inputs' not in blocks or 'labels' not in blocks:
            raise ParseError('GSET file must hold inputs and labels', 12)
        labels = blocks['labels'] if header['soft'] else blocks['labels'].round().to(torch.long)
        provenance = {k: v for k, v in header.items() if k not in ['ipc', 'num_classes', 'soft']}
        return cls(blocks['inputs'], labels, header['ipc'], header['num_classes'], provenance)

    def dump_images(self, directory):
        """
        Writes one binary PPM (P6) per synthetic sample for visual inspection;
        single-channel and vector inputs are rendered in grey
        :param directory: (str) output directory (created if missing)
        :return: (list[str]) written files
        """
        os.makedirs(directory, exist_ok=True)
        paths = []
        for i, x in enumerate(self.inputs):
            image = x.numpy()
            if image.ndim == 1:
                image = image[None, None, :]
            elif image.ndim == 2:
                image = image[None]
            if image.shape[0] == 1:
                image = np.repeat(image, 3, axis=0)
            pixels = np.round(np.clip(image[:3], 0.0, 1.0) * 255).astype(np.uint8).transpose(1, 2, 0)
            path = os.path.join(directory, 'sample_%04d_class_%d.ppm' % (i, i // self.ipc))
            with open(path, 'wb') as f:
                f.write(b'P6\n')
                if 'config_hash' in self.provenance:
                    f.write(b'# config_hash %s\n' % str(self.provenance['config_hash']).encode('ascii'))
                f.write(b'%d %d\n255\n' % (pixels.shape[1], pixels.shape[0]))
                f.write(pixels.tobytes())
            paths.append(path)
        return paths
