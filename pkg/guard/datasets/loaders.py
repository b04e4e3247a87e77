"""
Dataset loaders

Synthetic generators (two-moons, gauss-mix, tiny-digits) and file readers
(idx-file, csv-file). Every loader returns a deterministic stratified
train/test split for a given random stream, with inputs scaled to [0, 1].
"""
from abc import ABC, abstractmethod
import numpy as np
import pandas as pd
import torch
from sklearn.datasets import make_moons
from sklearn.model_selection import train_test_split
from guard.tensors import ParseError, Rng
from guard.datasets.dataset import Dataset
from guard.datasets.utils import find_file, read_idx, line_offset, scale_unit

# 5x7 glyphs rendered into tiny-digits images
DIGIT_GLYPHS = [
    ['01110', '10001', '10011', '10101', '11001', '10001', '01110'],
    ['00100', '01100', '00100', '00100', '00100', '00100', '01110'],
    ['01110', '10001', '00001', '00010', '00100', '01000', '11111'],
    ['11111', '00010', '00100', '00010', '00001', '10001', '01110'],
    ['00010', '00110', '01010', '10010', '11111', '00010', '00010'],
    ['11111', '10000', '11110', '00001', '00001', '10001', '01110'],
    ['00110', '01000', '10000', '11110', '10001', '10001', '01110'],
    ['11111', '00001', '00010', '00100', '01000', '01000', '01000'],
    ['01110', '10001', '10001', '01110', '10001', '10001', '01110'],
    ['01110', '10001', '10001', '01111', '00001', '00010', '01100'],
]


def seed_from(rng):
    """
    Integer seed for sklearn routines, drawn from a random stream
    """
    return int(rng.randint(2 ** 31 - 1, (1,))[0])


class Loader(ABC):
    """
    The Loader abstract class builds train and test Datasets

    Attributes:
        test_fraction: (float) share of samples held out for the test split
        num_classes:   (int) expected class count (None to infer)
    """
    nickname = None

    def __init__(self, test_fraction=0.2, num_classes=None):
        assert 0 < test_fraction < 1, 'test_fraction must lie strictly between 0 and 1'
        self.test_fraction = test_fraction
        self.num_classes = num_classes

    @abstractmethod
    def generate(self, rng):
        """
        Produces every sample before splitting
        :param rng: (Rng) random stream
        :return: (np.ndarray, np.ndarray) inputs in [0, 1] and integer labels
        """
        pass

    def class_count(self, labels):
        found = int(labels.max()) + 1 if len(labels) else 0
        if self.num_classes is None:
            return max(found, 2)
        if found > self.num_classes:
            raise ValueError('Class-count mismatch: labels reach %d but num_classes is %d' % (found - 1,
                                                                                              self.num_classes))
        return self.num_classes

    def split(self, inputs, labels, rng):
        """
        Stratified deterministic train/test split
        :return: (Dataset, Dataset) train and test
        """
        num_classes = self.class_count(labels)
        indices = np.arange(len(labels))
        train_indices, test_indices = train_test_split(
            indices, test_size=self.test_fraction, stratify=labels, random_state=seed_from(rng))
        train_indices.sort()
        test_indices.sort()
        inputs = torch.from_numpy(np.ascontiguousarray(inputs, dtype=np.float64))
        labels = torch.from_numpy(np.ascontiguousarray(labels, dtype=np.int64))
        train = Dataset(inputs[train_indices], labels[train_indices], num_classes, 'train')
        test = Dataset(inputs[test_indices], labels[test_indices], num_classes, 'test')
        return train, test

    def load(self, rng):
        """
        :param rng: (Rng) random stream (generation and split use separate children)
        :return: (Dataset, Dataset) train and test
        """
        inputs, labels = self.generate(rng.spawn('generate'))
        return self.split(inputs, labels, rng.spawn('split'))


class TwoMoonsLoader(Loader):
    nickname = 'two-moons'

    def __init__(self, n=1000, noise=0.1, test_fraction=0.2, num_classes=None):
        super(TwoMoonsLoader, self).__init__(test_fraction, num_classes)
        assert n >= 4, 'two-moons needs at least 4 samples'
        self.n = n
        self.noise = noise

    def generate(self, rng):
        inputs, labels = make_moons(n_samples=self.n, noise=self.noise, random_state=seed_from(rng))
        return scale_unit(inputs), labels


class GaussMixLoader(Loader):
    """
    Isotropic Gaussian clusters whose centres sit on a circle in the first two
    coordinates, so with zero noise the classes are linearly separable
    """
    nickname = 'gauss-mix'

    def __init__(self, n=1000, classes=3, dim=2, noise=0.1, spread=1.0, test_fraction=0.2, num_classes=None):
        super(GaussMixLoader, self).__init__(test_fraction, num_classes)
        assert classes >= 2, 'gauss-mix needs at least 2 classes'
        assert dim >= 2, 'gauss-mix needs at least 2 dimensions'
        assert noise >= 0, 'noise must be non-negative'
        self.n = n
        self.classes = classes
        self.dim = dim
        self.noise = noise
        self.spread = spread

    def generate(self, rng):
        angles = 2 * np.pi * np.arange(self.classes) / self.classes + float(rng.uniform(1)) * 2 * np.pi
        centres = (self.spread * rng.normal(self.classes, self.dim)).numpy()
        centres[:, 0] = self.spread * np.cos(angles)
        centres[:, 1] = self.spread * np.sin(angles)
        labels = np.arange(self.n) % self.classes
        inputs = centres[labels] + self.noise * rng.normal(self.n, self.dim).numpy()
        return scale_unit(inputs), labels


class TinyDigitsLoader(Loader):
    """
    Digit-like images rendered from 5x7 glyph prototypes with random
    intensity, a one-pixel jitter and additive Gaussian noise
    """
    nickname = 'tiny-digits'

    def __init__(self, n=1000, size=8, noise=0.1, classes=10, jitter=True, test_fraction=0.2, num_classes=None):
        super(TinyDigitsLoader, self).__init__(test_fraction, num_classes)
        assert size in [8, 16], 'tiny-digits size must be 8 or 16'
        assert 2 <= classes <= 10, 'tiny-digits has between 2 and 10 classes'
        self.n = n
        self.size = size
        self.noise = noise
        self.classes = classes
        self.jitter = jitter

    def prototypes(self):
        """
        :return: (np.ndarray) (classes, size, size) clean glyph images
        """
        scale = self.size // 8
        images = np.zeros((self.classes, self.size, self.size))
        for c in range(self.classes):
            glyph = np.array([[float(p) for p in row] for row in DIGIT_GLYPHS[c]])
            glyph = np.kron(glyph, np.ones((scale, scale)))
            top = (self.size - glyph.shape[0]) // 2
            left = (self.size - glyph.shape[1]) // 2
            images[c, top:top + glyph.shape[0], left:left + glyph.shape[1]] = glyph
        return images

    def generate(self, rng):
        prototypes = torch.from_numpy(self.prototypes())
        labels = np.arange(self.n) % self.classes
        images = prototypes[torch.from_numpy(labels)]
        intensity = rng.uniform(self.n, 1, 1, low=0.7, high=1.0)
        images = images * intensity
        if self.jitter:
            shifts = rng.randint(3, (self.n, 2)) - 1
            images = torch.stack([torch.roll(image, shifts=(int(s[0]), int(s[1])), dims=(0, 1))
                                  for image, s in zip(images, shifts)])
        images = images + self.noise * rng.normal(self.n, self.size, self.size)
        images = images.clamp(0.0, 1.0).unsqueeze(1)
        return images.numpy(), labels


class IdxFileLoader(Loader):
    """
    Reads images and labels from IDX files; optional separate test files
    replace the random split
    """
    nickname = 'idx-file'

    def __init__(self, images, labels, test_images=None, test_labels=None, test_fraction=0.2, num_classes=None):
        super(IdxFileLoader, self).__init__(test_fraction, num_classes)
        self.images = images
        self.labels = labels
        self.test_images = test_images
        self.test_labels = test_labels

    @staticmethod
    def read_pair(images_path, labels_path):
        images = read_idx(images_path)
        labels = read_idx(labels_path)
        if labels.ndim != 1:
            raise ParseError('IDX labels in %s must have rank 1' % labels_path, 3)
        if images.shape[0] != labels.shape[0]:
            raise ValueError('%s holds %d images but %s holds %d labels' % (
                images_path, images.shape[0], labels_path, labels.shape[0]))
        if images.ndim == 3:
            images = images[:, None, :, :]
        if images.dtype == np.dtype('>u1'):
            images = images.astype(np.float64) / 255.0
        else:
            images = scale_unit(images)
        return images, labels.astype(np.int64)

    def generate(self, rng):
        return self.read_pair(self.images, self.labels)

    def load(self, rng):
        if self.test_images is None:
            return super(IdxFileLoader, self).load(rng)
        train_inputs, train_labels = self.read_pair(self.images, self.labels)
        test_inputs, test_labels = self.read_pair(self.test_images, self.test_labels)
        num_classes = self.class_count(np.concatenate([train_labels, test_labels]))
        return (Dataset(torch.from_numpy(train_inputs), torch.from_numpy(train_labels), num_classes, 'train'),
                Dataset(torch.from_numpy(test_inputs), torch.from_numpy(test_labels), num_classes, 'test'))


class CsvFileLoader(Loader):
    """
    Reads a csv with one numeric column per feature and an integer label column
    """
    nickname = 'csv-file'

    def __init__(self, path, label_column='label', scale=True, test_fraction=0.2, num_classes=None):
        super(CsvFileLoader, self).__init__(test_fraction, num_classes)
        self.path = path
        self.label_column = label_column
        self.scale = scale

    def generate(self, rng):
        path = find_file(self.path)
        try:
            table = pd.read_csv(path)
        except pd.errors.ParserError as e:
            raise ParseError('Malformed csv %s: %s' % (self.path, e), 0)
        if self.label_column not in table.columns:
            raise ParseError('Label column \'%s\' missing from %s' % (self.label_column, self.path), 0)
        numeric = table.apply(pd.to_numeric, errors='coerce')
        bad_rows = np.flatnonzero(numeric.isnull().any(axis=1).to_numpy())
        if len(bad_rows):
            row = int(bad_rows[0])
            raise ParseError('Non-numeric or missing value in row %d of %s' % (row + 1, self.path),
                             line_offset(path, row + 1))
        labels = numeric[self.label_column].to_numpy()
        fractional = np.flatnonzero((labels != np.round(labels)) | (labels < 0))
        if len(fractional):
            row = int(fractional[0])
            raise ParseError('Label in row %d of %s is not a class index' % (row + 1, self.path),
                             line_offset(path, row + 1))
        inputs = numeric.drop(columns=[self.label_column]).to_numpy(dtype=np.float64)
        if self.scale:
            inputs = scale_unit(inputs)
        elif len(inputs) and (inputs.min() < 0 or inputs.max() > 1):
            raise ValueError('Unscaled csv inputs must already lie in [0, 1]')
        return inputs, labels.astype(np.int64)


def _all_subclasses(cls):
    for subclass in cls.__subclasses__():
        yield subclass
        yield from _all_subclasses(subclass)


def load_dataset(name, params=None, rng=None):
    """
    Loads one of the named datasets
    :param name: (str) 'two-moons', 'gauss-mix', 'tiny-digits', 'idx-file' or 'csv-file'
    :param params: (dict) loader keyword arguments
    :param rng: (Rng) random stream for generation and splitting
    :return: (Dataset, Dataset) train and test splits
    """
    rng = rng if rng is not None else Rng(0)
    for loader in _all_subclasses(Loader):
        if loader.nickname == name:
            return loader(**(params or {})).load(rng)
    raise AssertionError('Dataset must be \'two-moons\', \'gauss-mix\', \'tiny-digits\', \'idx-file\' or \'csv-file\'')
