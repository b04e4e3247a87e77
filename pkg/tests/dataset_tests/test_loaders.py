import struct
import numpy as np
import pytest
import torch
from guard.tensors import Rng
from guard.datasets import load_dataset, read_idx, ParseError, IdxFileLoader, CsvFileLoader


def write_idx(path, array, type_code=0x08):
    header = bytes([0, 0, type_code, array.ndim]) + b''.join(struct.pack('>I', d) for d in array.shape)
    path.write_bytes(header + array.astype(array.dtype.newbyteorder('>')).tobytes())
    return str(path)


def test_two_moons_split(moons):
    """
    Tests the two-moons split sizes, stratification and input range
    """
    train, test = moons
    assert (len(train), len(test)) == (160, 40)
    assert train.class_counts() == [80, 80]
    assert test.class_counts() == [20, 20]
    assert train.split == 'train' and test.split == 'test'
    assert float(train.inputs.min()) >= 0.0 and float(train.inputs.max()) <= 1.0


def test_loaders_are_deterministic():
    """
    Tests that the same stream reproduces the same split and a different seed does not
    """
    first, _ = load_dataset('two-moons', {'n': 100}, Rng(3, 'dataset'))
    second, _ = load_dataset('two-moons', {'n': 100}, Rng(3, 'dataset'))
    other, _ = load_dataset('two-moons', {'n': 100}, Rng(4, 'dataset'))
    assert torch.equal(first.inputs, second.inputs)
    assert first.fingerprint() == second.fingerprint()
    assert first.fingerprint() != other.fingerprint()


def test_gauss_mix():
    """
    Tests the gauss-mix shapes and balanced classes
    """
    train, test = load_dataset('gauss-mix', {'n': 90, 'classes': 3, 'dim': 4}, Rng(0))
    assert train.inputs.shape == (72, 4)
    assert train.num_classes == 3
    assert train.class_counts() == [24, 24, 24]
    assert len(test) == 18


def test_tiny_digits(digits):
    """
    Tests the tiny-digits image shape and range
    """
    train, test = digits
    assert train.inputs.shape == (96, 1, 8, 8)
    assert test.inputs.shape == (24, 1, 8, 8)
    assert float(train.inputs.min()) >= 0.0 and float(train.inputs.max()) <= 1.0
    large, _ = load_dataset('tiny-digits', {'n': 20, 'size': 16, 'classes': 2}, Rng(0))
    assert large.input_shape == (1, 16, 16)
    with pytest.raises(AssertionError):
        load_dataset('tiny-digits', {'n': 20, 'size': 12})


def test_unknown_dataset():
    with pytest.raises(AssertionError):
        load_dataset('cifar-10')


def test_class_count_mismatch():
    """
    Tests that a declared class count below the labels found is refused
    """
    with pytest.raises(ValueError):
        load_dataset('gauss-mix', {'n': 30, 'classes': 3, 'num_classes': 2}, Rng(0))


def test_read_idx(tmp_path):
    """
    Tests that a valid IDX file is read with its dimensions
    """
    array = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
    loaded = read_idx(write_idx(tmp_path / 'images.idx', array))
    assert loaded.shape == (2, 3, 4)
    assert np.array_equal(loaded, array)
    floats = np.array([0.5, -1.25], dtype=np.float64)
    assert np.array_equal(read_idx(write_idx(tmp_path / 'floats.idx', floats, type_code=0x0E)), floats)


def test_read_idx_errors(tmp_path):
    """
    Tests the byte offsets named by IDX parse errors
    """
    path = tmp_path / 'bad.idx'
    good = bytes([0, 0, 0x08, 1]) + struct.pack('>I', 3) + bytes([1, 2, 3])
    cases = [
        (bytes([1]) + good[1:], 0),
        (good[:2] + bytes([0x07]) + good[3:], 2),
        (good[:3] + bytes([0]) + good[4:], 3),
        (good[:-1], len(good) - 1),
        (good + bytes([9]), len(good)),
    ]
    for data, offset in cases:
        path.write_bytes(data)
        with pytest.raises(ParseError) as error:
            read_idx(str(path))
        assert error.value.offset == offset


def test_idx_file_loader(tmp_path):
    """
    Tests that IDX images are scaled to [0, 1] and given a channel axis
    """
    images = write_idx(tmp_path / 'images.idx', np.full((10, 4, 4), 255, dtype=np.uint8))
    labels = write_idx(tmp_path / 'labels.idx', np.array([0, 1] * 5, dtype=np.uint8))
    train, test = load_dataset('idx-file', {'images': images, 'labels': labels}, Rng(0))
    assert train.inputs.shape == (8, 1, 4, 4)
    assert float(train.inputs.max()) == 1.0
    assert test.class_counts() == [1, 1]
    short = write_idx(tmp_path / 'short.idx', np.array([0, 1], dtype=np.uint8))
    with pytest.raises(ValueError):
        IdxFileLoader.read_pair(images, short)


def test_csv_file_loader(tmp_path):
    """
    Tests csv loading and the byte offset of a malformed row
    """
    path = tmp_path / 'table.csv'
    path.write_text('a,b,label\n' + ''.join('%d,%d,%d\n' % (i, 2 * i, i % 2) for i in range(10)))
    train, test = load_dataset('csv-file', {'path': str(path)}, Rng(0))
    assert train.inputs.shape == (8, 2)
    assert float(train.inputs.max()) <= 1.0
    path.write_text('a,b,label\n1,2,0\n3,x,1\n')
    with pytest.raises(ParseError) as error:
        CsvFileLoader(str(path)).generate(Rng(0))
    assert error.value.offset == 16
    path.write_text('a,b,label\n1,2,0\n3,4,0.5\n')
    with pytest.raises(ParseError):
        CsvFileLoader(str(path)).generate(Rng(0))
    with pytest.raises(FileNotFoundError):
        CsvFileLoader(str(tmp_path / 'missing.csv')).generate(Rng(0))
