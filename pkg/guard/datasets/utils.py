"""
Guard dataset utility functions
"""
import os
import numpy as np
from guard.tensors import ParseError

IDX_TYPES = {
    0x08: np.dtype('>u1'),
    0x09: np.dtype('>i1'),
    0x0B: np.dtype('>i2'),
    0x0C: np.dtype('>i4'),
    0x0D: np.dtype('>f4'),
    0x0E: np.dtype('>f8'),
}


def find_file(path):
    """
    Resolves a data file path
    :param path: (str) file path (absolute, or relative to the working directory)
    :return absolute_path: (str)
    """
    absolute_path = os.path.abspath(path)
    if not os.path.isfile(absolute_path):
        raise FileNotFoundError('Data file %s not found.' % path)
    return absolute_path


def read_idx(path):
    """
    Parses an IDX file: two zero bytes, a type code, a rank, big-endian u32
    dimensions, then the big-endian payload
    :param path: (str) IDX file
    :return: (np.ndarray) array with the stored dtype and dimensions
    """
    with open(find_file(path), 'rb') as f:
        data = f.read()
    if len(data) < 4:
        raise ParseError('Truncated IDX header in %s' % path, len(data))
    if data[0] != 0 or data[1] != 0:
        raise ParseError('Bad IDX magic %r in %s' % (data[:4], path), 0)
    if data[2] not in IDX_TYPES:
        raise ParseError('Unknown IDX type code 0x%02x in %s' % (data[2], path), 2)
    rank = data[3]
    if rank == 0:
        raise ParseError('IDX rank must be positive in %s' % path, 3)
    header_size = 4 + 4 * rank
    if len(data) < header_size:
        raise ParseError('Truncated IDX dimensions in %s' % path, len(data))
    dims = [int(d) for d in np.frombuffer(data, dtype='>u4', count=rank, offset=4)]
    dtype = IDX_TYPES[data[2]]
    expected = int(np.prod(dims)) * dtype.itemsize
    available = len(data) - header_size
    if available < expected:
        raise ParseError('Truncated IDX payload in %s: expected %d bytes, found %d' % (path, expected, available),
                         len(data))
    if available > expected:
        raise ParseError('Trailing bytes after IDX payload in %s' % path, header_size + expected)
    return np.frombuffer(data, dtype=dtype, offset=header_size).reshape(dims)


def line_offset(path, line):
    """
    Byte offset at which a given 0-based line of a text file starts
    """
    with open(path, 'rb') as f:
        lines = f.read().split(b'\n')
    return sum(len(text) + 1 for text in lines[:line])


def scale_unit(array):
    """
    Min-max scales every feature (column of the flattened samples) to [0, 1]
    """
    flat = array.reshape(array.shape[0], -1).astype(np.float64)
    low = flat.min(axis=0)
    span = flat.max(axis=0) - low
    span[span == 0] = 1.0
    return ((flat - low) / span).reshape(array.shape)
