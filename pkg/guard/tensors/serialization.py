"""
Binary containers

GTEN: magic "GTEN", version u32, rank u32, dims u32 x rank, little-endian f64 payload.
GMDL / GSET: magic, version u32, JSON header length u32, JSON header (utf-8),
block count u32, then per block a name (length u32 + utf-8) followed by a GTEN block.
"""
import io
import json
import struct
import numpy as np
import torch
from guard.tensors.tensor import DTYPE

TENSOR_MAGIC = b'GTEN'
VERSION = 1


class ParseError(ValueError):
    """
    Raised when a binary or text input cannot be parsed; names the byte offset
    """
    def __init__(self, message, offset):
        super().__init__('%s (at byte offset %d)' % (message, offset))
        self.offset = offset


def _read(stream, size, what):
    offset = stream.tell()
    data = stream.read(size)
    if len(data) != size:
        raise ParseError('Truncated %s: expected %d bytes, got %d' % (what, size, len(data)), offset)
    return data


def _read_u32(stream, what):
    return struct.unpack('<I', _read(stream, 4, what))[0]


def write_tensor(stream, t):
    """
    Writes one GTEN block
    :param stream: binary file object
    :param t: (torch.Tensor) tensor to serialise (converted to float64)
    """
    array = np.ascontiguousarray(t.detach().cpu().to(DTYPE).numpy(), dtype='<f8')
    stream.write(TENSOR_MAGIC)
    stream.write(struct.pack('<II', VERSION, array.ndim))
    stream.write(struct.pack('<%dI' % array.ndim, *array.shape))
    stream.write(array.tobytes(order='C'))


def read_tensor(stream):
    """
    Reads one GTEN block
    :param stream: binary file object positioned at a GTEN magic
    :return: (torch.Tensor) float64 tensor
    """
    offset = stream.tell()
    magic = _read(stream, 4, 'tensor magic')
    if magic != TENSOR_MAGIC:
        raise ParseError('Bad tensor magic %r' % magic, offset)
    version = _read_u32(stream, 'tensor version')
    if version != VERSION:
        raise ParseError('Unsupported tensor version %d' % version, offset + 4)
    rank = _read_u32(stream, 'tensor rank')
    dims = [_read_u32(stream, 'tensor dimension') for _ in range(rank)]
    count = int(np.prod(dims)) if dims else 1
    payload = _read(stream, 8 * count, 'tensor payload')
    array = np.frombuffer(payload, dtype='<f8').reshape(dims).astype(np.float64)
    return torch.from_numpy(array.copy())


def save_tensor(path, t):
    with open(path, 'wb') as f:
        write_tensor(f, t)


def load_tensor(path):
    with open(path, 'rb') as f:
        return read_tensor(f)


def tensor_bytes(t):
    buffer = io.BytesIO()
    write_tensor(buffer, t)
    return buffer.getvalue()


def write_container(path, magic, header, blocks):
    """
    Writes a GMDL/GSET container
    :param path: (str) output file
    :param magic: (bytes) 4-byte container magic
    :param header: (dict) JSON-serialisable header
    :param blocks: (list[tuple[str, torch.Tensor]]) named tensors, written in order
    """
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    with open(path, 'wb') as f:
        f.write(magic)
        f.write(struct.pack('<II', VERSION, len(header_bytes)))
        f.write(header_bytes)
        f.write(struct.pack('<I', len(blocks)))
        for name, t in blocks:
            encoded = name.encode('utf-8')
            f.write(struct.pack('<I', len(encoded)))
            f.write(encoded)
            write_tensor(f, t)


def read_container(path, magic):
    """
    Reads a GMDL/GSET container
    :param path: (str) input file
    :param magic: (bytes) expected 4-byte magic
    :return: (dict, list[tuple[str, torch.Tensor]]) header and named blocks
    """
    with open(path, 'rb') as f:
        found = _read(f, 4, 'container magic')
        if found != magic:
            raise ParseError('Bad container magic %r, expected %r' % (found, magic), 0)
        version = _read_u32(f, 'container version')
        if version != VERSION:
            raise ParseError('Unsupported container version %d' % version, 4)
        length = _read_u32(f, 'header length')
        offset = f.tell()
        try:
            header = json.loads(_read(f, length, 'header').decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ParseError('Malformed JSON header: %s' % e, offset)
        blocks = []
        for _ in range(_read_u32(f, 'block count')):
            name = _read(f, _read_u32(f, 'block name length'), 'block name').decode('utf-8')
            blocks.append((name, read_tensor(f)))
    return header, blocks
