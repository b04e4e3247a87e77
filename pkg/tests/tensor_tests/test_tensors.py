import io
import struct
import pytest
import torch
from guard.tensors import Rng, MemoryMeter, ParseError, tensor, checked, ops
from guard.tensors import save_tensor, load_tensor, write_tensor, read_tensor, write_container, read_container


def test_tensor_shape_mismatch():
    """
    Tests that tensor() rejects data whose length is not the product of the shape
    """
    with pytest.raises(ValueError):
        tensor([1.0, 2.0, 3.0], shape=(2, 2))
    assert tensor([1.0, 2.0, 3.0, 4.0], shape=(2, 2)).shape == (2, 2)


def test_checked_mode_rejects_nan():
    """
    Tests that non-finite values are rejected in checked mode and accepted outside it
    """
    with pytest.raises(ValueError):
        tensor([1.0, float('nan')])
    with checked(False):
        t = tensor([1.0, float('inf')])
    assert torch.isinf(t[1])


def test_ops_are_shape_strict():
    """
    Tests that elementwise ops refuse to broadcast and scale takes only scalars
    """
    with pytest.raises(ValueError):
        ops.add(tensor([1.0, 2.0]), tensor([1.0]))
    with pytest.raises(ValueError):
        ops.scale(tensor([1.0, 2.0]), tensor([2.0, 2.0]))
    with pytest.raises(ValueError):
        ops.matmul(tensor([[1.0, 2.0]]), tensor([[1.0, 2.0]]))
    assert torch.equal(ops.scale(tensor([1.0, 2.0]), 2.0), tensor([2.0, 4.0]))


def test_cross_entropy_label_range():
    """
    Tests that cross-entropy raises for a label outside [0, C)
    """
    logits = tensor([[1.0, 2.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        ops.softmax_cross_entropy(logits, torch.tensor([0, 2]))
    value = ops.softmax_cross_entropy(logits, torch.tensor([1, 0]), reduction='none')
    assert torch.allclose(value[1], torch.log(tensor(2.0)))


def test_soft_cross_entropy_matches_hard():
    """
    Tests that one-hot soft labels give the hard-label cross-entropy
    """
    logits = tensor([[1.0, -1.0, 0.5], [0.2, 0.3, 0.1]])
    labels = torch.tensor([2, 0])
    one_hot = torch.nn.functional.one_hot(labels, 3).to(logits.dtype)
    assert torch.allclose(ops.soft_cross_entropy(logits, one_hot), ops.softmax_cross_entropy(logits, labels))


def test_rng_reproducible_streams():
    """
    Tests that (seed, stream) fixes the draws and that child streams differ
    """
    a = Rng(7, 'x')
    b = Rng(7, 'x')
    assert torch.equal(a.normal(5), b.normal(5))
    assert torch.equal(a.spawn('c', 1).uniform(3), b.spawn('c', 1).uniform(3))
    assert not torch.equal(Rng(7, 'x').normal(5), Rng(7, 'y').normal(5))
    assert not torch.equal(Rng(7).spawn('c', 1).normal(5), Rng(7).spawn('c', 2).normal(5))


def test_rng_choice_is_distinct():
    """
    Tests that choice draws distinct entries of the population
    """
    population = torch.arange(10, 20)
    chosen = Rng(3).choice(population, 6)
    assert len(set(chosen.tolist())) == 6
    assert all(10 <= c < 20 for c in chosen.tolist())


def test_memory_meter_counts_saved_tensors():
    """
    Tests that the meter sees tensors saved for backward and nothing without grad
    """
    x = torch.ones(100, 100, dtype=torch.float64, requires_grad=True)
    with MemoryMeter() as meter:
        (x * x).sum()
    assert meter.peak >= 100 * 100 * 8
    with MemoryMeter() as idle:
        with torch.no_grad():
            (x * x).sum()
    assert idle.peak == 0


def test_tensor_file(tmp_path):
    """
    Tests that a saved tensor loads back with its shape and values
    """
    t = Rng(0).normal(3, 4)
    path = str(tmp_path / 'a.gten')
    save_tensor(path, t)
    assert torch.equal(load_tensor(path), t)


def test_tensor_bad_magic():
    """
    Tests that a block with the wrong magic raises a ParseError at offset 0
    """
    buffer = io.BytesIO()
    write_tensor(buffer, tensor([1.0, 2.0]))
    data = bytearray(buffer.getvalue())
    data[0:4] = b'XTEN'
    with pytest.raises(ParseError) as e:
        read_tensor(io.BytesIO(bytes(data)))
    assert e.value.offset == 0


def test_tensor_truncated_payload():
    """
    Tests that a truncated payload raises a ParseError naming where the payload starts
    """
    buffer = io.BytesIO()
    write_tensor(buffer, tensor([1.0, 2.0, 3.0]))
    data = buffer.getvalue()[:-4]
    with pytest.raises(ParseError) as e:
        read_tensor(io.BytesIO(data))
    assert e.value.offset == 16


def test_container_version(tmp_path):
    """
    Tests that a container with an unknown version raises a ParseError at offset 4
    """
    path = str(tmp_path / 'bad.gset')
    with open(path, 'wb') as f:
        f.write(b'GSET' + struct.pack('<II', 99, 2) + b'{}' + struct.pack('<I', 0))
    with pytest.raises(ParseError) as e:
        read_container(path, b'GSET')
    assert e.value.offset == 4


def test_container_blocks(tmp_path):
    """
    Tests that a container keeps its header and its named blocks in order
    """
    path = str(tmp_path / 'c.gmdl')
    blocks = [('w', Rng(1).normal(2, 2)), ('b', tensor([0.5]))]
    write_container(path, b'GMDL', {'seed': 3}, blocks)
    header, loaded = read_container(path, b'GMDL')
    assert header == {'seed': 3}
    assert [name for name, _ in loaded] == ['w', 'b']
    assert torch.equal(loaded[0][1], blocks[0][1])
    with pytest.raises(ParseError):
        read_container(path, b'GSET')
