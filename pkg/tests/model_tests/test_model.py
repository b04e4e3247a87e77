import pytest
import torch
from guard.tensors import Rng, tensor, write_container, ParseError
from guard.models import ModelSpec, Model, DataIterator, init_model


def test_model_spec_validation():
    """
    Tests that inconsistent architectures are refused
    """
    with pytest.raises(AssertionError):
        ModelSpec('transformer')
    with pytest.raises(AssertionError):
        ModelSpec.mlp([2, 8, 2], activation='tanh')
    with pytest.raises(AssertionError):
        ModelSpec('mlp', widths=[3, 8, 2], input_shape=(2,), num_classes=2)
    with pytest.raises(AssertionError):
        ModelSpec('mlp', widths=[2, 8, 3], input_shape=(2,), num_classes=2)
    with pytest.raises(AssertionError):
        ModelSpec('convnet-s', input_shape=(64,), num_classes=10)
    spec = ModelSpec('convnet-s', channels=[4, 8], input_shape=(1, 8, 8), num_classes=3)
    assert ModelSpec.from_dict(spec.to_dict()) == spec
    assert ModelSpec(input_shape=(3,), num_classes=4).widths == [3, 32, 4]


def test_logits_and_losses(mlp):
    """
    Tests logit shapes, the input-shape check and one-hot soft labels matching hard labels
    """
    x = tensor([[0.1, 0.2], [0.7, 0.3], [0.5, 0.9]])
    y = torch.tensor([0, 1, 1])
    assert mlp.logits(x).shape == (3, 2)
    assert mlp.features(x).shape == (3, 8)
    with pytest.raises(ValueError):
        mlp.logits(tensor([[0.1, 0.2, 0.3]]))
    soft = torch.nn.functional.one_hot(y, 2).to(torch.float64)
    assert torch.allclose(mlp.sample_losses(x, soft), mlp.sample_losses(x, y))
    assert float(mlp.loss(x, y)) == pytest.approx(float(mlp.sample_losses(x, y).mean()))
    assert mlp.predict(x).tolist() == mlp.logits(x).argmax(dim=1).tolist()


def test_seeded_initialisation():
    """
    Tests that the same init stream gives the same weights and biases start at zero
    """
    spec = ModelSpec.mlp([2, 8, 2])
    first = Model(spec, Rng(5, 'init'))
    second = Model(spec, Rng(5, 'init'))
    other = Model(spec, Rng(6, 'init'))
    assert all(torch.equal(a, b) for a, b in zip(first.parameters(), second.parameters()))
    assert not torch.equal(first.parameters()[0], other.parameters()[0])
    assert float(first.network.layers[0].bias.abs().sum()) == 0.0
    assert first.num_parameters == 2 * 8 + 8 + 8 * 2 + 2
    rebuilt = init_model(spec, Rng(5, 'init'))
    assert all(torch.equal(a, b) for a, b in zip(first.parameters(), rebuilt.parameters()))
    assert float(first.network.layers[0].weight.abs().max()) <= 1.0 / 2 ** 0.5


def test_save_and_load_model(tmp_path, convnet, digits):
    """
    Tests that a saved model reloads in eval mode with identical outputs and header
    """
    train, _ = digits
    convnet.logits(train.inputs[:16])
    path = str(tmp_path / 'model.gmdl')
    convnet.save_model(path, extra={'config_hash': 'abc'})
    loaded, header = Model.load_model(path)
    assert header['config_hash'] == 'abc'
    assert loaded.spec == convnet.spec
    assert not loaded.training
    with torch.no_grad():
        assert torch.equal(loaded.logits(train.inputs[:4]), convnet.eval().logits(train.inputs[:4]))


def test_load_model_errors(tmp_path, mlp):
    """
    Tests that containers without a spec or with the wrong magic are refused
    """
    path = str(tmp_path / 'model.gmdl')
    write_container(path, b'GMDL', {}, mlp.state())
    with pytest.raises(ParseError):
        Model.load_model(path)
    write_container(path, b'GSET', {'spec': mlp.spec.to_dict()}, mlp.state())
    with pytest.raises(ParseError) as error:
        Model.load_model(path)
    assert error.value.offset == 0
    write_container(path, b'GMDL', {'spec': mlp.spec.to_dict()}, mlp.state()[:1])
    with pytest.raises(ParseError):
        Model.load_model(path)


def test_batch_norm_statistics(convnet, digits):
    """
    Tests that training passes update running statistics unless frozen, and that
    recorded batch statistics exist only inside their block
    """
    train, _ = digits
    x = train.inputs[:16]
    layer = convnet.batch_norm_layers()[0]
    assert len(convnet.batch_norm_layers()) == 2
    with convnet.frozen_statistics():
        convnet.train().logits(x)
    assert float(layer.running_mean.abs().sum()) == 0.0
    convnet.logits(x)
    assert float(layer.running_mean.abs().sum()) > 0.0
    with convnet.recorded_batch_statistics() as layers:
        convnet.logits(x)
        assert layers[0].batch_mean.shape == (4,)
    assert layer.batch_mean is None


def test_evaluating_restores_mode(mlp):
    mlp.train()
    with mlp.evaluating():
        assert not mlp.training
    assert mlp.training


def test_data_iterator():
    """
    Tests chunking with and without an order
    """
    data = torch.arange(10)
    labels = torch.arange(10) * 10
    chunks = list(DataIterator(data, labels, n=4))
    assert [len(c[0]) for c in chunks] == [4, 4, 2]
    assert len(DataIterator(data, labels, n=4)) == 3
    order = torch.tensor([9, 8, 7, 6, 5, 4, 3, 2, 1, 0])
    first_x, first_y = next(DataIterator(data, labels, n=3, order=order))
    assert first_x.tolist() == [9, 8, 7]
    assert first_y.tolist() == [90, 80, 70]
    with pytest.raises(AssertionError):
        DataIterator(data, labels[:5], n=2)
