import numpy as np
import pytest
import torch
from guard.tensors import Rng
from guard.curvature import QuadraticSurface
from guard.theory import QuadModel, trust_region_max


def grid_max(q, radii=401, angles=2501):
    """
    Maximum of a 2-d quadratic model over a polar grid of its disc
    """
    r = np.linspace(0.0, q.rho, radii)[:, None]
    theta = np.linspace(0.0, 2 * np.pi, angles)[None, :]
    points = np.stack([(r * np.cos(theta)).ravel(), (r * np.sin(theta)).ravel()], axis=1)
    return float(q.value_at(points).max())


def test_isotropic_curvature():
    """
    Tests that H = I gives loss + rho ||g|| + 1/2 rho^2 at v = rho g / ||g||
    """
    q = QuadModel(1.0, [3.0, 4.0], np.eye(2), 0.5)
    value, v = trust_region_max(q)
    assert value == pytest.approx(1.0 + 0.5 * 5.0 + 0.5 * 0.25, abs=1e-12)
    assert np.allclose(v, [0.3, 0.4])


def test_indefinite_instance_against_grid():
    """
    Tests g = (1, 0), H = diag(-1, 2), rho = 0.5 against a grid search
    """
    q = QuadModel(0.0, [1.0, 0.0], np.diag([-1.0, 2.0]), 0.5)
    value, v = trust_region_max(q)
    assert np.linalg.norm(v) <= 0.5 + 1e-12
    assert value == pytest.approx(q.value_at(v), abs=1e-12)
    assert abs(value - grid_max(q)) < 1e-4
    assert value >= grid_max(q) - 1e-10


def test_negative_definite_zero_gradient():
    """
    Tests that g = 0 with H negative definite leaves the maximum at the loss itself
    """
    q = QuadModel(2.0, [0.0, 0.0], np.diag([-1.0, -2.0]), 0.5)
    value, v = trust_region_max(q)
    assert value == pytest.approx(2.0, abs=1e-15)
    assert np.allclose(v, 0.0)


def test_interior_maximum():
    """
    Tests that a negative definite H whose free maximiser lies inside the ball returns it
    """
    q = QuadModel(0.0, [0.1, 0.0], np.diag([-1.0, -1.0]), 1.0)
    value, v = trust_region_max(q)
    assert np.allclose(v, [0.1, 0.0])
    assert value == pytest.approx(0.005, abs=1e-12)


def test_hard_case():
    """
    Tests a hard-case instance: the gradient is orthogonal to the leading eigenvector
    """
    q = QuadModel(0.0, [0.0, 0.2], np.diag([3.0, 1.0]), 1.0)
    value, v = trust_region_max(q)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)
    assert abs(value - grid_max(q)) < 1e-4
    assert value >= grid_max(q) - 1e-10


def test_random_instances_against_grid():
    """
    Tests 20 random 2-d instances against a grid search
    """
    rng = Rng(0, 'trust-region')
    for t in range(20):
        a = rng.normal(2, 2).numpy()
        q = QuadModel(float(rng.normal(1)[0]), rng.normal(2).numpy(), 0.5 * (a + a.T), 0.1 + float(rng.uniform(1)[0]))
        value, v = trust_region_max(q)
        assert np.linalg.norm(v) <= q.rho * (1 + 1e-12)
        reference = grid_max(q)
        assert value >= reference - 1e-10
        assert value - reference < 1e-4


def test_zero_radius():
    """
    Tests that rho = 0 returns the loss and a zero step
    """
    q = QuadModel(1.5, [1.0, 2.0], np.eye(2), 0.0)
    assert trust_region_max(q)[0] == 1.5


def test_quad_model_validation():
    """
    Tests that asymmetric, non-finite or oversized models are rejected
    """
    with pytest.raises(ValueError):
        QuadModel(0.0, [0.0, 0.0], [[1.0, 2.0], [0.0, 1.0]], 0.1)
    with pytest.raises(ValueError):
        QuadModel(0.0, [np.nan, 0.0], np.eye(2), 0.1)
    with pytest.raises(ValueError):
        QuadModel(0.0, np.zeros(33), np.eye(33), 0.1)
    with pytest.raises(AssertionError):
        QuadModel(0.0, [0.0], [[1.0]], -1.0)


def test_quad_model_from_surface():
    """
    Tests that the second-order model of a quadratic surface is the surface itself
    """
    A = np.array([[2.0, 0.5], [0.5, -1.0]])
    surface = QuadraticSurface(A, b=[1.0, -1.0], c=0.25)
    x = torch.tensor([[0.3, -0.2]], dtype=torch.float64)
    q = QuadModel.from_model(surface, x, None, 0.1)
    assert np.allclose(q.H, A)
    assert np.allclose(q.g, A @ x[0].numpy() + np.array([1.0, -1.0]))
    assert q.loss == pytest.approx(float(surface.sample_losses(x)[0]))
