import numpy as np
import pytest
from guard.tensors import Rng
from guard.theory import QuadModel, QuadraticFamily, LinearFamily, LogisticFamily, SoftmaxHeadFamily, get_family
from guard.theory import per_sample_bound, expectation_bound, jensen_check, estimate_lipschitz
from guard.theory import distilled_bound_slack, BoundReport


def gaussian_class(seed, n=200, d=2, y=1):
    rng = Rng(seed, 'class')
    w = np.array([1.5, -0.5])[:d]
    x = y * w / np.linalg.norm(w) + rng.normal(n, d).numpy()
    return LogisticFamily(w, 0.1, y), x


def test_negative_curvature_literal_bound():
    """
    Tests that g = 0, H = diag(-1, -2) keeps the maximum at the loss, breaking the
    literal bound while the bound with lambda1 clamped at 0 holds
    """
    result = per_sample_bound(QuadModel(1.0, [0.0, 0.0], np.diag([-1.0, -2.0]), 0.5))
    assert result['exact'] == pytest.approx(1.0)
    assert result['bound'] == pytest.approx(1.0 - 0.125)
    assert result['clamped_bound'] == pytest.approx(1.0)
    assert result['violated']


def test_per_sample_bound_random_instances():
    """
    Tests the clamped curvature bound on 300 random symmetric quadratic models
    (per_sample_bound asserts it), and that the literal bound only breaks for lambda1 < 0
    """
    rng = Rng(0, 'per-sample')
    for t in range(300):
        a = rng.normal(4, 4).numpy()
        q = QuadModel(float(rng.normal(1)[0]), rng.normal(4).numpy(), 0.5 * (a + a.T), 0.1)
        result = per_sample_bound(q)
        assert result['clamped_bound'] >= result['exact'] - 1e-9
        if result['violated']:
            assert result['lambda1'] < 0


def test_jensen_two_points():
    """
    Tests the Jensen gap of 1/2 x^2 at x = +1 and -1 with rho = 0.5: E adv = 1.125, adv(0) = 0.125
    """
    family = QuadraticFamily([[1.0]])
    gap = jensen_check(family, np.array([[1.0], [-1.0]]), 0.5)
    assert gap == pytest.approx(1.0, abs=1e-12)


def test_jensen_linear_gap_is_zero():
    """
    Tests that a linear loss has no Jensen gap
    """
    family = LinearFamily([1.0, -2.0, 0.5], c=0.3)
    x = Rng(1).normal(50, 3).numpy()
    assert abs(jensen_check(family, x, 0.2)) < 1e-12


def test_jensen_convex_families():
    """
    Tests that the Jensen gap is non-negative for logistic and PSD quadratic losses
    """
    rng = Rng(2, 'jensen')
    for t in range(100):
        w = rng.normal(3).numpy()
        x = rng.normal(20, 3).numpy()
        a = rng.normal(3, 3).numpy()
        assert jensen_check(LogisticFamily(w, 0.2, 1 if t % 2 else -1), x, 0.3) >= -1e-10
        assert jensen_check(QuadraticFamily(a @ a.T, w), x, 0.3) >= -1e-10


def test_jensen_needs_convexity():
    """
    Tests that the Jensen check refuses a family whose adversarial loss is not convex
    """
    with pytest.raises(ValueError):
        jensen_check(QuadraticFamily(-np.eye(2)), np.zeros((3, 2)), 0.1)


def test_expectation_bound_logistic():
    """
    Tests the expectation bound on a logistic class: the second-order maximum
    meets the bound sample by sample, so the two sides agree
    """
    family, x = gaussian_class(0)
    result = expectation_bound(family, x, 0.1)
    assert not result['violated']
    assert result['lhs'] == pytest.approx(result['rhs'], abs=1e-12)
    assert result['gradient_term'] > result['curvature_term'] > 0
    assert result['term_ratio'] == pytest.approx(result['gradient_term'] / result['curvature_term'])


def test_expectation_bound_sample_count():
    """
    Tests that between 2 and 29 samples are refused and that a linear loss has no curvature ratio
    """
    family = LinearFamily([1.0, 1.0])
    with pytest.raises(AssertionError):
        expectation_bound(family, np.zeros((5, 2)), 0.1)
    result = expectation_bound(family, np.zeros((1, 2)), 0.1)
    assert result['term_ratio'] is None
    assert result['lhs'] == pytest.approx(0.1 * np.sqrt(2))


def test_logistic_derivatives():
    """
    Tests the logistic family's gradient and Hessian against central differences
    """
    family = LogisticFamily([0.7, -1.2], b=0.3, y=-1)
    x = np.array([[0.4, 0.1]])
    step = 1e-6
    numeric = np.array([(family.loss(x + step * e) - family.loss(x - step * e))[0] / (2 * step) for e in np.eye(2)])
    assert np.allclose(family.gradient(x)[0], numeric, atol=1e-8)
    numeric_h = np.stack([(family.gradient(x + step * e) - family.gradient(x - step * e))[0] / (2 * step)
                          for e in np.eye(2)])
    assert np.allclose(family.hessian(x)[0], numeric_h, atol=1e-7)
    assert family.lambda1(x)[0] == pytest.approx(np.linalg.eigvalsh(family.hessian(x)[0])[-1])


def test_logistic_taylor_matches_trust_region():
    """
    Tests that the closed-form second-order maximum of the logistic loss equals
    the trust-region maximum of its quadratic model
    """
    family, x = gaussian_class(3, n=10)
    closed = family.taylor_adversarial(x, 0.2)
    general = np.array([per_sample_bound(family.quad_model(x, 0.2, i))['exact'] for i in range(10)])
    assert np.allclose(closed, general, atol=1e-10)


def test_logistic_taylor_slope():
    """
    Tests the analytic margin slope of the second-order adversarial loss against differences
    """
    family = LogisticFamily([1.0, 1.0])
    m = np.linspace(-5, 5, 11)
    numeric = (family.margin_taylor_value(m + 1e-6, 0.3) - family.margin_taylor_value(m - 1e-6, 0.3)) / 2e-6
    assert np.allclose(family.margin_taylor_slope(m, 0.3), numeric, atol=1e-8)


def test_softmax_head_gradient():
    """
    Tests the softmax head's feature gradient against central differences
    """
    rng = Rng(4)
    family = SoftmaxHeadFamily(rng.normal(3, 4).numpy(), rng.normal(3).numpy(), 1)
    h = rng.normal(1, 4).numpy()
    step = 1e-6
    numeric = np.array([(family.loss(h + step * e) - family.loss(h - step * e))[0] / (2 * step) for e in np.eye(4)])
    assert np.allclose(family.gradient(h)[0], numeric, atol=1e-8)
    assert family.lambda1(h)[0] >= -1e-12


def test_distilled_bound_logistic():
    """
    Tests that the distilled-point bound holds for a logistic loss on identity features
    """
    family, x = gaussian_class(5)
    distilled = x.mean(axis=0) + Rng(5, 'distilled').normal(10, 2).numpy()
    report = distilled_bound_slack(family, x, distilled, 0.1)
    assert report.violations['distilled'] == 0
    assert len(report.records) == 10
    assert (report.records['slack'] >= -1e-9).all()
    assert report.summary['distilled']['lipschitz_kind'] == 'exact'


def test_distilled_bound_at_class_mean():
    """
    Tests that a distilled point at the class mean has sigma = 0 and rhs equal to the expectation bound
    """
    family, x = gaussian_class(6)
    report = distilled_bound_slack(family, x, x.mean(axis=0, keepdims=True), 0.1)
    record = report.records.iloc[0]
    assert record['sigma'] == pytest.approx(0.0, abs=1e-12)
    assert record['rhs'] == pytest.approx(expectation_bound(family, x, 0.1)['rhs'])
    assert record['slack'] >= 0


def test_distilled_bound_model_teacher(moons, mlp):
    """
    Tests the feature-space bound for a model teacher: one record per distilled
    point, an estimated Lipschitz constant and no counted violations
    """
    train, _ = moons
    real = train.inputs[train.class_indices(0)]
    report = distilled_bound_slack(mlp, real, real[:4], 0.1, c=0, rng=Rng(0))
    assert len(report.records) == 4
    assert report.violations['distilled'] == 0
    assert report.summary['distilled class 0']['lipschitz_kind'] == 'estimate'
    with pytest.raises(AssertionError):
        distilled_bound_slack(mlp, real, real[:4], 0.1)


def test_lipschitz_estimate_linear():
    """
    Tests that the Lipschitz estimate of a linear loss never exceeds ||w||
    """
    family = LinearFamily([3.0, 4.0])
    anchors = Rng(7).normal(5, 2).numpy()
    estimate = estimate_lipschitz(family, anchors, 1.0, 0.1, Rng(8))
    assert 0 < estimate <= 5.0 + 1e-9


def test_bound_report_files(tmp_path):
    """
    Tests that a bound report accumulates checks and writes json and csv
    """
    report = BoundReport(config_hash='abc')
    report.add('jensen', [{'index': 0, 'lhs': 1.0, 'rhs': 2.0, 'slack': 1.0, 'violated': False}])
    report.add('jensen', [{'index': 1, 'lhs': 2.0, 'rhs': 1.0, 'slack': -1.0, 'violated': True}])
    assert report.violations == {'jensen': 1}
    assert len(report.records) == 2
    document = report.to_dict()
    assert document['records'][0]['sigma'] is None
    report.to_json(str(tmp_path / 'bounds.json'))
    report.to_csv(str(tmp_path / 'bounds.csv'))
    assert (tmp_path / 'bounds.json').exists() and (tmp_path / 'bounds.csv').exists()
    merged = report.merge(BoundReport().add('per-sample', [{'index': 0, 'lhs': 0.0, 'rhs': 0.0, 'violated': False}]))
    assert merged.violations == {'jensen': 1, 'per-sample': 0}


def test_get_family():
    """
    Tests lookup of loss families by nickname
    """
    assert isinstance(get_family('logistic', w=[1.0, 0.0]), LogisticFamily)
    with pytest.raises(AssertionError):
        get_family('hinge')
