import numpy as np
import pytest

import cgan


def small_config(iterations=60):
    c = cgan.TrainConfig()
    c.max_iterations = iterations
    c.batch_size = 32
    c.seed = 7
    return c


def test_simulate_shapes_and_determinism():
    a1, a2 = cgan.simulate(seed=3, d=2, n_sub=50)
    assert len(a1) == 100 and len(a2) == 100
    assert a1.features.shape == (100, 2)
    assert set(a1.labels) == {"A", "B"}
    assert set(a2.labels) == {"A", "C"}
    b1, _ = cgan.simulate(seed=3, d=2, n_sub=50)
    np.testing.assert_array_equal(a1.features, b1.features)


def test_train_weights_and_checkpoint(tmp_path):
    a1, a2 = cgan.simulate(seed=1, d=2, n_sub=60)
    model = cgan.train([a1, a2], small_config())
    assert model.arm_count == 2 and model.dim == 2
    assert model.trace.shape == (60,)
    w = model.weights(0, a1)["weights"]
    assert w.shape == (120,)
    assert w.sum() == pytest.approx(1.0)
    assert (w >= 0).all()

    path = tmp_path / "model.cgan"
    model.save(path)
    again = cgan.TrainedModel.load(path)
    np.testing.assert_array_equal(again.weights(0, a1)["weights"], w)
    assert model.sample(5, seed=2).shape == (5, 2)


def test_estimators():
    assert cgan.kish_ess(np.full(10, 0.1)) == pytest.approx(10.0)
    assert cgan.chi2_from_ratios(np.array([2.0, 0.0])) == 1.0
    assert cgan.analytic_gaussian_chi2(1.0, 1.0, 0.0, 1.0) == pytest.approx(np.e - 1.0)
    ate = cgan.weighted_ate(np.array([1.0, 3.0]), np.array([0.5, 0.5]), np.array([0.0]), np.array([1.0]))
    assert ate == pytest.approx(2.0)
    x = np.arange(6.0).reshape(3, 2)
    b = cgan.asdm(x, np.full(3, 1 / 3), x, np.full(3, 1 / 3))
    assert b["mean"] == 0.0
    n = cgan.normalize(np.array([1.0, 0.0, 3.0]))
    np.testing.assert_allclose(n["weights"], [0.25, 0.0, 0.75])


def test_baselines():
    s = np.arange(1.0, 101.0)
    clipped = cgan.clip_percentile(s)
    assert clipped.min() == pytest.approx(10.9)
    assert clipped.max() == pytest.approx(90.1)
    assert cgan.percentile(s, 50.0) == pytest.approx(50.5)

    rng = np.random.default_rng(0)
    x = rng.normal(size=(400, 2))
    treated = (rng.random(400) < 1 / (1 + np.exp(-x[:, 0]))).astype(int).tolist()
    pm = cgan.fit_logistic_propensity(x, treated)
    assert pm.converged
    assert pm.coef[0] > 0.5
    w1, w0 = cgan.ipw_weights(pm.scores(x), treated)
    assert w1.sum() == pytest.approx(1.0) and w0.sum() == pytest.approx(1.0)


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(cgan.Error):
        cgan.chi2_from_ratios(np.array([]))
    with pytest.raises(cgan.NumericalError):
        cgan.analytic_gaussian_chi2(0.0, 4.0, 0.0, 1.0)
    bad = tmp_path / "bad.csv"
    bad.write_text("unit_id,x0\nu1,abc\n")
    with pytest.raises(cgan.DataError):
        cgan.read_cohort_csv(bad, "1")
