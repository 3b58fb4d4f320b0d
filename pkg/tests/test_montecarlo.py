import numpy as np
import pytest

from cellfree_wpt.montecarlo import (_MeanAccumulator, agrees, verify_lemma5,
                                     verify_lemma6)


def test_streaming_accumulator_matches_numpy():
    rng = np.random.default_rng(1)
    data = rng.normal(size=(500, 3)) + 1j * rng.normal(size=(500, 3))
    acc = _MeanAccumulator((3,))
    acc.add(data[:200])
    acc.add(data[200:])
    assert np.allclose(acc.mean(), data.mean(axis=0))
    want_re = data.real.std(axis=0, ddof=1) / np.sqrt(500)
    want_im = data.imag.std(axis=0, ddof=1) / np.sqrt(500)
    assert np.allclose(acc.stderr().real, want_re)
    assert np.allclose(acc.stderr().imag, want_im)


def test_agrees_tolerances():
    assert agrees(1.0, 0.0, 1.0)
    assert agrees(1.019, 1e-9, 1.0)          # inside 2% relative
    assert not agrees(1.05, 1e-9, 1.0)       # outside both bands
    assert agrees(1.05, 0.02, 1.0)           # inside 3 standard errors
    assert agrees(np.array([1.0, 2.0]), np.array([0.0, 1e-3]),
                  np.array([1.0, 2.001]))


def test_lemma5_scalar_closed_form():
    # u ~ CN(0, 2), B = 3: E|3 u u*|^2 = 9 E|u|^4 = 9 * 2 * 4 = 72
    rep = verify_lemma5(np.array([[2.0]]), np.array([[3.0]]),
                        50_000, np.random.default_rng(2))
    assert rep["closed_form"] == 72.0
    assert abs(rep["estimate"] - 72.0) <= 3.0 * rep["stderr"]


def test_lemma6_requires_admissible_covariance():
    xbar = np.array([1.0 + 0j, 0.5j])
    with pytest.raises(ValueError):
        verify_lemma6(xbar, 0.5, alpha=10.0, B=np.eye(2), C_y=np.eye(2),
                      num_samples=100, rng=np.random.default_rng(3))


def test_lemma6_scalar_instance():
    rng = np.random.default_rng(4)
    xbar = np.array([0.8 - 0.6j])
    rep = verify_lemma6(xbar, 0.7, alpha=0.9, B=np.array([[1.5 + 0.2j]]),
                        C_y=np.array([[4.0 + 0j]]), num_samples=50_000, rng=rng)
    d1 = rep["first_estimate"] - rep["first_closed"]
    assert abs(d1.real) <= 3.0 * rep["first_stderr"].real
    assert abs(d1.imag) <= 3.0 * rep["first_stderr"].imag
    assert (abs(rep["second_estimate"] - rep["second_closed"])
            <= 3.0 * rep["second_stderr"])
