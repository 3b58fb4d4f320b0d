import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellfree_wpt.channel import NetworkConfig, generate_geometry, large_scale_stats
from cellfree_wpt.energy import (EHModel, ap_tx_power, eh_model_presets,
                                 harvested_energy, input_power_coefficients,
                                 input_power_coherent,
                                 input_power_noncoherent, precoder_norms)
from cellfree_wpt.estimation import assign_pilots, estimator_statistics


def desk_artifacts(estimator="lmmse", seed=0):
    cfg = NetworkConfig()
    rng = np.random.default_rng(seed)
    geom = generate_geometry(cfg, rng)
    stats = large_scale_stats(geom, cfg, rng)
    assignment = assign_pilots(cfg.num_ues, cfg.tau_p, rng)
    est = estimator_statistics(stats, assignment, cfg)
    coeffs = input_power_coefficients(stats, est, assignment, cfg, estimator)
    return cfg, stats, assignment, est, coeffs


def test_presets():
    presets = eh_model_presets()
    assert set(presets) == {"M1", "M2", "L"}
    for model in presets.values():
        assert model.A > 0 and model.C > 0 and model.B >= 0
    assert presets["L"].B == 0
    assert presets["L"].A == presets["M1"].A
    assert presets["L"].C == presets["M1"].C
    assert np.isinf(presets["L"].saturation)
    assert presets["M1"].saturation == presets["M1"].A / presets["M1"].B


def test_model_validation():
    with pytest.raises(ValueError):
        EHModel(A=0.0, B=1.0, C=1.0)
    with pytest.raises(ValueError):
        EHModel(A=1.0, B=-1.0, C=1.0)
    with pytest.raises(ValueError):
        EHModel(A=1.0, B=0.0, C=0.0)


def test_harvested_energy_curve():
    m1 = eh_model_presets()["M1"]
    assert harvested_energy(0.0, m1, 25) == 0.0
    grid = np.geomspace(1e-12, 100.0, 300)
    e = harvested_energy(grid, m1, 25)
    assert np.all(np.diff(e) > 0)
    assert np.all(e < 25 * m1.saturation)
    # saturates: at huge input power the curve is within 1% of the cap
    assert harvested_energy(1e6, m1, 25) > 0.99 * 25 * m1.saturation
    lin = eh_model_presets()["L"]
    assert np.allclose(harvested_energy(grid, lin, 25),
                       25 * lin.A * grid / lin.C)
    with pytest.raises(ValueError):
        harvested_energy(-1e-9, m1, 25)


@settings(deadline=None, derandomize=True, max_examples=200)
@given(st.floats(min_value=0.0, max_value=1e6, allow_nan=False))
def test_linearized_model_dominates(I):
    presets = eh_model_presets()
    assert (harvested_energy(I, presets["L"], 25)
            >= harvested_energy(I, presets["M1"], 25))


def test_precoder_norms():
    cfg, stats, assignment, est, _ = desk_artifacts()
    for estimator, mats in (("lmmse", est.rhat), ("ls", est.psi)):
        norms = precoder_norms(est, estimator)
        assert norms.shape == (cfg.num_ues, cfg.num_aps)
        assert np.all(norms > 0)
        assert np.allclose(norms, np.real(np.trace(mats, axis1=2, axis2=3)))
    with pytest.raises(ValueError):
        precoder_norms(est, "zf")


def test_ap_tx_power_accepts_lifted_matrices():
    cfg, stats, assignment, est, _ = desk_artifacts()
    norms = precoder_norms(est, "lmmse")
    rng = np.random.default_rng(3)
    p = rng.uniform(0.0, 0.1, size=norms.shape)
    lifted = np.einsum("kl,km->klm", np.sqrt(p), np.sqrt(p))
    assert np.allclose(ap_tx_power(p, norms), ap_tx_power(lifted, norms))
    assert ap_tx_power(p, norms, l=2) == ap_tx_power(p, norms)[2]
    with pytest.raises(ValueError):
        ap_tx_power(-p, norms)


def test_input_power_weights_structure():
    for estimator in ("lmmse", "ls"):
        cfg, stats, assignment, est, coeffs = desk_artifacts(estimator)
        K, L = cfg.num_ues, cfg.num_aps
        assert coeffs.M.shape == (K, K, L, L)
        assert np.allclose(coeffs.M, np.swapaxes(coeffs.M, 2, 3))
        assert np.all(coeffs.diag > 0)
        for k in range(K):
            for i in range(K):
                assert coeffs.shares_pilot[k, i] == assignment.shares(k, i)
                if not assignment.shares(k, i):
                    assert np.all(coeffs.chi[k, i] == 0)
                    # no cross-AP coupling without pilot sharing
                    off = coeffs.M[k, i] - np.diag(np.diag(coeffs.M[k, i]))
                    assert np.all(off == 0)


def test_coherent_matches_noncoherent_on_diagonal_allocations():
    cfg, stats, assignment, est, coeffs = desk_artifacts()
    rng = np.random.default_rng(9)
    p = rng.uniform(0.0, 0.2, size=(cfg.num_ues, cfg.num_aps))
    diag_lift = np.stack([np.diag(row) for row in p])
    for k in range(cfg.num_ues):
        assert np.isclose(input_power_coherent(diag_lift, coeffs, k),
                          input_power_noncoherent(p, coeffs, k))


def test_lifted_allocation_validation():
    cfg, stats, assignment, est, coeffs = desk_artifacts()
    K, L = cfg.num_ues, cfg.num_aps
    bad = np.zeros((K, L, L))
    bad[0, 0, 1] = 1.0          # not symmetric
    with pytest.raises(ValueError):
        input_power_coherent(bad, coeffs, 0)
    bad = np.stack([np.eye(L)] * K)
    bad[0, 0, 1] = bad[0, 1, 0] = -0.5   # negative entry
    with pytest.raises(ValueError):
        input_power_coherent(bad, coeffs, 0)
    bad = np.stack([np.eye(L)] * K)
    bad[0, 0, 1] = bad[0, 1, 0] = 5.0    # indefinite
    with pytest.raises(ValueError):
        input_power_coherent(bad, coeffs, 0)
    with pytest.raises(ValueError):
        input_power_noncoherent(-np.ones((K, L)), coeffs, 0)
