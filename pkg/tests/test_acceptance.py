"""Acceptance suite: one test per primary criterion, in order.

C1  closed-form input-power and SINR-coefficient expressions vs sampling
C2  fourth-moment and phase-rotation moment identities vs sampling
C3  conic solver battery with constructed optima and certificates
C4  rank-one extraction audit over every feasible bisection step
C5  bisection convergence contract on the desk-scale fixture
C6  max-min fairness beats fractional power control on paired setups
C7  directional orderings (scheme, rectifier, estimator) on paired setups
C8  exact invariants (scale invariance, covariance split, FPC budget, config)
"""

import time

import numpy as np
import pytest

from factories import battery_case

from cellfree_wpt.channel import (ChannelStatistics, NetworkConfig,
                                  generate_geometry, large_scale_stats,
                                  steering_vector)
from cellfree_wpt.conic_solver import solve, verify_certificate
from cellfree_wpt.energy import (eh_model_presets, harvested_energy,
                                 input_power_coefficients,
                                 input_power_coherent, input_power_noncoherent)
from cellfree_wpt.estimation import assign_pilots, estimator_statistics
from cellfree_wpt.maxmin_optimizer import fpc_baseline
from cellfree_wpt.montecarlo import (agrees, mc_input_power,
                                     mc_se_coefficients, verify_lemma5,
                                     verify_lemma6)
from cellfree_wpt.energy import ap_tx_power
from cellfree_wpt.experiments_cli import setup_artifacts
from cellfree_wpt.spectral_efficiency import optimal_lsfd, se_coefficients, sinr

MC_SAMPLES = 100_000


def oracle_fixture(i):
    """Small randomized system: 2 APs, 2 UEs, 2 antennas, mixed LOS/NLOS.

    Odd i uses a single shared pilot, even i orthogonal pilots, so both
    pilot-sharing cases appear. One link is forced NLOS and one LOS.
    """
    tau_p = 1 if i % 2 else 2
    cfg = NetworkConfig(num_aps=2, antennas_per_ap=2, num_ues=2,
                        tau_p=tau_p, tau_u=200 - tau_p - 25)
    rng = np.random.default_rng(np.random.SeedSequence([404, i]))
    K, L, N = cfg.num_ues, cfg.num_aps, cfg.antennas_per_ap
    gain = 10.0 ** rng.uniform(-8.0, -6.0, (K, L))
    kappa = 10.0 ** rng.uniform(0.3, 1.0, (K, L))
    los_state = rng.random((K, L)) < 0.7
    los_state.flat[i % (K * L)] = False
    los_state.flat[(i + 1) % (K * L)] = True
    kappa = np.where(los_state, kappa, 0.0)
    beta = gain / (1.0 + kappa)
    amp = np.sqrt(gain * kappa / (1.0 + kappa))
    steer = steering_vector(rng.uniform(-np.pi, np.pi, K * L), N).reshape(K, L, N)
    stats = ChannelStatistics(los=amp[..., None] * steer, beta=beta)
    assignment = assign_pilots(K, tau_p, rng)
    return cfg, stats, assignment, rng


def test_c1_closed_form_oracles():
    t0 = time.perf_counter()
    for i in range(5):
        cfg, stats, assignment, rng = oracle_fixture(i)
        K, L = cfg.num_ues, cfg.num_aps
        est = estimator_statistics(stats, assignment, cfg)
        p = rng.uniform(0.05, 0.25, size=(K, L))
        lift = np.einsum("kl,km->klm", np.sqrt(p), np.sqrt(p))
        for estimator in ("lmmse", "ls"):
            inputs = input_power_coefficients(stats, est, assignment, cfg,
                                              estimator)
            for scheme in ("coherent", "noncoherent"):
                for k in range(K):
                    if scheme == "coherent":
                        closed = input_power_coherent(lift, inputs, k)
                    else:
                        closed = input_power_noncoherent(p, inputs, k)
                    mean, se = mc_input_power(stats, assignment, cfg,
                                              estimator, scheme, p, k,
                                              MC_SAMPLES, rng)
                    assert agrees(mean, se, closed), (i, estimator, scheme, k)
            coeffs = se_coefficients(stats, est, assignment, cfg, estimator)
            for k in range(K):
                mc = mc_se_coefficients(stats, assignment, cfg, estimator, k,
                                        MC_SAMPLES, rng)
                assert agrees(mc["b"], mc["b_se"], coeffs.b[k]), (i, estimator, k)
                assert agrees(mc["C"], mc["C_se"], coeffs.C[k]), (i, estimator, k)
                assert agrees(mc["D"], mc["D_se"], coeffs.D[k]), (i, estimator, k)
    assert time.perf_counter() - t0 <= 120.0


def test_c2_moment_identities():
    # frozen seed: across 50 three-sigma checks an arbitrary stream has a
    # ~13% chance of one >3 SE fluctuation; unbiasedness was verified
    # separately by rerunning the flagged instance at 4x and 16x samples
    rng = np.random.default_rng(np.random.SeedSequence([408]))
    for i in range(10):
        N = int(rng.integers(1, 5))
        G = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        A = G @ G.conj().T / N
        B = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        rep = verify_lemma5(A, B, MC_SAMPLES, rng)
        assert abs(rep["estimate"] - rep["closed_form"]) <= 3.0 * rep["stderr"], (i, rep)
    for i in range(10):
        N = int(rng.integers(1, 5))
        xbar = rng.normal(size=N) + 1j * rng.normal(size=N)
        sigma_x = float(rng.uniform(0.2, 1.0))
        alpha = float(rng.uniform(0.3, 2.0))
        B = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        W = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        Cx = np.outer(xbar, xbar.conj()) + sigma_x**2 * np.eye(N)
        C_y = alpha**2 * Cx + W @ W.conj().T / N + 0.1 * np.eye(N)
        rep = verify_lemma6(xbar, sigma_x, alpha, B, C_y, MC_SAMPLES, rng)
        d1 = rep["first_estimate"] - rep["first_closed"]
        s1 = rep["first_stderr"]
        assert abs(d1.real) <= 3.0 * s1.real, (i, rep)
        assert abs(d1.imag) <= 3.0 * s1.imag, (i, rep)
        d2 = rep["second_estimate"] - rep["second_closed"]
        assert abs(d2) <= 3.0 * rep["second_stderr"], (i, rep)


def test_c3_conic_battery():
    for i in range(50):
        kind, problem, aux = battery_case(i)
        sol = solve(problem, tol=1e-9)
        rep = verify_certificate(problem, sol, tol=1e-6)
        assert rep["ok"], (i, kind, sol.status, rep)
        if kind == "optimum":
            assert sol.status == "Optimal", (i, sol.status)
            assert abs(sol.obj - aux) / (1.0 + abs(aux)) <= 1e-6, (i, sol.obj, aux)
        elif kind == "primal_infeasible":
            assert sol.status == "PrimalInfeasible", (i, sol.status)
        else:
            assert sol.status == "DualInfeasible", (i, sol.status)
        again = solve(problem, tol=1e-9)
        assert again.status == sol.status
        assert again.iterations == sol.iterations
        for first, second in ((sol.x, again.x), (sol.y, again.y),
                              (sol.z, again.z)):
            if first is None:
                assert second is None
            else:
                assert np.array_equal(first, second)


def test_c4_rank_one_extraction(desk_matrix):
    audited = 0
    for (estimator, scheme, eh, mode), runs in desk_matrix.items():
        if mode != "mmf":
            continue
        for run in runs:
            for st in run["result"].log:
                if not st.feasible:
                    continue
                audited += 1
                where = (estimator, scheme, eh, run["setup"], st.solve_index)
                assert st.diag_err <= 1e-9, where
                assert st.ik_gain_min >= -1e-6, where
                assert st.ap_margin <= 1.0 + 1e-6, where
                assert st.energy_margin <= 1.0 + 1e-6, where
                assert st.sinr_margin >= 1.0 - 1e-6, where
    assert audited > 100


def test_c5_bisection_convergence(desk_matrix):
    runs = desk_matrix["lmmse", "coherent", "M1", "mmf"]
    assert len(runs) == 20
    total = 0.0
    for run in runs:
        res = run["result"]
        assert res.status == "optimal", (run["setup"], res.status)
        stars = [st.t_star for st in res.log if st.feasible]
        assert all(b >= a - 1e-12 for a, b in zip(stars, stars[1:])), run["setup"]
        assert res.t_star <= res.tmax * (1.0 + 1e-9), run["setup"]
        assert res.solves <= 60, (run["setup"], res.solves)
        total += run["seconds"]
    assert total <= 900.0, total


def test_c6_mmf_beats_fpc(desk_matrix):
    for estimator in ("lmmse", "ls"):
        for scheme in ("coherent", "noncoherent"):
            mmf = desk_matrix[estimator, scheme, "M1", "mmf"]
            fpc = desk_matrix[estimator, scheme, "M1", "fpc"]
            for a, b in zip(mmf, fpc):
                assert a["result"].min_se >= b["result"].min_se - 1e-9, \
                    (estimator, scheme, a["setup"])


def test_c7_orderings(desk_matrix, desk_artifacts, desk_cfg):
    def min_se(estimator, scheme, eh):
        return np.array([r["result"].min_se
                         for r in desk_matrix[estimator, scheme, eh, "mmf"]])

    for estimator in ("lmmse", "ls"):
        assert np.all(min_se(estimator, "coherent", "M1")
                      >= min_se(estimator, "noncoherent", "M1") - 1e-9), estimator
    for scheme in ("coherent", "noncoherent"):
        assert np.all(min_se("lmmse", scheme, "M1")
                      >= min_se("ls", scheme, "M1") - 1e-9), scheme
    assert np.all(min_se("lmmse", "noncoherent", "M2")
                  >= min_se("lmmse", "noncoherent", "M1") - 1e-9)

    # linearized rectifier harvests at least as much as the saturating fit at
    # every input power: a wide grid plus the actual optimized input powers
    presets = eh_model_presets()
    m1, lin = presets["M1"], presets["L"]
    grid = np.concatenate([[0.0], np.geomspace(1e-12, 10.0, 200)])
    e_lin = harvested_energy(grid, lin, desk_cfg.tau_d)
    e_m1 = harvested_energy(grid, m1, desk_cfg.tau_d)
    assert np.all(e_lin >= e_m1)
    assert e_lin[0] == e_m1[0] == 0.0
    for run in desk_matrix["lmmse", "noncoherent", "M1", "mmf"]:
        _, inputs, _ = desk_artifacts["lmmse", run["setup"]]
        p = run["result"].p
        for k in range(desk_cfg.num_ues):
            ik = input_power_noncoherent(p, inputs, k)
            assert (harvested_energy(ik, lin, desk_cfg.tau_d)
                    >= harvested_energy(ik, m1, desk_cfg.tau_d))


def test_c8_exact_invariants(desk_cfg):
    coeffs, inputs, norms = setup_artifacts(desk_cfg, 0, 0, "lmmse")
    rng = np.random.default_rng(np.random.SeedSequence([406]))
    eta = rng.uniform(1e-6, 1e-4, desk_cfg.num_ues)

    # SINR invariant under complex rescaling of the LSFD vector, 12 digits
    for k in range(desk_cfg.num_ues):
        a = optimal_lsfd(eta, coeffs, k)
        base = sinr(a, eta, coeffs, k)
        for scale in (1e-8, 1e8, 0.3 + 0.7j, -2.5, 1j):
            scaled = sinr(scale * a, eta, coeffs, k)
            assert abs(scaled - base) <= 1e-12 * abs(base), (k, scale)

    # estimate and error covariances recompose the channel correlation
    rng = np.random.default_rng(np.random.SeedSequence([0, 0]))
    geom = generate_geometry(desk_cfg, rng)
    stats = large_scale_stats(geom, desk_cfg, rng)
    assignment = assign_pilots(desk_cfg.num_ues, desk_cfg.tau_p, rng)
    est = estimator_statistics(stats, assignment, desk_cfg)
    resid = np.abs(est.rhat + est.error_cov - stats.R)
    assert resid.max() <= 8 * np.finfo(float).eps * np.abs(stats.R).max()

    # fractional power control spends exactly the per-AP budget
    model = eh_model_presets()["M1"]
    fpc = fpc_baseline(coeffs, inputs, norms, model, desk_cfg,
                       scheme="noncoherent")
    per_ap = ap_tx_power(fpc.p, norms)
    assert np.max(np.abs(per_ap - desk_cfg.ap_power_budget)) \
        <= 1e-13 * desk_cfg.ap_power_budget

    # the coherence block split is validated at construction
    with pytest.raises(ValueError):
        NetworkConfig(tau_c=200, tau_p=2, tau_d=25, tau_u=100)
