"""Uplink spectral efficiency with maximum-ratio decoding plus a CPU-side
per-UE combining vector across APs (large-scale fading decoding, LSFD).

The SINR of UE k depends on the statistics-only coefficients (b_k, C_ki, D_k):
signal amplitudes per AP, interference cross-moments per interferer and AP
pair, and the decoder noise levels. The optimal LSFD vector maximizes a
generalized Rayleigh quotient and has a closed linear-solve form.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .estimation import IllConditionedStatisticsError


@dataclass
class SECoefficients:
    b: np.ndarray   # (K, L) complex: E{v_kl^H g_kl}
    C: np.ndarray   # (K, K, L, L) complex Hermitian in the AP axes
    D: np.ndarray   # (K, L) real positive: sigma^2 E{||v_kl||^2}


def se_coefficients(stats, est_stats, assignment, cfg, estimator):
    """Closed-form SINR coefficients for MR decoding with either estimator.

    The generic interference weight is tr(Cov(v_kl) R_il). UEs sharing UE k's
    pilot leak into v_kl, adding a same-AP term and a rank-one cross-AP term
    built from per-AP amplitudes zeta[k, i, l].
    """
    K, L, N = stats.los.shape
    scale = cfg.tau_p * cfg.pilot_power
    if estimator == "lmmse":
        cov_v = est_stats.rhat
    elif estimator == "ls":
        cov_v = est_stats.psi
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    # same-AP generic term: c[k, i, l, l] starts from tr(cov_v[k, l] R[i, l])
    base = np.real(np.einsum("klnm,ilmn->kil", cov_v, stats.R))
    D = cfg.noise_power * np.real(np.einsum("klnn->kl", cov_v))

    C = np.zeros((K, K, L, L), dtype=complex)
    eyeL = np.eye(L, dtype=bool)
    if estimator == "lmmse":
        T = np.linalg.solve(est_stats.psi, stats.R)       # T[k, l] = psi^{-1} R
        trT = np.real(np.einsum("klnn->kl", T))
        b = scale * (
            np.real(np.einsum("kln,klnm,klm->kl", stats.los.conj(), T, stats.los))
            + stats.beta * trT
        )
        for k in range(K):
            same = np.zeros((K, L))
            zeta = np.zeros((K, L), dtype=complex)
            for i in assignment.sharing_sets[k]:
                q = np.einsum("ln,lnm,lm->l", stats.los[i].conj(), T[k], stats.los[i])
                same[i] = scale**2 * (
                    2.0 * stats.beta[i] * np.real(q) * trT[k]
                    + stats.beta[i] ** 2 * trT[k] ** 2
                )
                zeta[i] = scale * (q + stats.beta[i] * trT[k])
            Ck = np.einsum("il,im->ilm", zeta, zeta.conj())
            Ck[:, eyeL] = base[k] + same
            C[k] = Ck
    else:
        los_pow = np.sum(np.abs(stats.los) ** 2, axis=2)  # (K, L)
        b = np.sqrt(scale) * (los_pow + N * stats.beta)
        zeta_all = np.sqrt(scale) * (los_pow + N * stats.beta)
        for k in range(K):
            same = np.zeros((K, L))
            zeta = np.zeros((K, L))
            for i in assignment.sharing_sets[k]:
                same[i] = scale * (2.0 * N * stats.beta[i] * los_pow[i]
                                   + N**2 * stats.beta[i] ** 2)
                zeta[i] = zeta_all[i]
            Ck = np.einsum("il,im->ilm", zeta, zeta).astype(complex)
            Ck[:, eyeL] = base[k] + same
            C[k] = Ck
    return SECoefficients(b=b.astype(complex), C=C, D=D)


def sinr(a, eta, coeffs, k):
    """Effective uplink SINR of UE k for LSFD vector a and uplink powers eta.

    Invariant under any nonzero complex rescaling of a.
    """
    a = np.asarray(a, dtype=complex)
    if not np.any(a):
        raise ValueError("LSFD vector must be nonzero")
    signal = eta[k] * np.abs(a.conj() @ coeffs.b[k]) ** 2
    quad = np.real(np.einsum("l,ilm,m->i", a.conj(), coeffs.C[k], a)) @ eta
    noise = np.real(a.conj() * a) @ coeffs.D[k]
    denom = quad - signal + noise
    return float(signal / denom)


def optimal_lsfd(eta, coeffs, k):
    """LSFD vector maximizing UE k's SINR, returned unit-norm.

    Solves (sum_i eta_i C_ki + diag(D_k) - eta_k b_k b_k^H) a = b_k. The
    system matrix is Hermitian positive definite whenever D_k > 0; a
    symmetric-eigenvalue fallback covers near-singular statistics.
    """
    b = coeffs.b[k]
    M = np.einsum("i,ilm->lm", eta, coeffs.C[k]) + np.diag(coeffs.D[k])
    M = M - eta[k] * np.outer(b, b.conj())
    M = 0.5 * (M + M.conj().T)
    try:
        c = cho_factor(M, lower=True)
        a = cho_solve(c, b)
    except np.linalg.LinAlgError:
        ev, V = np.linalg.eigh(M)
        if ev[-1] <= 0:
            raise IllConditionedStatisticsError("LSFD system not positive definite")
        ev = np.maximum(ev, 1e-14 * ev[-1])
        a = V @ ((V.conj().T @ b) / ev)
    norm = np.linalg.norm(a)
    if norm == 0:
        raise IllConditionedStatisticsError("LSFD solve returned zero vector")
    return a / norm


def se_value(sinr_value, tau_u, tau_c):
    """Spectral efficiency in bit/s/Hz: uplink fraction times log2(1 + SINR)."""
    return (tau_u / tau_c) * np.log2(1.0 + np.asarray(sinr_value))
