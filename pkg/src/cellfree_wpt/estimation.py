"""Pilot assignment, de-spreading, and linear channel estimation.

UEs send tau_p-length pilots that are either identical or orthogonal, so the
de-spread observation of a link mixes the channels of all UEs sharing the
pilot. Estimation statistics (psi, rhat, error_cov) are everything the
closed-form energy and spectral-efficiency expressions need downstream.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

COND_LIMIT = 1e12


class IllConditionedStatisticsError(Exception):
    """Estimation statistics too close to singular to invert reliably."""


@dataclass
class PilotAssignment:
    pilot_index: np.ndarray      # (K,) int in [0, tau_p)
    sharing_sets: list           # sharing_sets[k] = sorted array of UEs with UE k's pilot

    @property
    def num_ues(self):
        return len(self.pilot_index)

    def shares(self, k, i):
        return self.pilot_index[k] == self.pilot_index[i]


@dataclass
class EstimatorStatistics:
    """Per-link matrices driving both estimators.

    psi[k, l] is the covariance of the de-spread pilot observation, rhat[k, l]
    the covariance of the LMMSE estimate, and error_cov[k, l] the estimation
    error covariance, with rhat + error_cov equal to the channel correlation.
    """

    psi: np.ndarray          # (K, L, N, N) complex Hermitian PD
    rhat: np.ndarray         # (K, L, N, N) complex Hermitian PSD
    error_cov: np.ndarray    # (K, L, N, N)


def assign_pilots(K, tau_p, rng):
    """Map UEs to pilots so the sharing sets are as balanced as possible.

    UEs are shuffled and dealt round-robin over the tau_p orthogonal pilots,
    so every set has floor(K/tau_p) or ceil(K/tau_p) members.
    """
    order = rng.permutation(K)
    pilot_index = np.empty(K, dtype=int)
    pilot_index[order] = np.arange(K) % tau_p
    sets = [np.sort(np.flatnonzero(pilot_index == pilot_index[k])) for k in range(K)]
    return PilotAssignment(pilot_index=pilot_index, sharing_sets=sets)


def pilot_matrix(tau_p):
    """Orthogonal pilot book: DFT columns with squared norm tau_p."""
    t = np.arange(tau_p)
    return np.exp(-2j * np.pi * np.outer(t, t) / tau_p)


def despread(pilot_block, phi):
    """Project the received pilot block onto one pilot: z = Z phi^* / sqrt(tau_p)."""
    tau_p = phi.shape[-1]
    return pilot_block @ phi.conj() / np.sqrt(tau_p)


def psi_matrix(stats, assignment, cfg):
    """Covariance of the de-spread observation for every link, shape (K, L, N, N).

    psi[k, l] = tau_p rho_p sum_{i in P_k} R_il + noise_power I. Identical for
    all UEs in a sharing set.
    """
    K, L, N = stats.los.shape
    scale = cfg.tau_p * cfg.pilot_power
    eye = np.eye(N)
    psi = np.empty((K, L, N, N), dtype=complex)
    for k in range(K):
        members = assignment.sharing_sets[k]
        acc = stats.R[members].sum(axis=0)
        psi[k] = scale * acc + cfg.noise_power * eye
    return psi


def estimator_statistics(stats, assignment, cfg):
    """Build psi, rhat and error_cov for every link.

    rhat = tau_p rho_p R psi^{-1} R via Cholesky solves; error_cov = R - rhat
    by construction so the split is exact. Raises
    IllConditionedStatisticsError when any psi has condition number above
    COND_LIMIT (only possible with vanishing noise and degenerate R).
    """
    K, L, N = stats.los.shape
    psi = psi_matrix(stats, assignment, cfg)
    scale = cfg.tau_p * cfg.pilot_power
    rhat = np.empty_like(psi)
    for k in range(K):
        for l in range(L):
            ev = np.linalg.eigvalsh(psi[k, l])
            if ev[0] <= 0 or ev[-1] / ev[0] > COND_LIMIT:
                cond = np.inf if ev[0] <= 0 else ev[-1] / ev[0]
                raise IllConditionedStatisticsError(
                    f"psi[{k},{l}] condition {cond:.3e}"
                )
            c = cho_factor(psi[k, l], lower=True)
            R = stats.R[k, l]
            pinv_R = cho_solve(c, R)
            m = scale * R @ pinv_R
            rhat[k, l] = 0.5 * (m + m.conj().T)
    return EstimatorStatistics(psi=psi, rhat=rhat, error_cov=stats.R - rhat)


def lmmse_estimate(z, R, psi, tau_p, pilot_power):
    """LMMSE channel estimate from the de-spread observation of one link.

    z may carry leading batch axes; returns sqrt(tau_p rho_p) R psi^{-1} z.
    """
    c = cho_factor(psi, lower=True)
    filt = np.sqrt(tau_p * pilot_power) * (R @ cho_solve(c, np.eye(R.shape[0])))
    return z @ filt.T


def ls_statistic(z):
    """The de-spread observation itself is the least-squares processing vector."""
    return z
