"""Average harvested power at the UEs and transmit-power accounting at the APs.

During the downlink phase every AP beamforms energy symbols with the (scaled)
channel estimates as precoders. The average power I_k entering UE k's
rectifier is a known function of the link statistics: linear in the downlink
power coefficients with per-link scalar weights, so the weights are
precomputed once per setup and every later evaluation is a plain inner
product. A saturating rectifier curve maps I_k to harvested energy.
"""

from dataclasses import dataclass

import numpy as np

PSD_TOL = 1e-8


@dataclass
class EHModel:
    """Rectifier curve E = tau_d * A * I / (B * I + C); B = 0 is the linear model."""

    A: float
    B: float
    C: float
    name: str = ""

    def __post_init__(self):
        if self.A <= 0 or self.B < 0 or self.C <= 0:
            raise ValueError("need A > 0, B >= 0, C > 0")

    @property
    def saturation(self):
        """Supremum of harvested power A/B (inf for the linear model)."""
        return np.inf if self.B == 0 else self.A / self.B


def eh_model_presets():
    """Measurement-fit rectifier models M1 and M2 plus the linearized M1."""

    def build(a, b, c, name, linear=False):
        return EHModel(
            A=1e3 * (a * c - b),
            B=0.0 if linear else 1e6 * c,
            C=1e3 * c * c,
            name=name,
        )

    return {
        "M1": build(0.3929, 0.01675, 0.04401, "M1"),
        "M2": build(2.463, 1.635, 0.826, "M2"),
        "L": build(0.3929, 0.01675, 0.04401, "L", linear=True),
    }


def harvested_energy(input_power, model, tau_d):
    """Energy collected over tau_d downlink samples at rectifier input power I."""
    I = np.asarray(input_power, dtype=float)
    if np.any(I < 0):
        raise ValueError("input power must be nonnegative")
    return tau_d * model.A * I / (model.B * I + model.C)


def precoder_norms(est_stats, estimator):
    """E{||w_kl||^2} per link: trace of the processing-vector covariance."""
    if estimator == "lmmse":
        mats = est_stats.rhat
    elif estimator == "ls":
        mats = est_stats.psi
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return np.real(np.trace(mats, axis1=2, axis2=3))


def ap_tx_power(p, norms, l=None):
    """Average downlink power spent by AP l: sum_k p_kl E{||w_kl||^2}.

    p is (K, L) nonnegative or (K, L, L) matrices whose diagonals hold p_kl.
    With l=None the whole (L,) vector is returned.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim == 3:
        p = np.diagonal(p, axis1=1, axis2=2)
    if np.any(p < 0):
        raise ValueError("negative power coefficient")
    per_ap = np.sum(p * norms, axis=0)
    return per_ap if l is None else per_ap[l]


@dataclass
class InputPowerCoefficients:
    """Per-link weights making I_k linear in the downlink power variables.

    M[k, i] is a real symmetric L x L matrix: I_k for the coherent scheme is
    sum_i <M[k, i], P_i> (Frobenius), and the non-coherent scheme uses only
    the diagonals. chi holds the cross-AP amplitude factors for diagnostics.
    """

    M: np.ndarray            # (K, K, L, L) real
    chi: np.ndarray          # (K, K, L) complex, zero when pilots differ
    shares_pilot: np.ndarray  # (K, K) bool

    @property
    def diag(self):
        return np.diagonal(self.M, axis1=2, axis2=3)


def input_power_coefficients(stats, est_stats, assignment, cfg, estimator):
    """Precompute the linear weights of I_k for one estimator.

    The generic term tr(Cov(w_il) R_kl) applies to every (i, l); pilot-sharing
    pairs add a same-AP boost xi and a cross-AP amplitude chi coming from the
    estimate of UE i containing UE k's channel.
    """
    K, L, N = stats.los.shape
    scale = cfg.tau_p * cfg.pilot_power
    if estimator == "lmmse":
        cov_w = est_stats.rhat
    elif estimator == "ls":
        cov_w = est_stats.psi
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    omega = np.real(np.einsum("ilnm,klmn->kil", cov_w, stats.R))
    xi = np.zeros((K, K, L))
    chi = np.zeros((K, K, L), dtype=complex)
    shares = np.zeros((K, K), dtype=bool)

    if estimator == "lmmse":
        # T[i, l] = psi_il^{-1} R_il, shared by every k in the i-th sharing set
        T = np.linalg.solve(est_stats.psi, stats.R[:, :, :, :])
        trT = np.real(np.einsum("ilnn->il", T))
    for k in range(K):
        for i in assignment.sharing_sets[k]:
            shares[k, i] = True
            if estimator == "lmmse":
                q = np.einsum("ln,lnm,lm->l", stats.los[k].conj(), T[i], stats.los[k])
                xi[k, i] = scale**2 * (
                    2.0 * stats.beta[k] * np.real(q) * trT[i]
                    + stats.beta[k] ** 2 * trT[i] ** 2
                )
                chi[k, i] = scale * (q + stats.beta[k] * trT[i])
            else:
                los_pow = np.sum(np.abs(stats.los[k]) ** 2, axis=1)
                xi[k, i] = scale * (2.0 * N * stats.beta[k] * los_pow
                                    + N**2 * stats.beta[k] ** 2)
                chi[k, i] = np.sqrt(scale) * (los_pow + N * stats.beta[k])

    cross = np.real(np.einsum("kil,kim->kilm", chi, chi.conj()))
    eye = np.eye(L, dtype=bool)
    cross[:, :, eye] = 0.0
    M = cross
    M[:, :, eye] = omega + xi
    return InputPowerCoefficients(M=M, chi=chi, shares_pilot=shares)


def _check_psd(P):
    for i, Pi in enumerate(P):
        if not np.allclose(Pi, Pi.T, atol=PSD_TOL * max(1.0, np.abs(Pi).max())):
            raise ValueError(f"P[{i}] is not symmetric")
        if np.any(Pi < -PSD_TOL * max(1.0, Pi.max(initial=0.0))):
            raise ValueError(f"P[{i}] has negative entries")
        ev_min = np.linalg.eigvalsh(Pi)[0]
        if ev_min < -PSD_TOL * max(1.0, np.trace(Pi)):
            raise ValueError(f"P[{i}] is not PSD (min eigenvalue {ev_min:.3e})")


def input_power_coherent(P, coeffs, k, validate=True):
    """Average rectifier input power at UE k when APs share energy symbols.

    P is (K, L, L): one symmetric PSD matrix per UE with nonnegative entries
    (entries are sqrt(p_il p_il') for physical rank-one allocations).
    """
    P = np.asarray(P, dtype=float)
    if validate:
        _check_psd(P)
    return float(np.sum(coeffs.M[k] * P))


def input_power_noncoherent(p, coeffs, k, validate=True):
    """Average rectifier input power at UE k with independent per-AP symbols."""
    p = np.asarray(p, dtype=float)
    if validate and np.any(p < 0):
        raise ValueError("negative power coefficient")
    return float(np.sum(coeffs.diag[k] * p))
