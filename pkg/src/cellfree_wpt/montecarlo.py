"""Brute-force sampling oracles for every closed-form expectation.

Everything here is built directly from the channel statistics: pilots are
re-despread, observation covariances re-summed, and the linear estimation
filter re-derived with plain inversions. No code is shared with the
closed-form modules, so agreement between the two is meaningful evidence.

All estimators return (mean, standard error); comparisons should be phrased
in standard-error units so they stay valid at any sample count.
"""

import numpy as np

DEFAULT_BATCH = 20000


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


class _MeanAccumulator:
    """Streaming mean and standard error, complex-safe (componentwise)."""

    def __init__(self, shape=()):
        self.n = 0
        self.s = np.zeros(shape, dtype=complex)
        self.s2_re = np.zeros(shape, dtype=float)
        self.s2_im = np.zeros(shape, dtype=float)

    def add(self, batch):
        batch = np.asarray(batch)
        self.n += batch.shape[0]
        self.s = self.s + batch.sum(axis=0)
        self.s2_re = self.s2_re + (batch.real**2).sum(axis=0)
        self.s2_im = self.s2_im + (batch.imag**2).sum(axis=0)

    def mean(self):
        return self.s / self.n

    def stderr(self):
        m = self.s / self.n
        var_re = np.maximum(self.s2_re / self.n - m.real**2, 0.0)
        var_im = np.maximum(self.s2_im / self.n - m.imag**2, 0.0)
        denom = max(self.n - 1, 1)
        return np.sqrt(var_re * self.n / denom / self.n) + 1j * np.sqrt(
            var_im * self.n / denom / self.n
        )


def agrees(mc_mean, mc_stderr, closed, rel=0.02, nsig=3.0):
    """Entrywise check |mc - closed| <= max(rel |closed|, nsig * stderr)."""
    mc_mean = np.asarray(mc_mean)
    closed = np.asarray(closed)
    se = np.abs(np.asarray(mc_stderr))
    tol = np.maximum(rel * np.abs(closed), nsig * se)
    return np.all(np.abs(mc_mean - closed) <= tol)


def _pilot_artifacts(stats, assignment, cfg):
    """Sharing matrix, per-pilot noise routing and the estimation filters."""
    K, L, N = stats.los.shape
    share = np.zeros((K, K))
    for k in range(K):
        share[k, assignment.sharing_sets[k]] = 1.0
    scale = cfg.tau_p * cfg.pilot_power
    psi = scale * np.einsum("ki,ilnm->klnm", share, stats.R) + cfg.noise_power * np.eye(N)
    filt = np.sqrt(scale) * np.einsum(
        "klnm,klmj->klnj", stats.R, np.linalg.inv(psi)
    )
    return share, filt


def _sample_links(stats, assignment, cfg, estimator, rng, batch, share, filt):
    """One batch of channels g and processing vectors w for every link."""
    K, L, N = stats.los.shape
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(batch, K, L))
    g = np.exp(1j * theta)[..., None] * stats.los + np.sqrt(stats.beta)[
        ..., None
    ] * _complex_normal(rng, (batch, K, L, N))
    noise = np.sqrt(cfg.noise_power) * _complex_normal(rng, (batch, cfg.tau_p, L, N))
    z = np.sqrt(cfg.tau_p * cfg.pilot_power) * np.einsum("ki,biln->bkln", share, g)
    z = z + noise[:, assignment.pilot_index, :, :]
    if estimator == "lmmse":
        w = np.einsum("klnm,bklm->bkln", filt, z)
    elif estimator == "ls":
        w = z
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return g, w


def mc_input_power(stats, assignment, cfg, estimator, scheme, p, k,
                   num_samples, rng, batch=DEFAULT_BATCH):
    """Sampled average power into UE k's rectifier for downlink powers p (K, L).

    Draws channels, pilot noise and energy symbols, forms the superimposed AP
    transmit signals and averages |received|^2. The coherent scheme shares one
    symbol per UE across APs; the non-coherent scheme draws per-AP symbols.
    """
    p = np.asarray(p, dtype=float)
    amp = np.sqrt(p)
    share, filt = _pilot_artifacts(stats, assignment, cfg)
    acc = _MeanAccumulator()
    done = 0
    while done < num_samples:
        b = min(batch, num_samples - done)
        g, w = _sample_links(stats, assignment, cfg, estimator, rng, b, share, filt)
        y = np.einsum("biln,bln->bil", w.conj(), g[:, k])
        if scheme == "coherent":
            s = _complex_normal(rng, (b, p.shape[0]))
            r = np.einsum("bi,il,bil->b", s, amp, y)
        elif scheme == "noncoherent":
            s = _complex_normal(rng, (b,) + p.shape)
            r = np.einsum("bil,il,bil->b", s, amp, y)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        acc.add(np.abs(r) ** 2)
        done += b
    return float(np.real(acc.mean())), float(np.real(acc.stderr()))


def mc_se_coefficients(stats, assignment, cfg, estimator, k,
                       num_samples, rng, batch=DEFAULT_BATCH):
    """Sampled SINR coefficients of UE k: dict with b, C, D means and stderrs.

    b[l] = E{v_kl^H g_kl}, C[i, l, l'] = E{v_kl^H g_il g_il'^H v_kl'} and
    D[l] = noise_power * E{||v_kl||^2}.
    """
    K, L, N = stats.los.shape
    share, filt = _pilot_artifacts(stats, assignment, cfg)
    acc_b = _MeanAccumulator((L,))
    acc_C = _MeanAccumulator((K, L, L))
    acc_D = _MeanAccumulator((L,))
    done = 0
    while done < num_samples:
        nb = min(batch, num_samples - done)
        g, w = _sample_links(stats, assignment, cfg, estimator, rng, nb, share, filt)
        v = w[:, k]
        x = np.einsum("bln,biln->bil", v.conj(), g)
        acc_b.add(x[:, k, :])
        acc_C.add(np.einsum("bil,bim->bilm", x, x.conj()))
        acc_D.add(cfg.noise_power * np.sum(np.abs(v) ** 2, axis=2))
        done += nb
    return {
        "b": acc_b.mean(), "b_se": acc_b.stderr(),
        "C": acc_C.mean(), "C_se": acc_C.stderr(),
        "D": np.real(acc_D.mean()), "D_se": acc_D.stderr(),
    }


def verify_lemma5(A, B, num_samples, rng, batch=DEFAULT_BATCH):
    """Sample E{|u^H B u|^2} for u ~ CN(0, A) and return it with the closed form.

    The closed form is |tr(AB)|^2 + tr(A B A B^H).
    """
    N = A.shape[0]
    ev, V = np.linalg.eigh(A)
    root = V @ np.diag(np.sqrt(np.maximum(ev, 0.0))) @ V.conj().T
    closed = np.abs(np.trace(A @ B)) ** 2 + np.real(np.trace(A @ B @ A @ B.conj().T))
    acc = _MeanAccumulator()
    done = 0
    while done < num_samples:
        nb = min(batch, num_samples - done)
        u = _complex_normal(rng, (nb, N)) @ root.T
        q = np.einsum("bn,nm,bm->b", u.conj(), B, u)
        acc.add(np.abs(q) ** 2)
        done += nb
    return {
        "estimate": float(np.real(acc.mean())),
        "stderr": float(np.real(acc.stderr())),
        "closed_form": float(closed),
    }


def verify_lemma6(xbar, sigma_x, alpha, B, C_y, num_samples, rng, batch=DEFAULT_BATCH):
    """Check both moments of y^H B x for y = alpha x + z.

    x has a uniformly random common phase on its mean xbar plus CN(0, sigma_x^2 I)
    scatter; z is drawn independent zero-mean Gaussian with covariance
    C_y - alpha^2 (xbar xbar^H + sigma_x^2 I), which must be PSD.

    Closed forms:
      E{y^H B x}    = alpha xbar^H B xbar + alpha sigma_x^2 tr(B)
      E{|y^H B x|^2} = 2 alpha^2 sigma_x^2 Re{xbar^H B xbar tr(B^H)}
                       + alpha^2 sigma_x^4 |tr(B)|^2
                       + tr(B (xbar xbar^H + sigma_x^2 I) B^H C_y)
    """
    N = xbar.shape[0]
    Cx = np.outer(xbar, xbar.conj()) + sigma_x**2 * np.eye(N)
    Cz = C_y - alpha**2 * Cx
    ev, V = np.linalg.eigh(0.5 * (Cz + Cz.conj().T))
    if ev.min() < -1e-10 * max(1.0, ev.max()):
        raise ValueError("C_y - alpha^2 C_x must be PSD for an admissible z")
    root_z = V @ np.diag(np.sqrt(np.maximum(ev, 0.0))) @ V.conj().T

    trB = np.trace(B)
    first_closed = alpha * (xbar.conj() @ B @ xbar) + alpha * sigma_x**2 * trB
    second_closed = (
        2.0 * alpha**2 * sigma_x**2 * np.real((xbar.conj() @ B @ xbar) * np.conj(trB))
        + alpha**2 * sigma_x**4 * np.abs(trB) ** 2
        + np.real(np.trace(B @ Cx @ B.conj().T @ C_y))
    )

    acc1 = _MeanAccumulator()
    acc2 = _MeanAccumulator()
    done = 0
    while done < num_samples:
        nb = min(batch, num_samples - done)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=nb)
        x = np.exp(1j * theta)[:, None] * xbar + sigma_x * _complex_normal(rng, (nb, N))
        z = _complex_normal(rng, (nb, N)) @ root_z.T
        y = alpha * x + z
        q = np.einsum("bn,nm,bm->b", y.conj(), B, x)
        acc1.add(q)
        acc2.add(np.abs(q) ** 2)
        done += nb
    return {
        "first_estimate": complex(acc1.mean()),
        "first_stderr": complex(acc1.stderr()),
        "first_closed": complex(first_closed),
        "second_estimate": float(np.real(acc2.mean())),
        "second_stderr": float(np.real(acc2.stderr())),
        "second_closed": float(second_closed),
    }
