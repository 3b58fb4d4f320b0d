"""Joint uplink power control and LSFD by bisection on the common SINR target.

Each candidate target t is checked by a conic feasibility program over the
uplink powers and the (lifted) downlink energy allocation, with the LSFD
vectors held fixed. A feasible probe is rounded to a physical rank-one
allocation, pushed onto the power boundaries, and re-decoded with the optimal
LSFD, which re-anchors both bisection endpoints: the achieved min SINR becomes
the new floor and, multiplied by a small expansion factor, the new ceiling
(better decoders can beat the bound that was valid for the old ones).
"""

from dataclasses import dataclass, field

import numpy as np

from .conic_solver import ConeBlock, ConicProblem, smat, solve, svec
from .energy import ap_tx_power, harvested_energy
from .spectral_efficiency import optimal_lsfd, se_value, sinr


def _models_per_ue(models, K):
    if hasattr(models, "A"):
        return [models] * K
    models = list(models)
    if len(models) != K:
        raise ValueError(f"need one rectifier model per UE, got {len(models)}")
    return models


def _input_powers(p, inputs, scheme):
    """I_k for every UE from per-AP powers p (K, L), rank-one when coherent."""
    if scheme == "coherent":
        r = np.sqrt(np.maximum(p, 0.0))
        amp = np.einsum("kilm,il,im->ki", inputs.M, r, r)
        return np.maximum(amp.sum(axis=1), 0.0)
    return np.maximum(np.einsum("kil,il->k", inputs.diag, p), 0.0)


def _lifted_input_powers(P, inputs):
    """I_k from full (K, L, L) downlink matrices, coherent scheme."""
    return np.maximum(np.einsum("kilm,ilm->k", inputs.M, P), 0.0)


def uplink_budget(E, cfg):
    """Largest uplink power sustainable by harvested energy E, floored at 0."""
    return np.maximum(0.0, (E - cfg.tau_p * cfg.pilot_power) / cfg.tau_u)


def tmax_init(coeffs, inputs, norms, models, cfg, scheme="coherent"):
    """Upper bound on the max-min SINR: each UE alone with every AP's budget.

    Returns (bound, per_ue) where per_ue[k] is UE k's solo SINR. A zero bound
    means some UE cannot harvest even its own pilot cost and the max-min
    problem is energy-infeasible.
    """
    K, L = norms.shape
    models = _models_per_ue(models, K)
    per_ue = np.zeros(K)
    for k in range(K):
        p = np.zeros((K, L))
        p[k] = cfg.ap_power_budget / norms[k]
        Ik = _input_powers(p, inputs, scheme)[k]
        E = harvested_energy(Ik, models[k], cfg.tau_d)
        eta_k = uplink_budget(E, cfg)
        if eta_k <= 0:
            continue
        eta = np.zeros(K)
        eta[k] = eta_k
        a = optimal_lsfd(eta, coeffs, k)
        per_ue[k] = sinr(a, eta, coeffs, k)
    return float(per_ue.min()), per_ue


def build_subproblem(t, lsfd, coeffs, inputs, norms, models, cfg,
                     scheme="coherent"):
    """Feasibility of SINR target t as a conic program in standard form.

    Variables: uplink powers eta, the downlink allocation (svec of one PSD
    matrix per UE for the coherent scheme, a nonnegative per-AP vector
    otherwise), and per saturating rectifier a harvest fraction w plus a 3d
    second-order cone enforcing w <= B I / (B I + C).

    Everything is nondimensionalized: downlink powers become per-AP budget
    shares (a diagonal congruence on the lifted matrices, which preserves
    both cones), uplink powers are measured in each UE's solo harvested
    budget, and the rectifier rows in the input power the UE sees under its
    own full-power precoder. Without this the rows span twenty orders of
    magnitude and the interior-point tolerances are meaningless. Returns
    (problem, decode); decode maps a solver point back to physical units as
    (eta, downlink).
    """
    K, L = norms.shape
    models = _models_per_ue(models, K)
    coherent = scheme == "coherent"
    nl = [m.B > 0 for m in models]
    n_nl = sum(nl)
    pilot_cost = cfg.tau_p * cfg.pilot_power

    # hatted energy weights: <M_ki, P_i> = <mhat_ki, Phat_i> with Phat the
    # budget-share variables, and the solo input power as each UE's I unit
    share = cfg.ap_power_budget / norms                     # (K, L)
    if coherent:
        sv = L * (L + 1) // 2
        offd = L * (L - 1) // 2
        iu = np.triu_indices(L)
        diag_pos = np.flatnonzero(iu[0] == iu[1])
        off_pos = np.flatnonzero(iu[0] != iu[1])
        mhat = np.empty((K, K, sv))
        for k in range(K):
            for i in range(K):
                scale_i = np.sqrt(np.outer(share[i], share[i]))
                mhat[k, i] = svec(inputs.M[k, i] * scale_i)
        i_unit = np.array([mhat[k, k] @ svec(np.ones((L, L)))
                           for k in range(K)])
    else:
        mhat = inputs.diag * share[None, :, :]              # (K, K, L)
        i_unit = np.array([mhat[k, k].sum() for k in range(K)])
    i_unit = np.maximum(i_unit, 1e-300)
    e_solo = np.array([harvested_energy(i_unit[k], models[k], cfg.tau_d)
                       for k in range(K)])
    eta_unit = np.maximum((e_solo - pilot_cost) / cfg.tau_u,
                          pilot_cost / cfg.tau_u)
    v_unit = np.array([m.C + m.B * iu_k
                       for m, iu_k in zip(models, i_unit)])

    # nonneg block layout: eta, w, f = 1 - w, s_sinr, s_ap, s_energy, then q
    # (coherent off-diagonal links) or the per-AP power shares (non-coherent)
    off_w = K
    off_f = off_w + n_nl
    off_ss = off_f + n_nl
    off_sa = off_ss + K
    off_se = off_sa + L
    off_tail = off_se + K
    n_nn = off_tail + (K * offd if coherent else K * L)
    soc0 = n_nn
    psd0 = soc0 + 3 * n_nl
    n = psd0 + (K * sv if coherent else 0)
    w_ix, f_ix = {}, {}
    for k in range(K):
        if nl[k]:
            w_ix[k] = off_w + len(w_ix)
            f_ix[k] = off_f + len(f_ix)

    def pw(i):
        # column indices of UE i's downlink variables
        if coherent:
            return psd0 + i * sv
        return off_tail + i * L

    ncol = sv if coherent else L
    m_rows = (K * offd if coherent else 0) + K + L + 4 * n_nl + K
    A = np.zeros((m_rows, n))
    b = np.zeros(m_rows)
    row = 0

    if coherent:
        # entrywise nonnegativity of the lifted matrices: svec entry = sqrt2 q
        for i in range(K):
            for j_off, pos in enumerate(off_pos):
                A[row, pw(i) + pos] = 1.0
                A[row, off_tail + i * offd + j_off] = -np.sqrt(2.0)
                row += 1

    # SINR rows: eta_k (1+t)|a^H b|^2 - t sum_i eta_i a^H C_ki a = t a^H D a,
    # normalized by the signal coefficient of the own uplink power
    for k in range(K):
        a = lsfd[k]
        alpha = np.real(np.einsum("l,ilm,m->i", a.conj(), coeffs.C[k], a))
        sig = np.abs(a.conj() @ coeffs.b[k]) ** 2
        dterm = float(np.real(a.conj() * a) @ coeffs.D[k])
        unit = max(sig, 1e-300) * eta_unit[k]
        A[row, :K] = -t * alpha * eta_unit / unit
        A[row, k] += (1.0 + t) * sig * eta_unit[k] / unit
        A[row, off_ss + k] = -1.0
        b[row] = t * dterm / unit
        row += 1

    # per-AP budget rows: shares add up to one
    for l in range(L):
        for i in range(K):
            col = pw(i) + (diag_pos[l] if coherent else l)
            A[row, col] = 1.0
        A[row, off_sa + l] = 1.0
        b[row] = 1.0
        row += 1

    # rectifier blocks: w + f = 1 and f v >= C with v = C + B I_k, the
    # hyperbolic constraint as the cone (f + v, 2 sqrt(C), f - v)
    soc_j = soc0
    for k in range(K):
        if not nl[k]:
            continue
        Bk, Ck = models[k].B, models[k].C
        vu = v_unit[k]
        A[row, w_ix[k]] = 1.0
        A[row, f_ix[k]] = 1.0
        b[row] = 1.0
        row += 1
        for head, sign in ((0, -1.0), (2, 1.0)):
            # u0 = f + v and u2 = f - v with v eliminated
            A[row, soc_j + head] = 1.0
            A[row, f_ix[k]] = -1.0 / vu
            for i in range(K):
                cols = slice(pw(i), pw(i) + ncol)
                A[row, cols] = sign * (Bk / vu) * mhat[k, i]
            b[row] = -sign * Ck / vu
            row += 1
        A[row, soc_j + 1] = 1.0
        b[row] = 2.0 * np.sqrt(Ck) / vu
        row += 1
        soc_j += 3

    # energy rows: pilot plus uplink spending within the harvested budget
    for k in range(K):
        mk = models[k]
        unit = cfg.tau_u * eta_unit[k]
        A[row, k] = 1.0
        if nl[k]:
            cap = cfg.tau_d * mk.A / mk.B
            A[row, w_ix[k]] = -cap / unit
        else:
            gain = cfg.tau_d * mk.A / mk.C
            for i in range(K):
                cols = slice(pw(i), pw(i) + ncol)
                A[row, cols] = -(gain / unit) * mhat[k, i]
        A[row, off_se + k] = 1.0
        b[row] = -pilot_cost / unit
        row += 1
    assert row == m_rows

    cones = [ConeBlock("nonneg", n_nn)]
    cones += [ConeBlock("soc", 3)] * n_nl
    if coherent:
        cones += [ConeBlock("psd", L)] * K
    c = np.zeros(n)
    c[:K] = 1.0
    problem = ConicProblem(c, A, b, cones)

    def decode(x):
        eta = eta_unit * np.maximum(x[:K], 0.0)
        if coherent:
            P = np.stack([
                smat(x[pw(i):pw(i) + sv]) * np.sqrt(np.outer(share[i], share[i]))
                for i in range(K)
            ])
        else:
            P = np.maximum(x[off_tail:off_tail + K * L].reshape(K, L), 0.0)
            P = P * share
        return eta, P

    return problem, decode


def extract_rank_one(P):
    """Physical allocation from a lifted matrix: keep the diagonal.

    Returns p with p[i, l] = P[i, l, l]. Every AP power is preserved exactly;
    off-diagonal entries move up to sqrt(p_l p_l') which dominates any
    entrywise-nonnegative PSD matrix with that diagonal, so the harvested
    input power does not drop (the driver re-checks this numerically).
    """
    p = np.maximum(np.diagonal(P, axis1=1, axis2=2), 0.0)
    return np.ascontiguousarray(p)


def _min_sinr(eta, coeffs, refresh=True, lsfd=None):
    K = coeffs.b.shape[0]
    if refresh:
        lsfd = np.stack([optimal_lsfd(eta, coeffs, k) for k in range(K)])
    vals = np.array([sinr(lsfd[k], eta, coeffs, k) for k in range(K)])
    return float(vals.min()), lsfd, vals


def scale_powers(p, eta, coeffs, inputs, norms, models, cfg,
                 scheme="coherent"):
    """Repair, then push the allocation onto the power and energy boundaries.

    Uplink powers are first clipped into the exactly recomputed energy
    budgets (a conic point can overshoot them by the solver tolerance). Then
    two monotone steps: all downlink powers scaled to the tightest AP budget
    (the SINR does not depend on them at all) and all uplink powers scaled up
    together to the tightest refreshed budget, which can only raise the min
    SINR in exact arithmetic. A guard falls back to the repaired point if
    floating point disagrees; the fallback stays feasible because downlink
    scaling never shrinks a budget.
    """
    K = p.shape[0]
    models = _models_per_ue(models, K)

    def budgets(pw):
        I = _input_powers(pw, inputs, scheme)
        E = np.array([harvested_energy(I[k], models[k], cfg.tau_d)
                      for k in range(K)])
        return uplink_budget(E, cfg)

    active = eta > 0
    gamma = np.ones(K)
    np.divide(budgets(p), eta, out=gamma, where=active)
    eta0 = eta * np.minimum(gamma, 1.0)
    t_base, _, _ = _min_sinr(eta0, coeffs)

    per_ap = ap_tx_power(p, norms)
    with np.errstate(divide="ignore"):
        gamma_d = float(np.min(np.where(per_ap > 0,
                                        cfg.ap_power_budget / per_ap, np.inf)))
    if not np.isfinite(gamma_d) or gamma_d <= 0:
        gamma_d = 1.0
    p2 = gamma_d * p

    budget = budgets(p2)
    active = eta0 > 0
    gamma_u = float(np.min(budget[active] / eta0[active])) if active.any() else 1.0
    eta2 = np.where(active, gamma_u * eta0, 0.0)

    t_new, _, _ = _min_sinr(eta2, coeffs)
    if t_new < t_base:
        return p2, eta0, True
    return p2, eta2, False


@dataclass
class BisectionStep:
    solve_index: int
    t_test: float
    feasible: bool
    t_star: float = np.nan
    t_lo: float = np.nan
    t_hi: float = np.nan
    reverted: bool = False
    diag_err: float = 0.0
    ik_gain_min: float = 0.0    # min_k relative change of I_k at extraction
    ap_margin: float = np.nan   # max_l per-AP power / budget
    energy_margin: float = np.nan   # max_k spent / harvested energy
    sinr_margin: float = np.nan     # min_k achieved SINR / probed target


@dataclass
class MaxMinResult:
    status: str
    eta: np.ndarray
    p: np.ndarray
    lsfd: np.ndarray
    t_star: float
    se: np.ndarray
    tmax: float
    solves: int
    log: list = field(default_factory=list)

    @property
    def min_se(self):
        return float(self.se.min()) if self.se.size else 0.0


def _zeros_result(status, K, L, tmax, solves, log):
    return MaxMinResult(status=status, eta=np.zeros(K), p=np.zeros((K, L)),
                        lsfd=np.ones((K, L), dtype=complex), t_star=0.0,
                        se=np.zeros(K), tmax=tmax, solves=solves, log=log)


def algorithm1(coeffs, inputs, norms, models, cfg, scheme="coherent",
               expansion=1.2, tol=1e-3, max_solves=100, solver_tol=1e-10):
    """Max-min SE power control with LSFD refreshes. Returns MaxMinResult.

    The log records one BisectionStep per solver call, including the
    rank-one extraction checks and the constraint margins of every accepted
    allocation, so a driver can audit the run after the fact.
    """
    K, L = norms.shape
    models = _models_per_ue(models, K)
    t_cap, _ = tmax_init(coeffs, inputs, norms, models, cfg, scheme)
    if t_cap <= 0:
        return _zeros_result("energy_infeasible", K, L, t_cap, 0, [])
    t_hi = t_cap

    pilot_cost = cfg.tau_p * cfg.pilot_power
    lsfd = np.ones((K, L), dtype=complex)
    t_lo = 0.0
    best = None
    log = []
    solves = 0
    while t_hi - t_lo > tol and solves < max_solves:
        t = 0.5 * (t_lo + t_hi)
        problem, decode = build_subproblem(t, lsfd, coeffs, inputs, norms,
                                           models, cfg, scheme)
        sol = solve(problem, tol=solver_tol)
        solves += 1
        if sol.status != "Optimal":
            # MaxIters and certified infeasibility both shrink the ceiling;
            # treating a stalled solve as infeasible keeps the floor honest
            t_hi = t
            log.append(BisectionStep(solves, t, False, t_lo=t_lo, t_hi=t_hi))
            continue

        eta, down = decode(sol.x)
        if scheme == "coherent":
            ik_before = _lifted_input_powers(down, inputs)
            p = extract_rank_one(down)
            # relative to the allocation scale; nonzero only when the solver
            # returned a slightly negative diagonal that got clipped
            diag_err = float(np.max(np.abs(
                np.diagonal(down, axis1=1, axis2=2) - p))
                / max(float(p.max()), 1e-300))
        else:
            ik_before = _input_powers(down, inputs, scheme)
            p = down
            diag_err = 0.0
        ik_after = _input_powers(p, inputs, scheme)
        denom = np.maximum(ik_before, 1e-300)
        ik_gain = float(np.min((ik_after - ik_before) / denom))

        p, eta, reverted = scale_powers(p, eta, coeffs, inputs, norms,
                                        models, cfg, scheme)
        t_star, lsfd_new, sinr_vals = _min_sinr(eta, coeffs)

        per_ap = ap_tx_power(p, norms)
        I = _input_powers(p, inputs, scheme)
        E = np.array([harvested_energy(I[k], models[k], cfg.tau_d)
                      for k in range(K)])
        spent = pilot_cost + cfg.tau_u * eta
        step = BisectionStep(
            solves, t, True, t_star=t_star, reverted=reverted,
            diag_err=diag_err, ik_gain_min=ik_gain,
            ap_margin=float(np.max(per_ap) / cfg.ap_power_budget),
            energy_margin=float(np.max(spent / np.maximum(E, 1e-300))),
            sinr_margin=float(sinr_vals.min() / t),
        )

        if best is None or t_star > best[0]:
            best = (t_star, p, eta, lsfd_new)
            lsfd = lsfd_new
        t_lo = max(t_lo, t_star)
        t_hi = expansion * t_star
        step.t_lo, step.t_hi = t_lo, t_hi
        log.append(step)

    if best is None:
        return _zeros_result("stalled", K, L, t_cap, solves, log)
    t_star, p, eta, lsfd = best
    vals = np.array([sinr(lsfd[k], eta, coeffs, k) for k in range(K)])
    se = se_value(vals, cfg.tau_u, cfg.tau_c)
    return MaxMinResult(status="optimal", eta=eta, p=p, lsfd=lsfd,
                        t_star=t_star, se=se, tmax=t_cap, solves=solves,
                        log=log)


def fpc_baseline(coeffs, inputs, norms, models, cfg, scheme="coherent"):
    """Fractional power control: statistics-only split, no optimization.

    AP l gives UE k the share 1/sqrt(norm_kl) of its budget (normalized over
    UEs), spending exactly ap_power_budget; every UE then transmits at its
    full harvested budget with its own optimal LSFD.
    """
    K, L = norms.shape
    models = _models_per_ue(models, K)
    root = np.sqrt(norms)
    p = cfg.ap_power_budget / (root * root.sum(axis=0, keepdims=True))
    I = _input_powers(p, inputs, scheme)
    E = np.array([harvested_energy(I[k], models[k], cfg.tau_d)
                  for k in range(K)])
    eta = uplink_budget(E, cfg)
    t_star, lsfd, vals = _min_sinr(eta, coeffs)
    se = se_value(vals, cfg.tau_u, cfg.tau_c)
    return MaxMinResult(status="fpc", eta=eta, p=p, lsfd=lsfd, t_star=t_star,
                        se=se, tmax=float("nan"), solves=0, log=[])
