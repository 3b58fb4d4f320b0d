"""Primal-dual interior-point solver for linear conic programs.

Standard form:

    minimize    c'x
    subject to  A x = b,   x in K

where K is a product of free blocks, nonnegative orthants, second-order
cones Q^d = {(u0, u1): ||u1|| <= u0}, and real symmetric PSD cones in the
scaled upper-triangle vectorization (off-diagonals times sqrt(2), so the
vector inner product equals the matrix Frobenius inner product).

The solver runs on the homogeneous self-dual embedding with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step, so it either converges to an
optimal primal-dual pair or produces a Farkas certificate of primal or dual
infeasibility. Everything is dense and deterministic; problem sizes here are
a few hundred variables, where one LU factorization per iteration is cheap.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgWarning, cholesky, lu_factor, lu_solve

STEP_DAMP = 0.99
SIGMA_MIN = 1e-8


# ---------------------------------------------------------------------------
# cone descriptions and symmetric vectorization


@dataclass(frozen=True)
class ConeBlock:
    """One cone block: kind in {'free', 'nonneg', 'soc', 'psd'}.

    For 'psd' the size is the matrix side n and the block occupies
    n (n + 1) / 2 variables; otherwise size is the variable count (a 'soc'
    block must have size >= 1, its first variable is the cone's apex).
    """

    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in ("free", "nonneg", "soc", "psd"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("cone size must be >= 1")

    @property
    def dim(self):
        return self.size * (self.size + 1) // 2 if self.kind == "psd" else self.size


def svec(M):
    """Scaled upper-triangle vectorization of a symmetric matrix."""
    n = M.shape[0]
    iu, ju = np.triu_indices(n)
    v = M[iu, ju].astype(float).copy()
    v[iu != ju] *= np.sqrt(2.0)
    return v


def smat(v):
    """Inverse of svec."""
    d = len(v)
    n = int((np.sqrt(8 * d + 1) - 1) / 2)
    iu, ju = np.triu_indices(n)
    M = np.zeros((n, n))
    off = iu != ju
    vals = np.asarray(v, dtype=float).copy()
    vals[off] /= np.sqrt(2.0)
    M[iu, ju] = vals
    M[ju, iu] = vals
    return M


@dataclass
class ConicProblem:
    """min c'x s.t. A x = b and x in the product of `cones` (in order)."""

    c: np.ndarray
    A: object                  # (m, n) ndarray or scipy sparse matrix
    b: np.ndarray
    cones: list

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        n = sum(blk.dim for blk in self.cones)
        A = self.A
        m, nA = A.shape
        if nA != n or n != len(self.c) or m != len(self.b):
            raise ValueError(
                f"inconsistent dimensions: A is {A.shape}, |c|={len(self.c)}, "
                f"|b|={len(self.b)}, cones add to {n}"
            )

    def dense_A(self):
        return self.A.toarray() if sp.issparse(self.A) else np.asarray(self.A, dtype=float)


@dataclass
class ConicSolution:
    status: str                # Optimal | PrimalInfeasible | DualInfeasible | MaxIters | NumericalFailure
    x: np.ndarray = None
    y: np.ndarray = None
    z: np.ndarray = None
    obj: float = None
    residuals: dict = field(default_factory=dict)
    iterations: int = 0


# ---------------------------------------------------------------------------
# per-block cone operations


def _identity(blk):
    if blk.kind == "nonneg":
        return np.ones(blk.size)
    if blk.kind == "soc":
        e = np.zeros(blk.size)
        e[0] = 1.0
        return e
    if blk.kind == "psd":
        return svec(np.eye(blk.size))
    raise ValueError(blk.kind)


def _soc_resid(u):
    return u[0] - np.linalg.norm(u[1:])


def _cone_margin(blk, u):
    """How far inside the cone u is (negative means outside)."""
    if blk.kind == "nonneg":
        return u.min()
    if blk.kind == "soc":
        return _soc_resid(u)
    if blk.kind == "psd":
        return np.linalg.eigvalsh(smat(u))[0]
    return np.inf   # free


def _congr(R, v):
    """svec(R' smat(v) R)."""
    return svec(R.T @ smat(v) @ R)


class _Scaling:
    """Nesterov-Todd scaling of one block, built from interior x, z."""

    def __init__(self, blk, x, z):
        self.blk = blk
        k = blk.kind
        if k == "nonneg":
            if np.any(x <= 0.0) or np.any(z <= 0.0):
                raise np.linalg.LinAlgError("nonneg iterate left the cone")
            with np.errstate(over="raise", divide="raise"):
                try:
                    self.w = np.sqrt(x / z)
                    self.lam = np.sqrt(x * z)
                    self.H = np.diag(z / x)
                except FloatingPointError:
                    raise np.linalg.LinAlgError("nonneg scaling overflow")
        elif k == "soc":
            d = blk.size
            J = -np.eye(d)
            J[0, 0] = 1.0
            jx = x @ J @ x
            jz = z @ J @ z
            if min(jx, jz) <= 0.0 or x[0] <= 0.0 or z[0] <= 0.0:
                raise np.linalg.LinAlgError("soc iterate left the cone")
            nx = np.sqrt(jx)
            nz = np.sqrt(jz)
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                xb, zb = x / nx, z / nz
                gamma = np.sqrt((1.0 + xb @ zb) / 2.0)
                # geometric-mean point q (q'Jq = 1), then the half vector v so
                # that (2vv' - J)^2 = 2qq' - J, which maps z-bar onto x-bar
                q = (xb + J @ zb) / (2.0 * gamma)
                v = q.copy()
                v[0] += 1.0
                v /= np.sqrt(2.0 * (q[0] + 1.0))
                beta = np.sqrt(nx / nz)
                self.Wm = beta * (2.0 * np.outer(v, v) - J)
                Jv = J @ v
                self.Wi = (1.0 / beta) * (2.0 * np.outer(Jv, Jv) - J)
                self.lam = self.Wm @ z
                self.H = self.Wi @ self.Wi
            if not np.all(np.isfinite(self.H)):
                raise np.linalg.LinAlgError("soc scaling overflow")
        elif k == "psd":
            X, Z = smat(x), smat(z)
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                Lx = cholesky(X, lower=True, check_finite=False)
                Lz = cholesky(Z, lower=True, check_finite=False)
                U, S, Vt = np.linalg.svd(Lz.T @ Lx)
                self.R = Lx @ Vt.T @ np.diag(1.0 / np.sqrt(S))
                self.Rinv = np.diag(1.0 / np.sqrt(S)) @ U.T @ Lz.T
                self.lam_diag = S
                self.lam = svec(np.diag(S))
                Ginv = self.Rinv.T @ self.Rinv
                self.H = _symcong_matrix(Ginv)
            if not np.all(np.isfinite(self.H)):
                raise np.linalg.LinAlgError("psd scaling overflow")
        else:
            raise ValueError(k)

    # W z and companions; all maps are symmetric-cone congruences
    def W(self, v):
        k = self.blk.kind
        if k == "nonneg":
            return self.w * v
        if k == "soc":
            return self.Wm @ v
        return _congr(self.R, v)

    def WT(self, v):
        k = self.blk.kind
        if k in ("nonneg", "soc"):
            return self.W(v)
        return svec(self.R @ smat(v) @ self.R.T)

    def Winv(self, v):
        k = self.blk.kind
        if k == "nonneg":
            return v / self.w
        if k == "soc":
            return self.Wi @ v
        return _congr(self.Rinv, v)

    def WinvT(self, v):
        k = self.blk.kind
        if k in ("nonneg", "soc"):
            return self.Winv(v)
        return svec(self.Rinv @ smat(v) @ self.Rinv.T)

    def jordan(self, u, v):
        k = self.blk.kind
        if k == "nonneg":
            return u * v
        if k == "soc":
            out = np.empty_like(u)
            out[0] = u @ v
            out[1:] = u[0] * v[1:] + v[0] * u[1:]
            return out
        U, V = smat(u), smat(v)
        return svec(0.5 * (U @ V + V @ U))

    def jordan_solve(self, v):
        """Solve lam o u = v for u, lam being this block's scaling point."""
        k = self.blk.kind
        if k == "nonneg":
            return v / self.lam
        if k == "soc":
            lam = self.lam
            det = lam[0] ** 2 - lam[1:] @ lam[1:]
            u0 = (lam[0] * v[0] - lam[1:] @ v[1:]) / det
            u1 = (v[1:] - u0 * lam[1:]) / lam[0]
            return np.concatenate([[u0], u1])
        V = smat(v)
        s = self.lam_diag
        return svec(2.0 * V / np.add.outer(s, s))

    def max_step(self, d):
        """Largest alpha with lam + alpha d still in the cone (inf if all).

        A direction that is not finite gives 0, so the caller's minimum-step
        guard turns upstream numerical trouble into a clean failure status.
        """
        if not np.all(np.isfinite(d)):
            return 0.0
        k = self.blk.kind
        if k == "nonneg":
            neg = d < 0
            if not neg.any():
                return np.inf
            return float((self.lam[neg] / -d[neg]).min())
        if k == "soc":
            lam = self.lam
            a = d[0] ** 2 - d[1:] @ d[1:]
            bq = lam[0] * d[0] - lam[1:] @ d[1:]
            cq = lam[0] ** 2 - lam[1:] @ lam[1:]
            return _first_positive_root(a, 2.0 * bq, cq)
        s = self.lam_diag
        Dm = smat(d) / np.sqrt(np.outer(s, s))
        try:
            emin = np.linalg.eigvalsh(0.5 * (Dm + Dm.T))[0]
        except np.linalg.LinAlgError:
            return 0.0
        return np.inf if emin >= 0 else 1.0 / abs(emin)


def _first_positive_root(a, b, c):
    """Smallest positive root of a t^2 + b t + c with c > 0, inf if none."""
    if abs(a) < 1e-300:
        if b >= 0:
            return np.inf
        return -c / b
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return np.inf if a > 0 else np.inf   # no real crossing
    r = np.sqrt(disc)
    roots = sorted(((-b - r) / (2 * a), (-b + r) / (2 * a)))
    for t in roots:
        if t > 0:
            return float(t)
    return np.inf


def _symcong_matrix(G):
    """Matrix of the map svec(M) -> svec(G' M G) on svec coordinates."""
    n = G.shape[0]
    iu, ju = np.triu_indices(n)
    d = len(iu)
    Q = np.empty((d, d))
    for t in range(d):
        i, j = iu[t], ju[t]
        if i == j:
            M = np.outer(G[i], G[i])
        else:
            M = (np.outer(G[i], G[j]) + np.outer(G[j], G[i])) / np.sqrt(2.0)
        Q[:, t] = svec(0.5 * (M + M.T))
    return Q


# ---------------------------------------------------------------------------
# free-variable elimination by splitting


def _split_free(problem):
    """Rewrite free blocks as differences of nonnegative pairs.

    Returns (cones, A, c, recover, recover_z): recover maps a solved x back
    to the original layout, recover_z does the same for dual slacks (the two
    halves of a split pair carry opposite copies of the free block's slack,
    so their half-difference restores it).
    """
    if not any(blk.kind == "free" for blk in problem.cones):
        A = problem.dense_A()
        return list(problem.cones), A, problem.c.copy(), None, None

    A = problem.dense_A()
    cols, ccoef, cones, spans = [], [], [], []
    pos = 0
    for blk in problem.cones:
        idx = np.arange(pos, pos + blk.dim)
        if blk.kind == "free":
            cols.append(A[:, idx])
            cols.append(-A[:, idx])
            ccoef.append(problem.c[idx])
            ccoef.append(-problem.c[idx])
            cones.append(ConeBlock("nonneg", blk.dim))
            cones.append(ConeBlock("nonneg", blk.dim))
            spans.append(("free", blk.dim))
        else:
            cols.append(A[:, idx])
            ccoef.append(problem.c[idx])
            cones.append(blk)
            spans.append(("cone", blk.dim))
        pos += blk.dim

    def recover(xs):
        out, q = [], 0
        for kind, dim in spans:
            if kind == "free":
                out.append(xs[q:q + dim] - xs[q + dim:q + 2 * dim])
                q += 2 * dim
            else:
                out.append(xs[q:q + dim])
                q += dim
        return np.concatenate(out)

    def recover_z(zs):
        out, q = [], 0
        for kind, dim in spans:
            if kind == "free":
                out.append(0.5 * (zs[q:q + dim] - zs[q + dim:q + 2 * dim]))
                q += 2 * dim
            else:
                out.append(zs[q:q + dim])
                q += dim
        return np.concatenate(out)

    return cones, np.hstack(cols), np.concatenate(ccoef), recover, recover_z


# ---------------------------------------------------------------------------
# main solver


def _blocks_slices(cones):
    out, pos = [], 0
    for blk in cones:
        out.append((blk, slice(pos, pos + blk.dim)))
        pos += blk.dim
    return out


def _equilibrate(problem, passes=3):
    """Block-respecting Ruiz scaling toward unit row and column maxima.

    Column scalings are uniform over each SOC block and act as a diagonal
    congruence on each PSD block, so cone membership is preserved exactly.
    Returns (scaled problem, dc, dr) with x = dc * x_scaled, y = dr * y_scaled
    and z = z_scaled / dc.
    """
    A = problem.dense_A().astype(float).copy()
    m, n = A.shape
    dr = np.ones(m)
    dc = np.ones(n)
    for _ in range(passes):
        rmax = np.abs(A).max(axis=1, initial=0.0)
        rs = 1.0 / np.sqrt(np.where(rmax > 0, rmax, 1.0))
        A *= rs[:, None]
        dr *= rs
        cmax = np.abs(A).max(axis=0, initial=0.0)
        cmax = np.where(cmax > 0, cmax, 1.0)
        cs = np.ones(n)
        off = 0
        for blk in problem.cones:
            d = blk.dim
            seg = cmax[off:off + d]
            if blk.kind in ("free", "nonneg"):
                cs[off:off + d] = 1.0 / np.sqrt(seg)
            elif blk.kind == "soc":
                cs[off:off + d] = 1.0 / np.sqrt(seg.max())
            else:
                iu = np.triu_indices(blk.size)
                droot = seg[iu[0] == iu[1]] ** -0.25
                cs[off:off + d] = droot[iu[0]] * droot[iu[1]]
            off += d
        A *= cs[None, :]
        dc *= cs
    scaled = ConicProblem(problem.c * dc, A, problem.b * dr,
                          list(problem.cones))
    return scaled, dc, dr


def solve(problem, tol=1e-8, max_iters=200, scale=True):
    """Solve a ConicProblem; returns a ConicSolution with a status contract.

    Optimal: relative primal/dual residuals and duality gap all <= tol.
    PrimalInfeasible / DualInfeasible: x or (y, z) hold a normalized Farkas
    certificate. MaxIters / NumericalFailure: best effort, residuals reported.
    The data is equilibrated first (scale=False skips that); solutions and
    certificates are always reported in the original units.
    """
    if not scale:
        return _solve_raw(problem, tol, max_iters)
    scaled, dc, dr = _equilibrate(problem)
    cert_scales = (dc, dr, 1.0 + np.linalg.norm(problem.b),
                   1.0 + np.linalg.norm(problem.c))
    sol = _solve_raw(scaled, tol, max_iters, cert_scales)
    x = None if sol.x is None else dc * sol.x
    y = None if sol.y is None else dr * sol.y
    z = None if sol.z is None else sol.z / dc
    res = dict(sol.residuals)
    obj = sol.obj
    if x is not None and y is not None:
        A = problem.dense_A()
        b, c = problem.b, problem.c
        res["pres"] = np.linalg.norm(A @ x - b) / (1.0 + np.linalg.norm(b))
        res["dres"] = np.linalg.norm(A.T @ y + z - c) / (1.0 + np.linalg.norm(c))
        pobj, dobj = c @ x, b @ y
        res["gap"] = abs(pobj - dobj) / (1.0 + max(abs(pobj), abs(dobj)))
        res["pobj"], res["dobj"] = pobj, dobj
        obj = pobj
    return ConicSolution(status=sol.status, x=x, y=y, z=z, obj=obj,
                         residuals=res, iterations=sol.iterations)


def _solve_raw(problem, tol, max_iters, cert_scales=None):
    cones, A, c, recover, recover_z = _split_free(problem)
    b = problem.b.copy()
    m, n = A.shape
    slices = _blocks_slices(cones)
    degree = sum(
        blk.size if blk.kind in ("nonneg", "psd") else 1 for blk, _ in slices
    )

    x = np.concatenate([_identity(blk) for blk, _ in slices])
    z = x.copy()
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0

    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.linalg.norm(c)

    # with equilibration active, termination and certificates are judged on
    # residuals mapped back to the caller's units, so tol keeps its meaning
    if cert_scales is None:
        def row_norm(v):
            return np.linalg.norm(v) / norm_b

        def col_norm(v):
            return np.linalg.norm(v) / norm_c
    else:
        dc_orig, dr_orig, nb_orig, nc_orig = cert_scales

        def row_norm(v):
            return np.linalg.norm(v / dr_orig) / nb_orig

        def col_norm(v):
            w = recover_z(v) if recover_z is not None else v
            return np.linalg.norm(w / dc_orig) / nc_orig

    def final(status, xs=None, ys=None, zs=None, obj=None, res=None, it=0):
        if xs is not None and recover is not None:
            xs = recover(xs)
        if zs is not None and recover_z is not None:
            zs = recover_z(zs)
        return ConicSolution(status=status, x=xs, y=ys, z=zs, obj=obj,
                             residuals=res or {}, iterations=it)

    for it in range(max_iters):
        # residuals of the embedding
        rx = A @ x - b * tau
        rz = -A.T @ y + c * tau - z
        rg = b @ y - c @ x - kappa
        mu = (x @ z + tau * kappa) / (degree + 1)

        # termination on the de-homogenized candidate
        xs, ys, zs = x / tau, y / tau, z / tau
        pres = row_norm(A @ xs - b)
        dres = col_norm(A.T @ ys + zs - c)
        pobj, dobj = c @ xs, b @ ys
        gap = abs(pobj - dobj) / (1.0 + max(abs(pobj), abs(dobj)))
        res = {"pres": pres, "dres": dres, "gap": gap,
               "pobj": pobj, "dobj": dobj, "tau": tau, "kappa": kappa, "mu": mu}
        if pres <= tol and dres <= tol and gap <= tol:
            return final("Optimal", xs, ys, zs, pobj, res, it)
        if b @ y > 0:
            yc, zc = y / (b @ y), z / (b @ y)
            if col_norm(A.T @ yc + zc) <= tol:
                return final("PrimalInfeasible", None, yc, zc, None, res, it)
        if c @ x < 0:
            xc = x / (-(c @ x))
            if row_norm(A @ xc) <= tol:
                return final("DualInfeasible", xc, None, None, None, res, it)

        # Nesterov-Todd scalings
        try:
            scalings = [_Scaling(blk, x[s], z[s]) for blk, s in slices]
        except np.linalg.LinAlgError:
            return final("NumericalFailure", xs, ys, zs, pobj, res, it)

        H = np.zeros((n, n))
        for (blk, s), sc in zip(slices, scalings):
            H[s, s] = sc.H
        K = np.zeros((n + m, n + m))
        K[:n, :n] = H
        K[:n, n:] = -A.T
        K[n:, :n] = A
        try:
            with warnings.catch_warnings():
                # a singular KKT factorization surfaces as NaN directions,
                # which the step-length logic already converts to a failure
                warnings.simplefilter("ignore", LinAlgWarning)
                lufac = lu_factor(K, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            return final("NumericalFailure", xs, ys, zs, pobj, res, it)

        def kkt_solve(f, g):
            rhs = np.concatenate([f, g])
            with np.errstate(invalid="ignore", over="ignore"):
                sol = lu_solve(lufac, rhs, check_finite=False)
                # one round of iterative refinement
                corr = rhs - K @ sol
                sol = sol + lu_solve(lufac, corr, check_finite=False)
            return sol[:n], sol[n:]

        lam = np.concatenate([sc.lam for sc in scalings])

        def apply(fname, v):
            return np.concatenate(
                [getattr(sc, fname)(v[s]) for (blk, s), sc in zip(slices, scalings)]
            )

        def jordan(u, v):
            return np.concatenate(
                [sc.jordan(u[s], v[s]) for (blk, s), sc in zip(slices, scalings)]
            )

        def jordan_solve(v):
            return np.concatenate(
                [sc.jordan_solve(v[s]) for (blk, s), sc in zip(slices, scalings)]
            )

        def max_step(d):
            return min(
                (sc.max_step(d[s]) for (blk, s), sc in zip(slices, scalings)),
                default=np.inf,
            )

        u2, v2 = kkt_solve(-c, b)

        def direction(sigma, comp_corr, tau_corr):
            ds = jordan_solve(sigma * mu * np.concatenate(
                [_identity(blk) for blk, _ in slices]
            ) - jordan(lam, lam) - comp_corr)
            f1 = -(1.0 - sigma) * rz + apply("Winv", ds)
            g1 = -(1.0 - sigma) * rx
            u1, v1 = kkt_solve(f1, g1)
            num = (-(1.0 - sigma) * rg
                   + (sigma * mu - tau * kappa - tau_corr) / tau
                   - b @ v1 + c @ u1)
            den = b @ v2 - c @ u2 + kappa / tau
            dtau = num / den
            dx = u1 + dtau * u2
            dy = v1 + dtau * v2
            dz = apply("Winv", ds - apply("WinvT", dx))
            dkappa = (sigma * mu - tau * kappa - tau_corr - kappa * dtau) / tau
            return dx, dy, dz, dtau, dkappa

        # predictor
        dxa, dya, dza, dtaua, dkappaa = direction(0.0, np.zeros(n), 0.0)
        sx = apply("WinvT", dxa)
        sz = apply("W", dza)
        alpha_a = min(max_step(sx), max_step(sz))
        if dtaua < 0:
            alpha_a = min(alpha_a, -tau / dtaua)
        if dkappaa < 0:
            alpha_a = min(alpha_a, -kappa / dkappaa)
        alpha_a = min(1.0, alpha_a)
        gap_aff = ((lam + alpha_a * sx) @ (lam + alpha_a * sz)
                   + (tau + alpha_a * dtaua) * (kappa + alpha_a * dkappaa))
        sigma = np.clip((gap_aff / (mu * (degree + 1))) ** 3, SIGMA_MIN, 1.0)

        # corrector
        dx, dy, dz, dtau, dkappa = direction(
            float(sigma), jordan(sx, sz), dtaua * dkappaa
        )
        sx = apply("WinvT", dx)
        sz = apply("W", dz)
        alpha = min(max_step(sx), max_step(sz))
        if dtau < 0:
            alpha = min(alpha, -tau / dtau)
        if dkappa < 0:
            alpha = min(alpha, -kappa / dkappa)
        alpha = STEP_DAMP * min(1.0 / STEP_DAMP, alpha)
        if not np.isfinite(alpha) or alpha <= 1e-14:
            return final("NumericalFailure", xs, ys, zs, pobj, res, it)

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    xs, ys, zs = x / tau, y / tau, z / tau
    res = {
        "pres": np.linalg.norm(A @ xs - b) / norm_b,
        "dres": np.linalg.norm(A.T @ ys + zs - c) / norm_c,
        "gap": abs(c @ xs - b @ ys) / (1.0 + max(abs(c @ xs), abs(b @ ys))),
        "tau": tau, "kappa": kappa,
    }
    return final("MaxIters", xs, ys, zs, c @ xs, res, max_iters)


def verify_certificate(problem, solution, tol=1e-6):
    """Recompute residuals of a returned solution or infeasibility certificate.

    Returns a dict with the residuals and an 'ok' flag; never trusts the
    solver's own reported numbers.
    """
    A = problem.dense_A()
    b, c = problem.b, problem.c
    slices = _blocks_slices(problem.cones)
    report = {"status": solution.status}

    def margins(v):
        return min(_cone_margin(blk, v[s]) / (1.0 + np.linalg.norm(v[s]))
                   for blk, s in slices)

    if solution.status == "Optimal":
        x, y, z = solution.x, solution.y, solution.z
        report["pres"] = np.linalg.norm(A @ x - b) / (1.0 + np.linalg.norm(b))
        report["dres"] = np.linalg.norm(A.T @ y + z - c) / (1.0 + np.linalg.norm(c))
        pobj, dobj = c @ x, b @ y
        report["gap"] = abs(pobj - dobj) / (1.0 + max(abs(pobj), abs(dobj)))
        report["x_margin"] = margins(x)
        report["ok"] = (report["pres"] <= tol and report["dres"] <= tol
                        and report["gap"] <= tol and report["x_margin"] >= -tol)
    elif solution.status == "PrimalInfeasible":
        y, z = solution.y, solution.z
        report["bty"] = b @ y
        report["farkas_res"] = np.linalg.norm(A.T @ y + z) / (1.0 + np.linalg.norm(c))
        zfull = z.copy()
        report["z_margin"] = min(
            _cone_margin(blk, zfull[s]) / (1.0 + np.linalg.norm(zfull[s]))
            for blk, s in slices if blk.kind != "free"
        )
        report["ok"] = (report["bty"] > 0 and report["farkas_res"] <= tol
                        and report["z_margin"] >= -tol)
    elif solution.status == "DualInfeasible":
        x = solution.x
        report["ctx"] = c @ x
        report["farkas_res"] = np.linalg.norm(A @ x) / (1.0 + np.linalg.norm(b))
        report["x_margin"] = margins(x)
        report["ok"] = (report["ctx"] < 0 and report["farkas_res"] <= tol
                        and report["x_margin"] >= -tol)
    else:
        report["ok"] = False
    return report


# ---------------------------------------------------------------------------
# plain-text sparse triplet exchange format


def to_text(problem):
    """Serialize a problem to the line-oriented triplet format."""
    A = problem.dense_A()
    m, n = A.shape
    lines = [f"problem {n} {m}"]
    for blk in problem.cones:
        lines.append(f"cone {blk.kind} {blk.size}")
    for i, v in enumerate(problem.c):
        if v != 0.0:
            lines.append(f"c {i} {float(v)!r}")
    rows, cols = np.nonzero(A)
    for i, j in zip(rows, cols):
        lines.append(f"A {i} {j} {float(A[i, j])!r}")
    for i, v in enumerate(problem.b):
        if v != 0.0:
            lines.append(f"b {i} {float(v)!r}")
    return "\n".join(lines) + "\n"


def from_text(text):
    """Parse the triplet format produced by to_text."""
    n = m = None
    cones, centries, aentries, bentries = [], [], [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "problem":
            n, m = int(parts[1]), int(parts[2])
        elif tag == "cone":
            cones.append(ConeBlock(parts[1], int(parts[2])))
        elif tag == "c":
            centries.append((int(parts[1]), float(parts[2])))
        elif tag == "A":
            aentries.append((int(parts[1]), int(parts[2]), float(parts[3])))
        elif tag == "b":
            bentries.append((int(parts[1]), float(parts[2])))
        else:
            raise ValueError(f"unknown record {tag!r}")
    if n is None:
        raise ValueError("missing problem header")
    c = np.zeros(n)
    for i, v in centries:
        c[i] = v
    b = np.zeros(m)
    for i, v in bentries:
        b[i] = v
    if aentries:
        rows, cols, vals = zip(*aentries)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    else:
        A = sp.csr_matrix((m, n))
    return ConicProblem(c=c, A=A, b=b, cones=cones)
