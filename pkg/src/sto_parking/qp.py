"""Sparse convex QP solvers.

Solves ::

    minimize    1/2 x' H x + g' x
    subject to  A_eq x = b_eq,   l_in <= A_in x <= u_in

Two methods share one interface. ``"ipm"`` (default) is a Mehrotra
predictor-corrector interior-point method on the reduced KKT system; it needs
a few dozen factorizations regardless of conditioning. ``"admm"`` is the
operator-splitting scheme popularised by OSQP: Ruiz equilibration, per-row
step sizes (stiffer on equality rows), residual-balanced step-size updates,
primal infeasibility certificates, and a final active-set polish.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

INF = 1e20

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"


@dataclass
class QpProblem:
    H: sp.spmatrix
    g: np.ndarray
    A_eq: sp.spmatrix | None = None
    b_eq: np.ndarray | None = None
    A_in: sp.spmatrix | None = None
    l_in: np.ndarray | None = None
    u_in: np.ndarray | None = None

    def __post_init__(self):
        self.H = sp.csc_matrix(self.H, dtype=float)
        self.g = np.asarray(self.g, float).ravel()
        n = self.n_vars
        if self.H.shape != (n, n):
            raise ValueError(f"H must be {n}x{n}, got {self.H.shape}")
        if self.A_eq is None:
            self.A_eq, self.b_eq = sp.csr_matrix((0, n)), np.zeros(0)
        if self.A_in is None:
            self.A_in, self.l_in, self.u_in = sp.csr_matrix((0, n)), np.zeros(0), np.zeros(0)
        self.A_eq = sp.csr_matrix(self.A_eq, dtype=float)
        self.A_in = sp.csr_matrix(self.A_in, dtype=float)
        self.b_eq = np.asarray(self.b_eq, float).ravel()
        self.l_in = np.asarray(self.l_in, float).ravel()
        self.u_in = np.asarray(self.u_in, float).ravel()
        if self.A_eq.shape[1] != n or self.A_in.shape[1] != n:
            raise ValueError("constraint matrices must have n_vars columns")
        if len(self.b_eq) != self.A_eq.shape[0]:
            raise ValueError("b_eq length does not match A_eq")
        if not (len(self.l_in) == len(self.u_in) == self.A_in.shape[0]):
            raise ValueError("l_in/u_in length does not match A_in")
        if np.any(self.l_in > self.u_in):
            raise ValueError("l_in must not exceed u_in")

    @property
    def n_vars(self) -> int:
        return len(self.g)

    def stacked(self):
        A = sp.vstack([self.A_eq, self.A_in], format="csc")
        l = np.concatenate([self.b_eq, self.l_in])
        u = np.concatenate([self.b_eq, self.u_in])
        return A, np.maximum(l, -INF), np.minimum(u, INF)

    def objective(self, x) -> float:
        x = np.asarray(x, float)
        return float(0.5 * x @ (self.H @ x) + self.g @ x)

    def to_text(self) -> str:
        """Dump in a matrix-market-like coordinate text format."""
        lines = [f"%QP n={self.n_vars} m_eq={self.A_eq.shape[0]} m_in={self.A_in.shape[0]}"]

        def block(name, mat):
            coo = sp.coo_matrix(mat)
            lines.append(f"{name} {coo.shape[0]} {coo.shape[1]} {coo.nnz}")
            lines.extend(f"{i + 1} {j + 1} {float(v)!r}" for i, j, v in zip(coo.row, coo.col, coo.data))

        def vector(name, v):
            lines.append(f"{name} {len(v)}")
            lines.extend(repr(float(x)) for x in v)

        block("H", self.H)
        vector("g", self.g)
        block("A_eq", self.A_eq)
        vector("b_eq", self.b_eq)
        block("A_in", self.A_in)
        vector("l_in", self.l_in)
        vector("u_in", self.u_in)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QpProblem":
        it = iter(line for line in text.splitlines() if line and not line.startswith("%"))
        parts = {}
        for header in it:
            name, *dims = header.split()
            if name in ("H", "A_eq", "A_in"):
                rows, cols, nnz = map(int, dims)
                entries = [next(it).split() for _ in range(nnz)]
                r = [int(e[0]) - 1 for e in entries]
                c = [int(e[1]) - 1 for e in entries]
                v = [float(e[2]) for e in entries]
                parts[name] = sp.csr_matrix((v, (r, c)), shape=(rows, cols))
            else:
                parts[name] = np.array([float(next(it)) for _ in range(int(dims[0]))])
        return cls(**parts)


@dataclass
class QpSettings:
    method: str = "ipm"
    ipm_max_iter: int = 100
    ipm_reg: float = 1e-9
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    eps_pinf: float = 1e-6
    max_iter: int = 10000
    check_every: int = 10
    scaling_iters: int = 15
    adaptive_rho: bool = True
    adapt_every: int = 50
    adapt_tolerance: float = 5.0
    polish: bool = True
    polish_after: int = 25
    polish_delta: float = 1e-9
    polish_refine: int = 5


@dataclass
class QpSolution:
    primal: np.ndarray
    objective: float
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    dual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    polished: bool = False

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _inf_norm(v) -> float:
    return float(np.max(np.abs(v))) if len(v) else 0.0


def _col_inf_norms(m: sp.spmatrix) -> np.ndarray:
    m = sp.csc_matrix(abs(m))
    out = np.zeros(m.shape[1])
    nz = np.diff(m.indptr) > 0
    out[nz] = np.maximum.reduceat(m.data, m.indptr[:-1][nz])
    return out


def _row_inf_norms(m: sp.spmatrix) -> np.ndarray:
    return _col_inf_norms(sp.csc_matrix(m).T)


class _Scaled:
    """Ruiz-equilibrated copy of the problem data."""

    def __init__(self, P, q, A, l, u, iters):
        n, m = P.shape[0], A.shape[0]
        D, E = np.ones(n), np.ones(m)
        P = sp.csc_matrix(P)
        A = sp.csc_matrix(A)
        for _ in range(iters):
            cn = np.maximum(_col_inf_norms(P), _col_inf_norms(A))
            rn = _row_inf_norms(A) if m else np.zeros(0)
            dn = 1.0 / np.sqrt(np.clip(cn, 1e-4, 1e4))
            en = 1.0 / np.sqrt(np.clip(rn, 1e-4, 1e4))
            P = sp.diags(dn) @ P @ sp.diags(dn)
            A = sp.diags(en) @ A @ sp.diags(dn)
            D *= dn
            E *= en
        q = D * q
        cost = max(float(np.mean(_col_inf_norms(P))) if n else 0.0, _inf_norm(q))
        c = 1.0 / np.clip(cost, 1e-4, 1e4)
        self.P = sp.csc_matrix(c * P)
        self.q = c * q
        self.A = sp.csc_matrix(A)
        self.At = sp.csc_matrix(A.T)
        self.l = np.where(l > -INF, E * l, -INF)
        self.u = np.where(u < INF, E * u, INF)
        self.D, self.E, self.c = D, E, c


def solve(problem: QpProblem, warm_start=None, settings: QpSettings | None = None,
          warm_dual=None) -> QpSolution:
    """Solve ``problem``; returns the best iterate with a status on failure.

    ``dual`` in the result stacks the equality then inequality multipliers; a
    positive inequality multiplier means the upper bound holds.
    """
    st = settings or QpSettings()
    if st.method == "ipm":
        return _solve_ipm(problem, warm_start, st)
    if st.method != "admm":
        raise ValueError(f"unknown QP method {st.method!r}")
    return _solve_admm(problem, warm_start, st, warm_dual)


def _solve_admm(problem: QpProblem, warm_start, st: QpSettings, warm_dual) -> QpSolution:
    P0 = problem.H
    q0 = problem.g
    A0, l0, u0 = problem.stacked()
    n, m = problem.n_vars, A0.shape[0]
    S = _Scaled(P0, q0, A0, l0, u0, st.scaling_iters)
    P, q, A, At, l, u = S.P, S.q, S.A, S.At, S.l, S.u

    eq = np.abs(u - l) < 1e-12
    free = (l <= -INF) & (u >= INF)

    def rho_vector(rho):
        r = np.full(m, rho)
        r[eq] = 1e3 * rho
        r[free] = 1e-6
        return r

    rho = st.rho
    rho_vec = rho_vector(rho)
    sigma = st.sigma

    def factor(rv):
        K = P + sigma * sp.eye(n, format="csc") + At @ sp.diags(rv) @ A
        return spla.splu(sp.csc_matrix(K), permc_spec="MMD_AT_PLUS_A")

    lu = factor(rho_vec)

    x = np.zeros(n) if warm_start is None else np.asarray(warm_start, float) / S.D
    z = np.clip(A @ x, l, u)
    y = np.zeros(m) if warm_dual is None else S.c * np.asarray(warm_dual, float) / S.E

    def unscaled_residuals(x, z, y):
        xu = S.D * x
        zu = z / S.E
        yu = S.E * y / S.c
        Ax = A0 @ xu
        Px = P0 @ xu
        Aty = A0.T @ yu if m else np.zeros(n)
        rp = _inf_norm(Ax - zu)
        rd = _inf_norm(Px + q0 + Aty)
        ep = st.eps_abs + st.eps_rel * max(_inf_norm(Ax), _inf_norm(zu))
        ed = st.eps_abs + st.eps_rel * max(_inf_norm(Px), _inf_norm(Aty), _inf_norm(q0))
        return rp, rd, ep, ed

    def finish(x, z, y, status, it, polished=False):
        xu = S.D * x
        yu = S.E * y / S.c
        rp, rd, _, _ = unscaled_residuals(x, z, y)
        return QpSolution(xu, problem.objective(xu), status, it, rp, rd, yu, polished)

    def try_polish(x, z, y):
        lower = (z - l < -y) | eq
        upper = (u - z < y) & ~eq
        lower &= l > -INF
        upper &= u < INF
        act = np.flatnonzero(lower | upper)
        Aa = A[act]
        ba = np.where(lower[act], l[act], u[act])
        na = len(act)
        d = st.polish_delta
        K = sp.bmat([[P, Aa.T], [Aa, None]], format="csc")
        Kreg = sp.bmat([[P + d * sp.eye(n), Aa.T], [Aa, -d * sp.eye(na)]], format="csc")
        try:
            klu = spla.splu(Kreg)
        except RuntimeError:
            return None
        rhs = np.concatenate([-q, ba])
        sol = klu.solve(rhs)
        for _ in range(st.polish_refine):
            sol = sol + klu.solve(rhs - K @ sol)
        if not np.all(np.isfinite(sol)):
            return None
        xp = sol[:n]
        yp = np.zeros(m)
        yp[act] = sol[n:]
        zp = np.clip(A @ xp, l, u)
        # multipliers must carry the sign of the bound they hold
        if np.any(yp[lower & ~eq] > 1e-9 * max(1.0, _inf_norm(yp))) or \
                np.any(yp[upper] < -1e-9 * max(1.0, _inf_norm(yp))):
            return None
        return xp, zp, yp

    y_prev = y.copy()
    it = 0
    best = None
    for it in range(1, st.max_iter + 1):
        rhs = sigma * x - q + At @ (rho_vec * z - y)
        xt = lu.solve(rhs)
        zt = A @ xt
        x = st.alpha * xt + (1.0 - st.alpha) * x
        zh = st.alpha * zt + (1.0 - st.alpha) * z
        z_new = np.clip(zh + y / rho_vec, l, u)
        y_prev = y
        y = y + rho_vec * (zh - z_new)
        z = z_new

        if it % st.check_every and it != st.max_iter:
            continue
        rp, rd, ep, ed = unscaled_residuals(x, z, y)
        if best is None or max(rp / ep, rd / ed) < best[0]:
            best = (max(rp / ep, rd / ed), x.copy(), z.copy(), y.copy())
        if rp <= ep and rd <= ed:
            if st.polish:
                pol = try_polish(x, z, y)
                if pol is not None:
                    prp, prd, pep, ped = unscaled_residuals(*pol)
                    if prp <= max(rp, pep) and prd <= max(rd, ped):
                        return finish(*pol, OPTIMAL, it, polished=True)
            return finish(x, z, y, OPTIMAL, it)
        if st.polish and it >= st.polish_after and it % (5 * st.check_every) == 0:
            pol = try_polish(x, z, y)
            if pol is not None:
                prp, prd, pep, ped = unscaled_residuals(*pol)
                if prp <= pep and prd <= ped:
                    return finish(*pol, OPTIMAL, it, polished=True)
        if _primal_infeasible(y - y_prev, A0, S, l0, u0, st.eps_pinf):
            return finish(x, z, y, INFEASIBLE, it)
        if st.adaptive_rho and it % st.adapt_every == 0:
            Ax = A @ x
            num = rp_s = _inf_norm(Ax - z) / max(_inf_norm(Ax), _inf_norm(z), 1e-12)
            den = _inf_norm(P @ x + q + At @ y) / max(_inf_norm(P @ x), _inf_norm(At @ y), _inf_norm(q), 1e-12)
            if rp_s > 0 and den > 0:
                new_rho = float(np.clip(rho * np.sqrt(num / den), 1e-6, 1e6))
                if new_rho > st.adapt_tolerance * rho or new_rho < rho / st.adapt_tolerance:
                    rho = new_rho
                    rho_vec = rho_vector(rho)
                    lu = factor(rho_vec)
                    log.debug("qp: iter %d rho -> %.3e", it, rho)
    _, x, z, y = best
    return finish(x, z, y, MAX_ITER, it)


def _solve_ipm(problem: QpProblem, warm_start, st: QpSettings) -> QpSolution:
    n = problem.n_vars
    H, g = problem.H, problem.g
    Ain, lin, uin = problem.A_in, problem.l_in, problem.u_in
    # two-sided rows with equal bounds are equalities
    tied = np.abs(uin - lin) < 1e-12
    Aeq = sp.vstack([problem.A_eq, Ain[tied]], format="csr")
    beq = np.concatenate([problem.b_eq, uin[tied]])
    up = np.flatnonzero(~tied & (uin < INF))
    lo = np.flatnonzero(~tied & (lin > -INF))
    # one-sided form G x + s = h, s >= 0
    G = sp.vstack([Ain[up], -Ain[lo]], format="csr")
    h = np.concatenate([uin[up], -lin[lo]])
    Gt = sp.csr_matrix(G.T)
    Aeqt = sp.csr_matrix(Aeq.T)
    me, p = Aeq.shape[0], G.shape[0]
    reg = st.ipm_reg
    Ireg_x = reg * sp.eye(n, format="csc")
    Ireg_y = -reg * sp.eye(me, format="csc")

    x = np.zeros(n) if warm_start is None else np.asarray(warm_start, float).copy()
    y = np.zeros(me)
    s = np.maximum(h - G @ x, 1.0)
    z = np.ones(p)

    hfin = _inf_norm(h)
    bnorm = max(_inf_norm(beq), hfin)

    def residuals(x, y, z, s):
        Hx = H @ x
        Aty = Aeqt @ y if me else np.zeros(n)
        Gtz = Gt @ z if p else np.zeros(n)
        rd = Hx + g + Aty + Gtz
        re = Aeq @ x - beq
        ri = G @ x + s - h
        ed = st.eps_abs + st.eps_rel * max(_inf_norm(Hx), _inf_norm(g), _inf_norm(Aty), _inf_norm(Gtz))
        ep = st.eps_abs + st.eps_rel * max(_inf_norm(Aeq @ x), _inf_norm(G @ x), bnorm)
        return rd, re, ri, ed, ep

    def farkas(y, z):
        # a diverging multiplier whose direction separates the constraints
        nrm = max(_inf_norm(y), _inf_norm(z))
        if nrm < 1e6 * max(1.0, _inf_norm(g)):
            return False
        yy, zz = y / nrm, z / nrm
        lhs = (Aeqt @ yy if me else 0.0) + (Gt @ zz if p else 0.0)
        return _inf_norm(lhs) < st.eps_pinf * 10 and float(beq @ yy + h @ zz) < -st.eps_pinf

    def step_to_boundary(v, dv):
        neg = dv < 0
        if not np.any(neg):
            return 1.0
        return float(min(1.0, np.min(-v[neg] / dv[neg])))

    def pack_dual(y, z):
        yin = np.zeros(len(lin))
        yin[up] += z[:len(up)]
        yin[lo] -= z[len(up):]
        ne = problem.A_eq.shape[0]
        yin[tied] = y[ne:]
        return np.concatenate([y[:ne], yin])

    def finish(status, it, x, y, z, s):
        rd, re, ri, _, _ = residuals(x, y, z, s)
        rp = max(_inf_norm(re), _inf_norm(np.maximum(G @ x - h, 0.0)))
        return QpSolution(x, problem.objective(x), status, it, rp, _inf_norm(rd), pack_dual(y, z))

    def polish(x, z, s):
        act = np.flatnonzero(z > s)
        Ga = G[act]
        na = len(act)
        d = st.polish_delta
        Kx = sp.bmat([[H, Aeqt, Ga.T], [Aeq, None, None], [Ga, None, None]], format="csc")
        Kr = sp.bmat([[H + d * sp.eye(n), Aeqt, Ga.T],
                      [Aeq, -d * sp.eye(me) if me else None, None],
                      [Ga, None, -d * sp.eye(na) if na else None]], format="csc")
        try:
            klu = spla.splu(Kr)
        except RuntimeError:
            return None
        rhs = np.concatenate([-g, beq, h[act]])
        sol = klu.solve(rhs)
        for _ in range(st.polish_refine):
            sol = sol + klu.solve(rhs - Kx @ sol)
        if not np.all(np.isfinite(sol)):
            return None
        xp, yp = sol[:n], sol[n:n + me]
        zp = np.zeros(p)
        zp[act] = sol[n + me:]
        sp_ = h - G @ xp
        scale = max(1.0, _inf_norm(zp))
        if np.any(zp < -1e-9 * scale) or np.any(sp_ < -max(st.eps_abs, 1e-9 * max(1.0, hfin))):
            return None
        zp = np.maximum(zp, 0.0)
        sp_ = np.maximum(sp_, 0.0)
        rdp, rep, _, edp, epp = residuals(xp, yp, zp, sp_)
        if _inf_norm(rdp) > edp or _inf_norm(rep) > epp:
            return None
        return xp, yp, zp, sp_

    best = None
    it = 0
    for it in range(1, st.ipm_max_iter + 1):
        rd, re, ri, ed, ep = residuals(x, y, z, s)
        mu = float(s @ z) / p if p else 0.0
        rp = max(_inf_norm(re), _inf_norm(ri))
        score = max(rp / ep, _inf_norm(rd) / ed, mu / st.eps_abs)
        if best is None or score < best[0]:
            best = (score, x.copy(), y.copy(), z.copy(), s.copy())
        if rp <= ep and _inf_norm(rd) <= ed and (not p or np.max(s * z) <= st.eps_abs):
            if st.polish:
                pol = polish(x, z, s)
                if pol is not None:
                    sol = finish(OPTIMAL, it, *pol)
                    sol.polished = True
                    return sol
            return finish(OPTIMAL, it, x, y, z, s)
        if farkas(y, z):
            return finish(INFEASIBLE, it, x, y, z, s)
        w = z / s
        K = sp.bmat([[H + Gt @ sp.diags(w) @ G + Ireg_x, Aeqt], [Aeq, Ireg_y if me else None]],
                    format="csc")
        Kexact = sp.bmat([[H + Gt @ sp.diags(w) @ G, Aeqt], [Aeq, None]], format="csc")
        try:
            lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError:
            break

        def newton(rc):
            rhs = np.concatenate([-rd - Gt @ (w * ri - rc / s), -re])
            sol = lu.solve(rhs)
            for _ in range(2):
                sol = sol + lu.solve(rhs - Kexact @ sol)
            dx, dy = sol[:n], sol[n:]
            dz = w * (G @ dx + ri) - rc / s
            ds = -ri - G @ dx
            return dx, dy, dz, ds

        dx, dy, dz, ds = newton(s * z)
        if p:
            a_aff = min(step_to_boundary(s, ds), step_to_boundary(z, dz))
            mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / p
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            dx, dy, dz, ds = newton(s * z + ds * dz - sigma * mu)
            a = 0.99 * min(step_to_boundary(s, ds), step_to_boundary(z, dz))
            a = min(a, 1.0)
        else:
            a = 1.0
        x = x + a * dx
        y = y + a * dy
        z = np.maximum(z + a * dz, 1e-300)
        s = np.maximum(s + a * ds, 1e-300)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            break
    _, x, y, z, s = best
    return finish(MAX_ITER, it, x, y, z, s)


def _primal_infeasible(dy_scaled, A0, S, l0, u0, eps) -> bool:
    dy = S.E * dy_scaled
    nrm = _inf_norm(dy)
    if nrm < 1e-12:
        return False
    dy = dy / nrm
    if _inf_norm(A0.T @ dy) > eps:
        return False
    pos, neg = dy > 1e-12, dy < -1e-12
    if np.any(u0[pos] >= INF) or np.any(l0[neg] <= -INF):
        return False
    return float(u0[pos] @ dy[pos] + l0[neg] @ dy[neg]) < -eps


def kkt_residuals(problem: QpProblem, x, y) -> tuple[float, float, float]:
    """Stationarity, primal violation, and complementary slackness at ``(x, y)``."""
    A, l, u = problem.stacked()
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    stat = _inf_norm(problem.H @ x + problem.g + A.T @ y)
    Ax = A @ x
    viol = _inf_norm(np.maximum(Ax - u, 0) + np.maximum(l - Ax, 0))
    yp, yn = np.maximum(y, 0), np.minimum(y, 0)
    cs_u = np.where(u < INF, yp * (u - Ax), np.where(yp > 0, np.inf, 0.0))
    cs_l = np.where(l > -INF, yn * (l - Ax), np.where(yn < 0, np.inf, 0.0))
    comp = _inf_norm(np.abs(cs_u) + np.abs(cs_l))
    return stat, viol, comp
