"""Dense primal-dual path-following solver.

Internally the problem is handled in minimisation form::

    min  <C, X> + c.u   s.t.  A(X) + F u = b,  X PSD
    max  b.y            s.t.  A*(y) + S = C,  F^T y = c,  S PSD

Search directions use Nesterov-Todd scaling with a Mehrotra
predictor-corrector.  Each block keeps a factored scaling ``R`` with
``X = R diag(lam) R^T`` and ``S = R^{-T} diag(lam) R^{-1}``.  Newton systems
are formed in the scaled space, where both iterates equal ``diag(lam)``,
and the scaling is updated multiplicatively from well-conditioned factors.

Free variables stay in the Newton system ``[[M, F], [F^T, 0]]`` where
``M = B B^T`` and the rows of ``B`` are the scaled constraint matrices.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla

from .problem import SdpProblem, SdpSolution, SolverSettings, Status

log = logging.getLogger(__name__)

STEP_FRACTION = 0.98
REFINE_STEPS = 3
_RANK_RTOL = 1e-10


class _Breakdown(Exception):
    pass


def _independent_rows(M: np.ndarray) -> np.ndarray:
    """Indices of a maximal linearly independent row subset (sorted)."""
    if M.shape[0] == 0 or M.shape[1] == 0:
        return np.arange(0)
    _, R, piv = sla.qr(M.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return np.arange(0)
    rank = int(np.sum(diag > _RANK_RTOL * diag[0] * max(M.shape)))
    return np.sort(piv[:rank])


def _failed(sdp: SdpProblem, status: Status, message: str, iters: int = 0) -> SdpSolution:
    return SdpSolution(
        status=status,
        objective=float("nan"),
        block_values=[np.zeros((d, d)) for d in sdp.block_dims],
        free_values=np.zeros(sdp.num_free),
        primal_residual=float("nan"),
        dual_residual=float("nan"),
        duality_gap=float("nan"),
        iterations=iters,
        message=message,
    )


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2


def _step_to_boundary(lam: np.ndarray, d: np.ndarray) -> float:
    """Largest alpha with ``diag(lam) + alpha*d`` PSD."""
    r = 1.0 / np.sqrt(lam)
    lo = np.linalg.eigvalsh(_sym(d * np.outer(r, r)))[0]
    return np.inf if lo >= 0 else -1.0 / lo


class _Block:
    """Scaling state of one PSD block."""

    def __init__(self, dim: int, xi: float):
        self.R = np.eye(dim)
        self.Rinv = np.eye(dim)
        self.lam = np.full(dim, xi)

    @property
    def X(self) -> np.ndarray:
        return _sym((self.R * self.lam) @ self.R.T)

    @property
    def S(self) -> np.ndarray:
        return _sym((self.Rinv.T * self.lam) @ self.Rinv)

    def update(self, dXs: np.ndarray, ap: float, dSs: np.ndarray, ad: float) -> None:
        Lx = np.linalg.cholesky(_sym(np.diag(self.lam) + ap * dXs))
        Ls = np.linalg.cholesky(_sym(np.diag(self.lam) + ad * dSs))
        U, lam, Vt = np.linalg.svd(Ls.T @ Lx)
        if lam[-1] <= 0:
            raise _Breakdown("scaling became singular")
        h = 1.0 / np.sqrt(lam)
        self.R = (self.R @ (Lx @ Vt.T)) * h
        self.Rinv = (h[:, None] * U.T) @ Ls.T @ self.Rinv
        self.lam = lam


def reference_ipm(sdp: SdpProblem, settings: SolverSettings | None = None) -> SdpSolution:
    """Solve ``sdp``; on breakdown, retry once with a small trace penalty on the PSD blocks.

    The penalised run maximises ``objective - eps * sum_b tr(X_b)``.  Its
    iterates are feasible for the original problem, so the reported
    objective is still attained by a feasible point; it may sit up to
    ``eps * sum tr(X_b)`` below the true optimum.  The penalty bounds the
    optimal face when it is unbounded (e.g. when a generator is itself SOS).
    """
    settings = settings or SolverSettings()
    sol = _solve(sdp, settings, 0.0)
    if sol.status in (Status.NUMERICAL_FAILURE, Status.MAX_ITERATIONS) and settings.regularization > 0:
        retry = _solve(sdp, settings, settings.regularization)
        if retry.status is Status.OPTIMAL or sol.status is Status.NUMERICAL_FAILURE:
            retry.message = (f"{retry.message} (trace regularisation eps={settings.regularization:g} "
                             f"after: {sol.message})")
            retry.iterations += sol.iterations
            return retry
    return sol


def _solve(sdp: SdpProblem, settings: SolverSettings, reg: float) -> SdpSolution:
    sdp.validate()
    m = sdp.num_rows
    dims = sdp.block_dims
    if not dims:
        return _failed(sdp, Status.NUMERICAL_FAILURE, "problem has no PSD block")

    # -- presolve: redundant / inconsistent rows, free-variable rays ----------
    Abar = np.hstack([a.reshape(m, d * d) for a, d in zip(sdp.A, dims)] + [sdp.F])
    bnorm = 1 + np.max(np.abs(sdp.b), initial=0.0)
    rows = _independent_rows(Abar)
    if rows.size < m:
        sol, *_ = np.linalg.lstsq(Abar, sdp.b, rcond=None)
        if np.max(np.abs(Abar @ sol - sdp.b), initial=0.0) > settings.feas_tol * bnorm:
            return _failed(sdp, Status.INFEASIBLE, "equality constraints are inconsistent")
        log.debug("dropping %d dependent equality rows", m - rows.size)
    A = [a[rows] for a in sdp.A]
    F_all = sdp.F[rows]
    b = sdp.b[rows]
    C = [-cb + reg * np.eye(cb.shape[0]) for cb in sdp.C]
    c_all = -sdp.c

    k_all = sdp.num_free
    if k_all:
        _, sv, Vt = np.linalg.svd(F_all, full_matrices=True)
        top = sv[0] if sv.size else 0.0
        rank = int(np.sum(sv > _RANK_RTOL * max(top, 1.0) * max(F_all.shape)))
        null = Vt[rank:]
        if null.size and np.max(np.abs(null @ c_all)) > 1e-9 * (1 + np.max(np.abs(c_all))):
            return _failed(
                sdp, Status.UNBOUNDED,
                "objective improves along a direction of the free variables that leaves "
                "every equality unchanged; the relaxation admits every objective value",
            )
        free_keep = _independent_rows(F_all.T) if rank < k_all else np.arange(k_all)
    else:
        free_keep = np.arange(0)
    F = F_all[:, free_keep]
    c = c_all[free_keep]

    mr = b.shape[0]
    k = F.shape[1]
    N = sum(dims)

    def A_op(mats):
        out = np.zeros(mr)
        for a, w in zip(A, mats):
            out += np.tensordot(a, w, axes=([1, 2], [0, 1]))
        return out

    def A_adj(y):
        return [np.tensordot(y, a, axes=1) for a in A]

    xi = 1.0 + float(np.max(np.abs(b), initial=0.0))
    blocks = [_Block(d, xi) for d in dims]
    y = np.zeros(mr)
    u = np.zeros(k)

    status = Status.MAX_ITERATIONS
    message = "iteration limit reached"
    stall = 0
    it = 0
    pres = dres = gap = float("nan")
    pobj = dobj = float("nan")
    for it in range(settings.max_iterations + 1):
        X = [blk.X for blk in blocks]
        S = [blk.S for blk in blocks]
        rp = b - A_op(X) - F @ u
        Rd = [cb - ay - s for cb, ay, s in zip(C, A_adj(y), S)]
        rf = c - F.T @ y
        pobj = sum(float(np.sum(cb * x)) for cb, x in zip(C, X)) + float(c @ u)
        dobj = float(b @ y)
        xs = sum(float(np.sum(blk.lam**2)) for blk in blocks)
        mu = xs / N
        pres = float(np.max(np.abs(rp), initial=0.0))
        dres = max([float(np.max(np.abs(r))) for r in Rd]
                   + [float(np.max(np.abs(rf), initial=0.0))])
        gap = max(abs(pobj - dobj), xs) / (1 + abs(pobj) + abs(dobj))
        if settings.verbosity:
            log.info("it %3d  pobj %+.10e  dobj %+.10e  pres %.2e  dres %.2e  gap %.2e",
                     it, -pobj, -dobj, pres, dres, gap)
        if pres <= settings.feas_tol and dres <= settings.feas_tol and gap <= settings.gap_tol:
            status, message = Status.OPTIMAL, "converged"
            break
        # normalised infeasibility certificates
        if dobj > 1.0:
            ray = max([float(np.max(np.abs(cb - r))) for cb, r in zip(C, Rd)]
                      + [float(np.max(np.abs(c - rf), initial=0.0))]) / dobj
            if ray <= settings.feas_tol:
                status = Status.INFEASIBLE
                message = "dual ray found: the equality system has no PSD solution"
                break
        if pobj < -1.0:
            ray = float(np.max(np.abs(b - rp), initial=0.0)) / -pobj
            if ray <= settings.feas_tol:
                status = Status.UNBOUNDED
                message = "primal ray found: objective increases without bound"
                break
        if it == settings.max_iterations:
            break
        try:
            dXs, dSs, dy, du, ap, ad = _newton_step(A, F, blocks, rp, Rd, rf, mu, N)
            for blk, dx, ds in zip(blocks, dXs, dSs):
                blk.update(dx, ap, ds, ad)
        except (_Breakdown, np.linalg.LinAlgError) as exc:
            status, message = Status.NUMERICAL_FAILURE, f"factorisation breakdown: {exc}"
            break
        u = u + ap * du
        y = y + ad * dy
        if settings.verbosity > 1:
            log.info("      ap %.3e  ad %.3e  mu %.3e", ap, ad, mu)
        if max(ap, ad) < 1e-10:
            stall += 1
            if stall >= 3:
                status, message = Status.NUMERICAL_FAILURE, "step length collapsed"
                break
        else:
            stall = 0

    X = [blk.X for blk in blocks]
    u_full = np.zeros(k_all)
    u_full[free_keep] = u
    objective = sdp.objective(X, u_full) if reg else -pobj
    return SdpSolution(
        status=status,
        objective=objective,
        block_values=X,
        free_values=u_full,
        primal_residual=pres,
        dual_residual=dres,
        duality_gap=gap,
        iterations=it,
        dual_objective=-dobj,
        message=message,
    )


def _newton_step(A, F, blocks, rp, Rd, rf, mu, N):
    mr = rp.shape[0]
    k = F.shape[1]
    # scaled constraint matrices R^T A_i R and scaled dual residual
    As = [np.matmul(np.matmul(blk.R.T, a), blk.R) for a, blk in zip(A, blocks)]
    Rds = [_sym(blk.R.T @ rd @ blk.R) for rd, blk in zip(Rd, blocks)]
    lams = [blk.lam for blk in blocks]

    B = np.hstack([a.reshape(mr, a.shape[1] ** 2) for a in As])
    RB = np.linalg.qr(B.T, mode="r")  # M = B B^T = RB^T RB
    if not np.all(np.isfinite(RB)) or np.min(np.abs(np.diag(RB)), initial=np.inf) == 0:
        raise _Breakdown("Schur complement is singular")

    def msolve(r):
        w = sla.solve_triangular(RB, r, trans="T")
        return sla.solve_triangular(RB, w)

    if k:
        G = sla.solve_triangular(RB, F, trans="T")
        RG = np.linalg.qr(G, mode="r")

        def solve_kkt(r1, r2):
            w = msolve(r1)
            t = sla.solve_triangular(RG, F.T @ w - r2, trans="T")
            du = sla.solve_triangular(RG, t)
            return w - msolve(F @ du), du
    else:
        def solve_kkt(r1, r2):
            return msolve(r1), np.zeros(0)

    def A_op(mats):
        out = np.zeros(mr)
        for a, w in zip(As, mats):
            out += np.tensordot(a, w, axes=([1, 2], [0, 1]))
        return out

    def A_adj(y):
        return [np.tensordot(y, a, axes=1) for a in As]

    def direction(Rc):
        # dX + dS = Rc in the scaled space, dS = Rd - A*(dy)
        base = [rc - rd for rc, rd in zip(Rc, Rds)]
        r1 = rp - A_op(base)
        dy, du = solve_kkt(r1, rf)
        for _ in range(REFINE_STEPS):
            e1 = r1 - A_op(A_adj(dy)) - F @ du
            e2 = rf - F.T @ dy
            ddy, ddu = solve_kkt(e1, e2)
            dy, du = dy + ddy, du + ddu
        Ady = A_adj(dy)
        dX = [_sym(bs + ad) for bs, ad in zip(base, Ady)]
        dS = [_sym(rd - ad) for rd, ad in zip(Rds, Ady)]
        return dX, dS, dy, du

    def steps(dX, dS):
        ap = min([_step_to_boundary(lam, d) for lam, d in zip(lams, dX)] + [np.inf])
        ad = min([_step_to_boundary(lam, d) for lam, d in zip(lams, dS)] + [np.inf])
        return min(1.0, STEP_FRACTION * ap), min(1.0, STEP_FRACTION * ad)

    def lyap(lam, target):
        # solve (lam D + D lam) / 2 = target for D
        return 2.0 * target / (lam[:, None] + lam[None, :])

    dXa, dSa, _, _ = direction([-np.diag(lam) for lam in lams])
    apa, ada = steps(dXa, dSa)
    mu_aff = sum(float(np.sum((np.diag(lam) + apa * dx) * (np.diag(lam) + ada * ds)))
                 for lam, dx, ds in zip(lams, dXa, dSa)) / N
    sigma = min(1.0, max(0.0, mu_aff / mu) ** 3) if mu > 0 else 0.0
    Rc = []
    for lam, dx, ds in zip(lams, dXa, dSa):
        target = sigma * mu * np.eye(lam.size) - np.diag(lam**2) - _sym(dx @ ds)
        Rc.append(lyap(lam, target))
    dX, dS, dy, du = direction(Rc)
    ap, ad = steps(dX, dS)
    return dX, dS, dy, du, ap, ad
