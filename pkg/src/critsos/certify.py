"""Representation certificates and local optimality checks.

A certificate records ``gamma``, an SOS decomposition per preordering word
and a multiplier per ideal generator, so that::

    f - gamma = sum_e sigma_e * g^e + sum_J phi_J * gen_J

Verification rebuilds every product with the exact polynomial engine,
starting from the problem data, and never touches the SDP matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.optimize as sopt
import yaml

from .critical import Problem, generators_for
from .parsing import parse_poly
from .polyring import Polynomial
from .sdpsolve import SdpSolution, Status
from .sosrelax import Relaxation

log = logging.getLogger(__name__)

EIG_CUT = 1e-7


def _exact(v: float) -> Fraction:
    """Shortest decimal that reads back as the same double."""
    return Fraction(repr(float(v)))


def _word_key(e) -> str:
    return "".join(str(int(b)) for b in e)


# -- certificates ---------------------------------------------------------------

@dataclass
class IdealMultiplier:
    label: str
    subset: tuple | None
    multiplier: Polynomial


@dataclass
class Certificate:
    vars: tuple
    mode: str
    d: int
    gamma: float
    sos_terms: dict = field(default_factory=dict)  # e -> [(weight, p)], sigma_e = sum w p^2
    ideal_multipliers: list = field(default_factory=list)

    def sigma(self, e) -> Polynomial:
        n = len(self.vars)
        out = Polynomial.zero(n)
        for w, p in self.sos_terms.get(tuple(e), []):
            out = out + (p * p).scale(_exact(w))
        return out


class CertificateError(ValueError):
    pass


def _poly_from_coeffs(basis, coeffs, n: int) -> Polynomial:
    terms: dict = {}
    for mono, c in zip(basis, coeffs):
        if c != 0:
            terms[tuple(mono)] = _exact(c)
    return Polynomial(terms, n)


def extract_certificate(solution: SdpSolution, relaxation: Relaxation,
                        eig_cut: float = EIG_CUT) -> Certificate:
    """Read ``sigma_e`` off the Gram blocks by eigendecomposition and ``phi_J`` off the free values."""
    if solution.status is not Status.OPTIMAL:
        raise CertificateError(f"cannot extract a certificate from status {solution.status}")
    problem = relaxation.problem
    n = problem.n
    sos: dict = {}
    for term, Q in zip(relaxation.preordering, solution.block_values):
        lam, U = np.linalg.eigh((Q + Q.T) / 2)
        pieces = []
        for i in np.nonzero(lam > eig_cut)[0][::-1]:
            p = _poly_from_coeffs(term.gram_basis, U[:, i], n)
            if not p.is_zero():
                pieces.append((float(lam[i]), p))
        sos[tuple(term.e)] = pieces
    mults = []
    for t in relaxation.ideal:
        vals = solution.free_values[relaxation.free_slices[t.index]]
        mults.append(IdealMultiplier(t.label, t.subset, _poly_from_coeffs(t.multiplier_basis, vals, n)))
    return Certificate(
        vars=tuple(problem.vars),
        mode=relaxation.mode,
        d=relaxation.d,
        gamma=float(solution.free_values[0]),
        sos_terms=sos,
        ideal_multipliers=mults,
    )


@dataclass
class VerificationReport:
    passed: bool
    max_residual: float
    threshold: float
    residual: Polynomial
    problems: list = field(default_factory=list)


def verify_certificate(problem: Problem, cert: Certificate, tol: float = 1e-5) -> VerificationReport:
    """Recompute ``f - gamma - sum sigma_e g^e - sum phi_J gen_J`` exactly.

    Passes iff every residual coefficient is at most ``tol * (1 + ||f||_inf)``
    in absolute value and the certificate respects the degree bound ``2d``.
    """
    n = problem.n
    if tuple(cert.vars) != tuple(problem.vars):
        raise CertificateError(f"certificate variables {cert.vars} do not match {problem.vars}")
    problems = []
    rhs = Polynomial.zero(n)
    for e, pieces in cert.sos_terms.items():
        if len(e) != problem.s:
            raise CertificateError(f"word {_word_key(e)} has length {len(e)}, expected {problem.s}")
        word = Polynomial.constant(1, n)
        for j, bit in enumerate(e):
            if bit:
                word = word * problem.gs[j]
        for w, p in pieces:
            if p.n != n:
                raise CertificateError("SOS term has the wrong number of variables")
            if w < 0:
                problems.append(f"negative weight {w} in sigma[e={_word_key(e)}]")
            if not p.is_zero() and 2 * p.degree() + word.degree() > 2 * cert.d:
                problems.append(f"sigma[e={_word_key(e)}] term exceeds degree {2 * cert.d}")
            rhs = rhs + (p * p * word).scale(_exact(w))
    gens = {g.label: g.poly for g in generators_for(problem, cert.mode)}
    for im in cert.ideal_multipliers:
        if im.label not in gens:
            raise CertificateError(f"unknown ideal generator {im.label!r} for mode {cert.mode}")
        if im.multiplier.n != n:
            raise CertificateError("ideal multiplier has the wrong number of variables")
        prod = im.multiplier * gens[im.label]
        if not prod.is_zero() and prod.degree() > 2 * cert.d:
            problems.append(f"phi[{im.label}] * generator exceeds degree {2 * cert.d}")
        rhs = rhs + prod
    residual = problem.f - _exact(cert.gamma) - rhs
    max_res = float(residual.norm_inf())
    threshold = tol * (1 + float(problem.f.norm_inf()))
    return VerificationReport(max_res <= threshold and not problems, max_res, threshold, residual, problems)


# -- serialisation --------------------------------------------------------------

def dump_certificate(cert: Certificate) -> str:
    """YAML document; polynomials are strings in the input grammar."""
    names = list(cert.vars)
    doc = {
        "vars": names,
        "mode": cert.mode,
        "d": cert.d,
        "gamma": repr(float(cert.gamma)),
        "sos": [
            {
                "word": _word_key(e),
                "terms": [{"weight": repr(float(w)), "poly": p.to_string(names)} for w, p in pieces],
            }
            for e, pieces in cert.sos_terms.items()
        ],
        "ideal": [
            {
                "label": im.label,
                "subset": list(im.subset) if im.subset is not None else None,
                "multiplier": im.multiplier.to_string(names),
            }
            for im in cert.ideal_multipliers
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False, width=1 << 16)


def load_certificate(text: str) -> Certificate:
    try:
        doc = yaml.safe_load(text)
        names = [str(v) for v in doc["vars"]]
        sos = {}
        for entry in doc.get("sos") or []:
            e = tuple(int(ch) for ch in str(entry["word"]))
            sos[e] = [(float(t["weight"]), parse_poly(str(t["poly"]), names)) for t in entry["terms"] or []]
        mults = []
        for entry in doc.get("ideal") or []:
            subset = entry.get("subset")
            mults.append(IdealMultiplier(
                str(entry["label"]),
                tuple(subset) if subset is not None else None,
                parse_poly(str(entry["multiplier"]), names),
            ))
        return Certificate(tuple(names), str(doc["mode"]), int(doc["d"]), float(doc["gamma"]), sos, mults)
    except (KeyError, TypeError, yaml.YAMLError) as exc:
        raise CertificateError(f"malformed certificate document: {exc}") from exc


# -- numeric helpers ------------------------------------------------------------

class _Compiled:
    """Float evaluation of a polynomial with its gradient and Hessian."""

    def __init__(self, p: Polynomial):
        n = p.n
        self.n = n
        self.value = _Vec(p)
        self.grad = [_Vec(p.diff(i)) for i in range(n)]
        self.hess = [[_Vec(p.diff(i).diff(j)) for j in range(n)] for i in range(n)]

    def __call__(self, x) -> float:
        return self.value(x)

    def gradient(self, x) -> np.ndarray:
        return np.array([g(x) for g in self.grad])

    def hessian(self, x) -> np.ndarray:
        return np.array([[h(x) for h in row] for row in self.hess])


class _Vec:
    def __init__(self, p: Polynomial):
        items = list(p.items())
        self.E = np.array([m for m, _ in items], dtype=float).reshape(len(items), p.n)
        self.c = np.array([float(c) for _, c in items])

    def __call__(self, x) -> float:
        if not self.c.size:
            return 0.0
        x = np.asarray(x, dtype=float)
        return float(self.c @ np.prod(x[None, :] ** self.E, axis=1))


def _check_point(problem: Problem, point) -> np.ndarray:
    x = np.asarray(point, dtype=float).reshape(-1)
    if x.size != problem.n:
        raise ValueError(f"point has length {x.size}, expected {problem.n}")
    return x


@dataclass
class RegularityReport:
    regular: bool
    active: tuple  # 1-based indices of active constraints
    singular_values: np.ndarray

    def __bool__(self) -> bool:
        return self.regular


def active_set(problem: Problem, point, act_tol: float = 1e-8) -> tuple:
    x = _check_point(problem, point)
    return tuple(
        j + 1 for j, g in enumerate(problem.gs)
        if abs(_Vec(g)(x)) <= act_tol * (1 + float(g.norm_1()))
    )


def check_regularity(problem: Problem, point, act_tol: float = 1e-8,
                     rank_tol: float = 1e-8) -> RegularityReport:
    """Are the gradients of the active constraints linearly independent at ``point``?"""
    x = _check_point(problem, point)
    act = active_set(problem, x, act_tol)
    if not act:
        return RegularityReport(True, act, np.zeros(0))
    G = np.array([[_Vec(problem.gs[j - 1].diff(i))(x) for i in range(problem.n)] for j in act])
    sv = np.linalg.svd(G, compute_uv=False)
    full = len(act) <= problem.n and sv.size == len(act) and sv[-1] > rank_tol
    return RegularityReport(bool(full), act, sv)


@dataclass
class BhcTolerances:
    f_tol: float = 1e-6
    act_tol: float = 1e-8
    rank_tol: float = 1e-8
    res_tol: float = 1e-6
    pos_tol: float = 1e-8
    pd_tol: float = 1e-8


@dataclass
class BhcReport:
    point: np.ndarray
    active: tuple
    regular: bool
    multipliers: np.ndarray
    positive: list
    stationarity_residual: float
    reduced_hessian: np.ndarray
    reduced_hessian_min_eig: float
    verdict: str  # holds | fails | inconclusive
    reason: str = ""


def check_bhc(problem: Problem, point, tols: BhcTolerances | None = None,
              level: float = 0.0) -> BhcReport:
    """Numeric second-order sufficient conditions at a zero of ``f - level`` in K.

    Verdict ``holds`` needs regular active constraints, strictly positive
    multipliers and a positive definite Hessian of the Lagrangian on the
    tangent space of the active constraints.  A point that is not a zero of
    ``f - level`` or is not regular gives ``inconclusive``.
    """
    tols = tols or BhcTolerances()
    x = _check_point(problem, point)
    n = problem.n
    fc = _Compiled(problem.f)
    reg = check_regularity(problem, x, tols.act_tol, tols.rank_tol)
    act = reg.active
    empty = np.zeros(0)

    def report(verdict, reason, mult=empty, pos=(), res=float("nan"), H=np.zeros((0, 0)),
               lo=float("nan")):
        return BhcReport(x, act, reg.regular, mult, list(pos), res, H, lo, verdict, reason)

    if abs(fc(x) - level) > tols.f_tol * (1 + float(problem.f.norm_inf())):
        return report("inconclusive", f"f(point) = {fc(x):.3e} differs from {level:g}")
    infeasible = [j + 1 for j, g in enumerate(problem.gs)
                  if _Vec(g)(x) < -tols.act_tol * (1 + float(g.norm_1()))]
    if infeasible:
        return report("inconclusive", f"point violates constraints {infeasible}")
    if not reg.regular:
        return report("inconclusive", "active constraint gradients are linearly dependent")

    gcs = [_Compiled(problem.gs[j - 1]) for j in act]
    grad_f = fc.gradient(x)
    G = np.array([g.gradient(x) for g in gcs]).reshape(len(act), n)
    if act:
        a, *_ = np.linalg.lstsq(G.T, grad_f, rcond=None)
    else:
        a = empty
    res = float(np.linalg.norm(grad_f - G.T @ a, ord=np.inf))
    pos = [bool(v > tols.pos_tol) for v in a]
    H = fc.hessian(x) - sum((aj * g.hessian(x) for aj, g in zip(a, gcs)), np.zeros((n, n)))
    if act:
        _, _, Vt = np.linalg.svd(G)
        Z = Vt[len(act):].T
    else:
        Z = np.eye(n)
    Hr = Z.T @ H @ Z
    lo = float(np.linalg.eigvalsh((Hr + Hr.T) / 2)[0]) if Hr.size else float("inf")

    if res > tols.res_tol * (1 + float(np.linalg.norm(grad_f, ord=np.inf))):
        verdict, reason = "fails", f"not stationary: residual {res:.3e}"
    elif not all(pos):
        verdict, reason = "fails", "an active multiplier is not strictly positive"
    elif not lo > tols.pd_tol:
        verdict, reason = "fails", f"reduced Hessian not positive definite (min eigenvalue {lo:.3e})"
    else:
        verdict, reason = "holds", ""
    return report(verdict, reason, a, pos, res, Hr, lo)


class DivergenceError(RuntimeError):
    pass


@dataclass
class LocalMinimum:
    point: np.ndarray
    value: float
    converged: bool
    message: str


def local_minimize(problem: Problem, start, max_iterations: int = 500, tol: float = 1e-12,
                   bound: float = 1e8) -> LocalMinimum:
    """Local descent from ``start``; no global guarantee.

    Unconstrained problems use Newton-CG with the exact Hessian; constrained
    ones use SLSQP with exact constraint gradients.
    """
    x0 = _check_point(problem, start)
    fc = _Compiled(problem.f)
    if problem.s == 0:
        res = sopt.minimize(fc, x0, jac=fc.gradient, hess=fc.hessian, method="Newton-CG",
                            options={"xtol": tol * 100, "maxiter": max_iterations})
    else:
        cons = []
        for g in problem.gs:
            gc = _Compiled(g)
            cons.append({"type": "ineq", "fun": gc, "jac": gc.gradient})
        res = sopt.minimize(fc, x0, jac=fc.gradient, method="SLSQP", constraints=cons,
                            options={"ftol": tol, "maxiter": max_iterations})
    x = np.asarray(res.x, dtype=float)
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > bound or not np.isfinite(res.fun):
        raise DivergenceError(f"local descent diverged from {list(x0)}: {res.message}")
    return LocalMinimum(x, float(fc(x)), bool(res.success), str(res.message))
