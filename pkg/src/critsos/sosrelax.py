"""Degree-``d`` SOS relaxation of ``inf f`` over ``K`` modulo a generator ideal.

The unknowns are a Gram matrix per preordering word ``g^e`` and a coefficient
vector per ideal generator.  The relaxation reads::

    maximise Gamma  s.t.  f - Gamma = sum_e (v_e^T Q_e v_e) g^e + sum_J phi_J gen_J

with every product of degree at most ``2d``.  Matching coefficients monomial
by monomial gives one linear equality per monomial of degree ``<= 2d``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .critical import GeneratorSet, Problem, generators_for
from .polyring import Monomial, Polynomial, monomials_up_to
from .sdpsolve import SdpProblem, SolverSettings, Status, solve

log = logging.getLogger(__name__)


class DegreeError(ValueError):
    pass


def monomial_basis(n: int, d: int) -> list[Monomial]:
    """All monomials of degree ``<= d``; ``comb(n + d, d)`` of them."""
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    return monomials_up_to(n, d)


def word_label(e: tuple) -> str:
    return "sigma[e=" + "".join(map(str, e)) + "]"


@dataclass(frozen=True)
class PreorderingTerm:
    e: tuple
    word: Polynomial
    gram_basis: tuple

    @property
    def label(self) -> str:
        return word_label(self.e)


@dataclass(frozen=True)
class IdealTerm:
    index: int  # position in the generator set
    label: str
    subset: tuple | None
    generator: Polynomial
    multiplier_basis: tuple


def preordering_terms(problem: Problem, d: int, notes: list | None = None) -> list[PreorderingTerm]:
    """Square-free words ``g^e`` of degree ``<= 2d``, in binary-counting order of ``e``."""
    if d < 1:
        raise DegreeError("relaxation order d must be at least 1")
    s, n = problem.s, problem.n
    terms = []
    for mask in range(1 << s):
        e = tuple(mask >> j & 1 for j in range(s))
        word = Polynomial.constant(1, n)
        for j in range(s):
            if e[j]:
                word = word * problem.gs[j]
        deg = word.degree()
        if word.is_zero() or deg > 2 * d:
            if notes is not None:
                notes.append(f"omitted {word_label(e)}: word degree {deg} > {2 * d}")
            continue
        basis = monomial_basis(n, (2 * d - deg) // 2)
        terms.append(PreorderingTerm(e, word, tuple(basis)))
    return terms


def ideal_terms(generators: GeneratorSet, d: int, n: int,
                notes: list | None = None) -> list[IdealTerm]:
    out = []
    for idx, g in enumerate(generators):
        if g.poly.is_zero():
            if notes is not None:
                notes.append(f"dropped {g.label}: generator is identically zero")
            continue
        deg = g.poly.degree()
        if deg > 2 * d:
            if notes is not None:
                notes.append(f"omitted {g.label}: generator degree {deg} > {2 * d}")
            continue
        basis = monomials_up_to(n, 2 * d - deg)
        out.append(IdealTerm(idx, g.label, g.subset, g.poly, tuple(basis)))
    return out


@dataclass
class Relaxation:
    problem: Problem
    generators: GeneratorSet
    d: int
    preordering: list
    ideal: list
    sdp: SdpProblem
    row_monomials: list
    free_slices: dict = field(default_factory=dict)  # ideal term index -> slice into free vars
    notes: list = field(default_factory=list)

    @property
    def mode(self) -> str:
        return self.generators.mode


def _mono_label(mono: Monomial, names) -> str:
    parts = [n if a == 1 else f"{n}^{a}" for n, a in zip(names, mono) if a]
    return "*".join(parts) or "1"


def assemble_relaxation(problem: Problem, generators: GeneratorSet, d: int) -> Relaxation:
    """Build the SDP whose optimum is the degree-``d`` lower bound ``f*_d``."""
    n = problem.n
    if n < 1:
        raise DegreeError("problem has no variables")
    if d < 1:
        raise DegreeError("relaxation order d must be at least 1")
    if 2 * d < problem.f.degree():
        raise DegreeError(
            f"2d = {2 * d} is below deg f = {problem.f.degree()}; the objective cannot be matched"
        )
    notes: list = []
    pre = preordering_terms(problem, d, notes)
    ideal = ideal_terms(generators, d, n, notes)
    for note in notes:
        log.info(note)

    monos = monomials_up_to(n, 2 * d)
    row_of = {m: i for i, m in enumerate(monos)}
    m = len(monos)

    A = []
    for term in pre:
        dim = len(term.gram_basis)
        a = np.zeros((m, dim, dim))
        word_items = list(term.word.items())
        for i, bi in enumerate(term.gram_basis):
            for j in range(i, dim):
                bij = tuple(p + q for p, q in zip(bi, term.gram_basis[j]))
                for mu, coef in word_items:
                    r = row_of[tuple(p + q for p, q in zip(bij, mu))]
                    a[r, i, j] += float(coef)
                    if i != j:
                        a[r, j, i] += float(coef)
        A.append(a)

    free_labels = ["Gamma"]
    cols = [{row_of[(0,) * n]: 1.0}]
    free_slices = {}
    for t in ideal:
        start = len(free_labels)
        gen_items = list(t.generator.items())
        for mu in t.multiplier_basis:
            col: dict = {}
            for nu, coef in gen_items:
                r = row_of[tuple(p + q for p, q in zip(mu, nu))]
                col[r] = col.get(r, 0.0) + float(coef)
            cols.append(col)
            free_labels.append(f"phi[{t.label}]*{_mono_label(mu, problem.vars)}")
        free_slices[t.index] = slice(start, len(free_labels))
    F = np.zeros((m, len(cols)))
    for k, col in enumerate(cols):
        for r, v in col.items():
            F[r, k] = v
    b = np.zeros(m)
    for mono, coef in problem.f.items():
        b[row_of[mono]] = float(coef)

    # prune 0 = 0 rows
    used = np.abs(b) > 0
    used |= np.any(F != 0, axis=1)
    for a in A:
        used |= np.any(a.reshape(m, -1) != 0, axis=1)
    keep = np.nonzero(used)[0]
    if keep.size < m:
        notes.append(f"pruned {m - keep.size} empty equality rows")
    row_monos = [monos[i] for i in keep]

    c = np.zeros(len(cols))
    c[0] = 1.0
    sdp = SdpProblem(
        block_labels=[t.label for t in pre],
        block_dims=[len(t.gram_basis) for t in pre],
        free_labels=free_labels,
        A=[a[keep] for a in A],
        F=F[keep],
        b=b[keep],
        c=c,
        row_labels=[_mono_label(mono, problem.vars) for mono in row_monos],
    )
    return Relaxation(problem, generators, d, pre, ideal, sdp, row_monos, free_slices, notes)


def expected_sizes(problem: Problem, generators: GeneratorSet, d: int) -> dict:
    """Closed-form block dimensions, free-variable count and row count (before pruning)."""
    n = problem.n
    blocks = []
    for mask in range(1 << problem.s):
        deg = sum(problem.gs[j].degree() for j in range(problem.s) if mask >> j & 1)
        if deg <= 2 * d:
            blocks.append(comb(n + (2 * d - deg) // 2, n))
    nfree = 1 + sum(
        comb(n + 2 * d - g.poly.degree(), n)
        for g in generators
        if not g.poly.is_zero() and g.poly.degree() <= 2 * d
    )
    return {"blocks": blocks, "free": nfree, "rows": comb(n + 2 * d, n)}


def feasibility_probe(problem: Problem, generators: GeneratorSet, d: int, gamma: float,
                      settings: SolverSettings | None = None) -> bool:
    """Is ``f - gamma`` in the degree-``d`` truncated preordering plus ideal?"""
    relax = assemble_relaxation(problem, generators, d)
    sdp = relax.sdp
    # pin Gamma: move it to the right-hand side and drop its column
    b = sdp.b - sdp.F[:, 0] * gamma
    probe = SdpProblem(
        block_labels=sdp.block_labels,
        block_dims=sdp.block_dims,
        free_labels=sdp.free_labels[1:],
        A=sdp.A,
        F=sdp.F[:, 1:],
        b=b,
        c=np.zeros(sdp.num_free - 1),
        row_labels=sdp.row_labels,
    )
    sol = solve(probe, settings)
    if sol.status is Status.OPTIMAL:
        return True
    if sol.status is Status.INFEASIBLE:
        return False
    raise RuntimeError(f"feasibility probe inconclusive: {sol.status} ({sol.message})")


def relaxation_for(problem: Problem, d: int, mode: str = "critical") -> Relaxation:
    return assemble_relaxation(problem, generators_for(problem, mode), d)
