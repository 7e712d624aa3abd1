"""Critical-ideal generators ``g_J * h_{J^c}`` and the gradient-ideal baseline.

Constraint subsets ``J`` are tuples of 1-based constraint indices.  Subsets
are enumerated by binary counting: bit ``j-1`` of the mask selects ``g_j``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .parsing import parse_poly
from .polyring import PolyMatrix, Polynomial, evaluate, poly_matrix_det

log = logging.getLogger(__name__)

MAX_CONSTRAINTS = 12
WARN_CONSTRAINTS = 6


class ConstraintCapError(ValueError):
    pass


@dataclass(frozen=True)
class Problem:
    """Minimise ``f`` over ``K = {x : g_j(x) >= 0 for all j}``."""

    vars: tuple
    f: Polynomial
    gs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "gs", tuple(self.gs))
        if not self.vars:
            raise ValueError("problem needs at least one variable")
        if len(set(self.vars)) != len(self.vars):
            raise ValueError(f"duplicate variable names in {self.vars}")
        n = len(self.vars)
        for p in (self.f, *self.gs):
            if p.n != n:
                raise ValueError(f"polynomial has {p.n} variables, expected {n}")
        if len(self.gs) > MAX_CONSTRAINTS:
            raise ConstraintCapError(
                f"{len(self.gs)} constraints exceeds the cap of {MAX_CONSTRAINTS}"
            )

    @classmethod
    def from_strings(cls, vars: Sequence[str], f: str, gs: Sequence[str] = ()) -> "Problem":
        return cls(tuple(vars), parse_poly(f, vars), tuple(parse_poly(g, vars) for g in gs))

    @property
    def n(self) -> int:
        return len(self.vars)

    @property
    def s(self) -> int:
        return len(self.gs)

    def shifted(self, a) -> "Problem":
        return Problem(self.vars, self.f + a, self.gs)


@dataclass(frozen=True)
class Generator:
    label: str
    subset: tuple | None  # J for critical mode, None for gradient mode
    poly: Polynomial


@dataclass(frozen=True)
class GeneratorSet:
    mode: str
    entries: tuple = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def polys(self) -> list[Polynomial]:
        return [e.poly for e in self.entries]


def subset_from_mask(mask: int, s: int) -> tuple:
    return tuple(j + 1 for j in range(s) if mask >> j & 1)


def all_subsets(s: int) -> list[tuple]:
    return [subset_from_mask(mask, s) for mask in range(1 << s)]


def _check_subset(problem: Problem, J) -> tuple:
    J = tuple(sorted(set(J)))
    for j in J:
        if not 1 <= j <= problem.s:
            raise IndexError(f"constraint index {j} out of range 1..{problem.s}")
    return J


def g_product(problem: Problem, J) -> Polynomial:
    """Product of the constraints indexed by ``J``; 1 for the empty set."""
    J = _check_subset(problem, J)
    out = Polynomial.constant(1, problem.n)
    for j in J:
        out = out * problem.gs[j - 1]
    return out


def build_A(problem: Problem, J) -> PolyMatrix:
    """Jacobian rows: grad f first, then grad g_j for j in J (ascending)."""
    J = _check_subset(problem, J)
    rows = [problem.f.gradient()]
    rows.extend(problem.gs[j - 1].gradient() for j in J)
    return PolyMatrix.from_rows(rows)


def h_poly(problem: Problem, J) -> Polynomial:
    """``det(A_J A_J^T)``: zero exactly where grad f and the grad g_j, j in J, are dependent."""
    A = build_A(problem, J)
    return poly_matrix_det(A.gram())


def critical_generators(problem: Problem) -> GeneratorSet:
    """All ``2^s`` generators ``g_J * h_{J^c}`` in binary-counting order of ``J``."""
    s = problem.s
    if s > MAX_CONSTRAINTS:
        raise ConstraintCapError(f"{s} constraints exceeds the cap of {MAX_CONSTRAINTS}")
    if s > WARN_CONSTRAINTS:
        log.warning("%d constraints: building %d critical generators", s, 1 << s)
    full = set(range(1, s + 1))
    entries = []
    h_cache: dict = {}
    for J in all_subsets(s):
        Jc = tuple(sorted(full - set(J)))
        if Jc not in h_cache:
            h_cache[Jc] = h_poly(problem, Jc)
        gen = g_product(problem, J) * h_cache[Jc]
        label = "J={" + ",".join(map(str, J)) + "}"
        entries.append(Generator(label, J, gen))
    return GeneratorSet("critical", tuple(entries))


def gradient_generators(problem: Problem) -> GeneratorSet:
    """The partial derivatives of ``f``; only meaningful without constraints."""
    if problem.s:
        raise ValueError("gradient mode requires an unconstrained problem (s = 0)")
    entries = tuple(
        Generator(f"d/d{name}", None, problem.f.diff(i))
        for i, name in enumerate(problem.vars)
    )
    return GeneratorSet("gradient", entries)


def generators_for(problem: Problem, mode: str) -> GeneratorSet:
    if mode == "critical":
        return critical_generators(problem)
    if mode == "gradient":
        return gradient_generators(problem)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class CriticalCheck:
    is_critical: bool
    residuals: list

    def __bool__(self) -> bool:
        return self.is_critical


def is_critical_point(problem: Problem, point, tol: float = 1e-8,
                      generators: GeneratorSet | None = None) -> CriticalCheck:
    """Test membership of ``point`` in the critical variety.

    Each generator value is compared against ``tol * (1 + ||gen||_1)``.
    """
    point = [float(v) for v in point]
    if len(point) != problem.n:
        raise ValueError(f"point has length {len(point)}, expected {problem.n}")
    gens = generators if generators is not None else critical_generators(problem)
    residuals = []
    ok = True
    for g in gens:
        val = abs(evaluate(g.poly, point))
        residuals.append(val)
        if not val <= tol * (1 + float(g.poly.norm_1())):
            ok = False
    return CriticalCheck(ok, residuals)
