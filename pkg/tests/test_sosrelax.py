import random

import numpy as np
import pytest

from critsos.critical import Problem, critical_generators, gradient_generators
from critsos.polyring import evaluate
from critsos.sdpsolve import solve
from critsos.sosrelax import (
    DegreeError, assemble_relaxation, expected_sizes, feasibility_probe, ideal_terms, monomial_basis,
    preordering_terms, relaxation_for,
)

from oracles import closed_form_count, count_monomials, random_poly_text


def test_monomial_basis_examples():
    assert monomial_basis(3, 1) == [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert len(monomial_basis(2, 2)) == 6
    assert monomial_basis(1, 0) == [(0,)]


@pytest.mark.parametrize("n, d", [(1, 0), (1, 5), (2, 3), (3, 4), (4, 2)])
def test_monomial_basis_count(n, d):
    basis = monomial_basis(n, d)
    assert len(basis) == count_monomials(n, d) == closed_form_count(n, d)
    assert len(set(basis)) == len(basis)


def test_preordering_terms_examples(paraboloid, motzkin):
    terms = preordering_terms(paraboloid, 1)
    assert [t.e for t in terms] == [(0,), (1,)]
    assert len(terms[0].gram_basis) == 4 and terms[1].gram_basis == ((0, 0, 0),)
    only = preordering_terms(motzkin, 3)
    assert len(only) == 1 and only[0].e == () and len(only[0].gram_basis) == 10
    two = Problem.from_strings("xy", "x", ["1 - x^2", "1 - y^2"])
    notes = []
    assert [t.e for t in preordering_terms(two, 1, notes)] == [(0, 0), (1, 0), (0, 1)]
    assert any("e=11" in n for n in notes)


def test_paraboloid_sizes(paraboloid):
    relax = relaxation_for(paraboloid, 1)
    sdp = relax.sdp
    assert sdp.block_dims == [4, 1]
    assert sdp.free_labels[0] == "Gamma"
    assert sdp.num_free == 3
    assert sdp.num_rows <= 10
    assert expected_sizes(paraboloid, critical_generators(paraboloid), 1) == \
        {"blocks": [4, 1], "free": 3, "rows": 10}


def test_motzkin_generator_enters_at_degree_five(motzkin):
    gens = critical_generators(motzkin)
    r4 = assemble_relaxation(motzkin, gens, 4)
    assert r4.sdp.block_dims == [15] and r4.sdp.num_free == 1 and r4.ideal == []
    assert any("omitted" in n for n in r4.notes)
    r5 = assemble_relaxation(motzkin, gens, 5)
    assert r5.sdp.num_free == 2
    assert r5.ideal[0].multiplier_basis == ((0, 0),)


def test_zero_generator_is_dropped():
    prob = Problem.from_strings("xy", "3")
    notes = []
    assert ideal_terms(critical_generators(prob), 1, 2, notes) == []
    assert any("identically zero" in n for n in notes)


def test_degree_errors(motzkin):
    with pytest.raises(DegreeError):
        relaxation_for(motzkin, 2)
    with pytest.raises(DegreeError):
        relaxation_for(motzkin, 0)


def test_sizes_match_counting():
    rng = random.Random(2)
    for _ in range(8):
        n = rng.randint(1, 3)
        names = ["x", "y", "z"][:n]
        prob = Problem.from_strings(names, random_poly_text(rng, names, 2),
                                    [random_poly_text(rng, names, 2) for _ in range(rng.randint(0, 2))])
        gens = critical_generators(prob)
        for d in (1, 2):
            relax = assemble_relaxation(prob, gens, d)
            want = expected_sizes(prob, gens, d)
            assert relax.sdp.block_dims == want["blocks"]
            assert relax.sdp.num_free == want["free"]
            assert relax.sdp.num_rows <= want["rows"] == count_monomials(n, 2 * d)
            # brute-force block sizes: one per word of degree <= 2d
            for t in relax.preordering:
                assert len(t.gram_basis) == count_monomials(n, (2 * d - t.word.degree()) // 2)


def test_constant_objective_bound_is_the_constant():
    prob = Problem.from_strings("xy", "7/2")
    sol = solve(relaxation_for(prob, 1).sdp)
    assert sol.optimal and sol.objective == pytest.approx(3.5, abs=1e-6)


def test_feasibility_probe_pair(paraboloid):
    gens = critical_generators(paraboloid)
    assert feasibility_probe(paraboloid, gens, 1, 0.0) is True
    assert feasibility_probe(paraboloid, gens, 1, 1.0) is False


def test_reconstruction_identity_holds_at_solution(paraboloid):
    relax = relaxation_for(paraboloid, 2)
    sol = solve(relax.sdp)
    assert sol.optimal
    lhs = relax.sdp.apply(sol.block_values, sol.free_values)
    assert np.max(np.abs(lhs - relax.sdp.b)) <= 10 * 1e-8


def test_bounds_are_sound_and_monotone(marshall):
    # the global minimum of the Marshall polynomial is 0 at x = 0
    values = []
    for d in (2, 3, 4):
        sol = solve(relaxation_for(marshall, d).sdp)
        assert sol.optimal
        assert sol.objective <= evaluate(marshall.f, [0.0]) + 1e-6
        values.append(sol.objective)
    assert all(b >= a - 1e-7 for a, b in zip(values, values[1:]))


def test_gradient_mode_assembles(marshall):
    relax = assemble_relaxation(marshall, gradient_generators(marshall), 2)
    assert relax.mode == "gradient"
    assert relax.sdp.free_labels[1].startswith("phi[d/dx]")
