"""Closed-form spectra, restriction-density Fourier analysis, the structure
inequality, and subcube search on the Johnson graph and its Cayley model."""
import itertools
import math

import numpy as np
import pytest

from ugsos.errors import ParameterError, SizeCapError
from ugsos.graphs import (expansion, johnson_cayley_graph, johnson_graph,
                          spectral_decompose)
from ugsos.instances import plant_instance, value
from ugsos.johnson import (SubcubeId, eigenvalue_multiset,
                           expansion_bound_check, find_best_subcube,
                           johnson_eigenvalue, johnson_pipeline,
                           level_decompose, level_weight_bound_check,
                           restriction_density, structure_inequality_check,
                           structure_report_csv, subcube_expansion,
                           subcube_vertices)


def random_invariant(rng, n, l):
    """Random permutation-invariant [0,1]-valued tensor on [n]^l."""
    F = rng.random((n,) * l)
    sym = np.zeros_like(F)
    for p in itertools.permutations(range(l)):
        sym += np.transpose(F, p)
    sym /= math.factorial(l)
    sym -= sym.min()
    m = sym.max()
    return sym / m if m > 0 else sym


# -- closed-form spectra ----------------------------------------------------

@pytest.mark.parametrize("n,l,alpha", [(4, 2, 0.5), (5, 2, 0.5), (6, 2, 0.5)])
def test_eigenvalues_match_numeric(n, l, alpha):
    closed = eigenvalue_multiset(n, l, alpha)
    sd = spectral_decompose(johnson_cayley_graph(n, l, alpha))
    assert np.allclose(np.sort(closed), np.sort(sd.eigenvalues), atol=1e-8)


def test_eigenvalue_vanishes_past_support():
    assert johnson_eigenvalue(4, 0.5, 3) == 0.0
    assert johnson_eigenvalue(4, 0.5, 0) == 1.0


def test_subcube_expansion_matches_numeric_johnson():
    g = johnson_graph(6, 3, 1.0 / 3.0)
    sd = spectral_decompose(g)
    sub = SubcubeId("J", (0,))
    f = np.zeros(g.num_vertices)
    f[subcube_vertices(g, sub)] = 1.0
    rep = expansion(g, sd, f)
    assert rep.phi == pytest.approx(subcube_expansion(6, 3, 1.0 / 3.0, 1),
                                    abs=1e-9)


def test_expansion_bound_small_eps():
    r, phi, ok = expansion_bound_check(8, 0.5, 0.01)
    assert r == 0
    assert ok


# -- Fourier identities -----------------------------------------------------

def test_level_decomposition_identities():
    rng = np.random.default_rng(0)
    for _ in range(10):
        F = random_invariant(rng, 5, 2)
        dec = level_decompose(F)
        assert dec.invariant
        assert dec.parseval_residual <= 1e-8
        assert dec.pointwise_residual <= 1e-8
        assert dec.c6_residual <= 1e-8


def test_restriction_recursion():
    # f_{i+1,F}(a, X) = f_{i, F|_a}(X) - f_{i,F}(X)
    rng = np.random.default_rng(1)
    F = random_invariant(rng, 4, 3)
    dec = level_decompose(F)
    for a in range(4):
        sub = level_decompose(F[a])
        for i in range(F.ndim - 1 + 1):
            if i + 1 > F.ndim:
                continue
            lhs = dec.reduced[i + 1][a] if i + 1 <= F.ndim else None
            rhs = sub.reduced[i] - dec.reduced[i]
            assert np.allclose(lhs, rhs, atol=1e-10)


def test_density_tensor_vs_flat():
    g = johnson_graph(5, 2, 0.5)
    f = np.zeros(g.num_vertices)
    sub = SubcubeId("J", (0, 1))
    f[subcube_vertices(g, sub)] = 1.0
    # delta_{1}(indicator of sets containing {0,1}) over C(5,2)
    d = restriction_density(f, (0,), n=5, l=2)
    assert d == pytest.approx(1.0 / 4.0)


def test_level_weight_bounds():
    rng = np.random.default_rng(2)
    for _ in range(10):
        F = random_invariant(rng, 5, 2)
        assert level_weight_bound_check(F, r=2).passed


def test_level_decompose_size_cap():
    with pytest.raises(SizeCapError):
        level_decompose(np.zeros((50,) * 3))


# -- structure inequality ---------------------------------------------------

def test_structure_c_variant_random():
    rng = np.random.default_rng(3)
    for _ in range(20):
        F = random_invariant(rng, 5, 2)
        rep = structure_inequality_check(F, r=1, n=5, l=2, alpha=0.5)
        assert rep.holds


def test_structure_subcube_indicators():
    n, l, alpha = 5, 2, 0.5
    g = johnson_cayley_graph(n, l, alpha)
    for v0 in range(n):
        F = np.zeros((n, n))
        F[v0, :] = 1.0
        F[:, v0] = 1.0
        rep = structure_inequality_check(F, r=1, n=n, l=l, alpha=alpha,
                                         variant="C", graph=g)
        assert rep.holds


def test_structure_j_variant_reports_slack():
    g = johnson_graph(6, 2, 0.5)
    F = np.zeros(g.num_vertices)
    F[subcube_vertices(g, SubcubeId("J", (0,)))] = 1.0
    rep = structure_inequality_check(F, r=1, n=6, l=2, alpha=0.5,
                                     variant="J", graph=g)
    assert rep.order_n_slack is not None
    assert rep.residual + rep.order_n_slack >= -1e-8


def test_structure_csv_has_header():
    rng = np.random.default_rng(4)
    rep = structure_inequality_check(random_invariant(rng, 4, 2), 1, 4, 2, 0.5)
    text = structure_report_csv([rep])
    assert text.startswith("variant,")
    assert len(text.strip().splitlines()) == 2


def test_structure_rejects_out_of_range_values():
    with pytest.raises(ParameterError):
        structure_inequality_check(np.full((4, 4), 2.0), 1, 4, 2, 0.5)


# -- subcube search and pipeline -------------------------------------------

@pytest.fixture(scope="module")
def planted_johnson():
    g = johnson_graph(5, 2, 0.5)
    inst, xstar = plant_instance(g, 3, 0.0, seed=2)
    return g, inst, xstar


def test_find_best_subcube_prefers_whole_graph_when_satisfiable(
        planted_johnson):
    from ugsos.sos import build_relaxation, solve_sdp, symmetrize
    g, inst, _ = planted_johnson
    pE = symmetrize(solve_sdp(build_relaxation(inst, 2), tol=1e-6))
    sub, cv = find_best_subcube(pE, inst, g, r_max=1)
    assert cv >= 1.0 - 1e-4
    assert sub.tag == "J"


def test_pipeline_degree2_recovers_planted(planted_johnson):
    g, inst, xstar = planted_johnson
    # eps=0.05 keeps the stopping threshold 1 - 2*eps strictly below the
    # (numerically just-under-1) solved value of the satisfiable instance
    out = johnson_pipeline(inst, 0.05, 2, seed=0, graph=g, solver_tol=1e-6)
    assert out.achieved_value == pytest.approx(1.0)
    assert np.all(out.assignment >= 0)
    for rec in out.trace:
        assert rec.drop <= 2.0 * len(rec.subgraph) / inst.num_vertices + 1e-9


def test_pipeline_rejects_wrong_graph():
    g = johnson_cayley_graph(4, 2, 0.5)
    inst, _ = plant_instance(g, 2, 0.0, seed=0)
    with pytest.raises(ParameterError):
        johnson_pipeline(inst, 0.0, 2, seed=0, graph=g)
