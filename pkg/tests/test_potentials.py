"""Shift-partition potentials Phi and Psi, their report, and the numeric
small-set-expansion claim chain, on both genuine mixtures and solver output."""
import numpy as np
import pytest

from ugsos.errors import ParameterError
from ugsos.graphs import spectral_decompose
from ugsos.potentials import (check_shift_symmetric, claim_b1, claim_b2,
                              claim_partition_expansion,
                              claim_vertex_coverage, phi_apx,
                              phi_exact_sampled, potential_report, psi,
                              sp_pseudo_check, truncation_cap)
from ugsos.sos import point_mass_pe, product_copy, symmetrize
from ugsos.steppoly import build_capped_step_poly, build_step_poly

from conftest import make_triangle

BETA, NU = 0.3, 0.1


@pytest.fixture(scope="module")
def p_full():
    # degree unconstrained: mixtures evaluate p numerically
    return build_step_poly(BETA, NU, 0.1)


@pytest.fixture(scope="module")
def sym_pm(triangle_sat):
    return symmetrize(point_mass_pe(3, 3, [0, 2, 1]))


def test_truncation_cap_values():
    assert truncation_cap(2) == 0
    assert truncation_cap(4) == 0
    assert truncation_cap(6) == 1


def test_shift_symmetry_detector(sym_pm):
    assert check_shift_symmetric(sym_pm, strict=False) <= 1e-12
    raw = point_mass_pe(3, 3, [0, 2, 1])
    with pytest.raises(ParameterError):
        check_shift_symmetric(raw)


def test_psi_of_symmetrized_satisfying_point_mass(triangle_sat, sym_pm):
    # the planted shift is recovered with pseudo-probability 1, so Psi = 1
    assert psi(sym_pm, triangle_sat) == pytest.approx(1.0, abs=1e-10)


def test_psi_requires_degree_4(triangle_sat):
    low = symmetrize(point_mass_pe(3, 3, [0, 2, 1], degree=2))
    with pytest.raises(ParameterError):
        psi(low, triangle_sat)


def test_phi_exact_sampled_satisfying_pair(triangle_sat, p_full):
    # identical satisfying assignments concentrate one shift class per vertex
    x = np.array([0, 2, 1])
    val = phi_exact_sampled(triangle_sat, x, x, BETA)
    assert val == pytest.approx(1.0, abs=1e-9)


def test_phi_mixture_matches_sampled_definition(triangle_sat, sym_pm, p_full):
    pE2 = product_copy(sym_pm)
    val = phi_apx(pE2, p_full, triangle_sat)
    # symmetrized point mass = uniform mixture over the 3 global shifts;
    # both copies draw independently, every pair is fully satisfying
    comps = [np.array([(0 + s) % 3, (2 + s) % 3, (1 + s) % 3])
             for s in range(3)]
    expect = np.mean([phi_exact_sampled(triangle_sat, x1, x2, BETA)
                      for x1 in comps for x2 in comps])
    # each pair concentrates one shift class, so Phi_apx = p(1)^2 while the
    # exact indicator version gives 1; the gap is the polynomial's nu error
    assert val == pytest.approx(float(p_full(1.0)) ** 2, abs=1e-9)
    assert abs(val - expect) <= NU * (2.0 + 3 * NU)


def test_phi_nonneg_and_report_fields(triangle_sat, sym_pm, p_full):
    rep = potential_report(sym_pm, triangle_sat, p_full)
    assert rep.phi >= 0.0
    assert rep.psi == pytest.approx(1.0, abs=1e-9)
    assert rep.beta == BETA
    assert len(rep.local_values) == 3
    assert sum(rep.shift_masses) <= 1.0 + 1e-9
    assert rep.to_json()


def test_phi_bounded_by_psi_ratio_sdp(unsat_pe, triangle_unsat):
    # Phi <= Psi/(beta - nu_eff) + nu_eff for the truncated polynomial
    beta = 0.9
    p = build_capped_step_poly(beta, 0.1, truncation_cap(unsat_pe.degree))
    nu_eff = p.eps
    pE2 = product_copy(unsat_pe)
    phi = phi_apx(pE2, p, triangle_unsat)
    psi_v = psi(unsat_pe, triangle_unsat)
    assert phi <= psi_v / (beta - nu_eff) + nu_eff + 1e-5


def test_claim_chain_on_mixture(triangle_sat, sym_pm, p_full):
    # fully satisfying mixture: viol = 0, claims hold with slack to spare
    pE2 = product_copy(sym_pm)
    sd = spectral_decompose_instance(triangle_sat)
    assert claim_vertex_coverage(pE2, p_full, triangle_sat).holds
    assert claim_b1(pE2, p_full, triangle_sat).holds
    assert claim_partition_expansion(pE2, p_full, triangle_sat, sd).holds
    assert claim_b2(pE2, p_full, triangle_sat, sd, lam=0.5, eta=1.0).holds


def test_claim_chain_on_sdp(cube_pe, cube_inst):
    g, inst, _ = cube_inst
    p = build_capped_step_poly(BETA, 0.1, truncation_cap(cube_pe.degree))
    pE2 = product_copy(cube_pe)
    sd = spectral_decompose(g)
    assert claim_vertex_coverage(pE2, p, inst).holds
    assert claim_b1(pE2, p, inst).holds
    assert claim_partition_expansion(pE2, p, inst, sd).holds
    assert claim_b2(pE2, p, inst, sd, lam=0.5, eta=1.0).holds


def test_sp_pseudo_on_satisfiable_sdp(cube_pe, cube_inst):
    _, inst, _ = cube_inst
    p = build_capped_step_poly(BETA, 0.1, truncation_cap(cube_pe.degree))
    pE2 = product_copy(cube_pe)
    check, K = sp_pseudo_check(pE2, p, inst, lam=0.6, C=36.0, eta=1.0)
    assert check.holds
    assert np.isfinite(K)


def spectral_decompose_instance(inst):
    """Spectral data of the instance's own constraint graph."""
    from ugsos.graphs import WeightedGraph
    n = inst.num_vertices
    W = np.zeros((n, n))
    for (u, v, w, _) in inst.edges:
        W[u, v] += w
        W[v, u] += w
    return spectral_decompose(WeightedGraph(n, W, tuple(range(n)), {}))
