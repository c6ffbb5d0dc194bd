from types import SimpleNamespace

import numpy as np
import pytest
import scipy.linalg as sla

from extdicke import observables
from extdicke.eigensolve import converge_truncation
from extdicke.hamiltonian import BasisKind
from extdicke.meanfield import critical_coupling, minimize
from extdicke.model import ModelParams, effective_frame
from extdicke.observables import (
    BracketError,
    default_step,
    finite_size_critical,
    hellmann_feynman_slope,
    locate_dip,
    parabola_vertex,
    refine_critical,
    report,
    second_derivative_e0,
    stencil_energies,
)
from oracles import kron_hamiltonian, random_params

LAMBDA_C = 0.670820393249937


def fig2(n_atoms, ratio=0.0):
    p = ModelParams(1.0, 1.0, 0.0, -0.2, 0.5, n_atoms)
    return p.with_(lam=ratio * critical_coupling(p))


@pytest.mark.parametrize("n_atoms", [2, 8])
def test_report_without_coupling(n_atoms):
    p = fig2(n_atoms)
    r = report(p, converge_truncation(p, BasisKind.PLAIN))
    assert r.photon_density == pytest.approx(0.0, abs=1e-28)
    assert r.jz_order == pytest.approx(0.0, abs=1e-14)
    assert abs(r.parity) == pytest.approx(1.0, abs=1e-12)
    assert r.e0_shifted_per_atom - r.e0_per_atom == pytest.approx(
        effective_frame(p).energy_shift / n_atoms, rel=1e-14)


def test_report_parity_only_in_plain_basis():
    p = fig2(4, 0.5)
    assert report(p, converge_truncation(p, BasisKind.DISPLACED)).parity is None


def test_report_bases_agree():
    p = fig2(8, 1.3)
    a = report(p, converge_truncation(p, BasisKind.PLAIN, e_tol=1e-11))
    b = report(p, converge_truncation(p, BasisKind.DISPLACED, e_tol=1e-11))
    assert a.e0_per_atom == pytest.approx(b.e0_per_atom, abs=1e-10)
    assert a.photon_density == pytest.approx(b.photon_density, abs=1e-7)
    assert a.gap == pytest.approx(b.gap, abs=1e-7)


def test_report_invariants(rng):
    for _ in range(15):
        p = random_params(rng, int(rng.choice([2, 4, 8, 16])), lam_max=1.5)
        r = report(p, converge_truncation(p))
        assert r.photon_density >= 0
        assert abs(r.jz_order) <= 1 + 1e-12
        assert r.gap >= -1e-12


def test_report_rejects_unnormalised_vector():
    p = fig2(4, 0.5)
    res = converge_truncation(p)
    with pytest.raises(ValueError):
        report(p, res, 1.001 * res.ground_state)


@pytest.mark.xfail(strict=True, reason="N=8 sits 17% below the mean-field value; see next test")
def test_photon_density_matches_mean_field_at_eight_atoms():
    p = fig2(8, 1.5)
    r = report(p, converge_truncation(p))
    assert r.photon_density == pytest.approx(minimize(p).alpha ** 2, rel=0.10)


def test_photon_density_approaches_mean_field():
    errs = []
    for n_atoms in (8, 16, 32):
        p = fig2(n_atoms, 1.5)
        r = report(p, converge_truncation(p))
        errs.append(abs(r.photon_density / minimize(p).alpha ** 2 - 1))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] < 0.10


def test_parity_sharp_in_normal_phase(rng):
    for _ in range(5):
        p = random_params(rng, int(rng.choice([2, 4, 6])))
        p = p.with_(omega_aa=-0.1, lam=0.5 * critical_coupling(p.with_(omega_aa=-0.1)))
        r = report(p, converge_truncation(p, BasisKind.PLAIN, e_tol=1e-12))
        assert abs(r.parity) == pytest.approx(1.0, abs=1e-10)


def test_second_difference_matches_dense_oracle():
    h = 0.05
    p = fig2(4).with_(lam=h)
    lo, mid, hi = stencil_energies(p, h, BasisKind.PLAIN)
    n = mid.n_max_used
    ref = [sla.eigvalsh(kron_hamiltonian(p.with_(lam=lam), n), subset_by_index=[0, 0])[0]
           for lam in (0.0, h, 2 * h)]
    expected = (ref[2] - 2 * ref[1] + ref[0]) / (4 * h * h)
    assert (hi.e0 - 2 * mid.e0 + lo.e0) / (4 * h * h) == pytest.approx(expected, abs=1e-9)
    assert second_derivative_e0(p, h, BasisKind.PLAIN) == pytest.approx(expected, abs=1e-9)


def test_stencil_shares_cutoff():
    p = fig2(16, 1.05)
    results = stencil_energies(p, default_step(p))
    assert len({r.n_max_used for r in results}) == 1


def test_second_difference_of_synthetic_quadratic(monkeypatch):
    c = 0.37

    def fake(params, kind, **kw):
        return SimpleNamespace(e0=c * params.lam ** 2 - 3.0, n_max_used=10)

    monkeypatch.setattr(observables, "converge_truncation", fake)
    p = fig2(8).with_(lam=0.8)
    for h in (1e-1, 1e-2, 1e-3):
        assert second_derivative_e0(p, h) == pytest.approx(2 * c / 8, rel=1e-6)


def test_step_halving_follows_richardson():
    p = fig2(16).with_(lam=0.3)
    d = [second_derivative_e0(p, h) for h in (0.1, 0.05, 0.025)]
    ratio = (d[0] - d[1]) / (d[1] - d[2])
    assert 3.5 < ratio < 4.5


def test_stencil_preconditions():
    p = fig2(4).with_(lam=0.01)
    with pytest.raises(ValueError):
        second_derivative_e0(p, 0.0)
    with pytest.raises(ValueError):
        second_derivative_e0(p, 0.02)


def test_default_step():
    assert default_step(fig2(8)) == pytest.approx(1e-3 * LAMBDA_C, rel=1e-12)


@pytest.mark.parametrize("ratio", [0.5, 1.6])
def test_hellmann_feynman(ratio):
    p = fig2(16, ratio)
    h = 1e-4
    up = converge_truncation(p.with_(lam=p.lam + h), e_tol=1e-12)
    down = converge_truncation(p.with_(lam=p.lam - h), e_tol=1e-12)
    mid = converge_truncation(p, e_tol=1e-12)
    slope = hellmann_feynman_slope(p, mid)
    assert abs((up.e0 - down.e0) / (2 * h) / slope - 1) < 1e-4


def test_parabola_vertex_exact():
    f = lambda x: 3.0 * (x - 0.4) ** 2 + 1.0
    assert parabola_vertex([0.3, 0.4, 0.5], [f(0.3), f(0.4), f(0.5)]) == pytest.approx(0.4, abs=1e-14)
    xs = [0.1, 0.35, 0.9]
    assert parabola_vertex(xs, [f(x) for x in xs]) == pytest.approx(0.4, abs=1e-13)


def test_locate_dip_needs_interior_minimum():
    assert locate_dip([(0, 1.0), (1, 0.0), (2, 1.0)]) == pytest.approx(1.0)
    with pytest.raises(BracketError) as info:
        locate_dip([(0, 0.0), (1, 1.0), (2, 2.0)])
    assert len(info.value.curve) == 3


def test_bracket_failure_reports_curve():
    p = fig2(8)
    grid = np.linspace(0.2, 0.4, 3)
    with pytest.raises(BracketError) as info:
        finite_size_critical(p, grid)
    assert [x for x, _ in info.value.curve] == pytest.approx(list(grid))


def test_grid_validation():
    with pytest.raises(ValueError):
        finite_size_critical(fig2(8), [0.7, 0.6, 0.8])
    with pytest.raises(ValueError):
        finite_size_critical(fig2(8), [0.6, 0.7])


@pytest.mark.xfail(strict=True, reason="the N=16 dip sits about 29% above the thermodynamic value")
def test_sixteen_atom_dip_within_fifteen_percent():
    est, _ = refine_critical(fig2(16), 0.95 * LAMBDA_C, 1.6 * LAMBDA_C)
    assert est == pytest.approx(LAMBDA_C, rel=0.15)


def test_dip_approaches_thermodynamic_value():
    dips, depths = [], []
    for n_atoms in (8, 16, 32):
        est, curve = refine_critical(fig2(n_atoms), 0.95 * LAMBDA_C, 2.2 * LAMBDA_C)
        dips.append(est)
        depths.append(min(y for _, y in curve))
    dist = [abs(d - LAMBDA_C) for d in dips]
    assert dist[0] > dist[1] > dist[2]
    assert all(d > LAMBDA_C for d in dips)
    assert depths[0] > depths[1] > depths[2]


def test_energy_approaches_mean_field():
    p = fig2(8, 2.0)
    errs = []
    for n_atoms in (8, 16, 32):
        q = p.with_(n_atoms=n_atoms)
        errs.append(abs(converge_truncation(q, e_tol=1e-10).e0 / n_atoms - minimize(q).energy_per_atom))
    ratios = [b / a for a, b in zip(errs, errs[1:])]
    assert all(0.3 <= r <= 0.8 for r in ratios)
