import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import nair_two_level, random_instance, random_split, two_grid_hierarchy
from nair import diagnostics as diag
from nair.hierarchy import setup
from nair.problems import TransportSpec, gen_chain, gen_near_triangular, gen_random_triangular, gen_transport
from nair.solvers import solve
from nair.sparse import as_csr
from nair.transfer import NeumannOptions, blocks, build_nair_restriction, ideal_operators, transfer_from_blocks


def _ideal_transfer(A, split, with_W=True, with_Z=True):
    R, P, _ = ideal_operators(A, split)
    Z = R[:, split.f_points] if with_Z else None
    W = P[split.f_points, :] if with_W else None
    return transfer_from_blocks(split, Z, W)


def _richest_level(h):
    return max(h.levels, key=lambda L: L.A_ff.nnz - L.split.n_f)


def _spectral_radius(M):
    return float(np.abs(np.linalg.eigvals(M)).max()) if M.size else 0.0


# ---- delta constants -------------------------------------------------------

def test_exact_inverse_gives_zero_delta_F():
    A = random_instance(2, n=60).A
    A_s, split, tr = nair_two_level(A)
    A_ff = blocks(A_s, split)[0].toarray()
    rep = diag.delta_constants(A_s, split, tr, 1, Delta_F=np.linalg.inv(A_ff))
    assert rep.delta_F_norm <= 1e-12 and rep.delta_F_hat_norm <= 1e-12


def test_ideal_interpolation_gives_zero_delta_P():
    A = random_instance(3, n=70).A
    A_s, split, _ = nair_two_level(A)
    rep = diag.delta_constants(A_s, split, _ideal_transfer(A_s, split), 2)
    assert rep.delta_P_norm <= 1e-12 and rep.delta_R_norm <= 1e-12


def test_delta_R_decreases_with_k_on_transport32():
    h = setup(gen_transport(TransportSpec(2, 32)).A)
    L = _richest_level(h)
    norms = []
    for k in range(4):
        Z, _, _ = build_nair_restriction(L.A_scaled, L.split, NeumannOptions(k, 0.0))
        tr = transfer_from_blocks(L.split, Z, L.transfer.W)
        norms.append(diag.delta_constants(L.A_scaled, L.split, tr, k + 1).delta_R_norm)
    assert all(b < a for a, b in zip(norms, norms[1:])), norms


def test_power_mode_matches_dense():
    A = random_instance(5, n=80).A
    A_s, split, tr = nair_two_level(A, k=2)
    d = diag.delta_constants(A_s, split, tr, 3, mode="dense")
    p = diag.delta_constants(A_s, split, tr, 3, mode="power")
    rel = 1e-6 if p.mode == "power" else 1e-2
    for name in ("delta_F_norm", "delta_R_norm", "delta_P_norm", "delta_F_hat_norm"):
        assert getattr(p, name) == pytest.approx(getattr(d, name), rel=rel, abs=1e-12)
        assert getattr(p, name) <= getattr(d, name) * (1 + 1e-12) + 1e-15


def test_outer_product_detects_wrong_factor(monkeypatch):
    A_s, split, tr = nair_two_level(random_instance(4, n=50).A)
    good = diag._Pieces.G
    monkeypatch.setattr(diag._Pieces, "G", lambda self: good(self) * (1 + 1e-6) + 1e-6)
    assert diag.verify_outer_product(A_s, split, tr, 2, 3) > 1e-8


@given(st.integers(0, 10_000), st.integers(0, 5))
def test_relaxation_delta_F_is_power_of_N(seed, s):
    A = gen_random_triangular(40, density=0.4, seed=seed).A
    rng = np.random.default_rng(seed)
    split = random_split(40, rng)
    tr = transfer_from_blocks(split)
    p = diag._Pieces(A, split, tr, s)
    N = np.eye(split.n_f) - p.A_ff
    assert np.abs(p.dF - np.linalg.matrix_power(N, s)).max() <= 1e-12


# ---- G factorization -------------------------------------------------------

def test_ideal_restriction_gives_G_equal_delta_F():
    A = random_instance(7, n=60).A
    A_s, split, tr = nair_two_level(A)
    ideal = _ideal_transfer(A_s, split, with_W=False)
    ideal = transfer_from_blocks(split, ideal.Z, tr.W)
    G, _ = diag.g_matrix(A_s, split, ideal, 2)
    p = diag._Pieces(A_s, split, ideal, 2)
    assert np.abs(G - p.dF).max() <= 1e-12


def test_exact_F_solve_and_ideal_R_give_zero_G():
    A = random_instance(8, n=60).A
    A_s, split, tr = nair_two_level(A)
    ideal = transfer_from_blocks(split, _ideal_transfer(A_s, split).Z, tr.W)
    inv = np.linalg.inv(blocks(A_s, split)[0].toarray())
    for mode in ("post", "pre"):
        G, nrm = diag.g_matrix(A_s, split, ideal, 1, mode=mode, Delta_F=inv)
        assert nrm <= 1e-12


def test_g_matrix_rejects_bad_mode():
    A_s, split, tr = nair_two_level(random_instance(1, n=30).A)
    with pytest.raises(ValueError):
        diag.g_matrix(A_s, split, tr, 1, mode="mid")


def test_G_powers_predict_error_powers_random60():
    A = gen_random_triangular(60, seed=11).A
    A_s, split, tr = nair_two_level(A)
    G, g_norm = diag.g_matrix(A_s, split, tr, 2)
    E = diag.two_grid_error(A_s, split, tr, 2)
    # the F-block of E^k is governed by G^(k-1); spectral radii coincide
    assert _spectral_radius(E) == pytest.approx(_spectral_radius(G), abs=1e-10)
    assert g_norm >= 0


def test_two_grid_report_bounds_dominate():
    A = gen_near_triangular(TransportSpec(2, 12)).A
    A_s, split, tr = nair_two_level(A)
    rep = diag.two_grid_report(A_s, split, tr, 2)
    assert rep.g_norm <= rep.bound_rho + 1e-12
    assert rep.g_pre_norm <= rep.bound_rho_pre + 1e-12


# ---- outer product and Schur identities -------------------------------------

def test_outer_product_k1():
    A_s, split, tr = nair_two_level(random_instance(4, n=50).A)
    assert diag.verify_outer_product(A_s, split, tr, 2, 1) <= 1e-12


def test_outer_product_k4_random50():
    A_s, split, tr = nair_two_level(gen_random_triangular(50, seed=9).A, k=2)
    assert diag.verify_outer_product(A_s, split, tr, 3, 4) <= 1e-10


def test_outer_product_ideal_R_kills_C_rows():
    A_s, split, tr = nair_two_level(random_instance(6, n=50).A)
    ideal = transfer_from_blocks(split, _ideal_transfer(A_s, split).Z, tr.W)
    assert diag.verify_outer_product(A_s, split, ideal, 2, 3) <= 1e-12
    E = diag.two_grid_error(A_s, split, ideal, 2)
    assert np.abs(E[split.c_points]).max() <= 1e-12


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_outer_product_property(seed, k):
    A_s, split, tr = nair_two_level(random_instance(seed).A, k=k)
    assert diag.verify_outer_product(A_s, split, tr, k + 1, 4) <= 1e-10


def test_schur_identity_examples():
    A_s, split, tr = nair_two_level(gen_random_triangular(80, seed=12).A)
    assert diag.verify_schur_identity(A_s, split, tr) <= 1e-11
    ideal = _ideal_transfer(A_s, split)
    assert diag.verify_schur_identity(A_s, split, transfer_from_blocks(split, ideal.Z, tr.W)) <= 1e-12
    assert diag.verify_schur_identity(A_s, split, transfer_from_blocks(split, tr.Z, ideal.W)) <= 1e-12


def test_size_caps():
    A = gen_random_triangular(600, density=0.01, seed=1).A
    A_s, split, tr = nair_two_level(A)
    with pytest.raises(ValueError):
        diag.verify_outer_product(A_s, split, tr, 2, 1)


# ---- multilevel G_hat --------------------------------------------------------

def test_exact_coarse_solve_gives_zero_gamma():
    h = two_grid_hierarchy(gen_near_triangular(TransportSpec(2, 10)).A)
    rep, G_hat = diag.multilevel_g(h, return_matrix=True)
    assert rep.gamma <= 1e-12
    assert rep.g_hat_norm == pytest.approx(rep.g_norm, rel=1e-8)


def test_ideal_two_grid_reduces_to_gamma_check():
    # rho_TG = 0 turns the sufficient condition into gamma < 1/sqrt(2)
    h = two_grid_hierarchy(gen_chain(50).A)
    rep = diag.multilevel_g(h)
    if rep.rho_tg == 0.0:
        assert rep.gamma_bound == pytest.approx(1 / np.sqrt(2))


def test_chain_three_level_G_hat_contracts():
    h = setup(gen_chain(200).A, max_levels=3, max_coarse=1, filter_tol=0.0)
    assert h.num_levels == 3
    rep = diag.multilevel_g(h)
    assert rep.g_hat_norm < 1


@pytest.mark.parametrize("maker", [
    lambda: gen_near_triangular(TransportSpec(2, 16), 0.05).A,
    lambda: gen_random_triangular(150, density=0.2, seed=4).A,
])
def test_G_hat_spectrum_matches_probed_cycle(maker):
    h = setup(maker(), max_coarse=10, filter_tol=0.0)
    _, G_hat = diag.multilevel_g(h, return_matrix=True)
    E = diag.probe_cycle(h)
    assert _spectral_radius(G_hat) == pytest.approx(_spectral_radius(E), rel=1e-6, abs=1e-10)


def test_multilevel_g_needs_coarse_level():
    h = setup(gen_random_triangular(20).A)
    with pytest.raises(ValueError):
        diag.multilevel_g(h)


# ---- nilpotency ---------------------------------------------------------------

def test_chain_two_level_strictly_triangular():
    A = gen_chain(120).A
    h = two_grid_hierarchy(A)
    rep = diag.nilpotency_check(A, h)
    assert rep.is_strictly_triangular_in_order and rep.max_upper <= 1e-12


def test_identity_gives_zero_error():
    A = as_csr(np.eye(30))
    rep = diag.nilpotency_check(A, setup(A))
    assert rep.max_upper == 0.0 and rep.E_power_norm == 0.0


def test_transport16_multilevel_nilpotent():
    A = gen_transport(TransportSpec(2, 16)).A
    rep = diag.nilpotency_check(A, setup(A, max_coarse=10))
    assert rep.E_power_norm <= 1e-10
    assert rep.spectral_radius_estimate <= 1e-6


def test_nilpotency_rejects_cyclic():
    A = gen_near_triangular(TransportSpec(2, 8)).A
    with pytest.raises(Exception):
        diag.nilpotency_check(A, setup(A))


# ---- bound realization and C-relaxation ---------------------------------------

@pytest.mark.parametrize("eps", [0.02, 0.1])
def test_measured_rate_within_G_norm(eps):
    A = gen_near_triangular(TransportSpec(2, 16), eps).A
    h = two_grid_hierarchy(A)
    L = h.levels[0]
    _, g_norm = diag.g_matrix(L.A_scaled, L.split, L.transfer, h.options.sweeps)
    assert g_norm < 1
    _, rep = solve(h, np.ones(A.shape[0]), tol=1e-13)
    assert rep.rho <= g_norm + 0.05


@given(st.integers(0, 10_000))
def test_c_relaxation_is_a_no_op(seed):
    A = random_instance(seed, n=int(np.random.default_rng(seed).integers(20, 100))).A
    h = two_grid_hierarchy(A, restrict_strength=0.0, enable_c_relax=True)
    if not h.levels:
        return
    E = diag.probe_cycle(h, c_relax_on=False)
    EC = diag.probe_cycle(h, c_relax_on=True)
    assert np.abs(EC - E).max() <= 1e-12
