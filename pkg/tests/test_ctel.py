import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from telecap.ctel import (
    CtelOptions,
    ctel_fraction,
    ctel_fraction_fixed_basis,
    fourier_unitary,
    hadamard,
    hermitian_generators,
    min_pair_fidelity,
    usefulness_report,
)
from telecap.factory import (
    ExtremalStateSpec,
    extremal_ksep_state,
    ghz,
    isotropic_ghz,
    product_state,
    random_biseparable_pure,
    random_ksep_mixture,
)
from telecap.fef import fef_exact_qubit, fef_general
from telecap.qstate import DensityMatrix, SystemLayout, haar_random_unitary
from telecap.thresholds import threshold_T

FAST = CtelOptions(restarts=3)


def loop_fixed_fraction(rho, pair, unitaries):
    """Outcome-averaged fraction by explicit projectors, one outcome at a time."""
    n, d = rho.layout.n, rho.layout.dims[0]
    measured = [p for p in range(n) if p not in pair]
    total = 0.0
    for outcome in itertools.product(range(d), repeat=len(measured)):
        ops = [np.eye(d)] * n
        for p, u, j in zip(measured, unitaries, outcome):
            ket = u.conj().T[:, j]  # basis vector U^dag |j>
            ops[p] = np.outer(ket, ket.conj())
        proj = ops[0]
        for op in ops[1:]:
            proj = np.kron(proj, op)
        post = proj @ rho.matrix @ proj
        prob = np.trace(post).real
        if prob < 1e-14:
            continue
        t = post.reshape((d,) * (2 * n))
        # Contract measured indices (each carries the same basis vector on both sides).
        letters = "abcdefghijklmnopqrstuvwxyz"
        rows = list(letters[:n])
        cols = list(letters[n : 2 * n])
        for p in measured:
            cols[p] = rows[p]
        out = "".join(rows[p] for p in pair) + "".join(cols[p] for p in pair)
        sigma = np.einsum("".join(rows) + "".join(cols) + "->" + out, t).reshape(d * d, d * d) / prob
        layout = SystemLayout.qudits(2, d)
        sigma = DensityMatrix(layout, (sigma + sigma.conj().T) / 2)
        value = fef_exact_qubit(sigma).value if d == 2 else fef_general(sigma).value
        total += prob * value
    return total


def permute_state(rho, perm):
    n, d = rho.layout.n, rho.layout.dims[0]
    t = rho.matrix.reshape((d,) * (2 * n)).transpose(list(perm) + [n + p for p in perm])
    return DensityMatrix(rho.layout, t.reshape(d**n, d**n))


# --- generators --------------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3, 4])
def test_generators_span_traceless_hermitian(d):
    gens = hermitian_generators(d)
    assert len(gens) == d * d - 1
    flat = np.array([g.reshape(-1) for g in gens])
    np.testing.assert_allclose(flat.conj() @ flat.T, np.eye(len(gens)) * np.vdot(flat[0], flat[0]).real, atol=1e-12)
    for g in gens:
        np.testing.assert_allclose(g, g.conj().T)
        assert abs(np.trace(g)) < 1e-12


def test_fourier_is_hadamard_for_qubits():
    f = fourier_unitary(2)
    assert np.allclose(np.abs(f) ** 2, 0.5)
    np.testing.assert_allclose(f.conj().T @ f, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(np.abs(hadamard()), np.abs(f))


# --- fixed basis --------------------------------------------------------------------------


@pytest.mark.parametrize("n,p", [(3, 0.3), (4, 0.65), (5, 0.9)])
def test_fixed_x_basis_isotropic_ghz(n, p):
    res = ctel_fraction_fixed_basis(isotropic_ghz(n, p), "A1", "A2", [hadamard()] * (n - 2))
    assert abs(res.fraction - (1 + 3 * p) / 4) < 1e-9


def test_fixed_identity_ghz():
    res = ctel_fraction_fixed_basis(ghz(3).density(), 0, 1, [np.eye(2)])
    assert abs(res.fraction - 0.5) < 1e-12
    assert len(res.branch_table.branches) == 2


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 3]))
def test_fixed_basis_matches_loop_oracle(seed, d):
    rng = np.random.default_rng(seed)
    rho = random_state(3, d, rng)
    pair = tuple(sorted(rng.choice(3, 2, replace=False).tolist()))
    us = [haar_random_unitary(d, rng)]
    res = ctel_fraction_fixed_basis(rho, pair[0], pair[1], us)
    assert abs(res.fraction - loop_fixed_fraction(rho, pair, us)) < 1e-7
    assert 1 / d**2 - 1e-12 <= res.fraction <= 1 + 1e-12


def test_fixed_basis_four_qubits_matches_loop_oracle(rng):
    rho = random_state(4, 2, rng, rank=3)
    us = [haar_random_unitary(2, rng) for _ in range(2)]
    res = ctel_fraction_fixed_basis(rho, "A2", "A4", us)
    assert abs(res.fraction - loop_fixed_fraction(rho, (1, 3), us)) < 1e-10


def test_fixed_basis_errors():
    rho = ghz(3).density()
    with pytest.raises(ValueError):
        ctel_fraction_fixed_basis(rho, 0, 1, [np.eye(2), np.eye(2)])
    with pytest.raises(ValueError):
        ctel_fraction_fixed_basis(rho, 0, 0, [np.eye(2)])
    with pytest.raises(ValueError):
        ctel_fraction_fixed_basis(rho, 0, 1, [np.array([[1, 1], [0, 1]])])
    with pytest.raises(ValueError):
        ctel_fraction(DensityMatrix.maximally_mixed(SystemLayout.qudits(2, 2)), 0, 1)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_ghz_perfect_control_x_basis(n):
    rho = ghz(n).density()
    for i, j in itertools.combinations(range(n), 2):
        res = ctel_fraction_fixed_basis(rho, i, j, [hadamard()] * (n - 2))
        assert abs(res.fidelity - 1) < 1e-9


# --- optimiser ------------------------------------------------------------------------------


def test_ghz3_optimiser_finds_equatorial_basis():
    res = ctel_fraction(ghz(3).density(), "A1", "A3")
    assert abs(res.fraction - 1) < 1e-9 and abs(res.fidelity - 1) < 1e-9
    (u,) = res.maximizing_unitaries
    np.testing.assert_allclose(np.abs(u) ** 2, 0.5, atol=1e-6)


@pytest.mark.parametrize("d", [2, 3])
def test_product_state_stays_classical(d):
    res = ctel_fraction(product_state(3, d, seed=4), 0, 2, FAST)
    assert res.fraction <= 1 / d + 1e-6
    assert res.fidelity <= 2 / (d + 1) + 1e-6


def test_theorem2_state_232_pair():
    res = ctel_fraction(extremal_ksep_state(ExtremalStateSpec(2, 3, 2)), 0, 1)
    assert 2 / 3 - 1e-3 <= res.fraction <= 2 / 3 + 1e-6
    assert abs(res.fidelity - 7 / 9) < 1e-3


def test_reported_value_is_attained(rng):
    for n, d in [(3, 2), (4, 2), (3, 3)]:
        rho = random_state(n, d, rng, rank=2)
        res = ctel_fraction(rho, 0, 1, FAST)
        again = ctel_fraction_fixed_basis(rho, 0, 1, res.maximizing_unitaries)
        assert abs(again.fraction - res.fraction) < 1e-9
        assert abs(res.fidelity - (d * res.fraction + 1) / (d + 1)) < 1e-12


def test_optimiser_dominates_random_bases(rng):
    for n, d in [(3, 2), (4, 2), (3, 3)]:
        rho = random_state(n, d, rng, rank=2)
        best = ctel_fraction(rho, 0, 2, FAST).fraction
        for _ in range(10):
            us = [haar_random_unitary(d, rng) for _ in range(n - 2)]
            assert ctel_fraction_fixed_basis(rho, 0, 2, us).fraction <= best + 1e-9
        for u in (np.eye(d), fourier_unitary(d)):
            assert ctel_fraction_fixed_basis(rho, 0, 2, [u] * (n - 2)).fraction <= best + 1e-9


def test_pure_and_mixed_paths_agree(rng):
    """A rank-one state given as a density matrix must give the same value as via its ket."""
    ket = random_biseparable_pure(3, 2, seed=3)
    mixed = DensityMatrix(ket.layout, ket.density().matrix * (1 - 1e-9) + 1e-9 * np.eye(8) / 8)
    a = ctel_fraction(ket, 0, 1, FAST).fraction
    b = ctel_fraction(mixed, 0, 1, FAST).fraction
    assert abs(a - b) < 1e-6


def test_optimiser_deterministic(rng):
    rho = random_state(3, 2, rng)
    a = ctel_fraction(rho, 0, 1, CtelOptions(restarts=2, seed=3))
    b = ctel_fraction(rho, 0, 1, CtelOptions(restarts=2, seed=3))
    assert a.fraction == b.fraction


def test_pair_order_is_irrelevant(rng):
    rho = random_state(3, 2, rng)
    assert abs(ctel_fraction(rho, 0, 2, FAST).fraction - ctel_fraction(rho, 2, 0, FAST).fraction) < 1e-9


# --- min over pairs ---------------------------------------------------------------------------


@pytest.mark.parametrize("p", [0.2, 0.6])
def test_min_pair_isotropic_ghz(p):
    value, pair, results = min_pair_fidelity(isotropic_ghz(4, p), FAST)
    assert abs(value - (1 + p) / 2) < 1e-6
    assert len(results) == 6 and all(abs(r.fidelity - (1 + p) / 2) < 1e-6 for r in results.values())
    assert pair == ("A1", "A2")


@pytest.mark.parametrize("spec", [(2, 3, 2), (2, 4, 3), (3, 3, 3)])
def test_min_pair_extremal_states(spec):
    value, _, _ = min_pair_fidelity(extremal_ksep_state(ExtremalStateSpec(*spec)))
    t = float(threshold_T(*spec))
    assert t - 1e-3 <= value <= t + 1e-6


@pytest.mark.parametrize("d,n,seed", [(2, 3, 0), (2, 4, 1), (3, 3, 2)])
def test_min_pair_biseparable_pure(d, n, seed):
    value, _, _ = min_pair_fidelity(random_biseparable_pure(n, d, seed=seed), FAST)
    assert abs(value - 2 / (d + 1)) < 1e-6


def test_permutation_equivariance(rng):
    rho = random_ksep_mixture(4, 2, 2, 2, seed=rng)
    perm = (2, 0, 3, 1)
    base_val, _, base = min_pair_fidelity(rho)
    moved_val, _, moved = min_pair_fidelity(permute_state(rho, perm))
    assert abs(base_val - moved_val) < 1e-9
    for (a, b), res in moved.items():
        i, j = int(a[1:]) - 1, int(b[1:]) - 1
        src = tuple(sorted((perm[i], perm[j])))
        assert abs(res.fidelity - base[(f"A{src[0] + 1}", f"A{src[1] + 1}")].fidelity) < 1e-9


@pytest.mark.parametrize("n,k,seed", [(3, 2, 0), (3, 3, 1), (4, 2, 2), (4, 3, 3)])
def test_theorem1_bound_on_random_mixtures(n, k, seed):
    value, _, _ = min_pair_fidelity(random_ksep_mixture(n, k, 2, 3, seed=seed), FAST)
    assert value <= float(threshold_T(2, n, k)) + 1e-6


# --- usefulness report -------------------------------------------------------------------------


def test_usefulness_strong_isotropic():
    rep = usefulness_report(isotropic_ghz(3, 0.9), FAST)
    assert abs(rep.min_fidelity - 0.95) < 1e-6
    assert rep.verdicts == {2: True, 3: True}
    assert rep.smallest_certified_k == 2 and rep.largest_certified_k == 3 and rep.beats_classical


def test_usefulness_weak_isotropic():
    rep = usefulness_report(isotropic_ghz(3, 0.2), FAST)
    assert abs(rep.min_fidelity - 0.6) < 1e-6
    assert not any(rep.verdicts.values()) and rep.largest_certified_k is None and not rep.beats_classical


def test_usefulness_product_state():
    rep = usefulness_report(product_state(4, 2, seed=0), FAST)
    assert not any(rep.verdicts.values())
    assert rep.thresholds[4] == threshold_T(2, 4, 4)


def test_usefulness_extremal_not_certified_at_own_k():
    # The extremal state sits exactly at T(2,4,2): the margin keeps the verdict negative.
    rep = usefulness_report(extremal_ksep_state(ExtremalStateSpec(2, 4, 2)))
    assert not rep.verdicts[2] and rep.verdicts[3] and rep.verdicts[4]
