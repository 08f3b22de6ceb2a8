"""Tomography: linear-inversion exactness, MLE physicality, equivariance,
and the Born-level sampling pipeline."""

import numpy as np
import pytest

from tbsim import tomo
from tbsim.optics import TimebinStateModel, ideal_timebin_density
from tbsim.qcore import concurrence, fidelity_to_state

from test_qcore import random_physical_rho


def test_sixteen_settings_product_order():
    settings = tomo.tomography_settings()
    assert len(settings) == 16
    labels = [(s.xx_projector, s.x_projector) for s in settings]
    assert len(set(labels)) == 16
    assert labels[0] == ("E", "E") and labels[-1] == ("Pi", "Pi")
    for s in settings:
        op = s.operator()
        assert np.allclose(op, op.conj().T)
        assert np.allclose(op @ op, op, atol=1e-12)  # rank-1 projector
        assert np.trace(op).real == pytest.approx(1.0)


def test_completeness_of_basis_pairs():
    # E + L projectors sum to identity on each qubit
    by = {(s.xx_projector, s.x_projector): s.operator()
          for s in tomo.tomography_settings()}
    total = sum(by[(a, b)] for a in ("E", "L") for b in ("E", "L"))
    assert np.allclose(total, np.eye(4), atol=1e-12)


def test_expected_probability_against_manual_trace():
    rho = random_physical_rho(0)
    for s in tomo.tomography_settings():
        ket = s.ket()
        want = np.real(ket.conj() @ rho @ ket)
        assert tomo.expected_probability(rho, s) == pytest.approx(want, abs=1e-12)


def test_exposure_weights():
    w = tomo.slot_exposure_weights()
    assert w.shape == (16,)
    assert set(np.round(w, 10)) == {1 / 16, 1 / 8, 1 / 4}
    # E/E has both photons in quarter-weight slots
    assert w[0] == pytest.approx(1 / 16)
    # Pi/Pi has both photons in half-weight middle slots
    assert w[-1] == pytest.approx(1 / 4)


# --- linear inversion ----------------------------------------------------------

def test_linear_inversion_exact_on_noise_free_probabilities():
    scale = 1e12
    worst = 0.0
    for seed in range(100):
        rho = random_physical_rho(seed)
        counts = np.array([
            round(scale * tomo.expected_probability(rho, s))
            for s in tomo.tomography_settings()], dtype=np.int64)
        table = tomo.CountsTable(counts=counts, exposures=np.full(16, scale))
        rec = tomo.linear_reconstruct(table)
        worst = max(worst, float(np.max(np.abs(rec - rho))))
    assert worst < 1e-9


def test_linear_inversion_respects_exposures():
    rho = ideal_timebin_density(TimebinStateModel(visibility=0.6)).matrix
    scale = 1e10
    w = tomo.slot_exposure_weights()
    counts = np.array([
        round(scale * w[k] * tomo.expected_probability(rho, s))
        for k, s in enumerate(tomo.tomography_settings())], dtype=np.int64)
    table = tomo.CountsTable(counts=counts, exposures=w * scale)
    assert np.max(np.abs(tomo.linear_reconstruct(table) - rho)) < 1e-8


def test_project_to_physical():
    m = np.diag([0.8, 0.4, -0.1, -0.1]).astype(complex)
    p = tomo.project_to_physical(m)
    vals = np.linalg.eigvalsh(p)
    assert vals.min() >= -1e-15
    assert np.trace(p).real == pytest.approx(1.0)


# --- MLE -------------------------------------------------------------------------

def test_mle_outputs_physical_and_near_truth():
    for seed in range(5):
        rho = random_physical_rho(seed + 50)
        table = tomo.simulate_counts(rho, 2_000_000, 1.0, seed=seed)
        res = tomo.mle_reconstruct(table)
        m = res.rho.matrix  # DensityMatrix enforces the invariants
        assert np.trace(m).real == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.eigvalsh(m).min() >= -1e-9
        assert np.max(np.abs(m - rho)) < 0.01


def test_mle_beats_or_matches_truth_likelihood():
    rho = random_physical_rho(123)
    table = tomo.simulate_counts(rho, 100000, 1.0, seed=3)
    res = tomo.mle_reconstruct(table)
    assert res.log_likelihood >= tomo.poisson_log_likelihood(table, rho) - 1e-6


def test_mle_equivariant_under_basis_relabeling():
    # swapping early/late labels on both photons maps the counts by the
    # setting permutation and the state by (X x X) rho* (X x X)
    rho = ideal_timebin_density(TimebinStateModel(visibility=0.7, pump_phase=0.4))
    table = tomo.simulate_counts(rho, 500000, 1.0, seed=8)
    labels = ["E", "L", "P", "Pi"]
    swap = {"E": "L", "L": "E", "P": "P", "Pi": "Pi"}
    perm = [4 * labels.index(swap[a]) + labels.index(swap[b])
            for a in labels for b in labels]
    permuted = tomo.CountsTable(counts=table.counts[perm],
                                acquisition_cycles=table.acquisition_cycles)
    x = np.array([[0, 1], [1, 0]])
    xx = np.kron(x, x)
    lin_a = tomo.linear_reconstruct(table)
    lin_b = tomo.linear_reconstruct(permuted)
    assert np.max(np.abs(lin_b - xx @ lin_a.conj() @ xx)) < 1e-12
    rho_a = tomo.mle_reconstruct(table).rho.matrix
    rho_b = tomo.mle_reconstruct(permuted).rho.matrix
    # MLE is equivariant up to optimizer convergence tolerance
    assert np.max(np.abs(rho_b - xx @ rho_a.conj() @ xx)) < 2e-3


# --- counts sampling and IO -------------------------------------------------------

def test_simulate_counts_deterministic_and_unbiased():
    rho = ideal_timebin_density(TimebinStateModel(visibility=0.7))
    a = tomo.simulate_counts(rho, 100000, 0.25, seed=5)
    b = tomo.simulate_counts(rho, 100000, 0.25, seed=5)
    assert np.array_equal(a.counts, b.counts)
    for k, s in enumerate(tomo.tomography_settings()):
        mean = 100000 * 0.25 * tomo.expected_probability(rho, s)
        assert abs(a.counts[k] - mean) < 5 * np.sqrt(mean + 1)


def test_counts_csv_roundtrip():
    rho = ideal_timebin_density(TimebinStateModel())
    table = tomo.simulate_counts(rho, 10000, 1.0, seed=2)
    again = tomo.CountsTable.from_csv(table.to_csv())
    assert np.array_equal(table.counts, again.counts)


def test_counts_csv_rejects_malformed():
    with pytest.raises(ValueError, match="row"):
        tomo.CountsTable.from_csv("xx_proj,x_proj,count\nE,E\n")
    with pytest.raises(ValueError, match="missing"):
        tomo.CountsTable.from_csv("xx_proj,x_proj,count\nE,E,5\n")


# --- full pipeline ------------------------------------------------------------------

def test_reconstruct_reports_errors_and_phase_fidelity():
    rho = ideal_timebin_density(TimebinStateModel(visibility=0.7, pump_phase=0.5))
    table = tomo.simulate_counts(rho, 4000, 1.0, seed=10)
    res = tomo.reconstruct(table, mc_runs=15, seed=1)
    assert res.converged
    assert 0.0 < res.concurrence_err < 0.2
    assert 0.0 < res.fidelity_err < 0.2
    # the pump phase rotates the coherence away from the fixed Bell state
    assert res.fidelity_phase_optimized >= res.fidelity
    assert res.fidelity_phase_optimized == pytest.approx(0.85, abs=0.04)


def test_event_level_tomography_closure():
    from tbsim.cascade import EmitterParams
    from tbsim.optics import DetectorModel
    em = EmitterParams(tau_xx=100.0, tau_x=150.0)
    table = tomo.simulate_tomography_via_events(
        em, TimebinStateModel(visibility=1.0), DetectorModel.ideal(),
        cycles_per_setting=60000, seed=4)
    res = tomo.mle_reconstruct(table)
    assert concurrence(res.rho) == pytest.approx(1.0, abs=0.05)
    assert fidelity_to_state(res.rho, tomo.BELL_PHI_PLUS) == pytest.approx(
        1.0, abs=0.03)
