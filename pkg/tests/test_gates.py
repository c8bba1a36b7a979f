import dataclasses
import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from oracles import pauli_fidelity
from qdcavity import hilbert as hb
from qdcavity.gates import (
    FockState,
    GateRunConfig,
    ThermalState,
    average_gate_fidelity,
    basis_rotation,
    gate_fidelity,
    ideal_cz,
    kappa_from_lifetime,
    local_z_correction,
    not_gate_time,
    run_cz,
    run_parallel,
    single_qubit_report,
    single_qubit_rot,
    thermal_channel_fidelity,
)
from qdcavity.params import HBAR_MEV_PS, ModelParams, coupling_a, coupling_b
from qdcavity.propagation import analytic_evolution

# frozen: pi / 0.4 natural units converted with hbar = 0.6582119569 meV ps
NOT_TIME_PS = 5.169584620755004


def z_phase(phi):
    return np.diag([1, np.exp(1j * phi)])


def test_ideal_gate_properties():
    for basis in ("pm", "updown"):
        u = ideal_cz(basis)
        assert hb.is_unitary(u) and hb.is_hermitian(u)
        assert np.allclose(u @ u, np.eye(4))


def test_ideal_gate_in_up_down_basis():
    W = np.kron(basis_rotation(), basis_rotation())
    assert np.allclose(ideal_cz("updown"), W @ np.diag([-1, 1, 1, 1]) @ W.conj().T)
    assert np.allclose(ideal_cz("pm"), np.diag([-1, 1, 1, 1]))


def test_fidelity_of_identical_gates_is_one():
    u = ideal_cz()
    for mode in ("strict", "global_phase", "local_z"):
        assert gate_fidelity(u, u, mode) == pytest.approx(1.0, abs=1e-12)
        assert gate_fidelity(np.exp(0.7j) * u, u, mode) == pytest.approx(1.0, abs=1e-12)


def test_local_z_mode_removes_single_qubit_phase():
    u = ideal_cz()
    bent = np.kron(z_phase(0.3), np.eye(2)) @ u
    assert gate_fidelity(bent, u, "global_phase") < 0.99
    assert gate_fidelity(bent, u, "local_z") == pytest.approx(1.0, abs=1e-6)
    _, phases = local_z_correction(bent, u)
    assert math.remainder(phases[0] + 0.3, 2 * math.pi) == pytest.approx(0.0, abs=1e-4)


def test_average_fidelity_agrees_with_pauli_oracle():
    rng = np.random.default_rng(3)
    for _ in range(5):
        u = unitary_group.rvs(4, random_state=rng)
        v = unitary_group.rvs(4, random_state=rng)
        assert average_gate_fidelity(u, v) == pytest.approx(pauli_fidelity(u, v), abs=1e-12)


def test_fidelity_counts_leakage():
    # half the amplitude lost from one column
    u = np.diag([math.sqrt(0.5), 1, 1, 1]).astype(complex)
    assert gate_fidelity(u, np.eye(4), "strict") < 1.0


def test_fidelity_dimension_mismatch():
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(2), np.eye(4))
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(4), np.eye(4), "loose")


def test_not_gate_time_at_published_rabi_frequencies():
    p = ModelParams(1, 1.0, 1.0, 1.0, 0.5, 10.0, 5.0, 0.05)
    assert not_gate_time(p) == pytest.approx(math.pi / 0.4, rel=1e-15)
    rep = single_qubit_report(p)
    assert rep.not_time_ps == pytest.approx(NOT_TIME_PS, rel=1e-12)
    assert np.allclose(rep.not_unitary, [[0, -1j], [-1j, 0]], atol=1e-12)


def test_single_qubit_rotation_limits():
    p = ModelParams(1, 1.0, 1.0, 1.0, 0.5, 10.0, 5.0, 0.05)
    s = hb.make_space(1, 2, 2)
    assert np.allclose(single_qubit_rot(p, 0, 0.0, s), np.eye(6))
    t = not_gate_time(p)
    two = single_qubit_rot(p, 0, t, s) @ single_qubit_rot(p, 0, t, s)
    assert np.allclose(two, -np.eye(6), atol=1e-12)


def test_closed_loop_phases_follow_couplings():
    # any A and B; only the loop must close
    p = ModelParams(2, 1.3, 0.9, 0.7, 1.1, 12.0, 5.0, 0.11, photon_cutoff=4)
    d = p.delta[0]
    t = 2 * math.pi / d
    A = coupling_a(p.g, p.omega2, p.delta1, d)
    B = coupling_b(p.omega1, p.omega3, p.delta2)
    s = hb.make_space(2, 2, 4, "pm")
    U = analytic_evolution(p, (0, 1), t, True, s)
    phases = [U[hb.basis_index(s, c, 0), hb.basis_index(s, c, 0)] for c in
              [(0, 0), (0, 1), (1, 0), (1, 1)]]
    expected = [-(B + A**2 / (4 * d)) * t, 0.0, 0.0, -(A**2 / (4 * d) - B) * t]
    for z, e in zip(phases, expected):
        assert abs(z - np.exp(1j * e)) <= 1e-9


def test_analytic_gate_is_controlled_phase(reference_schedule):
    r = run_cz(reference_schedule, "analytic")
    assert np.allclose(r.truth_table_phases, [-1, 1, 1, 1], atol=1e-9)
    assert r.avg_fidelity == pytest.approx(1.0, abs=1e-12)
    assert r.leakage == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(r.updown_unitary(), ideal_cz("updown"), atol=1e-9)


def test_analytic_gate_same_with_three_photons(reference_schedule):
    r0 = run_cz(reference_schedule, "analytic", FockState(0))
    r3 = run_cz(reference_schedule, "analytic", FockState(3))
    assert np.abs(r0.sector_unitaries[0] - r3.sector_unitaries[3]).max() <= 1e-9
    assert abs(r0.avg_fidelity - r3.avg_fidelity) <= 1e-9


def test_numerical_effective_gate_matches_analytic(reference_schedule):
    a = run_cz(reference_schedule, "analytic").sector_unitaries[0]
    e = run_cz(reference_schedule, "effective_numeric").sector_unitaries[0]
    assert average_gate_fidelity(e, a) >= 1 - 1e-8


def test_thermal_fidelity_two_routes_agree(reference_schedule):
    cfg = GateRunConfig(fidelity_mode="global_phase")
    r = run_cz(reference_schedule, "analytic", ThermalState(0.8), cfg)
    assert thermal_channel_fidelity(reference_schedule, 0.8, cfg) == pytest.approx(r.avg_fidelity,
                                                                            abs=1e-9)


def test_thermal_route_sees_an_open_loop(reference_schedule):
    # stopping the gate early leaves the field displaced, so a thermal field hurts
    early = dataclasses.replace(reference_schedule, t_gate_natural=0.8 * reference_schedule.t_gate_natural)
    assert thermal_channel_fidelity(early, 1.0) < thermal_channel_fidelity(early, 0.0) - 1e-3


def test_run_cz_rejects_bad_inputs(reference_schedule):
    with pytest.raises(ValueError):
        run_cz(reference_schedule, "quantum")
    with pytest.raises(ValueError):
        run_cz(reference_schedule, "analytic", FockState(7))
    with pytest.raises(ValueError):
        GateRunConfig(fidelity_mode="approximate")


def test_parallel_pairs_must_be_disjoint(reference_schedule):
    p4 = reference_schedule.params.replace(n_dots=4)
    with pytest.raises(ValueError, match="overlap"):
        run_parallel(p4, (0, 1), (1, 2))
    with pytest.raises(ValueError):
        run_parallel(reference_schedule.params, (0, 1), (2, 3))


def test_cavity_loss_from_lifetime():
    assert kappa_from_lifetime(10.0) == pytest.approx(HBAR_MEV_PS / 10.0)
    with pytest.raises(ValueError):
        kappa_from_lifetime(0.0)
