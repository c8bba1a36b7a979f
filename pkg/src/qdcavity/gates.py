"""Running and scoring the gates.

The controlled-phase gate is read out per photon sector: the register
starts in one of the four computational states times a Fock state ``|n>``,
and the 4x4 block that returns to ``|n>`` is compared with the ideal gate.
All two-qubit matrices are reported in the +/- basis with ordering
``(++, +-, -+, --)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import hilbert as hb
from .hamiltonians import (
    build_single_qubit,
    effective_pm_hamiltonian,
    effective_sz_hamiltonian,
    interaction_hamiltonian,
)
from .params import DOWN, HBAR_MEV_PS, UP, VALENCE, ModelParams, convert_time, coupling_b
from .propagation import (
    ConvergenceError,
    analytic_evolution,
    evolve_lindblad_blocks,
    evolve_td,
    expm_hermitian,
    steps_per_period,
)
from .schedule import GateSchedule

MODEL_LEVELS = ("analytic", "effective_numeric", "effective_pm", "full_numeric")
FIDELITY_MODES = ("strict", "global_phase", "local_z")


def basis_rotation(angle=math.pi / 4):
    """Single-dot rotation ``[[cos, -sin], [sin, cos]]``.

    At ``pi/4`` its columns are ``|+>`` and ``-|->`` in the up/down basis.
    """
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=complex)


def ideal_cz(basis="pm"):
    """``diag(-1, 1, 1, 1)`` in the +/- basis, or the same gate in up/down coordinates."""
    cz = np.diag([-1.0, 1.0, 1.0, 1.0]).astype(complex)
    if basis == "pm":
        return cz
    if basis == "updown":
        r = np.kron(basis_rotation(), basis_rotation())
        return r @ cz @ r.conj().T
    raise ValueError(f"unknown basis {basis!r}")


def pm_to_updown(u):
    """Rewrite an n-dot operator given in the +/- basis in up/down coordinates."""
    n = int(round(math.log2(u.shape[0])))
    w = np.ones((1, 1))
    for _ in range(n):
        w = np.kron(w, hb.PM_ROTATION)
    return w @ u @ w.conj().T


def updown_to_pm(u):
    n = int(round(math.log2(u.shape[0])))
    w = np.ones((1, 1))
    for _ in range(n):
        w = np.kron(w, hb.PM_ROTATION)
    return w.conj().T @ u @ w


def average_gate_fidelity(u_real, u_ideal):
    """``(|Tr M|^2 + Tr M M^dagger) / (d (d + 1))`` with ``M = U_ideal^dagger U_real``.

    ``u_real`` may be a sub-unitary block (population lost from the block
    counts as error). The value is invariant under a global phase of
    ``u_real``.
    """
    u_real, u_ideal = np.asarray(u_real), np.asarray(u_ideal)
    if u_real.shape != u_ideal.shape or u_real.shape[0] != u_real.shape[1]:
        raise ValueError(f"dimension mismatch: {u_real.shape} vs {u_ideal.shape}")
    d = u_real.shape[0]
    m = u_ideal.conj().T @ u_real
    f = (abs(np.trace(m)) ** 2 + np.trace(m @ m.conj().T).real) / (d * (d + 1))
    # a unitary can land a few ulps above one
    return float(min(f, 1.0))


def _z_layer(phases):
    z = np.ones(1, dtype=complex)
    for phi in phases:
        z = np.kron(z, np.array([1.0, np.exp(1j * phi)]))
    return z


def local_z_correction(u_real, u_ideal, grid=12):
    """Best per-qubit ``diag(1, e^{i phi})`` correction applied after the gate.

    Returns
    -------
    fidelity : float
    phases : tuple of float
        The maximising phases, wrapped to ``(-pi, pi]``.
    """
    u_real, u_ideal = np.asarray(u_real), np.asarray(u_ideal)
    d = u_real.shape[0]
    nq = int(round(math.log2(d)))
    if 2**nq != d:
        raise ValueError("local_z needs a qubit register")
    # Tr(U_i^dagger Z U) = sum_s z_s c_s, and Tr(M M^dagger) does not depend on Z
    c = np.einsum("ij,ji->i", u_real, u_ideal.conj().T)
    rest = np.trace(u_real @ u_real.conj().T).real

    def neg(phases):
        return -(abs(np.dot(_z_layer(phases), c)) ** 2 + rest) / (d * (d + 1))

    axis = np.linspace(-math.pi, math.pi, grid, endpoint=False)
    starts = sorted(
        (neg(p), p) for p in itertools.product(axis, repeat=nq)
    )[:3]
    best = min(
        (minimize(neg, np.array(p), method="Nelder-Mead",
                  options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
         for _, p in starts),
        key=lambda r: r.fun,
    )
    phases = tuple(float(math.remainder(p, 2 * math.pi)) for p in best.x)
    return float(min(-best.fun, 1.0)), phases


def gate_fidelity(u_real, u_ideal, mode="local_z"):
    """Average gate fidelity under one of three comparison modes.

    ``strict`` and ``global_phase`` both use :func:`average_gate_fidelity`
    unchanged, which already ignores a global phase. ``local_z`` first
    applies the best per-qubit phase correction.
    """
    if mode not in FIDELITY_MODES:
        raise ValueError(f"unknown fidelity mode {mode!r}")
    if mode == "local_z":
        return local_z_correction(u_real, u_ideal)[0]
    return average_gate_fidelity(u_real, u_ideal)


@dataclass(frozen=True)
class FockState:
    n: int = 0


@dataclass(frozen=True)
class ThermalState:
    mean_photon: float = 1.0


@dataclass(frozen=True)
class GateRunConfig:
    """Numerical settings shared by the gate runs.

    Attributes
    ----------
    effective_steps_per_period : int
        Integrator steps per cavity period ``2 pi / Delta`` for the
        two-level models.
    full_steps_per_period : int
        Steps per period of the fastest phase of the three-level model.
    fock_padding : int
        Extra Fock levels simulated above the reported cutoff.
    cavity_coupling_scale : float
        Multiplies ``g`` in the three-level model only (diagnostic).
    """

    fidelity_mode: str = "local_z"
    effective_steps_per_period: int = 2000
    full_steps_per_period: int = 160
    lindblad_steps_per_period: int = 2000
    scheme: str = "commutator_free_4"
    fock_padding: int = 16
    analytic_padding: int = 60
    cavity_coupling_scale: float = 1.0
    photon_cutoff: Optional[int] = None

    def __post_init__(self):
        if self.fidelity_mode not in FIDELITY_MODES:
            raise ValueError(f"unknown fidelity mode {self.fidelity_mode!r}")
        if self.fock_padding < 0 or self.analytic_padding < 0:
            raise ValueError("padding must be non-negative")

    def replace(self, **changes):
        values = dict(self.__dict__)
        values.update(changes)
        return GateRunConfig(**values)


@dataclass(frozen=True)
class GateReport:
    """Outcome of one controlled-phase run.

    ``sector_unitaries[n]`` is the 4x4 block (+/- basis) from inputs with
    ``n`` photons back to ``n`` photons. ``avg_fidelity`` and ``leakage``
    are weighted over the sectors by the cavity state.
    """

    model_level: str
    fidelity_mode: str
    sector_unitaries: dict
    sector_fidelities: dict
    sector_leakage: dict
    sector_weights: dict
    truth_table_phases: tuple
    avg_fidelity: float
    leakage: float
    photon_spread: float
    t_gate_natural: float
    t_gate_ps: float
    local_z_phases: dict = field(default_factory=dict)
    valence_population: Optional[float] = None

    def updown_unitary(self, n=0):
        return pm_to_updown(self.sector_unitaries[n])


def pair_params(schedule: GateSchedule):
    """Two-dot parameter set for the scheduled pair."""
    p = schedule.params
    m, n = schedule.dot_pair
    return p.replace(n_dots=2, delta=(p.delta[m], p.delta[n]), lab_frame_freqs=None)


def _comp_configs():
    return [(0, 0), (0, 1), (1, 0), (1, 1)]


def _analytic_sectors(params, t, sectors, cutoff, config):
    space = hb.make_space(2, 2, cutoff, "pm")
    U = analytic_evolution(params, (0, 1), t, True, space, config.analytic_padding)
    out = {}
    for n in sectors:
        idx = [hb.basis_index(space, c, n) for c in _comp_configs()]
        out[n] = U[np.ix_(idx, idx)]
    return out, {}


def _effective_numeric_sectors(params, t, sectors, cutoff, config):
    space = hb.make_space(2, 2, cutoff + config.fock_padding, "pm")
    H = effective_sz_hamiltonian(params, space, include_b=True)
    blocks = H.dot_blocks(space)
    p = space.photon_dim
    state = np.zeros((space.dot_dim, p, len(sectors)), dtype=complex)
    for j, n in enumerate(sectors):
        state[:, n, j] = 1.0
    cfg = steps_per_period(t, params.delta[0], config.effective_steps_per_period, config.scheme)
    out = evolve_td(blocks, 0.0, t, state, cfg)
    res = {}
    for j, n in enumerate(sectors):
        # the S_z model never changes the dot configuration
        res[n] = np.diag(out[:, n, j])
    return res, {}


def _dense_sectors(H, space, t, sectors, levels, steps_cfg, to_pm):
    cols, index = [], {}
    for n in sectors:
        idx = [hb.basis_index(space, c, n) for c in itertools.product(levels, repeat=2)]
        index[n] = idx
        cols += idx
    state = np.eye(space.total_dim, dtype=complex)[:, cols]
    out = evolve_td(H, 0.0, t, state, steps_cfg)
    res = {}
    for j, n in enumerate(sectors):
        block = out[index[n], 4 * j:4 * j + 4]
        res[n] = updown_to_pm(block) if to_pm else block
    return res, out


def _effective_pm_sectors(params, t, sectors, cutoff, config):
    space = hb.make_space(2, 2, cutoff + config.fock_padding, "pm")
    H = effective_pm_hamiltonian(params, space)
    cfg = steps_per_period(t, params.delta[0], config.effective_steps_per_period, config.scheme)
    res, _ = _dense_sectors(H, space, t, sectors, (0, 1), cfg, to_pm=False)
    return res, {}


def _full_sectors(params, t, sectors, cutoff, config):
    space = hb.make_space(2, 3, cutoff + config.fock_padding, "updown")
    H = interaction_hamiltonian(params, space, cavity_coupling_scale=config.cavity_coupling_scale)
    cfg = steps_per_period(t, H.fastest_frequency(), config.full_steps_per_period, config.scheme)
    res, out = _dense_sectors(H, space, t, sectors, (UP, DOWN), cfg, to_pm=True)
    vmask = np.zeros(space.total_dim, dtype=bool)
    for cfg_levels in itertools.product(range(3), repeat=2):
        if VALENCE in cfg_levels:
            for n in range(space.photon_dim):
                vmask[hb.basis_index(space, cfg_levels, n)] = True
    vpop = float(np.mean(np.sum(np.abs(out[vmask]) ** 2, axis=0)))
    return res, {"valence_population": vpop}


_RUNNERS = {
    "analytic": _analytic_sectors,
    "effective_numeric": _effective_numeric_sectors,
    "effective_pm": _effective_pm_sectors,
    "full_numeric": _full_sectors,
}


def run_cz(
    schedule: GateSchedule,
    model_level="analytic",
    cavity_state=0,
    config: GateRunConfig = GateRunConfig(),
    sectors=None,
):
    """Run the controlled-phase gate of ``schedule`` at one model level.

    Parameters
    ----------
    cavity_state : int, FockState or ThermalState
        Initial cavity state. For a thermal field every sector up to the
        photon cutoff is run and weighted by its thermal population.
    sectors : sequence of int, optional
        Photon sectors to evaluate for a Fock input (default: just ``n``).
        Used by photon sweeps; the reported fidelity is still that of the
        input sector, and ``photon_spread`` covers all of them.
    """
    if model_level not in _RUNNERS:
        raise ValueError(f"unknown model level {model_level!r}")
    params = pair_params(schedule)
    cutoff = config.photon_cutoff if config.photon_cutoff is not None else params.photon_cutoff
    if isinstance(cavity_state, (int, np.integer)):
        cavity_state = FockState(int(cavity_state))
    if isinstance(cavity_state, FockState):
        if not 0 <= cavity_state.n <= cutoff:
            raise ValueError(f"photon number {cavity_state.n} outside 0..{cutoff}")
        run_sectors = sorted(set(sectors or ()) | {cavity_state.n})
        weights = {cavity_state.n: 1.0}
    elif isinstance(cavity_state, ThermalState):
        run_sectors = list(range(cutoff + 1))
        p = hb.thermal_populations(cavity_state.mean_photon, cutoff)
        weights = {n: float(p[n]) for n in run_sectors}
    else:
        raise TypeError("cavity_state must be an int, FockState or ThermalState")
    if max(run_sectors) > cutoff:
        raise ValueError("requested photon sector above the cutoff")

    t = schedule.t_gate_natural
    blocks, extras = _RUNNERS[model_level](params, t, run_sectors, cutoff, config)
    ideal = ideal_cz()
    fids, leaks, zph = {}, {}, {}
    for n, u in blocks.items():
        if config.fidelity_mode == "local_z":
            fids[n], zph[n] = local_z_correction(u, ideal)
        else:
            fids[n] = gate_fidelity(u, ideal, config.fidelity_mode)
        leaks[n] = float(1.0 - np.mean(np.sum(np.abs(u) ** 2, axis=0)))
    first = min(weights)
    return GateReport(
        model_level=model_level,
        fidelity_mode=config.fidelity_mode,
        sector_unitaries=blocks,
        sector_fidelities=fids,
        sector_leakage=leaks,
        sector_weights=weights,
        truth_table_phases=tuple(complex(x) for x in np.diag(blocks[first])),
        avg_fidelity=float(sum(w * fids[n] for n, w in weights.items())),
        leakage=float(sum(w * leaks[n] for n, w in weights.items())),
        photon_spread=float(max(fids.values()) - min(fids.values())),
        t_gate_natural=t,
        t_gate_ps=schedule.t_gate_ps,
        local_z_phases=zph,
        valence_population=extras.get("valence_population"),
    )


def thermal_channel_fidelity(schedule: GateSchedule, mean_photon, config=GateRunConfig()):
    """Average gate fidelity of the dot channel with a thermal cavity traced out.

    This goes through density matrices and a partial trace, independent of
    the per-sector bookkeeping in :func:`run_cz`. Analytic level only.
    """
    params = pair_params(schedule)
    cutoff = config.photon_cutoff if config.photon_cutoff is not None else params.photon_cutoff
    space = hb.make_space(2, 2, cutoff, "pm")
    U = analytic_evolution(params, (0, 1), schedule.t_gate_natural, True, space,
                           config.analytic_padding)
    rho_cav = np.diag(hb.thermal_populations(mean_photon, cutoff)).astype(complex)
    u_ideal = np.diag(ideal_cz())
    d = 4
    fe = 0.0
    for j, k in itertools.product(range(d), repeat=2):
        e_jk = np.zeros((d, d), dtype=complex)
        e_jk[j, k] = 1.0
        rho = U @ np.kron(e_jk, rho_cav) @ U.conj().T
        out = hb.partial_trace_cavity(rho, space)
        fe += np.conj(u_ideal[j]) * out[j, k] * u_ideal[k]
    fe = fe.real / d**2
    return float((d * fe + 1) / (d + 1))


def not_gate_time(params: ModelParams):
    """Time of a pi rotation under the laser-only Raman coupling (natural units)."""
    b = coupling_b(params.omega1, params.omega3, params.delta2)
    if b <= 0:
        raise ValueError("laser coupling vanishes")
    return math.pi / b


def single_qubit_rot(params: ModelParams, dot, t, space=None):
    """``exp(-i H' t)`` for the single-channel Raman coupling on one dot."""
    if space is None:
        space = hb.make_space(params.n_dots, 2, params.photon_cutoff)
    return expm_hermitian(build_single_qubit(params, dot, space), t)


@dataclass(frozen=True)
class SingleQubitReport:
    not_time_natural: float
    not_time_ps: float
    half_time_natural: float
    half_time_ps: float
    not_unitary: np.ndarray
    half_unitary: np.ndarray


def single_qubit_report(params: ModelParams, dot=0):
    """NOT and half-NOT rotations on one dot, as 2x2 matrices in the up/down basis."""
    p1 = params.replace(n_dots=1, delta=(params.delta[dot],), lab_frame_freqs=None)
    space = hb.make_space(1, 2, 2)
    idx = [hb.basis_index(space, (UP,), 0), hb.basis_index(space, (DOWN,), 0)]
    t_not = not_gate_time(p1)
    u_not = single_qubit_rot(p1, 0, t_not, space)[np.ix_(idx, idx)]
    u_half = single_qubit_rot(p1, 0, t_not / 2, space)[np.ix_(idx, idx)]
    return SingleQubitReport(
        t_not, convert_time(t_not), t_not / 2, convert_time(t_not / 2), u_not, u_half
    )


@dataclass(frozen=True)
class ParallelReport:
    delta_a: float
    delta_b: float
    t_natural: float
    residual: np.ndarray
    fidelity: float
    crosstalk_error: float
    spectator_deviation: Optional[float] = None

    @property
    def separation(self):
        return abs(self.delta_b - self.delta_a)


def run_parallel(
    params: ModelParams,
    pair_a=(0, 1),
    pair_b=(2, 3),
    t=None,
    config: GateRunConfig = GateRunConfig(),
    drive_b=True,
):
    """Two pairs driven at once through the shared cavity (S_z model).

    Pair ``a`` works at ``Delta_a`` and pair ``b`` at ``Delta_b``; ``t``
    defaults to pair ``a``'s loop-closure time ``2 pi / Delta_a``. The joint
    evolution is compared with the product of the two pairs' isolated
    evolutions, ``R = (U_a U_b)^dagger U_joint``; for independent pairs
    ``R`` is the identity. The crosstalk error is one minus the
    16-dimensional gate fidelity of ``R``'s vacuum block against the
    identity.

    With ``drive_b=False`` pair ``b`` is left undriven and the report
    carries the largest change of any evolved column under a flip of the
    spectator dots.
    """
    pair_a, pair_b = tuple(pair_a), tuple(pair_b)
    if set(pair_a) & set(pair_b):
        raise ValueError("gate pairs overlap")
    if params.n_dots != 4 or len(pair_a) != 2 or len(pair_b) != 2:
        raise ValueError("parallel operation needs four dots split into two pairs")
    delta_a, delta_b = params.delta[pair_a[0]], params.delta[pair_b[0]]
    if params.delta[pair_a[1]] != delta_a or params.delta[pair_b[1]] != delta_b:
        raise ValueError("the dots of a pair must share a cavity detuning")
    if t is None:
        t = 2 * math.pi / delta_a
    cutoff = config.photon_cutoff if config.photon_cutoff is not None else params.photon_cutoff
    space = hb.make_space(4, 2, cutoff + config.fock_padding, "pm")
    driven = pair_a + pair_b if drive_b else pair_a
    blocks = effective_sz_hamiltonian(params, space, driven).dot_blocks(space)
    p = space.photon_dim
    state = np.zeros((space.dot_dim, p, 1), dtype=complex)
    state[:, 0, 0] = 1.0
    fastest = max(delta_a, delta_b) if drive_b else delta_a
    cfg = steps_per_period(t, fastest, config.effective_steps_per_period, config.scheme)
    joint = evolve_td(blocks, 0.0, t, state, cfg)[..., 0]

    def blockwise(U):
        return np.stack([U[s * p:(s + 1) * p, s * p:(s + 1) * p] for s in range(space.dot_dim)])

    ua = blockwise(analytic_evolution(params, pair_a, t, False, space, config.analytic_padding))
    if drive_b:
        ub = blockwise(analytic_evolution(params, pair_b, t, False, space, config.analytic_padding))
    else:
        ub = np.broadcast_to(np.eye(p), ua.shape)
    iso = ua @ ub
    r_vac = np.einsum("sji,sj->si", iso.conj(), joint)[:, 0]
    residual = np.diag(r_vac)
    fid = average_gate_fidelity(residual, np.eye(space.dot_dim))

    spectator = None
    if not drive_b:
        # configuration index bits: dot 0 is most significant
        spectator = 0.0
        for s, cfg_bits in enumerate(itertools.product((0, 1), repeat=4)):
            ref_bits = list(cfg_bits)
            for i in pair_b:
                ref_bits[i] = 0
            ref = int("".join(map(str, ref_bits)), 2)
            spectator = max(spectator, float(np.abs(joint[s] - joint[ref]).max()))
    return ParallelReport(delta_a, delta_b, t, residual, fid, 1.0 - fid, spectator)


def kappa_from_lifetime(lifetime_ps):
    """Cavity loss rate in meV for a photon lifetime in ps."""
    if not lifetime_ps > 0:
        raise ValueError("lifetime must be positive")
    return HBAR_MEV_PS / lifetime_ps


@dataclass(frozen=True)
class DecoherencePoint:
    kappa: float
    fidelity: float
    coherence: float
    tau_eff_natural: float
    tau_eff_ps: float


def decoherence_scan(schedule: GateSchedule, kappa_values, config: GateRunConfig = GateRunConfig()):
    """Gate fidelity and effective coherence time under cavity loss.

    The S_z-coupled model with the ``B`` splitting is integrated as a
    master equation with loss rate ``kappa`` from the vacuum. Because the
    Hamiltonian and the loss both preserve every dot configuration, the dot
    channel multiplies ``|s><s'|`` by a number, so one run from the uniform
    superposition determines it. ``tau_eff`` is ``t_gate / (-ln c)`` with
    ``c`` the surviving fraction of the ``|++><--|`` coherence (infinite
    when nothing is lost).
    """
    params = pair_params(schedule)
    cutoff = config.photon_cutoff if config.photon_cutoff is not None else params.photon_cutoff
    space = hb.make_space(2, 2, cutoff + config.fock_padding, "pm")
    blocks = effective_sz_hamiltonian(params, space, include_b=True).dot_blocks(space)
    n, p = space.dot_dim, space.photon_dim
    t = schedule.t_gate_natural
    cfg = steps_per_period(t, params.delta[0], config.lindblad_steps_per_period,
                           "commutator_free_4")
    rho0 = np.zeros((n, n, p, p), dtype=complex)
    rho0[:, :, 0, 0] = 1.0 / n
    u_ideal = np.diag(ideal_cz())
    psi_ideal = u_ideal / math.sqrt(n)
    out = []
    for kappa in kappa_values:
        r = evolve_lindblad_blocks(blocks, float(kappa), rho0, 0.0, t, cfg)
        red = np.einsum("abii->ab", r)
        fe = float(np.real(psi_ideal.conj() @ red @ psi_ideal))
        fid = (n * fe + 1) / (n + 1)
        coh = float(abs(red[0, n - 1]) * n)
        if coh >= 1.0:
            tau = math.inf
        elif coh <= 0.0:
            raise ConvergenceError("coherence vanished; cannot infer a decay time")
        else:
            tau = t / -math.log(coh)
        out.append(DecoherencePoint(float(kappa), fid, coh, tau, convert_time(tau)))
    return out
