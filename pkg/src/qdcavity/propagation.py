"""Time evolution: exact exponentials, a fourth-order integrator for
time-dependent Hamiltonians, a Lindblad evolver with cavity loss, and the
closed-form geometric-phase propagator of the S_z-coupled model.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from . import hilbert as hb
from .params import ModelParams, coupling_a, coupling_b

SCHEMES = ("midpoint_exponential", "commutator_free_4")

_SQRT3 = math.sqrt(3.0)
# two-exponential commutator-free scheme of order four on Gauss nodes
_CF4_NODES = (0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0)
_CF4_A1 = (3.0 - 2.0 * _SQRT3) / 12.0
_CF4_A2 = (3.0 + 2.0 * _SQRT3) / 12.0


class ConvergenceError(RuntimeError):
    """A numerical guard (norm, trace, positivity, truncation) was violated."""


@dataclass(frozen=True)
class PropagationConfig:
    """Fixed-step integration settings.

    Exactly one of ``step_count`` and ``step_size`` should be given; the
    step count wins if both are.
    """

    step_count: Optional[int] = None
    step_size: Optional[float] = None
    scheme: str = "commutator_free_4"
    norm_tolerance: float = 1e-9
    trace_tolerance: float = 1e-7
    positivity_tolerance: float = 1e-6

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.step_count is None and self.step_size is None:
            raise ValueError("give step_count or step_size")
        if self.step_count is not None and self.step_count < 1:
            raise ValueError("step_count must be positive")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")

    def steps_for(self, duration):
        if self.step_count is not None:
            return int(self.step_count)
        return max(1, math.ceil(duration / self.step_size - 1e-9))

    def halved(self):
        """Same settings with the step size halved."""
        if self.step_count is not None:
            return PropagationConfig(
                2 * self.step_count, None, self.scheme, self.norm_tolerance,
                self.trace_tolerance, self.positivity_tolerance,
            )
        return PropagationConfig(
            None, self.step_size / 2, self.scheme, self.norm_tolerance,
            self.trace_tolerance, self.positivity_tolerance,
        )


def steps_per_period(duration, frequency, per_period, scheme="commutator_free_4", **kwargs):
    """Config resolving ``per_period`` steps per period ``2 pi / frequency``."""
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    steps = max(1, math.ceil(per_period * duration * frequency / (2 * np.pi)))
    return PropagationConfig(step_count=steps, scheme=scheme, **kwargs)


def expm_hermitian(H, t):
    """``exp(-i H t)`` by Hermitian eigendecomposition."""
    H = np.asarray(H)
    if hb.hermiticity_error(H) > 1e-10:
        raise ValueError("Hamiltonian is not Hermitian")
    w, v = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def evolve_const(H, t, state):
    """Apply ``exp(-i H t)`` to a state vector, a block of columns or an operator."""
    return expm_hermitian(H, t) @ np.asarray(state, dtype=complex)


def _expm_action(H, h, psi):
    # exp(-i h H) psi by a truncated Taylor series, substepping when h*|H| is large
    norm = float(np.abs(H).sum(axis=-2).max())
    sub = max(1, math.ceil(h * norm))
    dt = h / sub
    for _ in range(sub):
        out = psi.copy()
        term = psi
        for k in range(1, 80):
            term = (-1j * dt / k) * (H @ term)
            out += term
            if np.abs(term).max() <= 1e-17 * max(1.0, np.abs(out).max()):
                break
        psi = out
    return psi


def _column_norms(psi):
    return np.sqrt(np.sum(np.abs(psi) ** 2, axis=-2))


def evolve_td(H_of_t, t0, t1, state, config: PropagationConfig):
    """Time-ordered evolution of ``state`` from ``t0`` to ``t1``.

    Parameters
    ----------
    H_of_t : callable
        Returns the Hamiltonian at a time. It may be batched with shape
        ``(..., d, d)``, in which case ``state`` is batched alike.
    state : ndarray
        Shape ``(d,)``, ``(d, m)`` or ``(..., d, m)``.

    Raises
    ------
    ConvergenceError
        If any column norm drifts by more than ``config.norm_tolerance``.
    """
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    psi = np.array(state, dtype=complex)
    vector = psi.ndim == 1
    if vector:
        psi = psi[:, None]
    n0 = _column_norms(psi)
    steps = config.steps_for(t1 - t0)
    h = (t1 - t0) / steps
    if config.scheme == "midpoint_exponential":
        for k in range(steps):
            psi = _expm_action(H_of_t(t0 + (k + 0.5) * h), h, psi)
    else:
        c1, c2 = _CF4_NODES
        combine = getattr(H_of_t, "combine", None)
        for k in range(steps):
            t = t0 + k * h
            nodes = (t + c1 * h, t + c2 * h)
            if combine is not None:
                first = combine(nodes, (_CF4_A2, _CF4_A1))
                second = combine(nodes, (_CF4_A1, _CF4_A2))
            else:
                H1, H2 = H_of_t(nodes[0]), H_of_t(nodes[1])
                first = _CF4_A2 * H1 + _CF4_A1 * H2
                second = _CF4_A1 * H1 + _CF4_A2 * H2
            psi = _expm_action(first, h, psi)
            psi = _expm_action(second, h, psi)
    drift = float(np.abs(_column_norms(psi) - n0).max())
    if drift > config.norm_tolerance:
        raise ConvergenceError(f"norm drift {drift:.3e} exceeds {config.norm_tolerance:.1e}")
    return psi[:, 0] if vector else psi


def evolve_lindblad(H_of_t, kappa, rho, t0, t1, config: PropagationConfig, space):
    """Integrate ``d rho/dt = -i[H, rho] + kappa D[a] rho`` with classical RK4.

    ``rho`` may be a single ``(d, d)`` matrix or a batch ``(..., d, d)``.
    Inputs that are Hermitian are re-symmetrised after every step; other
    inputs (used for linear reconstruction of a channel) are left alone.
    Trace drift beyond ``config.trace_tolerance`` and, for inputs that start
    as density matrices, eigenvalues below ``-config.positivity_tolerance``
    raise :class:`ConvergenceError`.
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    r = np.array(rho, dtype=complex)
    single = r.ndim == 2
    if single:
        r = r[None]
    a = np.asarray(hb.annihilator(space))
    ad = a.conj().T
    damping = 0.5 * kappa * np.asarray(hb.number_op(space))

    def rhs(t, x):
        heff = H_of_t(t) - 1j * damping
        out = -1j * (heff @ x - x @ np.swapaxes(heff.conj(), -1, -2))
        if kappa:
            out += kappa * (a @ x @ ad)
        return out

    herm_err = np.abs(r - np.swapaxes(r.conj(), -1, -2)).reshape(len(r), -1).max(axis=1)
    hermitian = herm_err <= 1e-12
    tr0 = np.trace(r, axis1=-2, axis2=-1)
    physical = hermitian & (np.abs(tr0 - 1) < 1e-9)
    if physical.any():
        lam = np.linalg.eigvalsh(r[physical])
        physical[physical] = lam.min(axis=-1) > -1e-12

    steps = config.steps_for(t1 - t0)
    h = (t1 - t0) / steps
    for k in range(steps):
        t = t0 + k * h
        k1 = rhs(t, r)
        k2 = rhs(t + h / 2, r + (h / 2) * k1)
        k3 = rhs(t + h / 2, r + (h / 2) * k2)
        k4 = rhs(t + h, r + h * k3)
        r = r + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if hermitian.any():
            rh = r[hermitian]
            r[hermitian] = 0.5 * (rh + np.swapaxes(rh.conj(), -1, -2))

    drift = float(np.abs(np.trace(r, axis1=-2, axis2=-1) - tr0).max())
    if drift > config.trace_tolerance:
        raise ConvergenceError(f"trace drift {drift:.3e} exceeds {config.trace_tolerance:.1e}")
    if physical.any():
        lam_min = float(np.linalg.eigvalsh(r[physical]).min())
        if lam_min < -config.positivity_tolerance:
            raise ConvergenceError(f"density matrix eigenvalue {lam_min:.3e} is negative")
    return r[0] if single else r


@dataclass(frozen=True)
class GeomPhaseCoeffs:
    alpha: complex
    beta: complex
    gamma: complex


def geom_coeffs(A, delta, t):
    """Coefficients of ``U = exp(-i alpha J^2) exp(-i beta J a) exp(-i gamma J a^dagger)``.

    They solve ``H = (A/2)(a^dagger e^{-i delta t} + a e^{i delta t}) J``
    exactly. ``beta`` is the complex conjugate of ``gamma`` and

        alpha = (A^2 / 4 delta) [t - (i/delta)(e^{-i delta t} - 1)],

    whose imaginary part ``|gamma|^2 / 2`` restores unitarity of the
    normal-ordered product and vanishes when ``delta t`` is a multiple of
    ``2 pi``.
    """
    if delta == 0:
        raise ValueError("delta must be nonzero (resonant coupling is outside the model)")
    e = np.exp(1j * delta * t)
    beta = A / (2j * delta) * (e - 1.0)
    gamma = -A / (2j * delta) * (np.conj(e) - 1.0)
    alpha = A**2 / (4 * delta) * (t - 1j / delta * (np.conj(e) - 1.0))
    return GeomPhaseCoeffs(complex(alpha), complex(beta), complex(gamma))


def _spin_configs(space):
    return list(itertools.product((0.5, -0.5), repeat=space.dot_count))


def analytic_evolution(
    params: ModelParams,
    driven_dots=None,
    t=0.0,
    include_b_frame=False,
    space=None,
    padding=60,
):
    """Closed-form propagator of the S_z-coupled model, written in the +/- basis.

    The cavity factors are built in a Fock space enlarged by ``padding``
    levels and then cropped, so the result is the truncation of the exact
    infinite-dimensional operator rather than the exponential of truncated
    ladder operators.

    Parameters
    ----------
    driven_dots : sequence of int, optional
        Dots whose lasers are on; all by default. They must share one
        cavity detuning.
    include_b_frame : bool
        Left-multiply by ``exp(-i B t J)`` to leave the rotating frame.
    """
    if space is None:
        space = hb.make_space(params.n_dots, 2, params.photon_cutoff, "pm")
    if space.levels_per_dot != 2 or space.basis != "pm":
        raise ValueError("analytic evolution is written on two-level dots in the +/- basis")
    if driven_dots is None:
        driven_dots = tuple(range(params.n_dots))
    driven_dots = tuple(driven_dots)
    deltas = {params.delta[i] for i in driven_dots}
    if len(deltas) > 1:
        raise ValueError("driven dots must share one cavity detuning")
    dim = space.total_dim
    if not driven_dots:
        return np.eye(dim, dtype=complex)
    delta = deltas.pop()
    A = coupling_a(params.g, params.omega2, params.delta1, delta)
    B = coupling_b(params.omega1, params.omega3, params.delta2)
    c = geom_coeffs(A, delta, t)

    big = space.photon_dim + padding
    a = np.diag(np.sqrt(np.arange(1, big)), 1).astype(complex)
    ad = a.conj().T
    keep = space.photon_dim
    U = np.zeros((dim, dim), dtype=complex)
    blocks = {}
    for idx, cfg in enumerate(_spin_configs(space)):
        j = sum(cfg[i] for i in driven_dots)
        if j not in blocks:
            block = expm(-1j * c.beta * j * a) @ expm(-1j * c.gamma * j * ad)
            block = np.exp(-1j * c.alpha * j * j) * block[:keep, :keep]
            if include_b_frame:
                block = np.exp(-1j * B * t * j) * block
            blocks[j] = block
        sl = slice(idx * keep, (idx + 1) * keep)
        U[sl, sl] = blocks[j]
    return U


def evolve_lindblad_blocks(H_blocks, kappa, rho_blocks, t0, t1, config: PropagationConfig):
    """Lindblad evolution for a Hamiltonian that is block-diagonal in dot configuration.

    When ``H`` and the cavity loss both preserve every dot configuration,
    the density matrix splits into cavity blocks ``rho[s, s']`` that obey

        d rho[s,s']/dt = -i (H_s rho[s,s'] - rho[s,s'] H_s') + kappa D[a] rho[s,s'].

    Parameters
    ----------
    H_blocks : callable
        Returns the cavity blocks ``H_s(t)`` with shape ``(n, p, p)``.
    rho_blocks : ndarray
        Shape ``(n, n, p, p)``.
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    r = np.array(rho_blocks, dtype=complex)
    n, _, p, _ = r.shape
    a = np.diag(np.sqrt(np.arange(1, p)), 1).astype(complex)
    ad = a.conj().T
    damping = 0.5 * kappa * np.diag(np.arange(p)).astype(complex)

    def rhs(t, x):
        heff = H_blocks(t) - 1j * damping
        left = heff[:, None] @ x
        right = x @ np.swapaxes(heff.conj(), -1, -2)[None, :]
        out = -1j * (left - right)
        if kappa:
            out += kappa * (a @ x @ ad)
        return out

    def trace(x):
        return np.einsum("ssii->", x)

    def assemble(x):
        return x.transpose(0, 2, 1, 3).reshape(n * p, n * p)

    tr0 = trace(r)
    full0 = assemble(r)
    hermitian = hb.hermiticity_error(full0) <= 1e-12
    physical = hermitian and abs(tr0 - 1) < 1e-9 and np.linalg.eigvalsh(full0).min() > -1e-12

    steps = config.steps_for(t1 - t0)
    h = (t1 - t0) / steps
    for k in range(steps):
        t = t0 + k * h
        k1 = rhs(t, r)
        k2 = rhs(t + h / 2, r + (h / 2) * k1)
        k3 = rhs(t + h / 2, r + (h / 2) * k2)
        k4 = rhs(t + h, r + h * k3)
        r = r + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if hermitian:
            r = 0.5 * (r + np.swapaxes(np.swapaxes(r, 0, 1).conj(), -1, -2))

    drift = abs(trace(r) - tr0)
    if drift > config.trace_tolerance:
        raise ConvergenceError(f"trace drift {drift:.3e} exceeds {config.trace_tolerance:.1e}")
    if physical:
        lam_min = float(np.linalg.eigvalsh(assemble(r)).min())
        if lam_min < -config.positivity_tolerance:
            raise ConvergenceError(f"density matrix eigenvalue {lam_min:.3e} is negative")
    return r
