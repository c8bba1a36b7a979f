"""Hamiltonians of the dot/cavity system at every level of approximation.

Each time-dependent Hamiltonian is held as a :class:`HarmonicHamiltonian`,

    H(t) = static + sum_k ( M_k exp(-i w_k t) + h.c. ),

so evaluating it at a time costs a handful of scaled matrix additions and
the integrators can sample it freely. The ``build_*`` functions evaluate
a level at a single time, which is the convenient form for checks.

Levels
------
lab
    Bare three-level dots, three lasers and the cavity mode.
interaction
    The same model in the interaction picture of the bare energies.
effective_raw
    Valence level eliminated, written in the up/down basis.
effective_pm
    The same operator written in the +/- basis.
effective_sz
    Cavity coupling along S_z only, in the rotating frame of ``B S_z``.
single_qubit
    One dot driven by the laser-only Raman channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hilbert as hb
from .params import DOWN, UP, VALENCE, ModelParams, coupling_a, coupling_b

LEVEL_TAGS = (
    "lab",
    "interaction",
    "effective_raw",
    "effective_pm",
    "effective_sz",
    "single_qubit",
)


@dataclass(frozen=True)
class HamiltonianLevel:
    """Which Hamiltonian to build and which dots have their lasers on."""

    tag: str
    driven_dots: tuple = ()

    def __post_init__(self):
        if self.tag not in LEVEL_TAGS:
            raise ValueError(f"unknown Hamiltonian level {self.tag!r}")
        object.__setattr__(self, "driven_dots", tuple(int(i) for i in self.driven_dots))

    def check_space(self, space):
        if self.tag in ("lab", "interaction") and space.levels_per_dot != 3:
            raise ValueError(f"{self.tag} Hamiltonian needs three-level dots")
        if self.tag.startswith("effective") or self.tag == "single_qubit":
            if space.levels_per_dot != 2:
                raise ValueError(f"{self.tag} Hamiltonian needs two-level dots")
        if self.tag == "single_qubit" and len(self.driven_dots) != 1:
            raise ValueError("single_qubit Hamiltonian drives exactly one dot")
        if self.tag == "effective_raw" and space.basis != "updown":
            raise ValueError("effective_raw is written in the up/down basis")
        if len(set(self.driven_dots)) != len(self.driven_dots):
            raise ValueError("driven dots must be distinct")
        for i in self.driven_dots:
            if not 0 <= i < space.dot_count:
                raise ValueError(f"driven dot {i} not in the space")


class HarmonicHamiltonian:
    """``H(t) = static + sum_k (M_k e^{-i w_k t} + M_k^dagger e^{i w_k t})``.

    Parameters
    ----------
    static : ndarray
        Hermitian time-independent part.
    terms : list of (ndarray, float)
        Operator and angular frequency of each oscillating term. Terms that
        share a frequency are merged.
    """

    def __init__(self, static, terms=(), level=None, space=None):
        self.static = np.asarray(static, dtype=complex)
        merged = {}
        for op, w in terms:
            w = float(w)
            merged[w] = merged.get(w, 0) + np.asarray(op, dtype=complex)
        self.terms = [(op, w) for w, op in merged.items() if np.any(op)]
        self._adjoints = [np.swapaxes(op.conj(), -1, -2).copy() for op, _ in self.terms]
        self.level = level
        self.space = space
        if self.terms:
            self._stack = np.stack([op for op, _ in self.terms] + self._adjoints)
            self._omega = np.array([w for _, w in self.terms])
        shape = self.static.shape
        self._flat = None if not self.terms else self._stack.reshape(len(self._stack), -1)
        self._shape = shape

    @property
    def dim(self):
        return self.static.shape[-1]

    def __call__(self, t):
        out = self.static.copy()
        for (op, w), adj in zip(self.terms, self._adjoints):
            ph = np.exp(-1j * w * t)
            out += ph * op
            out += np.conj(ph) * adj
        return out

    def combine(self, times, weights):
        """``sum_j weights[j] * H(times[j])`` in one pass over the stored terms."""
        total = float(sum(weights))
        if not self.terms:
            return total * self.static
        ph = sum(w * np.exp(-1j * self._omega * t) for t, w in zip(times, weights))
        coef = np.concatenate([ph, np.conj(ph)])
        return total * self.static + (coef @ self._flat).reshape(self._shape)

    def frequencies(self):
        return [w for _, w in self.terms]

    def fastest_frequency(self):
        return max((abs(w) for _, w in self.terms), default=0.0)

    def dot_blocks(self, space, tol=0.0):
        """Split into one cavity block per dot configuration, if possible.

        Returns a batched Hamiltonian whose matrices have shape
        ``(dot_dim, photon_dim, photon_dim)``, or ``None`` when some term
        couples different dot configurations by more than ``tol``.
        """
        n, p = space.dot_dim, space.photon_dim
        diag = np.arange(n)

        def split(m):
            m4 = m.reshape(n, p, n, p)
            blocks = m4[diag, :, diag, :]
            off = m4.copy()
            off[diag, :, diag, :] = 0
            if np.abs(off).max(initial=0.0) > tol:
                return None
            return blocks

        static = split(self.static)
        if static is None:
            return None
        terms = []
        for op, w in self.terms:
            b = split(op)
            if b is None:
                return None
            terms.append((b, w))
        return HarmonicHamiltonian(static, terms, self.level, space)

    def time_average(self):
        """Average over all oscillating terms (exact when no frequency is zero)."""
        out = self.static.copy()
        for (op, w), adj in zip(self.terms, self._adjoints):
            if w == 0:
                out += op + adj
        return out


def _default_space(params, levels, basis="updown"):
    return hb.make_space(params.n_dots, levels, params.photon_cutoff, basis)


def _resolve(params, space, levels, tag, driven_dots, basis="updown"):
    if space is None:
        space = _default_space(params, levels, basis)
    if space.dot_count != params.n_dots:
        raise ValueError("space and parameters disagree on the number of dots")
    if driven_dots is None:
        driven_dots = tuple(range(params.n_dots))
    level = HamiltonianLevel(tag, tuple(driven_dots))
    level.check_space(space)
    return space, level


def lab_hamiltonian(params: ModelParams, space=None):
    """Bare energies ``H0`` and the driven coupling ``Hint(t)`` in the lab frame.

    Returns
    -------
    H0 : ndarray
    Hint : HarmonicHamiltonian
    """
    f = params.lab_frame_freqs
    if f is None:
        raise ValueError("lab-frame frequencies are required for the lab Hamiltonian")
    space, level = _resolve(params, space, 3, "lab", None)
    a = hb.annihilator(space)
    H0 = f.omega_c * hb.number_op(space)
    terms = []
    for i in range(space.dot_count):
        s_uu = hb.dot_transition_op(space, i, UP, UP)
        s_dd = hb.dot_transition_op(space, i, DOWN, DOWN)
        s_vv = hb.dot_transition_op(space, i, VALENCE, VALENCE)
        H0 = H0 + f.omega_up * s_uu + f.omega_down * s_dd + f.omega_v * s_vv
        s_uv = hb.dot_transition_op(space, i, UP, VALENCE)
        s_dv = hb.dot_transition_op(space, i, DOWN, VALENCE)
        terms += [
            (params.omega1 * s_uv, f.omega1),
            (params.omega2 * s_uv, f.omega2),
            (params.omega3 * s_dv, f.omega3),
            (params.g * (a @ s_dv), 0.0),
        ]
    return H0, HarmonicHamiltonian(np.zeros_like(H0), terms, level, space)


def build_lab(params: ModelParams, t, space=None):
    H0, Hint = lab_hamiltonian(params, space)
    return H0, Hint(t)


def interaction_hamiltonian(
    params: ModelParams, space=None, driven_dots=None, cavity_coupling_scale=1.0
):
    """Interaction-picture Hamiltonian of the three-level model.

    Dots not listed in ``driven_dots`` see no laser but keep their cavity
    coupling at their own detuning, which is how a dot is switched off by
    moving it away from the two-photon resonance.

    ``cavity_coupling_scale`` multiplies ``g`` in this model only. It exists
    for diagnosing the normalisation of the eliminated coupling and is 1 by
    default.
    """
    space, level = _resolve(params, space, 3, "interaction", driven_dots)
    a = hb.annihilator(space)
    g = params.g * cavity_coupling_scale
    terms = []
    for i in range(space.dot_count):
        s_uv = hb.dot_transition_op(space, i, UP, VALENCE)
        s_dv = hb.dot_transition_op(space, i, DOWN, VALENCE)
        if i in level.driven_dots:
            terms += [
                (params.omega2 * s_uv, -params.delta1),
                (params.omega1 * s_uv + params.omega3 * s_dv, -params.delta2),
            ]
        terms.append((g * (a @ s_dv), -(params.delta1 + params.delta[i])))
    zero = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    return HarmonicHamiltonian(zero, terms, level, space)


def build_interaction(params: ModelParams, t, space=None, driven_dots=None):
    return interaction_hamiltonian(params, space, driven_dots)(t)


def frame_consistency_error(params: ModelParams, times, space=None):
    """Largest deviation between ``U0^dagger Hint U0`` and the interaction-picture form.

    ``U0 = exp(-i H0 t)`` is diagonal, so the transform is applied
    elementwise.
    """
    H0, Hint = lab_hamiltonian(params, space)
    HI = interaction_hamiltonian(params, Hint.space)
    e0 = np.real(np.diag(H0))
    worst = 0.0
    for t in np.atleast_1d(times):
        phase = np.exp(1j * e0 * t)
        rotated = phase[:, None] * Hint(t) * phase.conj()[None, :]
        worst = max(worst, float(np.abs(rotated - HI(t)).max()))
    return worst


def _raw_coupling(params, i):
    # channel-2 strength such that <up, n+1|H|down, n> = (A/2) sqrt(n+1)
    return 0.5 * coupling_a(params.g, params.omega2, params.delta1, params.delta[i])


def effective_raw_hamiltonian(params: ModelParams, space=None, driven_dots=None):
    """Two-level Hamiltonian after eliminating the valence level (up/down basis)."""
    space, level = _resolve(params, space, 2, "effective_raw", driven_dots)
    ad = hb.creator(space)
    half_b = 0.5 * coupling_b(params.omega1, params.omega3, params.delta2)
    static = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    terms = []
    for i in level.driven_dots:
        s_ud = hb.dot_transition_op(space, i, UP, DOWN)
        s_du = hb.dot_transition_op(space, i, DOWN, UP)
        static += half_b * (s_ud + s_du)
        terms.append((_raw_coupling(params, i) * (ad @ s_ud), params.delta[i]))
    return HarmonicHamiltonian(static, terms, level, space)


def build_effective_raw(params: ModelParams, t, driven_dots=None, space=None):
    return effective_raw_hamiltonian(params, space, driven_dots)(t)


def effective_pm_hamiltonian(params: ModelParams, space=None, driven_dots=None):
    """Eliminated Hamiltonian in S_z, S_+, S_- language.

    Per driven dot,
    ``A [(2 S_z - S_+ + S_-)/4 a^dagger e^{-i Delta t} + h.c.] + B S_z``,
    which is exactly the up/down form rotated into the +/- basis.
    """
    if space is None:
        space = _default_space(params, 2, "pm")
    space, level = _resolve(params, space, 2, "effective_pm", driven_dots)
    ad = hb.creator(space)
    b = coupling_b(params.omega1, params.omega3, params.delta2)
    static = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    terms = []
    for i in level.driven_dots:
        a_i = coupling_a(params.g, params.omega2, params.delta1, params.delta[i])
        sz, sp, sm = hb.spin_z(space, i), hb.spin_plus(space, i), hb.spin_minus(space, i)
        static += b * sz
        terms.append((0.25 * a_i * ((2 * sz - sp + sm) @ ad), params.delta[i]))
    return HarmonicHamiltonian(static, terms, level, space)


def build_effective_pm(params: ModelParams, t, driven_dots=None, space=None):
    return effective_pm_hamiltonian(params, space, driven_dots)(t)


def effective_sz_hamiltonian(params: ModelParams, space=None, driven_dots=None, include_b=False):
    """Cavity coupling along S_z, ``sum_i (A_i/2)(a^dagger e^{-i Delta_i t} + h.c.) S_z^i``.

    With ``include_b`` the splitting ``B sum_i S_z^i`` is added back, which
    undoes the rotating frame (the two parts commute).
    """
    if space is None:
        space = _default_space(params, 2, "pm")
    space, level = _resolve(params, space, 2, "effective_sz", driven_dots)
    ad = hb.creator(space)
    b = coupling_b(params.omega1, params.omega3, params.delta2)
    static = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    terms = []
    for i in level.driven_dots:
        a_i = coupling_a(params.g, params.omega2, params.delta1, params.delta[i])
        sz = hb.spin_z(space, i)
        terms.append((0.5 * a_i * (ad @ sz), params.delta[i]))
        if include_b:
            static += b * sz
    return HarmonicHamiltonian(static, terms, level, space)


def build_effective_sz(params: ModelParams, t, driven_dots=None, space=None):
    return effective_sz_hamiltonian(params, space, driven_dots)(t)


def build_single_qubit(params: ModelParams, dot_index, space=None):
    """Laser-only Raman coupling ``(Omega1 Omega3 / Delta2)(sigma_ud + sigma_du)`` on one dot."""
    space, level = _resolve(params, space, 2, "single_qubit", (dot_index,))
    # sigma_ud + sigma_du is 2 S_z in either basis
    return 2.0 * (params.omega1 * params.omega3 / params.delta2) * hb.spin_z(space, dot_index)


def rwa_residual(params: ModelParams, space=None, driven_dots=None, samples=64):
    """Check of the rotating-wave step from the +/- form to the S_z form.

    In the frame ``V(t) = exp(i B t J) exp(i Delta t a^dagger a)`` with
    ``J = sum S_z`` over driven dots, the difference between the rotated
    +/- Hamiltonian (minus ``B J``) and the S_z Hamiltonian contains only
    terms oscillating at ``B``. Its average over one period ``2 pi / B``
    must vanish.

    Returns
    -------
    mean_residual : float
        Max-norm of the period average.
    peak_residual : float
        Largest max-norm of the residual over the samples, for scale.
    """
    if space is None:
        space = _default_space(params, 2, "pm")
    if space.basis != "pm":
        raise ValueError("rwa_residual works in the +/- basis")
    delta = params.shared_delta
    H_pm = effective_pm_hamiltonian(params, space, driven_dots)
    H_sz = effective_sz_hamiltonian(params, space, driven_dots)
    b = coupling_b(params.omega1, params.omega3, params.delta2)
    if b <= 0:
        raise ValueError("B must be positive for the rotating-frame check")
    J = sum(hb.spin_z(space, i) for i in H_pm.level.driven_dots)
    j_diag = np.real(np.diag(J))
    n_diag = np.real(np.diag(hb.number_op(space)))
    period = 2 * np.pi / b
    acc = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    peak = 0.0
    for t in np.arange(samples) * period / samples:
        v = np.exp(1j * (b * j_diag + delta * n_diag) * t)
        rot = lambda m: v[:, None] * m * v.conj()[None, :]  # noqa: E731
        r = rot(H_pm(t) - b * J) - rot(H_sz(t))
        peak = max(peak, float(np.abs(r).max()))
        acc += r
    # uniform rule over a full period is exact for the trigonometric polynomial
    return float(np.abs(acc / samples).max()), peak
