"""Dense Fock-truncated Hilbert space of N dots and one cavity mode.

Basis ordering is ``kron(dot_1, ..., dot_N, cavity)`` so the index of the
configuration ``(d_1, ..., d_N, n)`` is
``((d_1 * L + d_2) * L + ... + d_N) * photon_dim + n``.

Dot levels are encoded ``up=0, down=1, v=2``. Two-level spaces may instead
use the rotated basis ``+=0, -=1`` with ``|+-> = (|up> +- |down>)/sqrt 2``;
the space's ``basis`` attribute says which one a matrix is written in.

Operators are plain complex ``numpy`` arrays. Cached operators are returned
read-only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .params import DOWN, UP, VALENCE

_LEVEL_NAMES = {
    "up": UP, "u": UP, "↑": UP,
    "down": DOWN, "d": DOWN, "↓": DOWN,
    "v": VALENCE, "valence": VALENCE,
    "+": 0, "plus": 0, "-": 1, "minus": 1, "−": 1,
}

PM_ROTATION = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
"""Columns are |+> and |-> written in the (up, down) basis."""


@dataclass(frozen=True)
class SpaceDescriptor:
    dot_count: int
    levels_per_dot: int
    photon_cutoff: int
    basis: str = "updown"

    @property
    def photon_dim(self):
        return self.photon_cutoff + 1

    @property
    def dot_dim(self):
        return self.levels_per_dot ** self.dot_count

    @property
    def total_dim(self):
        return self.dot_dim * self.photon_dim

    def with_cutoff(self, photon_cutoff):
        return SpaceDescriptor(self.dot_count, self.levels_per_dot, photon_cutoff, self.basis)


def make_space(dot_count, levels_per_dot, photon_cutoff, basis="updown"):
    if dot_count < 1:
        raise ValueError("dot_count must be positive")
    if levels_per_dot not in (2, 3):
        raise ValueError("levels_per_dot must be 2 or 3")
    if photon_cutoff < 2:
        raise ValueError("photon_cutoff must be at least 2")
    if basis not in ("updown", "pm"):
        raise ValueError("basis must be 'updown' or 'pm'")
    if basis == "pm" and levels_per_dot != 2:
        raise ValueError("the +/- basis is only defined for two-level dots")
    return SpaceDescriptor(int(dot_count), int(levels_per_dot), int(photon_cutoff), basis)


def _level(space, level):
    if isinstance(level, str):
        try:
            level = _LEVEL_NAMES[level]
        except KeyError:
            raise ValueError(f"unknown level {level!r}") from None
    level = int(level)
    if not 0 <= level < space.levels_per_dot:
        raise ValueError(f"level {level} out of range for {space.levels_per_dot}-level dots")
    return level


def basis_index(space, dot_levels, photon_n):
    if len(dot_levels) != space.dot_count:
        raise ValueError("need one level per dot")
    if not 0 <= photon_n <= space.photon_cutoff:
        raise ValueError(f"photon number {photon_n} outside 0..{space.photon_cutoff}")
    idx = 0
    for lvl in dot_levels:
        idx = idx * space.levels_per_dot + _level(space, lvl)
    return idx * space.photon_dim + int(photon_n)


def basis_state(space, dot_levels, photon_n):
    psi = np.zeros(space.total_dim, dtype=complex)
    psi[basis_index(space, dot_levels, photon_n)] = 1.0
    return psi


def _single_dot_pm(space, sign):
    if sign in ("+", 1, +1.0, "plus"):
        s = 0
    elif sign in ("-", "−", -1, -1.0, "minus"):
        s = 1
    else:
        raise ValueError(f"sign must be + or -, got {sign!r}")
    vec = np.zeros(space.levels_per_dot, dtype=complex)
    if space.basis == "pm":
        vec[s] = 1.0
    else:
        vec[:2] = PM_ROTATION[:, s]
    return vec


def plus_minus_state(space, signs, photon_n):
    """Product state of |+> / |-> dots with the cavity in Fock state ``photon_n``."""
    if len(signs) != space.dot_count:
        raise ValueError("need one sign per dot")
    if not 0 <= photon_n <= space.photon_cutoff:
        raise ValueError(f"photon number {photon_n} outside 0..{space.photon_cutoff}")
    psi = np.ones(1, dtype=complex)
    for s in signs:
        psi = np.kron(psi, _single_dot_pm(space, s))
    fock = np.zeros(space.photon_dim)
    fock[photon_n] = 1.0
    return np.kron(psi, fock)


def thermal_populations(mean_photon, photon_cutoff):
    """Geometric photon-number distribution renormalised over ``0..cutoff``."""
    if mean_photon < 0:
        raise ValueError("mean photon number must be non-negative")
    n = np.arange(photon_cutoff + 1)
    if mean_photon == 0:
        p = (n == 0).astype(float)
    else:
        r = mean_photon / (1.0 + mean_photon)
        p = r ** n / (1.0 + mean_photon)
    return p / p.sum()


def thermal_density(space, mean_photon, dot_state=None):
    """Dots in the pure state ``dot_state`` times a thermal cavity field.

    ``dot_state`` defaults to every dot in level 0.
    """
    p = thermal_populations(mean_photon, space.photon_cutoff)
    if dot_state is None:
        dot_state = np.zeros(space.dot_dim, dtype=complex)
        dot_state[0] = 1.0
    dot_state = np.asarray(dot_state, dtype=complex)
    if dot_state.shape != (space.dot_dim,):
        raise ValueError("dot_state has the wrong dimension")
    dot_state = dot_state / np.linalg.norm(dot_state)
    return np.kron(np.outer(dot_state, dot_state.conj()), np.diag(p).astype(complex))


def _readonly(m):
    m.setflags(write=False)
    return m


def _embed_dot(space, dot_index, local):
    if not 0 <= dot_index < space.dot_count:
        raise IndexError(f"dot {dot_index} out of range")
    eye = np.eye(space.levels_per_dot)
    out = np.ones((1, 1))
    for j in range(space.dot_count):
        out = np.kron(out, local if j == dot_index else eye)
    return np.kron(out, np.eye(space.photon_dim)).astype(complex)


@lru_cache(maxsize=None)
def dot_transition_op(space, dot_index, m, n):
    """``|m><n|`` on one dot, identity on the other dots and the cavity."""
    m, n = _level(space, m), _level(space, n)
    local = np.zeros((space.levels_per_dot, space.levels_per_dot))
    local[m, n] = 1.0
    return _readonly(_embed_dot(space, dot_index, local))


@lru_cache(maxsize=None)
def annihilator(space):
    a = np.diag(np.sqrt(np.arange(1, space.photon_dim)), 1)
    return _readonly(np.kron(np.eye(space.dot_dim), a).astype(complex))


@lru_cache(maxsize=None)
def creator(space):
    return _readonly(annihilator(space).conj().T.copy())


@lru_cache(maxsize=None)
def number_op(space):
    return _readonly(creator(space) @ annihilator(space))


def _local_spin(space, which):
    if space.levels_per_dot == 2 and space.basis == "pm":
        plus_minus = np.eye(2)
    else:
        plus_minus = np.zeros((space.levels_per_dot, 2))
        plus_minus[:2, :] = PM_ROTATION
    p, m = plus_minus[:, 0], plus_minus[:, 1]
    if which == "z":
        return 0.5 * (np.outer(p, p) - np.outer(m, m))
    if which == "+":
        return np.outer(p, m)
    if which == "-":
        return np.outer(m, p)
    raise ValueError(which)


@lru_cache(maxsize=None)
def spin_z(space, dot_index):
    """``(|+><+| - |-><-|)/2`` on one dot, in the space's basis."""
    return _readonly(_embed_dot(space, dot_index, _local_spin(space, "z")))


@lru_cache(maxsize=None)
def spin_plus(space, dot_index):
    """``|+><-|`` on one dot."""
    return _readonly(_embed_dot(space, dot_index, _local_spin(space, "+")))


@lru_cache(maxsize=None)
def spin_minus(space, dot_index):
    """``|-><+|`` on one dot."""
    return _readonly(_embed_dot(space, dot_index, _local_spin(space, "-")))


def total_spin_z(space, dots):
    out = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    for i in dots:
        out = out + spin_z(space, i)
    return out


@lru_cache(maxsize=None)
def pm_rotation_op(space):
    """Unitary mapping +/- coordinates to up/down coordinates on every dot.

    For a matrix ``H`` written in the up/down basis, ``W.conj().T @ H @ W``
    is the same operator in the +/- basis. The valence level is untouched.
    """
    local = np.eye(space.levels_per_dot)
    local[:2, :2] = PM_ROTATION
    out = np.ones((1, 1))
    for _ in range(space.dot_count):
        out = np.kron(out, local)
    return _readonly(np.kron(out, np.eye(space.photon_dim)).astype(complex))


def sector_indices(space, photon_n, computational_levels=(0, 1)):
    """Basis indices with photon number ``photon_n`` and every dot in the given levels."""
    levels = [_level(space, lvl) for lvl in computational_levels]
    return [
        basis_index(space, cfg, photon_n)
        for cfg in itertools.product(levels, repeat=space.dot_count)
    ]


def project_sector(space, photon_n, computational_levels=(0, 1)):
    """Orthogonal projector onto one photon sector of the computational subspace."""
    idx = sector_indices(space, photon_n, computational_levels)
    P = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    P[idx, idx] = 1.0
    return P


def partial_trace_cavity(rho, space):
    """Trace out the cavity from a (dots x cavity) density matrix."""
    rho = np.asarray(rho)
    if rho.shape != (space.total_dim, space.total_dim):
        raise ValueError(
            f"density matrix of shape {rho.shape} does not match dimension {space.total_dim}"
        )
    d, c = space.dot_dim, space.photon_dim
    return np.einsum("anbn->ab", rho.reshape(d, c, d, c))


def hermiticity_error(m):
    return float(np.abs(m - m.conj().T).max())


def unitarity_error(m):
    return float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max())


def is_hermitian(m, tol=1e-10):
    return hermiticity_error(m) <= tol


def is_unitary(m, tol=1e-9):
    return unitarity_error(m) <= tol


def check_density(rho, herm_tol=1e-10, trace_tol=1e-7, eig_tol=1e-7):
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix."""
    if hermiticity_error(rho) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -eig_tol:
        raise ValueError("density matrix has a negative eigenvalue")
