"""Physical parameters, derived couplings, unit conversion and the
approximation-condition checker.

All energies are in meV and the internal time unit is hbar/meV
(hbar = 1). Times reported to users are converted to picoseconds
with :func:`convert_time`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

HBAR_MEV_PS = 0.6582119569
"""Reduced Planck constant in meV * ps."""

UP, DOWN, VALENCE = 0, 1, 2


@dataclass(frozen=True)
class UnitSystem:
    hbar_mev_ps: float = HBAR_MEV_PS

    def to_ps(self, t_natural):
        return t_natural * self.hbar_mev_ps

    def to_natural(self, t_ps):
        return t_ps / self.hbar_mev_ps


UNITS = UnitSystem()


def convert_time(value, direction="natural->ps"):
    """Convert a time between natural units (hbar/meV) and picoseconds.

    ``direction`` is ``"natural->ps"`` or ``"ps->natural"``.
    """
    if direction in ("natural->ps", "to_ps"):
        return UNITS.to_ps(value)
    if direction in ("ps->natural", "to_natural"):
        return UNITS.to_natural(value)
    raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class LabFrequencies:
    """Bare level energies and drive frequencies in the lab frame (meV)."""

    omega_up: float
    omega_down: float
    omega_v: float
    omega_c: float
    omega1: float
    omega2: float
    omega3: float

    @property
    def omega_updown(self):
        return self.omega_up - self.omega_down

    @classmethod
    def from_detunings(cls, delta1, delta2, delta, omega_up, omega_down, omega_v=0.0):
        """Pick drive and cavity frequencies that realise the given detunings."""
        return cls(
            omega_up=omega_up,
            omega_down=omega_down,
            omega_v=omega_v,
            omega_c=omega_down - omega_v - delta1 - delta,
            omega1=omega_up - omega_v - delta2,
            omega2=omega_up - omega_v - delta1,
            omega3=omega_down - omega_v - delta2,
        )


@dataclass(frozen=True)
class ModelParams:
    """Inputs of the quantum-dot / cavity model.

    Parameters
    ----------
    n_dots : int
        Number of quantum dots in the cavity.
    omega1, omega2, omega3 : float
        Rabi frequencies of the three classical fields (meV).
    g : float
        Dot-cavity coupling (meV).
    delta1, delta2 : float
        Optical detunings of the two Raman channels from the valence level.
    delta : float or sequence of float
        Residual two-photon cavity detuning, one entry per dot. A scalar is
        broadcast to every dot.
    photon_cutoff : int
        Largest Fock index kept, ``n_max``.
    lab_frame_freqs : LabFrequencies, optional
        Only needed for the lab-frame Hamiltonian.
    """

    n_dots: int
    omega1: float
    omega2: float
    omega3: float
    g: float
    delta1: float
    delta2: float
    delta: tuple = field(default=(0.0,))
    photon_cutoff: int = 9
    lab_frame_freqs: Optional[LabFrequencies] = None

    def __post_init__(self):
        delta = self.delta
        if isinstance(delta, (int, float)):
            delta = (float(delta),) * self.n_dots
        else:
            delta = tuple(float(d) for d in delta)
            if len(delta) == 1 and self.n_dots > 1:
                delta = delta * self.n_dots
        object.__setattr__(self, "delta", delta)
        self._validate()

    def _validate(self):
        if int(self.n_dots) != self.n_dots or self.n_dots < 1:
            raise ValueError("n_dots must be a positive integer")
        for name in ("omega1", "omega2", "omega3", "g"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative")
        for name in ("delta1", "delta2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive")
        if self.delta1 == self.delta2:
            raise ValueError("delta1 must differ from delta2")
        if len(self.delta) != self.n_dots:
            raise ValueError("delta needs one entry per dot")
        if any(not math.isfinite(d) or d <= 0 for d in self.delta):
            raise ValueError("every cavity detuning must be positive")
        if self.photon_cutoff < 2:
            raise ValueError("photon_cutoff must be at least 2")
        if self.lab_frame_freqs is not None:
            self._validate_lab_frame()

    def _validate_lab_frame(self):
        f = self.lab_frame_freqs
        scale = max(1.0, *(abs(v) for v in vars(f).values()))
        tol = 1e-12 * scale
        if abs(f.omega_updown - (f.omega1 - f.omega3)) > tol:
            raise ValueError("lab frequencies violate omega_updown = omega1 - omega3")
        for d in self.delta:
            if abs(f.omega_updown + d - (f.omega2 - f.omega_c)) > tol:
                raise ValueError(
                    "lab frequencies violate omega_updown + delta = omega2 - omega_c"
                )
        # the detunings must also match the lab frequencies they stand for
        if abs(f.omega_up - f.omega_v - f.omega2 - self.delta1) > tol:
            raise ValueError("lab frequencies inconsistent with delta1")
        if abs(f.omega_up - f.omega_v - f.omega1 - self.delta2) > tol:
            raise ValueError("lab frequencies inconsistent with delta2")

    @property
    def shared_delta(self):
        """The common cavity detuning; raises if dots disagree."""
        if len(set(self.delta)) != 1:
            raise ValueError("dots do not share one cavity detuning")
        return self.delta[0]

    def replace(self, **changes):
        kwargs = {
            "n_dots": self.n_dots,
            "omega1": self.omega1,
            "omega2": self.omega2,
            "omega3": self.omega3,
            "g": self.g,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "delta": self.delta,
            "photon_cutoff": self.photon_cutoff,
            "lab_frame_freqs": self.lab_frame_freqs,
        }
        if "n_dots" in changes and "delta" not in changes:
            kwargs["delta"] = (self.delta[0],)
        kwargs.update(changes)
        return ModelParams(**kwargs)


@dataclass(frozen=True)
class DerivedCouplings:
    a_coupling: float
    b_coupling: float


def coupling_a(g, omega2, delta1, delta):
    return 0.5 * g * omega2 * (1.0 / delta1 + 1.0 / (delta1 + delta))


def coupling_b(omega1, omega3, delta2):
    return 2.0 * omega1 * omega3 / delta2


def derive_couplings(params: ModelParams, dot_index: int = 0) -> DerivedCouplings:
    """Cavity-channel coupling ``A`` and laser-channel splitting ``B`` of a dot."""
    if not 0 <= dot_index < params.n_dots:
        raise IndexError(f"unknown dot {dot_index}")
    return DerivedCouplings(
        a_coupling=coupling_a(params.g, params.omega2, params.delta1, params.delta[dot_index]),
        b_coupling=coupling_b(params.omega1, params.omega3, params.delta2),
    )


@dataclass(frozen=True)
class ApproximationEntry:
    condition: str
    small_value: float
    large_value: float
    ratio: float
    status: str


@dataclass(frozen=True)
class ApproximationReport:
    entries: tuple
    threshold: float

    @property
    def ok(self):
        return all(e.status == "pass" for e in self.entries)

    @property
    def warnings(self):
        return [e for e in self.entries if e.status == "warn"]

    def entry(self, condition):
        for e in self.entries:
            if e.condition == condition:
                return e
        raise KeyError(condition)


DEFAULT_THRESHOLD = 0.2


def check_approximations(params: ModelParams, threshold: float = DEFAULT_THRESHOLD):
    """Quantify every "much smaller than" condition behind the effective model.

    Each entry records ``small / large``; the status is ``"warn"`` when the
    ratio exceeds ``threshold``. The worst dot (largest cavity detuning, or
    largest ``A``) is used where the conditions depend on the dot.
    """
    d1, d2 = params.delta1, params.delta2
    if d1 <= d2:
        raise ValueError("channel separation negative: delta1 must exceed delta2")
    o1, o2, o3, g = params.omega1, params.omega2, params.omega3, params.g
    delta = max(params.delta)
    sep = d1 - d2
    a = max(derive_couplings(params, i).a_coupling for i in range(params.n_dots))
    b = coupling_b(o1, o3, d2)

    rows = []
    for dname, dval in (("delta1", d1), ("delta2", d2)):
        for name, val in (("omega1", o1), ("omega2", o2), ("omega3", o3), ("g", g)):
            rows.append((f"{dname} vs {name}", val, dval))
    rows += [
        ("delta1-delta2 vs delta", delta, sep),
        ("delta1-delta2 vs omega1*omega2 mix", (d1 + d2) * o1 * o2 / (2 * d1 * d2), sep),
        ("delta1-delta2 vs omega2*omega3 mix", (d1 + d2) * o2 * o3 / (2 * d1 * d2), sep),
        ("delta1-delta2 vs omega1*g mix", (2 * d1 + delta) * o1 * g / (2 * d1 * (d1 + delta)), sep),
        ("delta1-delta2 vs omega3*g mix", (2 * d1 + delta) * o3 * g / (2 * d1 * (d1 + delta)), sep),
        ("B vs delta", delta, b),
        ("B vs A", a, b),
    ]
    entries = []
    for name, small, large in rows:
        ratio = small / large if large > 0 else math.inf
        entries.append(
            ApproximationEntry(name, small, large, ratio, "warn" if ratio > threshold else "pass")
        )
    return ApproximationReport(tuple(entries), threshold)
