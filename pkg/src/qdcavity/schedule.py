"""Solving the closed-loop conditions of the controlled-phase gate.

At the gate time ``t`` the cavity loop closes (``Delta t = 2 pi``), the
laser splitting winds ``B t = 2 k pi + pi/2`` and the geometric phase is
``(A^2 / 4 Delta) t = pi/2``. With ``t = 2 pi / Delta`` the last condition
reads ``A = Delta``, and since ``A`` itself depends on ``Delta`` this is a
quadratic in ``Delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .params import DerivedCouplings, ModelParams, convert_time, coupling_a, coupling_b


class InfeasibleScheduleError(ValueError):
    """No parameter set satisfies the gate conditions within the allowed range."""


def solve_delta(g, omega2, delta1):
    """Positive root of ``Delta = (g Omega2 / 2)(1/Delta1 + 1/(Delta1 + Delta))``.

    Written as ``Delta1 Delta^2 + (Delta1^2 - g Omega2/2) Delta - g Omega2 Delta1 = 0``.
    """
    if g < 0 or omega2 < 0 or delta1 <= 0:
        raise ValueError("solve_delta needs g, omega2 >= 0 and delta1 > 0")
    c = 0.5 * g * omega2
    b = delta1**2 - c
    prod = g * omega2 * delta1  # minus the constant term
    if prod == 0:
        return 0.0
    disc = math.sqrt(b * b + 4 * delta1 * prod)
    # pick the cancellation-free form of the positive root
    if b >= 0:
        root = 2 * prod / (b + disc)
    else:
        root = (disc - b) / (2 * delta1)
    assert root > 0
    return root


@dataclass(frozen=True)
class GateSchedule:
    """Solved parameters of one controlled-phase gate on ``dot_pair``."""

    dot_pair: tuple
    k: int
    delta_solved: float
    t_gate_natural: float
    t_gate_ps: float
    couplings: DerivedCouplings
    params: ModelParams
    g_required: Optional[float] = None
    omega_product_required: Optional[float] = None

    def residuals(self):
        """Absolute residuals of the four gate conditions."""
        A, B = self.couplings.a_coupling, self.couplings.b_coupling
        d, t = self.delta_solved, self.t_gate_natural
        return {
            "loop_closure": abs(d * t - 2 * math.pi),
            "laser_winding": abs(B * t - (2 * self.k * math.pi + math.pi / 2)),
            "geometric_phase": abs(A**2 / (4 * d) * t - math.pi / 2),
            "self_consistency": abs(
                d - coupling_a(self.params.g, self.params.omega2, self.params.delta1, d)
            ),
        }


def _check_k(k):
    if int(k) != k or k < 0:
        raise InfeasibleScheduleError(f"winding number k must be a non-negative integer, got {k}")
    return int(k)


def _finish(params, k, pair, g_required=None, omega_product_required=None):
    delta = params.delta[pair[0]]
    t = 2 * math.pi / delta
    return GateSchedule(
        dot_pair=tuple(pair),
        k=k,
        delta_solved=delta,
        t_gate_natural=t,
        t_gate_ps=convert_time(t, "natural->ps"),
        couplings=DerivedCouplings(
            coupling_a(params.g, params.omega2, params.delta1, delta),
            coupling_b(params.omega1, params.omega3, params.delta2),
        ),
        params=params,
        g_required=g_required,
        omega_product_required=omega_product_required,
    )


def solve_schedule(
    omega1,
    omega2,
    omega3,
    delta1,
    delta2,
    k,
    photon_cutoff=9,
    n_dots=2,
    dot_pair=(0, 1),
    g_max=None,
):
    """Solve for the cavity coupling ``g`` (and then ``Delta``) at fixed lasers.

    The laser winding fixes ``Delta = 8 Omega1 Omega3 / (Delta2 (4k + 1))``;
    ``A = Delta`` then gives ``g`` in closed form. ``Delta`` is recomputed
    from ``g`` by :func:`solve_delta` so the returned schedule is
    self-consistent to rounding.

    Raises
    ------
    InfeasibleScheduleError
        For negative or fractional ``k``, or if ``g`` would exceed ``g_max``
        (default: ``delta2``, beyond which the valence level cannot be
        eliminated).
    """
    k = _check_k(k)
    for name, v in (("omega1", omega1), ("omega2", omega2), ("omega3", omega3),
                    ("delta1", delta1), ("delta2", delta2)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    target = 8 * omega1 * omega3 / (delta2 * (4 * k + 1))
    g = 2 * target * delta1 * (delta1 + target) / (omega2 * (2 * delta1 + target))
    if g_max is None:
        g_max = delta2
    if g > g_max:
        raise InfeasibleScheduleError(f"required g = {g:.4g} meV exceeds the limit {g_max:.4g} meV")
    delta = solve_delta(g, omega2, delta1)
    params = ModelParams(
        n_dots=n_dots, omega1=omega1, omega2=omega2, omega3=omega3, g=g,
        delta1=delta1, delta2=delta2, delta=(delta,), photon_cutoff=photon_cutoff,
    )
    return _finish(params, k, dot_pair, g_required=g)


def solve_schedule_for_lasers(
    g, omega2, delta1, delta2, k, photon_cutoff=9, n_dots=2, dot_pair=(0, 1), omega_ratio=1.0
):
    """Solve for the laser product ``Omega1 Omega3`` at fixed cavity coupling.

    ``Omega3 = omega_ratio * Omega1``.
    """
    k = _check_k(k)
    if not (g > 0 and omega2 > 0 and omega_ratio > 0):
        raise ValueError("g, omega2 and omega_ratio must be positive")
    delta = solve_delta(g, omega2, delta1)
    product = (2 * k * math.pi + math.pi / 2) * delta * delta2 / (4 * math.pi)
    omega1 = math.sqrt(product / omega_ratio)
    params = ModelParams(
        n_dots=n_dots, omega1=omega1, omega2=omega2, omega3=omega_ratio * omega1, g=g,
        delta1=delta1, delta2=delta2, delta=(delta,), photon_cutoff=photon_cutoff,
    )
    return _finish(params, k, dot_pair, omega_product_required=product)
