"""Closed-form resource models, counted-circuit reports and reconciliation.

Two counting conventions coexist for the superconducting set: physically the
state-preparation rotations are single two-qubit gates with only virtual Z
rotations attached, but the published per-platform totals book one Z per
preparation rotation.  ``ResourceReport`` therefore carries both ``n_1q``
(the published convention) and ``n_1q_physical``.

``mu`` follows the headline convention mean-error-count = n_2q * p; the
component-level count M p is reported as ``mu_components``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .circuit import Circuit, HardwareProfile, count_gates, count_virtual, profile_for, schedule

PREP_SCHEMES = ("simple", "spin_sector")


@dataclass(frozen=True)
class ResourceReport:
    source: str                  # "closed_form" | "counted"
    gate_set: str
    v_sites: int
    n_blk: int
    n_1q: float
    n_2q: float
    n_components: float
    depth: float
    duration: float
    mu: float
    mu_components: float = math.nan
    n_1q_physical: float = math.nan
    n_virtual: float = math.nan
    sqrt_v_approximated: bool = False

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _sqrt_sites(rows: int, cols: int) -> tuple[float, bool]:
    """sqrt(V), flagged when the grid is not square (the closed forms assume
    a square layout; the geometric mean keeps them usable off-square)."""
    return math.sqrt(rows * cols), rows != cols


def block_counts(v: int, s: float, gate_set: str) -> tuple[float, float]:
    if gate_set == "silicon":
        return 4 * v * s + 7 * v - 4 * s, 8 * v * s + v - 4 * s
    return 3 * v, 4 * v * s + 2 * v - 2 * s


def prep_counts(v: int, gate_set: str, scheme: str) -> tuple[float, float]:
    if scheme == "simple":
        if gate_set == "silicon":
            return 2 * v ** 2, 2 * v ** 2
        return v ** 2, v ** 2
    if gate_set == "silicon":
        return 1.5 * v ** 2 - v, 2 * v ** 2 - 2 * v
    return v ** 2 / 2.0, 2 * v ** 2 - 2 * v


def block_duration(v: int, s: float, profile: HardwareProfile) -> float:
    if profile.gate_set == "silicon":
        return (8 * s + 5) * profile.tau_1q + (16 * s + 2) * profile.tau_2q
    return 5 * profile.tau_1q + 4 * (s + 1) * profile.tau_2q


def prep_duration(v: int, profile: HardwareProfile, scheme: str) -> float:
    if scheme == "simple":
        if profile.gate_set == "silicon":
            return (2 * v - 1) * (profile.tau_1q + 4 * profile.tau_2q)
        return (2 * v - 1) * profile.tau_2q
    if profile.gate_set == "silicon":
        return (3 * v - 2) * profile.tau_1q + (8 * v - 4) * profile.tau_2q
    return (3 * v - 2) * profile.tau_2q


def closed_form(rows: int, cols: int, n_blk: int, gate_set: str = "silicon",
                prep_scheme: str = "simple",
                profile: HardwareProfile | None = None) -> ResourceReport:
    """Evaluate the closed-form gate counts, runtime and mean error count."""
    if prep_scheme not in PREP_SCHEMES:
        raise ValueError(f"unknown preparation scheme {prep_scheme!r}")
    profile = profile or profile_for(gate_set)
    if profile.gate_set != gate_set:
        raise ValueError("profile does not match the requested gate set")
    v = rows * cols
    s, approximated = _sqrt_sites(rows, cols)
    p1, p2 = prep_counts(v, gate_set, prep_scheme)
    b1, b2 = block_counts(v, s, gate_set)
    n1 = p1 + n_blk * b1
    n2 = p2 + n_blk * b2
    duration = (prep_duration(v, profile, prep_scheme)
                + n_blk * block_duration(v, s, profile)
                + profile.tau_init + profile.tau_meas)
    return ResourceReport(
        source="closed_form", gate_set=gate_set, v_sites=v, n_blk=n_blk,
        n_1q=n1, n_2q=n2, n_components=n2, depth=math.nan,
        duration=duration, mu=n2 * profile.p_2q,
        sqrt_v_approximated=approximated,
    )


def counted(circuit: Circuit, profile: HardwareProfile) -> ResourceReport:
    """Resource report measured off a synthesized circuit.

    ``n_1q`` applies the published convention (one virtual Z per
    superconducting preparation rotation on top of the physical rotations);
    ``mu_components`` is components * p.
    """
    n1_phys, n2 = count_gates(circuit)
    n_virtual = count_virtual(circuit)
    n1 = n1_phys
    if profile.gate_set == "superconducting":
        n1 = n1_phys + sum(1 for c in circuit.components
                           if c.segment == 0 and c.kind == "givens")
    depth, duration = schedule(circuit, profile, full_run=True)
    m = len(circuit.components)
    return ResourceReport(
        source="counted", gate_set=profile.gate_set,
        v_sites=circuit.n_wires // 2, n_blk=circuit.meta.get("n_blk", 0),
        n_1q=n1, n_2q=n2, n_components=m, depth=depth, duration=duration,
        mu=n2 * profile.p_2q, mu_components=m * profile.p_2q,
        n_1q_physical=n1_phys, n_virtual=n_virtual,
    )


@dataclass(frozen=True)
class FieldDelta:
    name: str
    closed_form: float
    counted: float
    absolute: float
    relative: float
    within_tolerance: bool


COUNT_TOLERANCE = 0.02   # closed forms drop boundary terms
DURATION_TOLERANCE = 0.05  # per-component times also drop bookend rotations


def reconcile(closed: ResourceReport, measured: ResourceReport) -> list[FieldDelta]:
    """Per-field deltas between a closed-form and a counted report."""
    if closed.source == measured.source:
        raise ValueError("need one closed-form and one counted report")
    out = []
    for name, tol in (("n_1q", COUNT_TOLERANCE), ("n_2q", COUNT_TOLERANCE),
                      ("duration", DURATION_TOLERANCE)):
        a, b = getattr(closed, name), getattr(measured, name)
        absolute = abs(a - b)
        relative = absolute / abs(a) if a else (0.0 if b == 0 else math.inf)
        out.append(FieldDelta(name, a, b, absolute, relative, relative <= tol))
    return out
