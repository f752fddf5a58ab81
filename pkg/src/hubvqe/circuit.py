"""Parametrized circuit IR: affine angle expressions, two-qubit components,
gate counting and ASAP scheduling.

Angle conventions (fixed by the gate-set decompositions and verified against
dense matrices in the tests):

- ``z_rot``/``x_rot`` with angle phi apply exp(-i phi P / 2).
- ``partial_swap``/``fixed_swap_power`` with swap-angle alpha apply
  P_+ + e^{i alpha} P_-  (alpha = pi is a full SWAP, pi/2 a sqrt-SWAP).
- ``partial_iswap`` with angle theta applies exp(-i theta (XX + YY) / 2);
  the fixed iSWAP is theta = -pi/2.

Scheduling bills every rotation-like gate at one time unit per pi/2 of
nominal angle: an affine angle a*theta + b costs |a| + |b|/(pi/2) units
(variable parts average one unit per unit slope), times tau_1q or tau_2q.
Virtual Z rotations cost nothing and are excluded from the 1q gate count.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

TWO_OVER_PI = 2.0 / math.pi

ONE_WIRE_KINDS = frozenset({"z_rot", "x_rot", "hadamard", "pauli_x", "pauli_y", "pauli_z"})
TWO_WIRE_KINDS = frozenset({"partial_swap", "fixed_swap_power", "partial_iswap",
                            "cnot", "xx_rot", "yy_rot", "czgen_rot"})
COMPONENT_KINDS = ("repulsion", "hopping", "fswap", "fswap_hopping",
                   "fswap_repulsion", "givens")


@dataclass(frozen=True)
class ParamExpr:
    """Affine angle a * theta[param] + b; param None means a constant."""

    a: float = 0.0
    b: float = 0.0
    param: int | None = None

    def __post_init__(self):
        if self.param is None and self.a != 0.0:
            raise ValueError("variable part requires a parameter id")

    @classmethod
    def const(cls, value: float) -> "ParamExpr":
        return cls(0.0, float(value), None)

    @classmethod
    def affine(cls, a: float, param: int, b: float = 0.0) -> "ParamExpr":
        return cls(float(a), float(b), int(param))

    @property
    def is_constant(self) -> bool:
        return self.param is None

    def evaluate(self, theta: Sequence[float]) -> float:
        if self.param is None:
            return self.b
        val = self.a * theta[self.param] + self.b
        if not math.isfinite(val):
            raise ValueError("angle evaluated to a non-finite value")
        return val

    @property
    def cost_units(self) -> float:
        """Nominal duration in pi/2 units: slope counts 1 unit, offset |b|/(pi/2)."""
        return abs(self.a) + abs(self.b) * TWO_OVER_PI


@dataclass(frozen=True)
class Gate:
    kind: str
    wires: tuple[int, ...]
    angle: ParamExpr = field(default_factory=lambda: ParamExpr.const(0.0))
    virtual: bool = False

    def __post_init__(self):
        if self.kind in ONE_WIRE_KINDS:
            if len(self.wires) != 1:
                raise ValueError(f"{self.kind} takes one wire")
        elif self.kind in TWO_WIRE_KINDS:
            if len(self.wires) != 2 or self.wires[0] == self.wires[1]:
                raise ValueError(f"{self.kind} takes two distinct wires")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")

    @property
    def n_wires(self) -> int:
        return len(self.wires)


@dataclass
class Component:
    """A two-qubit building block (interaction, fSWAP or Givens rotation).

    ``spins`` records which spin's orbital occupied each wire when the
    component fires; it drives the error-detectability classification.
    """

    kind: str
    wires: tuple[int, int]
    spin_span: str  # "within_up" | "within_down" | "cross_spin"
    gates: list[Gate]
    param: int | None = None
    spins: tuple[str, str] = ("up", "down")
    term_key: tuple | None = None
    segment: int = 0  # 0 = state prep, k >= 1 = ansatz block k
    z_wire: int | None = None  # bookend placement chosen by the network

    @property
    def n_two_qubit_gates(self) -> int:
        return sum(1 for g in self.gates if g.n_wires == 2)


@dataclass
class Circuit:
    """Ordered components plus an optional tail of basis-change gates.

    Every two-qubit gate of the ansatz belongs to exactly one component; the
    tail holds measurement gadgets, which are excluded from ansatz counts and
    from the noise model.
    """

    n_wires: int
    components: list[Component]
    tail: list[Gate] = field(default_factory=list)
    n_params: int = 0
    param_meta: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def gates(self, include_tail: bool = True) -> Iterator[Gate]:
        for comp in self.components:
            yield from comp.gates
        if include_tail:
            yield from self.tail

    def validate(self) -> None:
        for g in self.gates():
            for w in g.wires:
                if not 0 <= w < self.n_wires:
                    raise ValueError(f"wire {w} out of range")
        for comp in self.components:
            for g in comp.gates:
                if g.n_wires == 2 and set(g.wires) != set(comp.wires):
                    raise ValueError("two-qubit gate escapes its component")

    def segment_components(self, segment: int) -> list[Component]:
        return [c for c in self.components if c.segment == segment]


@dataclass(frozen=True)
class BoundCircuit:
    """A circuit together with a full parameter binding."""

    circuit: Circuit
    theta: tuple[float, ...]

    def angle(self, gate: Gate) -> float:
        return gate.angle.evaluate(self.theta)


def bind(circuit: Circuit, theta: Sequence[float]) -> BoundCircuit:
    theta = tuple(float(x) for x in theta)
    if len(theta) != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters, got {len(theta)}")
    for g in circuit.gates():
        g.angle.evaluate(theta)  # raises on non-finite values
    return BoundCircuit(circuit, theta)


@dataclass(frozen=True)
class HardwareProfile:
    """Gate timings and the two-qubit depolarizing probability of a platform."""

    gate_set: str  # "silicon" | "superconducting"
    tau_1q: float
    tau_2q: float
    tau_init: float
    tau_meas: float
    p_2q: float = 1e-4
    virtual_z: bool = False

    def __post_init__(self):
        if min(self.tau_1q, self.tau_2q, self.tau_init, self.tau_meas) < 0:
            raise ValueError("durations must be non-negative")
        if not 0 <= self.p_2q <= 1:
            raise ValueError("p_2q must be a probability")


SILICON = HardwareProfile("silicon", tau_1q=0.1e-6, tau_2q=10e-9,
                          tau_init=50e-6, tau_meas=50e-6, p_2q=1e-4)
SUPERCONDUCTING = HardwareProfile("superconducting", tau_1q=20e-9, tau_2q=200e-9,
                                  tau_init=100e-9, tau_meas=100e-9, p_2q=1e-4,
                                  virtual_z=True)


def profile_for(gate_set: str) -> HardwareProfile:
    try:
        return {"silicon": SILICON, "superconducting": SUPERCONDUCTING}[gate_set]
    except KeyError:
        raise ValueError(f"unknown gate set {gate_set!r}") from None


def count_gates(circuit: Circuit, include_tail: bool = False) -> tuple[int, int]:
    """(n_1q, n_2q) over the ansatz components; virtual Z rotations excluded."""
    n1 = n2 = 0
    for g in circuit.gates(include_tail=include_tail):
        if g.n_wires == 2:
            n2 += 1
        elif not g.virtual:
            n1 += 1
    return n1, n2


def count_virtual(circuit: Circuit, include_tail: bool = False) -> int:
    return sum(1 for g in circuit.gates(include_tail=include_tail)
               if g.n_wires == 1 and g.virtual)


def _gate_cost(gate: Gate, profile: HardwareProfile) -> float:
    if gate.virtual:
        return 0.0
    if gate.kind in ("hadamard", "pauli_x", "pauli_y", "pauli_z"):
        return profile.tau_1q
    if gate.kind == "cnot":
        return profile.tau_2q
    base = profile.tau_1q if gate.n_wires == 1 else profile.tau_2q
    return gate.angle.cost_units * base


def _component_duration(comp: Component, profile: HardwareProfile) -> float:
    free = {w: 0.0 for w in comp.wires}
    for g in comp.gates:
        start = max(free[w] for w in g.wires)
        end = start + _gate_cost(g, profile)
        for w in g.wires:
            free[w] = end
    return max(free.values(), default=0.0)


def schedule(circuit: Circuit, profile: HardwareProfile,
             full_run: bool = False, include_tail: bool = False) -> tuple[int, float]:
    """ASAP depth (component-granularity layers) and wall-clock duration.

    Components are scheduled as atomic units: a unit starts once all its
    wires are free and occupies them for its internal ASAP duration.  Tail
    gates, when included, are scheduled the same way as single-gate units.
    """
    units: list[tuple[tuple[int, ...], float]] = [
        (comp.wires, _component_duration(comp, profile)) for comp in circuit.components
    ]
    if include_tail:
        units.extend((g.wires, _gate_cost(g, profile)) for g in circuit.tail)
    free = [0.0] * circuit.n_wires
    layer = [0] * circuit.n_wires
    depth = 0
    for wires, dur in units:
        start = max((free[w] for w in wires), default=0.0)
        lay = 1 + max((layer[w] for w in wires), default=0)
        for w in wires:
            free[w] = start + dur
            layer[w] = lay
        depth = max(depth, lay)
    duration = max(free, default=0.0)
    if full_run:
        duration += profile.tau_init + profile.tau_meas
    return depth, duration


# ---------------------------------------------------------------------------
# Serialization: one gate per JSON record, stable field names (see README)
# ---------------------------------------------------------------------------

def circuit_records(circuit: Circuit) -> list[dict]:
    records = []
    for ci, comp in enumerate(circuit.components):
        for g in comp.gates:
            records.append({
                "kind": g.kind, "wires": list(g.wires),
                "angle": {"a": g.angle.a, "b": g.angle.b, "param": g.angle.param},
                "virtual": g.virtual, "component": ci,
            })
    for g in circuit.tail:
        records.append({
            "kind": g.kind, "wires": list(g.wires),
            "angle": {"a": g.angle.a, "b": g.angle.b, "param": g.angle.param},
            "virtual": g.virtual, "component": None,
        })
    return records


def write_circuit_jsonl(circuit: Circuit, path: str) -> None:
    header = {
        "n_wires": circuit.n_wires, "n_params": circuit.n_params,
        "n_components": len(circuit.components), "meta": circuit.meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in circuit_records(circuit):
            fh.write(json.dumps(rec) + "\n")
