"""Ansatz synthesis: the fermionic swap network, Slater-determinant
preparation, lowering to hardware gate sets, measurement programs and
gradient probe circuits.

The swap network runs on a two-row picture of the canonical ordering:
position j owns wires (2j, 2j+1); the row that initially holds the spin-up
orbital of every site is "row 1".  One ansatz block repeats 2 * strip_len
rounds of a vertical layer (between-spin pairs, one per position) followed
by a horizontal layer (within-spin pairs, alternating families in the two
rows).  Round 1's vertical layer carries the on-site repulsion; rounds 1 and
2*strip_len carry the in-strip hopping; strip-boundary ("edge") pairs carry
the cross-strip hopping in every round, without swapping.  After the last
round every orbital is back on its starting wire.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import (BoundCircuit, Circuit, Component, Gate, ParamExpr, bind)
from .lattice import (SPIN_DOWN, SPIN_UP, LatticeSpec, MeasurementGroup,
                      OrbitalOrdering, hubbard_terms, measurement_groups,
                      single_particle_hamiltonian, snake_ordering)
from .sampling import SharingMap, sharing_map

PI = math.pi
GATE_SETS = ("silicon", "superconducting")


def _row_wire(row: int, pos: int) -> int:
    """Wire of the 2-row slot (row 0 starts holding spin-up)."""
    if row == 0:
        return 2 * pos + (pos % 2)
    return 2 * pos + 1 - (pos % 2)


@dataclass(frozen=True)
class PlannedOp:
    kind: str
    wires: tuple[int, int]
    spins: tuple[str, str]
    term_key: tuple | None
    z_wire: int


@dataclass
class SwapNetworkPlan:
    """Layered two-qubit operations of one Hamiltonian-ansatz block."""

    spec: LatticeSpec
    ordering: OrbitalOrdering
    layers: list[list[PlannedOp]]

    @property
    def ops(self) -> list[PlannedOp]:
        return [op for layer in self.layers for op in layer]


def build_swap_network_plan(spec: LatticeSpec, ordering: OrbitalOrdering) -> SwapNetworkPlan:
    v = spec.n_sites
    strip = ordering.strip_len
    rounds = 2 * strip
    neighbours = {(min(a, b), max(a, b)) for a, b, _ in spec.edges()}

    # slot occupancy: row0[j] / row1[j] = (site, spin) currently at that slot
    row0 = [ordering.orbital(_row_wire(0, j)) for j in range(v)]
    row1 = [ordering.orbital(_row_wire(1, j)) for j in range(v)]

    layers: list[list[PlannedOp]] = []
    hops_applied: set[tuple] = set()

    for rnd in range(1, rounds + 1):
        # vertical layer: between-spin pairs on every position
        layer: list[PlannedOp] = []
        for j in range(v):
            w_lo, w_hi = 2 * j, 2 * j + 1
            top, bot = row0[j], row1[j]
            occupant = {_row_wire(0, j): top, _row_wire(1, j): bot}
            spins = (occupant[w_lo][1], occupant[w_hi][1])
            assert spins[0] != spins[1], "vertical pair must straddle the spins"
            zq = w_lo
            if rnd == 1:
                assert top[0] == bot[0], "round 1 vertical pairs must share a site"
                layer.append(PlannedOp("fswap_repulsion", (w_lo, w_hi), spins,
                                       ("repulsion", top[0]), zq))
            else:
                layer.append(PlannedOp("fswap", (w_lo, w_hi), spins, None, zq))
            row0[j], row1[j] = row1[j], row0[j]
        layers.append(layer)

        # horizontal layer: row-0 pairs start at odd positions, row-1 at even
        layer = []
        for row, slots in ((0, row0), (1, row1)):
            start = 1 if row == 0 else 0
            for j in range(start, v - 1, 2):
                w1, w2 = _row_wire(row, j), _row_wire(row, j + 1)
                (sa, spa), (sb, spb) = slots[j], slots[j + 1]
                assert spa == spb, "horizontal pairs must stay within one spin"
                spins = (spa, spb)
                zq = w2
                is_edge = (j + 1) % strip == 0
                if is_edge:
                    # strip-boundary hopping of the substituted rounds puts its
                    # rotations on the outer slot, where no chain partner exists;
                    # these are the boundary rotations the closed forms bill
                    if rnd in (1, rounds):
                        zq = w1
                    key = ("hopping", min(sa, sb), max(sa, sb), spa)
                    assert (key[1], key[2]) in neighbours
                    assert key not in hops_applied
                    hops_applied.add(key)
                    layer.append(PlannedOp("hopping", (w1, w2), spins, key, zq))
                elif rnd in (1, rounds):
                    key = ("hopping", min(sa, sb), max(sa, sb), spa)
                    assert (key[1], key[2]) in neighbours
                    assert key not in hops_applied
                    hops_applied.add(key)
                    layer.append(PlannedOp("fswap_hopping", (w1, w2), spins, key, zq))
                    slots[j], slots[j + 1] = slots[j + 1], slots[j]
                else:
                    layer.append(PlannedOp("fswap", (w1, w2), spins, None, zq))
                    slots[j], slots[j + 1] = slots[j + 1], slots[j]
        layers.append(layer)

    for j in range(v):
        assert row0[j] == ordering.orbital(_row_wire(0, j)), "tracker must close"
        assert row1[j] == ordering.orbital(_row_wire(1, j))
    n_hops = sum(1 for t in hubbard_terms(spec) if t.kind == "hopping")
    assert len(hops_applied) == n_hops, "every hopping term exactly once"
    return SwapNetworkPlan(spec, ordering, layers)


def _span(spins: tuple[str, str]) -> str:
    if spins[0] != spins[1]:
        return "cross_spin"
    return "within_up" if spins[0] == SPIN_UP else "within_down"


def ha_block(spec: LatticeSpec, ordering: OrbitalOrdering, block_index: int,
             sharing: SharingMap) -> list[Component]:
    """Abstract components of one Hamiltonian-ansatz block (unlowered)."""
    plan = build_swap_network_plan(spec, ordering)
    comps = []
    for op in plan.ops:
        param = None
        if op.term_key is not None:
            param = sharing.param_id(op.term_key, block_index)
        comps.append(Component(
            kind=op.kind, wires=op.wires, spin_span=_span(op.spins), gates=[],
            param=param, spins=op.spins, term_key=op.term_key,
            segment=block_index, z_wire=op.z_wire,
        ))
    return comps


# ---------------------------------------------------------------------------
# Slater determinant preparation
# ---------------------------------------------------------------------------

@dataclass
class SlaterPlan:
    scheme: str
    rotations: list[tuple[int, int, float]]   # (wire_a, wire_b, circuit angle)
    fswap_pairs: list[tuple[int, int]]
    initial_wires: tuple[int, ...]
    orbital_matrix: np.ndarray                # target Q in schedule wire basis


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        lead = col[np.argmax(np.abs(col) > 1e-9)]
        if lead < 0:
            out[:, k] = -col
    return out


def _occupied_modes(spec: LatticeSpec) -> dict[str, np.ndarray]:
    """Lowest eigenvectors of the U=0 single-particle problem, per spin.

    When the highest occupied level is degenerate and only partially filled,
    the two spins take the degenerate shell from opposite ends, which keeps
    the reference determinant's double occupancy (and so its energy under
    the interacting Hamiltonian) low.  The choice is deterministic: levels
    ascend and eigenvector signs are fixed by their first nonzero component.
    """
    h = single_particle_hamiltonian(spec)
    vals, vecs = np.linalg.eigh(h)
    vecs = _fix_signs(vecs)

    def pick(n_occ: int, from_top: bool) -> np.ndarray:
        if n_occ == 0:
            return vecs[:, :0]
        shell = [k for k in range(len(vals)) if abs(vals[k] - vals[n_occ - 1]) < 1e-9]
        below = [k for k in range(shell[0])]
        need = n_occ - len(below)
        chosen = below + (shell[-need:] if from_top else shell[:need])
        return vecs[:, sorted(chosen)]

    return {SPIN_UP: pick(spec.n_up, False), SPIN_DOWN: pick(spec.n_down, True)}


def _w_reduce(q: np.ndarray, n_e: int) -> None:
    """Right-multiply by an orthogonal W (a filled-subspace rotation, free of
    circuit cost) zeroing q[r, c] for c < r - m, in place.  That leaves
    exactly m = n_orb - n_e entries to eliminate per column afterwards."""
    n_orb = q.shape[0]
    m = n_orb - n_e
    if m < 1 or n_e < 2:
        return
    for r in range(n_orb - 1, m, -1):
        for c in range(min(r - m, n_e - 1)):
            x, y = q[r, c], q[r, c + 1]
            if abs(x) < 1e-14:
                continue
            psi = math.atan2(x, y)
            cp, sp = math.cos(psi), math.sin(psi)
            col_c = cp * q[:, c] - sp * q[:, c + 1]
            col_d = sp * q[:, c] + cp * q[:, c + 1]
            q[:, c], q[:, c + 1] = col_c, col_d
    assert all(abs(q[r, c]) < 1e-9
               for r in range(n_orb) for c in range(min(max(0, r - m), n_e)))


def givens_schedule(q: np.ndarray) -> list[tuple[int, int, float]]:
    """Adjacent-pair elimination schedule with exactly N_e (N_orb - N_e)
    rotations, preceded by a free filled-subspace rotation W.

    After W, the eliminations reduce Q W to [diag(+-1); 0]; replayed on the
    original Q they give [O; 0] with O orthogonal, which prepares the same
    determinant.  The returned rotations are the circuit's (inverses of the
    eliminations, in reverse order).
    """
    n_orb, n_e = q.shape
    m = n_orb - n_e
    work = q.copy()
    elim: list[tuple[int, int, float]] = []
    if n_e == 0 or m == 0:
        return []
    _w_reduce(work, n_e)
    for c in range(n_e):
        for row in range(c + m, c, -1):
            x, y = work[row - 1, c], work[row, c]
            phi = 0.0 if abs(y) < 1e-14 and abs(x) < 1e-14 else math.atan2(y, x)
            cp, sp = math.cos(phi), math.sin(phi)
            rot = np.array([[cp, sp], [-sp, cp]])
            work[row - 1 : row + 1, :] = rot @ work[row - 1 : row + 1, :]
            elim.append((row - 1, row, phi))
    assert np.max(np.abs(work[n_e:, :])) < 1e-9
    assert np.max(np.abs(work[:n_e, :] - np.diag(np.diag(work[:n_e, :])))) < 1e-9
    return [(a, b, -phi) for (a, b, phi) in reversed(elim)]


def replay_schedule(q: np.ndarray, circuit_rotations) -> np.ndarray:
    """Apply the elimination rotations implied by a circuit schedule to Q."""
    work = q.copy()
    for a, b, angle in reversed(circuit_rotations):
        phi = -angle
        cp, sp = math.cos(phi), math.sin(phi)
        rot = np.array([[cp, sp], [-sp, cp]])
        work[a : b + 1, :] = rot @ work[a : b + 1, :]
    return work


def compute_slater_plan(spec: LatticeSpec, scheme: str = "simple",
                        ordering: OrbitalOrdering | None = None) -> SlaterPlan:
    if scheme not in ("simple", "spin_sector"):
        raise ValueError(f"unknown preparation scheme {scheme!r}")
    ordering = ordering or snake_ordering(spec)
    modes = _occupied_modes(spec)
    v, n_e = spec.n_sites, spec.n_electrons

    if scheme == "simple":
        q = np.zeros((spec.n_wires, n_e))
        col = 0
        for spin in (SPIN_UP, SPIN_DOWN):
            block = modes[spin]
            for k in range(block.shape[1]):
                for site in range(v):
                    q[ordering.wire(site, spin), col] = block[site, k]
                col += 1
        rotations = givens_schedule(q)
        return SlaterPlan("simple", rotations, [], tuple(range(n_e)), q)

    # spin-sector scheme: separate blocks, then an fSWAP cascade to the
    # interleaved ordering of the ansatz
    q = np.zeros((spec.n_wires, n_e))
    rotations: list[tuple[int, int, float]] = []
    offsets = {SPIN_UP: 0, SPIN_DOWN: v}
    for spin in (SPIN_UP, SPIN_DOWN):
        block = modes[spin]
        qs = np.zeros((v, block.shape[1]))
        for k in range(block.shape[1]):
            for pos, site in enumerate(ordering.site_order):
                qs[pos, k] = block[site, k]
        off = offsets[spin]
        rotations.extend((a + off, b + off, ang) for a, b, ang in givens_schedule(qs))
        col0 = 0 if spin == SPIN_UP else spec.n_up
        q[off : off + v, col0 : col0 + block.shape[1]] = qs

    # occupancy in the block ordering: wire w<V holds (site_order[w], up)
    arrangement = [(ordering.site_order[w], SPIN_UP) for w in range(v)]
    arrangement += [(ordering.site_order[w], SPIN_DOWN) for w in range(v)]
    target = {orb: ordering.wire(*orb) for orb in arrangement}
    fswaps: list[tuple[int, int]] = []
    parity = 0
    while any(target[orb] != w for w, orb in enumerate(arrangement)):
        moved = False
        for w in range(parity, spec.n_wires - 1, 2):
            if target[arrangement[w]] > target[arrangement[w + 1]]:
                arrangement[w], arrangement[w + 1] = arrangement[w + 1], arrangement[w]
                fswaps.append((w, w + 1))
                moved = True
        parity ^= 1
        if not moved and all(target[orb] == w for w, orb in enumerate(arrangement)):
            break
    initial = tuple(range(spec.n_up)) + tuple(range(v, v + spec.n_down))
    return SlaterPlan("spin_sector", rotations, fswaps, initial, q)


def slater_prep(spec: LatticeSpec, scheme: str = "simple",
                ordering: OrbitalOrdering | None = None) -> Circuit:
    """Abstract state-preparation circuit (Givens components, plus the
    reordering fSWAP cascade for the spin-sector scheme)."""
    ordering = ordering or snake_ordering(spec)
    plan = compute_slater_plan(spec, scheme, ordering)
    comps: list[Component] = []

    def spin_at(w: int) -> str:
        if plan.scheme == "simple":
            return ordering.orbital(w)[1]
        return SPIN_UP if w < spec.n_sites else SPIN_DOWN

    for a, b, angle in plan.rotations:
        spins = (spin_at(a), spin_at(b))
        comps.append(Component("givens", (a, b), _span(spins), [],
                               param=None, spins=spins, segment=0,
                               term_key=("givens_angle", angle)))
    if plan.fswap_pairs:
        arrangement = [(ordering.site_order[w % spec.n_sites],
                        SPIN_UP if w < spec.n_sites else SPIN_DOWN)
                       for w in range(spec.n_wires)]
        for a, b in plan.fswap_pairs:
            spins = (arrangement[a][1], arrangement[b][1])
            comps.append(Component("fswap", (a, b), _span(spins), [],
                                   param=None, spins=spins, segment=0))
            arrangement[a], arrangement[b] = arrangement[b], arrangement[a]
    circ = Circuit(n_wires=spec.n_wires, components=comps, n_params=0,
                   meta={"initial_wires": plan.initial_wires,
                         "ordering_axis": ordering.axis,
                         "prep_scheme": scheme})
    return circ


# ---------------------------------------------------------------------------
# Lowering to hardware gate sets
# ---------------------------------------------------------------------------

def _silicon_body(comp: Component, zq: int) -> tuple[list[Gate], bool]:
    """(body gates without bookends, has_inherent_leading_bookend)."""
    a, b = comp.wires
    o = a if zq == b else b
    k = comp.param

    def zr(wire, aco, bco, par=k):
        return Gate("z_rot", (wire,), ParamExpr(aco, bco, par if aco else None))

    swap32 = Gate("fixed_swap_power", (a, b), ParamExpr.const(3 * PI / 2))
    sq = Gate("fixed_swap_power", (a, b), ParamExpr.const(PI / 2))

    if comp.kind == "hopping":
        return [swap32, zr(o, 1.0, 0.0), zr(zq, -1.0, 0.0), sq], True
    if comp.kind == "fswap":
        return [swap32, zr(o, 0.0, PI), sq], True
    if comp.kind == "fswap_hopping":
        return [swap32, zr(o, 1.0, PI), zr(zq, -1.0, 0.0), sq], True
    if comp.kind == "repulsion":
        return [Gate("partial_swap", (a, b), ParamExpr.affine(2.0, k)),
                zr(zq, 0.0, PI / 2), swap32, zr(o, -2.0, 0.0), sq], False
    if comp.kind == "fswap_repulsion":
        return [Gate("partial_swap", (a, b), ParamExpr.affine(2.0, k)),
                zr(zq, 0.0, PI / 2), swap32, zr(o, -2.0, PI), sq], False
    if comp.kind == "givens":
        phi = comp.term_key[1]
        return [swap32,
                Gate("z_rot", (a,), ParamExpr.const(-phi)),
                Gate("z_rot", (b,), ParamExpr.const(phi)),
                sq], False
    raise ValueError(f"unknown component kind {comp.kind!r}")


def _superconducting_gates(comp: Component) -> list[Gate]:
    a, b = comp.wires
    k = comp.param

    def vz(wire, aco, bco):
        return Gate("z_rot", (wire,), ParamExpr(aco, bco, k if aco else None),
                    virtual=True)

    def xr(wire, aco, bco):
        return Gate("x_rot", (wire,), ParamExpr(aco, bco, k if aco else None))

    iswap = Gate("partial_iswap", (a, b), ParamExpr.const(-PI / 2))

    if comp.kind == "hopping":
        return [Gate("partial_iswap", (a, b), ParamExpr.affine(1.0, k))]
    if comp.kind == "fswap":
        return [iswap, vz(a, 0.0, -PI / 2), vz(b, 0.0, -PI / 2)]
    if comp.kind == "fswap_hopping":
        return [Gate("partial_iswap", (a, b), ParamExpr.affine(1.0, k, -PI / 2)),
                vz(a, 0.0, -PI / 2), vz(b, 0.0, -PI / 2)]
    if comp.kind == "repulsion":
        return [vz(a, -1.0, PI), vz(b, -1.0, PI), iswap, xr(b, 0.0, PI / 2),
                iswap, xr(a, 1.0, PI), iswap, xr(b, 0.0, PI / 2), iswap]
    if comp.kind == "fswap_repulsion":
        return [vz(a, -1.0, -PI / 2), vz(b, -1.0, -PI / 2), xr(b, 0.0, PI / 2),
                iswap, xr(a, 1.0, PI), iswap, xr(b, 0.0, PI / 2), iswap]
    if comp.kind == "givens":
        phi = comp.term_key[1]
        return [vz(b, 0.0, PI / 2),
                Gate("partial_iswap", (a, b), ParamExpr.const(phi)),
                vz(b, 0.0, -PI / 2)]
    raise ValueError(f"unknown component kind {comp.kind!r}")


_BOOKENDED = ("hopping", "fswap", "fswap_hopping", "repulsion", "fswap_repulsion")


def _placement_wire(comp: Component) -> int:
    """Bookend placement wire: the network's choice when recorded, otherwise
    the even wire of a between-spin pair or the higher wire of a within-spin
    pair.  Every even wire except wire 0 then hosts one bookend per layer,
    so consecutive layers cancel maximally."""
    if comp.z_wire is not None:
        return comp.z_wire
    a, b = comp.wires
    if b == a + 1 and a % 2 == 0:  # between-spin pair at position a // 2
        return a
    return b


def _lower_one(comp: Component, gates: list[Gate]) -> Component:
    return Component(comp.kind, comp.wires, comp.spin_span, gates, comp.param,
                     comp.spins, comp.term_key, comp.segment, comp.z_wire)


def lower(components: list[Component], gate_set: str, cancel: bool = True) -> Circuit:
    """Expand components into gates for one gate set.

    For silicon, bookend Z_{pi/2}/Z_{-pi/2} pairs on the placement wire are
    cancelled whenever a component's bookend directly follows the previous
    trailing bookend on that wire with nothing in between; the scope of the
    pass is the component list it is given (one preparation or one block).
    Superconducting circuits mark every Z rotation virtual.

    With ``cancel`` off every component keeps its own bookends, so component
    gate lists implement exactly the defining two-qubit unitaries; gradient
    probes require that form (cancellation shifts component boundaries by
    half a bookend pair without changing the product).
    """
    if gate_set not in GATE_SETS:
        raise ValueError(f"unknown gate set {gate_set!r}")
    lowered: list[Component] = []
    n_wires = 0
    if gate_set == "superconducting":
        for comp in components:
            lowered.append(_lower_one(comp, _superconducting_gates(comp)))
            n_wires = max(n_wires, max(comp.wires) + 1)
        return Circuit(n_wires=n_wires, components=lowered,
                       meta={"bookends_cancelled": False})

    pending: dict[int, tuple[list[Gate], Gate]] = {}
    for comp in components:
        zq = _placement_wire(comp)
        body, inherent_leading = _silicon_body(comp, zq)
        gates: list[Gate] = []
        if comp.kind in _BOOKENDED:
            prior = pending.pop(zq, None) if cancel else None
            if prior is not None:
                prior[0].remove(prior[1])  # cancel the pi/2 pair
                if not inherent_leading:
                    gates.append(Gate("z_rot", (zq,), ParamExpr.const(-PI / 2)))
            elif inherent_leading:
                gates.append(Gate("z_rot", (zq,), ParamExpr.const(PI / 2)))
        gates.extend(body)
        new = _lower_one(comp, gates)
        for w in comp.wires:
            pending.pop(w, None)
        if comp.kind in _BOOKENDED:
            trailing = Gate("z_rot", (zq,), ParamExpr.const(-PI / 2))
            new.gates.append(trailing)
            pending[zq] = (new.gates, trailing)
        lowered.append(new)
        n_wires = max(n_wires, max(comp.wires) + 1)
    return Circuit(n_wires=n_wires, components=lowered,
                   meta={"bookends_cancelled": cancel})


def full_ansatz(spec: LatticeSpec, n_blk: int, gate_set: str = "silicon",
                ordering: OrbitalOrdering | None = None, scheme: str = "simple",
                sharing: SharingMap | None = None, cancel: bool = True) -> Circuit:
    """State preparation followed by n_blk ansatz blocks, lowered.

    The bookend-cancellation pass is scoped per segment, matching the
    per-block closed-form gate counts.
    """
    if n_blk < 0:
        raise ValueError("n_blk must be non-negative")
    ordering = ordering or snake_ordering(spec)
    sharing = sharing or sharing_map(spec, max(n_blk, 1))
    prep = slater_prep(spec, scheme, ordering)
    segments = [prep.components]
    for b in range(1, n_blk + 1):
        segments.append(ha_block(spec, ordering, b, sharing))
    lowered_comps: list[Component] = []
    for seg in segments:
        lowered_comps.extend(lower(seg, gate_set, cancel=cancel).components)
    circ = Circuit(
        n_wires=spec.n_wires, components=lowered_comps,
        n_params=sharing.n_para if n_blk else 0,
        param_meta={"n_classes": sharing.n_classes, "n_blocks": sharing.n_blocks},
        meta={**prep.meta, "gate_set": gate_set, "n_blk": n_blk,
              "bookends_cancelled": cancel and gate_set == "silicon"},
    )
    circ.validate()
    return circ


# ---------------------------------------------------------------------------
# Measurement programs
# ---------------------------------------------------------------------------

@dataclass
class MeasurementMasks:
    """Classical post-processing tables for one group's circuit run.

    Bit b on wire w gives the Z eigenvalue z_w = 1 - 2 b.  A Bell gadget
    (CNOT a->b, H a) on a pair reports xx = z_a, yy = -z_a z_b, zz = z_b.
    Term and parity values are products over ('z', wire) and
    ('zz', gadget_index) references.
    """

    gadgets: list[tuple[int, int]]
    terms: list[dict]
    parity_up: list[tuple]
    parity_down: list[tuple]

    def _z(self, bits: list[int], ref: tuple) -> float:
        kind, idx = ref
        if kind == "z":
            return 1.0 - 2.0 * bits[idx]
        a, b = self.gadgets[idx]
        return 1.0 - 2.0 * bits[b]  # zz of the gadget

    def term_values(self, bits: list[int]) -> dict:
        out = {}
        for spec in self.terms:
            if spec["kind"] == "repulsion":
                i, j = spec["wires"]
                zi, zj = 1 - 2 * bits[i], 1 - 2 * bits[j]
                out[spec["key"]] = spec["coeff"] / 4.0 * (1 - zi - zj + zi * zj)
            else:
                g = spec["gadget"]
                a, b = self.gadgets[g]
                za, zb = 1 - 2 * bits[a], 1 - 2 * bits[b]
                xx, yy = za, -za * zb
                string = 1.0
                for ref in spec["interior"]:
                    string *= self._z(bits, ref)
                out[spec["key"]] = spec["coeff"] / 2.0 * (xx + yy) * string
        return out

    def parities(self, bits: list[int]) -> tuple[int, int]:
        up = dn = 1.0
        for ref in self.parity_up:
            up *= self._z(bits, ref)
        for ref in self.parity_down:
            dn *= self._z(bits, ref)
        return int(round(up)), int(round(dn))


@dataclass
class MeasurementProgram:
    group_id: str
    circuit: BoundCircuit | None
    masks: MeasurementMasks | None
    ordering: OrbitalOrdering | None

    @property
    def empty(self) -> bool:
        return self.circuit is None


def _parity_refs(wires, gadget_index: dict, used: set) -> list[tuple]:
    refs = []
    wires = set(wires)
    for (a, b), gi in gadget_index.items():
        if a in wires and b in wires:
            refs.append(("zz", gi))
            used.update((a, b))
    refs.extend(("z", w) for w in sorted(wires - used))
    return refs


def measurement_program(spec: LatticeSpec, group: MeasurementGroup,
                        theta, n_blk: int, gate_set: str = "silicon",
                        scheme: str = "simple",
                        sharing: SharingMap | None = None) -> MeasurementProgram:
    """Ansatz under the group's required ordering plus basis-change gadgets.

    The same parameter vector drives both orderings: shared ids are keyed by
    term identity, not by gate position.
    """
    if not group.terms:
        return MeasurementProgram(group.id, None, None, None)
    ordering = snake_ordering(spec, group.required_ordering_axis)
    circ = full_ansatz(spec, n_blk, gate_set, ordering, scheme, sharing)
    gadgets: list[tuple[int, int]] = []
    gadget_index: dict[tuple[int, int], int] = {}
    term_specs: list[dict] = []

    if group.id == "repulsion":
        for t in group.terms:
            i, j = sorted(ordering.wire(s, sp) for s, sp in t.orbitals)
            term_specs.append({"kind": "repulsion", "key": t.key,
                               "coeff": t.coefficient, "wires": (i, j)})
    else:
        for t in group.terms:
            i, j = sorted(ordering.wire(s, sp) for s, sp in t.orbitals)
            gadget_index[(i, j)] = len(gadgets)
            gadgets.append((i, j))
        gadget_wires = {w: gi for gi, (a, b) in enumerate(gadgets) for w in (a, b)}
        for t in group.terms:
            i, j = sorted(ordering.wire(s, sp) for s, sp in t.orbitals)
            interior: list[tuple] = []
            inside = set(range(i + 1, j))
            covered: set[int] = set()
            for (a, b), gi in gadget_index.items():
                if a in inside and b in inside:
                    interior.append(("zz", gi))
                    covered.update((a, b))
            for w in sorted(inside - covered):
                if w in gadget_wires:
                    raise ValueError("a gadget pair straddles a hopping Z string")
                interior.append(("z", w))
            term_specs.append({"kind": "hopping", "key": t.key,
                               "coeff": t.coefficient,
                               "gadget": gadget_index[(i, j)],
                               "interior": interior})

    used_up: set[int] = set()
    used_dn: set[int] = set()
    masks = MeasurementMasks(
        gadgets=gadgets, terms=term_specs,
        parity_up=_parity_refs(ordering.spin_wires(SPIN_UP), gadget_index, used_up),
        parity_down=_parity_refs(ordering.spin_wires(SPIN_DOWN), gadget_index, used_dn),
    )
    tail = []
    for a, b in gadgets:
        tail.append(Gate("cnot", (a, b)))
        tail.append(Gate("hadamard", (a,)))
    circ.tail = tail
    return MeasurementProgram(group.id, bind(circ, theta), masks, ordering)


def measurement_programs(spec: LatticeSpec, theta, n_blk: int,
                         gate_set: str = "silicon", scheme: str = "simple",
                         sharing: SharingMap | None = None) -> list[MeasurementProgram]:
    sharing = sharing or sharing_map(spec, max(n_blk, 1))
    return [measurement_program(spec, g, theta, n_blk, gate_set, scheme, sharing)
            for g in measurement_groups(spec)]


# ---------------------------------------------------------------------------
# Gradient probe circuits
# ---------------------------------------------------------------------------

# Hermitian-unitary generator factors of each parametrized component, after
# commuting through the fSWAP part: the gate is exp(-i beta theta F) per factor.
_PROBE_FACTORS = {
    "hopping": ((0.5, "xx_rot"), (0.5, "yy_rot")),
    "fswap_hopping": ((0.5, "yy_rot"), (0.5, "xx_rot")),
    "repulsion": ((-1.0, "czgen_rot"),),
    "fswap_repulsion": ((-1.0, "czgen_rot"),),
}


@dataclass(frozen=True)
class ProbeCircuit:
    circuit: BoundCircuit
    weight: float      # beta of the factor
    sign: int          # +1 for the e^{-i pi/4 F} insertion
    component_index: int


def gradient_probe_circuits(bound: BoundCircuit, param: int) -> list[ProbeCircuit]:
    """Probe circuit pairs whose weighted expectation differences sum to the
    derivative with respect to one shared parameter.

    Each gate instance owning the parameter contributes one +/- pair per
    Hermitian-unitary factor of its generator, inserted right after the
    component; with N_sh owning gates of a single-factor kind that is
    2 N_sh circuits.
    """
    circ = bound.circuit
    if circ.meta.get("bookends_cancelled", False):
        raise ValueError("probe circuits need a lowering with cancel=False: "
                         "cancellation shifts component boundaries")
    owners = [i for i, c in enumerate(circ.components) if c.param == param]
    if not owners:
        raise ValueError(f"parameter {param} owns no gates")
    probes: list[ProbeCircuit] = []
    for idx in owners:
        comp = circ.components[idx]
        if comp.kind not in _PROBE_FACTORS:
            raise ValueError(f"component kind {comp.kind!r} is not parametrized")
        for beta, kind in _PROBE_FACTORS[comp.kind]:
            for sign in (+1, -1):
                comps = list(circ.components)
                probe_gate = Gate(kind, comp.wires, ParamExpr.const(sign * PI / 2))
                comps[idx] = Component(comp.kind, comp.wires, comp.spin_span,
                                       comp.gates + [probe_gate], comp.param,
                                       comp.spins, comp.term_key, comp.segment)
                new = Circuit(circ.n_wires, comps, list(circ.tail),
                              circ.n_params, circ.param_meta, circ.meta)
                probes.append(ProbeCircuit(BoundCircuit(new, bound.theta),
                                           beta, sign, idx))
    return probes
