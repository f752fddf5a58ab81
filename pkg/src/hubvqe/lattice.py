"""Hubbard problem instances, orbital orderings, Pauli operators and the ED oracle.

Conventions used throughout the package:

- Sites are numbered row-major on the grid: ``site = row * cols + col``.
- A canonical ordering assigns each (site, spin) orbital to one qubit wire.
  Orbitals of the same site sit on adjacent wires; sites follow a snake-fold
  path along the chosen axis.  At canonical position ``j`` the wires are
  ``(2j, 2j+1)``, with spin-up first on even positions and spin-down first on
  odd positions (the alternation is what makes the within-spin swap layers of
  the ansatz act on same-spin pairs).
- Statevector basis index: wire 0 is the most significant bit,
  ``index = sum(bit_w << (n_wires - 1 - w))``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

SPIN_UP = "up"
SPIN_DOWN = "down"
HORIZONTAL = "horizontal"
VERTICAL = "vertical"

ED_QUBIT_CAP = 14

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-Pauli product table: (left, right) -> (phase, result)
_PAULI_MUL = {
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


@dataclass(frozen=True)
class LatticeSpec:
    """An open-boundary 2D Fermi-Hubbard instance.

    ``t`` is the tunnelling energy (used as the energy unit), ``u`` the
    on-site repulsion.  Default filling is half filling with the spin
    imbalance at most one electron.
    """

    rows: int
    cols: int
    t: float = 1.0
    u: float = 4.0
    n_up: int = -1
    n_down: int = -1

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("lattice must have at least one site")
        v = self.rows * self.cols
        if self.n_up < 0:
            object.__setattr__(self, "n_up", (v + 1) // 2)
        if self.n_down < 0:
            object.__setattr__(self, "n_down", v // 2)
        if self.n_up + self.n_down > 2 * v:
            raise ValueError("more electrons than orbitals")
        if not (math.isfinite(self.t) and math.isfinite(self.u)):
            raise ValueError("t and u must be finite")

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    @property
    def n_wires(self) -> int:
        return 2 * self.n_sites

    @property
    def n_electrons(self) -> int:
        return self.n_up + self.n_down

    def site(self, row: int, col: int) -> int:
        return row * self.cols + col

    def site_rc(self, site: int) -> tuple[int, int]:
        return divmod(site, self.cols)

    def edges(self) -> list[tuple[int, int, str]]:
        """All nearest-neighbour bonds as (site_a, site_b, orientation)."""
        out = []
        for r in range(self.rows):
            for c in range(self.cols):
                s = self.site(r, c)
                if c + 1 < self.cols:
                    out.append((s, self.site(r, c + 1), HORIZONTAL))
                if r + 1 < self.rows:
                    out.append((s, self.site(r + 1, c), VERTICAL))
        return out

    @classmethod
    def from_config(cls, cfg: Mapping) -> "LatticeSpec":
        """Build from a JSON config dict; rejects unknown keys and periodic boundaries."""
        allowed = {"rows", "cols", "t", "u", "n_up", "n_down", "boundary"}
        unknown = set(cfg) - allowed
        if unknown:
            raise ValueError(f"unknown lattice config keys: {sorted(unknown)}")
        if cfg.get("boundary", "open") != "open":
            raise ValueError("only open boundaries are supported")
        return cls(
            rows=int(cfg["rows"]),
            cols=int(cfg["cols"]),
            t=float(cfg.get("t", 1.0)),
            u=float(cfg.get("u", 4.0)),
            n_up=int(cfg.get("n_up", -1)),
            n_down=int(cfg.get("n_down", -1)),
        )


@dataclass(frozen=True)
class OrbitalOrdering:
    """Bijection (site, spin) <-> wire for one snake-fold axis.

    ``site_order[j]`` is the site at canonical position ``j``; position ``j``
    owns wires ``2j`` and ``2j+1``.  ``strip_len``/``n_strips`` describe the
    snake geometry used by the swap network (strips run along the fold axis).
    """

    axis: str
    site_order: tuple[int, ...]
    strip_len: int
    n_strips: int
    _wire_of: dict = field(hash=False, compare=False, default_factory=dict)
    _orbital_of: dict = field(hash=False, compare=False, default_factory=dict)

    def __post_init__(self):
        for j, site in enumerate(self.site_order):
            first_up = j % 2 == 0
            up_wire = 2 * j if first_up else 2 * j + 1
            dn_wire = 2 * j + 1 if first_up else 2 * j
            self._wire_of[(site, SPIN_UP)] = up_wire
            self._wire_of[(site, SPIN_DOWN)] = dn_wire
            self._orbital_of[up_wire] = (site, SPIN_UP)
            self._orbital_of[dn_wire] = (site, SPIN_DOWN)

    @property
    def n_wires(self) -> int:
        return 2 * len(self.site_order)

    def wire(self, site: int, spin: str) -> int:
        return self._wire_of[(site, spin)]

    def orbital(self, wire: int) -> tuple[int, str]:
        return self._orbital_of[wire]

    def position(self, site: int) -> int:
        return self.site_order.index(site)

    def spin_wires(self, spin: str) -> tuple[int, ...]:
        return tuple(sorted(w for (s, sp), w in self._wire_of.items() if sp == spin))


def snake_ordering(spec: LatticeSpec, axis: str = HORIZONTAL) -> OrbitalOrdering:
    """Canonical snake-fold ordering along the given axis."""
    if axis not in (HORIZONTAL, VERTICAL):
        raise ValueError(f"axis must be horizontal or vertical, got {axis!r}")
    order: list[int] = []
    if axis == HORIZONTAL:
        for r in range(spec.rows):
            cols = range(spec.cols) if r % 2 == 0 else range(spec.cols - 1, -1, -1)
            order.extend(spec.site(r, c) for c in cols)
        strip_len, n_strips = spec.cols, spec.rows
    else:
        for c in range(spec.cols):
            rows = range(spec.rows) if c % 2 == 0 else range(spec.rows - 1, -1, -1)
            order.extend(spec.site(r, c) for r in rows)
        strip_len, n_strips = spec.rows, spec.cols
    return OrbitalOrdering(axis=axis, site_order=tuple(order),
                           strip_len=strip_len, n_strips=n_strips)


@dataclass(frozen=True)
class FermionTerm:
    """One Hamiltonian term: a hopping bond (per spin) or an on-site repulsion."""

    kind: str  # "hopping" | "repulsion"
    orbitals: tuple[tuple[int, str], ...]
    coefficient: float
    orientation: str = "none"
    parity_class: str = "none"

    @property
    def key(self) -> tuple:
        """Stable identity used for measurement grouping and parameter sharing."""
        if self.kind == "repulsion":
            return ("repulsion", self.orbitals[0][0])
        (a, sp), (b, _) = self.orbitals
        return ("hopping", min(a, b), max(a, b), sp)


def hubbard_terms(spec: LatticeSpec) -> list[FermionTerm]:
    """All terms of the Hubbard Hamiltonian with orientation and parity class.

    The parity class of a bond is the parity of the smaller canonical position
    of its two sites, taken under the snake ordering that runs along the
    bond's own orientation (so each class forms a commuting measurement set).
    """
    pos_h = {s: j for j, s in enumerate(snake_ordering(spec, HORIZONTAL).site_order)}
    pos_v = {s: j for j, s in enumerate(snake_ordering(spec, VERTICAL).site_order)}
    terms = [
        FermionTerm("repulsion", ((s, SPIN_UP), (s, SPIN_DOWN)), spec.u)
        for s in range(spec.n_sites)
    ]
    for a, b, orient in spec.edges():
        pos = pos_h if orient == HORIZONTAL else pos_v
        parity = "even" if min(pos[a], pos[b]) % 2 == 0 else "odd"
        for spin in (SPIN_UP, SPIN_DOWN):
            terms.append(FermionTerm("hopping", ((a, spin), (b, spin)), -spec.t,
                                     orientation=orient, parity_class=parity))
    return terms


@dataclass(frozen=True)
class PauliString:
    """Weighted tensor product of single-wire Paulis; absent wires are identity."""

    coefficient: float
    letters: tuple[tuple[int, str], ...]

    @classmethod
    def from_map(cls, coefficient: float, letters: Mapping[int, str]) -> "PauliString":
        items = tuple(sorted((int(w), p) for w, p in letters.items() if p != "I"))
        for _, p in items:
            if p not in ("X", "Y", "Z"):
                raise ValueError(f"bad Pauli letter {p!r}")
        if not math.isfinite(coefficient):
            raise ValueError("coefficient must be finite")
        return cls(float(coefficient), items)

    @property
    def letter_map(self) -> dict[int, str]:
        return dict(self.letters)

    @property
    def weight(self) -> int:
        return len(self.letters)

    def commutes_with(self, other: "PauliString") -> bool:
        mine = self.letter_map
        clashes = sum(
            1 for w, p in other.letters if w in mine and mine[w] != p
        )
        return clashes % 2 == 0

    def compose(self, other: "PauliString") -> "PauliString":
        """Operator product self * other.  Raises if the phase is imaginary."""
        phase = 1 + 0j
        out = self.letter_map
        for w, p in other.letters:
            if w not in out:
                out[w] = p
            elif out[w] == p:
                del out[w]
            else:
                ph, res = _PAULI_MUL[(out[w], p)]
                phase *= ph
                out[w] = res
        coeff = phase * self.coefficient * other.coefficient
        if abs(coeff.imag) > 1e-12 * max(1.0, abs(coeff.real)):
            raise ValueError("product has an imaginary coefficient")
        return PauliString.from_map(coeff.real, out)

    def to_dense(self, n_wires: int) -> np.ndarray:
        mat = np.array([[self.coefficient]], dtype=complex)
        letters = self.letter_map
        for w in range(n_wires):
            mat = np.kron(mat, _PAULI_MATS[letters.get(w, "I")])
        return mat

    def to_sparse(self, n_wires: int) -> sp.csr_matrix:
        mat = sp.identity(1, format="csr", dtype=complex) * self.coefficient
        letters = self.letter_map
        for w in range(n_wires):
            mat = sp.kron(mat, sp.csr_matrix(_PAULI_MATS[letters.get(w, "I")]), format="csr")
        return mat

    def eigenvalue_on_bits(self, bits: Sequence[int]) -> float:
        """Eigenvalue on a computational basis state (Z-diagonal strings only)."""
        val = self.coefficient
        for w, p in self.letters:
            if p != "Z":
                raise ValueError("only Z-diagonal strings act on bitstrings")
            val *= 1 - 2 * bits[w]
        return val


def jordan_wigner(term: FermionTerm, ordering: OrbitalOrdering) -> list[PauliString]:
    """Qubit image of one term under the given canonical ordering.

    Repulsion n_i n_j expands to the four strings (1 - Z_i)(1 - Z_j)/4 with
    the constant kept, so summing expectation values needs no side channel.
    Hopping between wires i < j gives (X_i X_j + Y_i Y_j)/2 dressed with the
    Z string on the wires strictly between them.
    """
    wires = [ordering.wire(s, sp) for s, sp in term.orbitals]
    for w in wires:
        if not 0 <= w < ordering.n_wires:
            raise ValueError(f"wire {w} outside [0, {ordering.n_wires})")
    if term.kind == "repulsion":
        i, j = sorted(wires)
        q = term.coefficient / 4.0
        return [
            PauliString.from_map(q, {}),
            PauliString.from_map(-q, {i: "Z"}),
            PauliString.from_map(-q, {j: "Z"}),
            PauliString.from_map(q, {i: "Z", j: "Z"}),
        ]
    i, j = sorted(wires)
    string = {w: "Z" for w in range(i + 1, j)}
    half = term.coefficient / 2.0
    return [
        PauliString.from_map(half, {**string, i: "X", j: "X"}),
        PauliString.from_map(half, {**string, i: "Y", j: "Y"}),
    ]


def hamiltonian_paulis(spec: LatticeSpec, ordering: OrbitalOrdering) -> list[PauliString]:
    out: list[PauliString] = []
    for term in hubbard_terms(spec):
        out.extend(jordan_wigner(term, ordering))
    return out


def parity_ops(spec: LatticeSpec, ordering: OrbitalOrdering) -> tuple[PauliString, PauliString]:
    """Electron-number parity operators per spin sector: products of Z."""
    s_up = PauliString.from_map(1.0, {w: "Z" for w in ordering.spin_wires(SPIN_UP)})
    s_dn = PauliString.from_map(1.0, {w: "Z" for w in ordering.spin_wires(SPIN_DOWN)})
    return s_up, s_dn


@dataclass(frozen=True)
class MeasurementGroup:
    """A commuting subset of Hamiltonian terms measured in one circuit run."""

    id: str
    required_ordering_axis: str
    terms: tuple[FermionTerm, ...]


GROUP_IDS = ("repulsion", "hop_h_even", "hop_h_odd", "hop_v_even", "hop_v_odd")


def measurement_groups(spec: LatticeSpec) -> list[MeasurementGroup]:
    """The five-group partition: repulsion plus even/odd bonds per orientation."""
    terms = hubbard_terms(spec)
    buckets: dict[str, list[FermionTerm]] = {g: [] for g in GROUP_IDS}
    for t in terms:
        if t.kind == "repulsion":
            buckets["repulsion"].append(t)
        else:
            tag = "h" if t.orientation == HORIZONTAL else "v"
            buckets[f"hop_{tag}_{t.parity_class}"].append(t)
    axis = {"repulsion": HORIZONTAL, "hop_h_even": HORIZONTAL, "hop_h_odd": HORIZONTAL,
            "hop_v_even": VERTICAL, "hop_v_odd": VERTICAL}
    return [MeasurementGroup(g, axis[g], tuple(buckets[g])) for g in GROUP_IDS]


# ---------------------------------------------------------------------------
# Occupation-basis fermionic construction (independent of the Pauli route)
# ---------------------------------------------------------------------------

def _bit(index: int, wire: int, n_wires: int) -> int:
    return (index >> (n_wires - 1 - wire)) & 1


def _jw_sign(index: int, wire: int, n_wires: int) -> int:
    below = index >> (n_wires - wire) if wire > 0 else 0
    return -1 if bin(below).count("1") % 2 else 1


def fermion_term_matrix(term: FermionTerm, ordering: OrbitalOrdering) -> sp.csr_matrix:
    """Sparse matrix of a term built directly from creation/annihilation rules.

    Signs come from the occupied-orbital count below the acted wire in the
    canonical order, which is the defining convention of the encoding; no
    Pauli algebra is involved, so this is an independent oracle for the
    Pauli route.
    """
    n = ordering.n_wires
    dim = 1 << n
    rows, cols, vals = [], [], []
    if term.kind == "repulsion":
        i, j = sorted(ordering.wire(s, sp) for s, sp in term.orbitals)
        for k in range(dim):
            if _bit(k, i, n) and _bit(k, j, n):
                rows.append(k)
                cols.append(k)
                vals.append(term.coefficient)
    else:
        i, j = sorted(ordering.wire(s, sp) for s, sp in term.orbitals)
        for k in range(dim):
            # a_i^dag a_j + a_j^dag a_i acting on |k>
            for src, dst in ((j, i), (i, j)):
                if _bit(k, src, n) and not _bit(k, dst, n):
                    sign = _jw_sign(k, src, n)
                    mid = k & ~(1 << (n - 1 - src))
                    sign *= _jw_sign(mid, dst, n)
                    new = mid | (1 << (n - 1 - dst))
                    rows.append(new)
                    cols.append(k)
                    vals.append(term.coefficient * sign)
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=complex)


def hamiltonian_matrix(spec: LatticeSpec, ordering: OrbitalOrdering) -> sp.csr_matrix:
    mats = [fermion_term_matrix(t, ordering) for t in hubbard_terms(spec)]
    out = mats[0]
    for m in mats[1:]:
        out = out + m
    return out


def single_particle_hamiltonian(spec: LatticeSpec) -> np.ndarray:
    """V x V hopping matrix of one spin sector of the U=0 problem."""
    h = np.zeros((spec.n_sites, spec.n_sites))
    for a, b, _ in spec.edges():
        h[a, b] = h[b, a] = -spec.t
    return h


def lowest_orbital_energies(spec: LatticeSpec) -> tuple[float, np.ndarray]:
    """Sum of the occupied U=0 single-particle energies and the full spectrum."""
    vals = np.linalg.eigvalsh(single_particle_hamiltonian(spec))
    total = vals[: spec.n_up].sum() + vals[: spec.n_down].sum()
    return float(total), vals


def exact_ground_energy(spec: LatticeSpec, max_qubits: int = ED_QUBIT_CAP) -> float:
    """Ground energy in the (n_up, n_down) particle-number sector by dense ED.

    The sector basis is obtained by bitmask filtering of the occupation basis;
    matrix elements come from the fermionic rules directly.
    """
    if spec.n_wires > max_qubits:
        raise ValueError(f"{spec.n_wires} qubits exceeds the ED cap {max_qubits}")
    ordering = snake_ordering(spec, HORIZONTAL)
    n = spec.n_wires
    up_mask = sum(1 << (n - 1 - w) for w in ordering.spin_wires(SPIN_UP))
    dn_mask = sum(1 << (n - 1 - w) for w in ordering.spin_wires(SPIN_DOWN))
    basis = [k for k in range(1 << n)
             if bin(k & up_mask).count("1") == spec.n_up
             and bin(k & dn_mask).count("1") == spec.n_down]
    index = {k: i for i, k in enumerate(basis)}
    dim = len(basis)
    if dim == 0:
        raise ValueError("empty particle-number sector")
    H = np.zeros((dim, dim))
    for term in hubbard_terms(spec):
        m = fermion_term_matrix(term, ordering).tocoo()
        for r, c, v in zip(m.row, m.col, m.data):
            if r in index and c in index:
                H[index[r], index[c]] += v.real
    return float(np.linalg.eigvalsh(H)[0])
