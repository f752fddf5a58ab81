import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from hubvqe.lattice import (HORIZONTAL, SPIN_DOWN, SPIN_UP, VERTICAL,
                            LatticeSpec, PauliString, exact_ground_energy,
                            fermion_term_matrix, hamiltonian_matrix,
                            hamiltonian_paulis, hubbard_terms, jordan_wigner,
                            lowest_orbital_energies, measurement_groups,
                            parity_ops, snake_ordering)

# values frozen from an independent dense diagonalization
ED_1X2_U4 = -0.828427124746
ED_2X2_U4 = -2.102748483462
ED_2X3_U4 = -3.619321323958


def test_spec_defaults_half_filling():
    spec = LatticeSpec(3, 3)
    assert (spec.n_up, spec.n_down) == (5, 4)
    assert spec.n_wires == 18


def test_spec_rejects_overfilling():
    with pytest.raises(ValueError):
        LatticeSpec(1, 2, n_up=3, n_down=2)


def test_from_config_rejects_unknown_keys_and_periodic():
    with pytest.raises(ValueError, match="unknown"):
        LatticeSpec.from_config({"rows": 2, "cols": 2, "wrap": True})
    with pytest.raises(ValueError, match="open"):
        LatticeSpec.from_config({"rows": 2, "cols": 2, "boundary": "periodic"})
    spec = LatticeSpec.from_config({"rows": 2, "cols": 3, "t": 1, "u": 4})
    assert (spec.n_up, spec.n_down) == (3, 3)


def test_snake_ordering_1x2_horizontal():
    ordering = snake_ordering(LatticeSpec(1, 2), HORIZONTAL)
    assert ordering.wire(0, SPIN_UP) == 0
    assert ordering.wire(0, SPIN_DOWN) == 1
    # position 1 is spin-down first (alternating interleave)
    assert ordering.wire(1, SPIN_DOWN) == 2
    assert ordering.wire(1, SPIN_UP) == 3


def test_snake_ordering_3x3_matches_drawn_layout():
    ordering = snake_ordering(LatticeSpec(3, 3), HORIZONTAL)
    assert ordering.site_order == (0, 1, 2, 5, 4, 3, 6, 7, 8)


def test_snake_ordering_2x2_vertical_is_transpose_path():
    horizontal = snake_ordering(LatticeSpec(2, 2), HORIZONTAL).site_order
    vertical = snake_ordering(LatticeSpec(2, 2), VERTICAL).site_order
    transpose = {0: 0, 1: 2, 2: 1, 3: 3}
    assert vertical == tuple(transpose[s] for s in horizontal)


def test_ordering_site_pairs_adjacent():
    ordering = snake_ordering(LatticeSpec(3, 4))
    for site in range(12):
        up, dn = ordering.wire(site, SPIN_UP), ordering.wire(site, SPIN_DOWN)
        assert abs(up - dn) == 1


@pytest.mark.parametrize("rows,cols,n_rep,n_hop", [
    (1, 2, 2, 2),
    (2, 2, 4, 8),     # edge count by brute-force enumeration: 4 edges
    (5, 5, 25, 80),
])
def test_hubbard_term_counts(rows, cols, n_rep, n_hop):
    terms = hubbard_terms(LatticeSpec(rows, cols, t=1.0, u=4.0))
    reps = [t for t in terms if t.kind == "repulsion"]
    hops = [t for t in terms if t.kind == "hopping"]
    assert len(reps) == n_rep and len(hops) == n_hop
    assert all(t.coefficient == 4.0 for t in reps)
    assert all(t.coefficient == -1.0 for t in hops)


def test_jordan_wigner_repulsion_expansion():
    spec = LatticeSpec(1, 2, u=4.0)
    ordering = snake_ordering(spec)
    term = next(t for t in hubbard_terms(spec) if t.kind == "repulsion")
    strings = jordan_wigner(term, ordering)
    as_maps = {(p.coefficient, tuple(p.letters)) for p in strings}
    assert as_maps == {
        (1.0, ()), (-1.0, ((0, "Z"),)), (-1.0, ((1, "Z"),)),
        (1.0, ((0, "Z"), (1, "Z"))),
    }


def test_jordan_wigner_adjacent_hopping_has_no_string():
    spec = LatticeSpec(1, 2)
    ordering = snake_ordering(spec)
    term = next(t for t in hubbard_terms(spec)
                if t.kind == "hopping" and t.orbitals[0][1] == SPIN_DOWN)
    strings = jordan_wigner(term, ordering)  # down orbitals sit on wires 1, 2
    letters = sorted(tuple(p.letters) for p in strings)
    assert letters == [((1, "X"), (2, "X")), ((1, "Y"), (2, "Y"))]
    assert all(p.coefficient == -0.5 for p in strings)


def test_jordan_wigner_separated_hopping_carries_z_string():
    spec = LatticeSpec(1, 2)
    ordering = snake_ordering(spec)
    term = next(t for t in hubbard_terms(spec)
                if t.kind == "hopping" and t.orbitals[0][1] == SPIN_UP)
    for p in jordan_wigner(term, ordering):  # up orbitals on wires 0 and 3
        lm = p.letter_map
        assert lm[1] == "Z" and lm[2] == "Z"
        assert lm[0] == lm[3] and lm[0] in ("X", "Y")


@pytest.mark.parametrize("rows,cols", [(1, 2), (2, 2), (2, 3)])
@pytest.mark.parametrize("axis", [HORIZONTAL, VERTICAL])
def test_jw_matches_occupation_basis_construction(rows, cols, axis):
    spec = LatticeSpec(rows, cols, t=1.0, u=4.0)
    ordering = snake_ordering(spec, axis)
    for term in hubbard_terms(spec):
        direct = fermion_term_matrix(term, ordering)
        viajw = sum(p.to_sparse(spec.n_wires) for p in jordan_wigner(term, ordering))
        assert abs(direct - viajw).max() < 1e-12


def test_spectrum_is_ordering_invariant():
    spec = LatticeSpec(2, 2, u=4.0)
    h = hamiltonian_matrix(spec, snake_ordering(spec, HORIZONTAL)).toarray()
    v = hamiltonian_matrix(spec, snake_ordering(spec, VERTICAL)).toarray()
    assert np.allclose(np.linalg.eigvalsh(h), np.linalg.eigvalsh(v), atol=1e-10)


def test_parity_ops_1x2():
    spec = LatticeSpec(1, 2)
    ordering = snake_ordering(spec)
    s_up, s_dn = parity_ops(spec, ordering)
    assert s_up.letter_map == {0: "Z", 3: "Z"}
    assert s_dn.letter_map == {1: "Z", 2: "Z"}
    total = s_up.compose(s_dn)
    assert total.letter_map == {w: "Z" for w in range(4)}
    assert total.coefficient == 1.0
    # one up electron on wire 0: odd parity
    assert s_up.eigenvalue_on_bits([1, 0, 0, 0]) == -1.0
    assert s_up.eigenvalue_on_bits([1, 0, 0, 1]) == 1.0


def test_parity_commutes_with_hamiltonian():
    spec = LatticeSpec(2, 2, u=4.0)
    ordering = snake_ordering(spec)
    s_up, s_dn = parity_ops(spec, ordering)
    for p in hamiltonian_paulis(spec, ordering):
        assert s_up.commutes_with(p) and s_dn.commutes_with(p)
    h = hamiltonian_matrix(spec, ordering)
    for s in (s_up, s_dn):
        m = s.to_sparse(spec.n_wires)
        assert abs(h @ m - m @ h).max() < 1e-12


def test_measurement_groups_partition_and_sizes():
    spec = LatticeSpec(5, 5)
    groups = measurement_groups(spec)
    sizes = {g.id: len(g.terms) for g in groups}
    assert sizes == {"repulsion": 25, "hop_h_even": 20, "hop_h_odd": 20,
                     "hop_v_even": 20, "hop_v_odd": 20}
    seen = [t.key for g in groups for t in g.terms]
    assert len(seen) == len(set(seen)) == len(hubbard_terms(spec))


def test_measurement_groups_empty_vertical_on_one_row():
    groups = {g.id: g for g in measurement_groups(LatticeSpec(1, 2))}
    assert groups["hop_v_even"].terms == ()
    assert groups["hop_v_odd"].terms == ()


@pytest.mark.parametrize("rows,cols", [(1, 3), (2, 2), (2, 3)])
def test_groups_commute_under_required_ordering(rows, cols):
    spec = LatticeSpec(rows, cols)
    for group in measurement_groups(spec):
        ordering = snake_ordering(spec, group.required_ordering_axis)
        strings = [p for t in group.terms for p in jordan_wigner(t, ordering)]
        for i in range(len(strings)):
            for j in range(i + 1, len(strings)):
                assert strings[i].commutes_with(strings[j])


def test_pauli_string_compose_rejects_imaginary_phase():
    x = PauliString.from_map(1.0, {0: "X"})
    y = PauliString.from_map(1.0, {0: "Y"})
    with pytest.raises(ValueError):
        x.compose(y)
    z = x.compose(PauliString.from_map(2.0, {0: "X"}))
    assert z.coefficient == 2.0 and z.letters == ()


def test_exact_ground_energy_noninteracting():
    assert exact_ground_energy(LatticeSpec(1, 2, u=0.0)) == pytest.approx(-2.0)


@pytest.mark.parametrize("rows,cols,value", [
    (1, 2, ED_1X2_U4), (2, 2, ED_2X2_U4), (2, 3, ED_2X3_U4),
])
def test_exact_ground_energy_frozen_values(rows, cols, value):
    assert exact_ground_energy(LatticeSpec(rows, cols, u=4.0)) == pytest.approx(value, abs=1e-9)


def test_exact_ground_energy_matches_full_spectrum_sector():
    spec = LatticeSpec(1, 3, u=4.0)
    h = hamiltonian_matrix(spec, snake_ordering(spec)).toarray().real
    ordering = snake_ordering(spec)
    n = spec.n_wires
    up_wires = set(ordering.spin_wires(SPIN_UP))
    vals = []
    for k in range(1 << n):
        bits = [(k >> (n - 1 - w)) & 1 for w in range(n)]
        nu = sum(bits[w] for w in up_wires)
        nd = sum(bits) - nu
        if (nu, nd) == (spec.n_up, spec.n_down):
            vals.append(k)
    sub = h[np.ix_(vals, vals)]
    assert exact_ground_energy(spec) == pytest.approx(np.linalg.eigvalsh(sub)[0], abs=1e-10)


def test_exact_ground_energy_respects_cap():
    with pytest.raises(ValueError):
        exact_ground_energy(LatticeSpec(2, 4))  # 16 qubits


def test_lowest_orbital_energies_2x2():
    total, vals = lowest_orbital_energies(LatticeSpec(2, 2))
    assert np.allclose(vals, [-2, 0, 0, 2], atol=1e-12)
    assert total == pytest.approx(-4.0)
