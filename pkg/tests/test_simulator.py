import math

import numpy as np
import pytest

from hubvqe.circuit import Circuit, Component, Gate, ParamExpr, bind
from hubvqe.lattice import (SPIN_DOWN, SPIN_UP, LatticeSpec, PauliString,
                            exact_ground_energy, hamiltonian_paulis,
                            lowest_orbital_energies, parity_ops, snake_ordering)
from hubvqe.mitigation import MitigationPlan, pass_probabilities
from hubvqe.sampling import sharing_map
from hubvqe.simulator import (AnsatzEngine, NoiseSpec, ProgramSampler,
                              apply, apply_gate, basis_state, energy,
                              expectation, expectation_sum, gate_matrix,
                              initial_state, mitigated_energy, noisy_trajectory,
                              run, sample, sampled_energy, vqe, _shot_rng)
from hubvqe.synthesis import full_ansatz, measurement_programs

ED_1X2_U4 = -0.828427124746


def test_basis_state_and_cap():
    state = basis_state(3, (0, 2))
    assert state[0b101] == 1.0
    with pytest.raises(ValueError):
        basis_state(16, ())


def test_apply_identity_and_inverse_roundtrip():
    spec = LatticeSpec(1, 2)
    circ = full_ansatz(spec, 1)
    rng = np.random.default_rng(0)
    theta = rng.uniform(-1, 1, circ.n_params)
    bound = bind(circ, theta)
    state = run(bound)
    # undo gate by gate
    n = circ.n_wires
    for comp in reversed(circ.components):
        for g in reversed(comp.gates):
            state = apply_gate(state, g, -bound.angle(g), n)
    assert np.allclose(state, initial_state(circ), atol=1e-10)


def test_two_fswaps_give_zz():
    # iSWAP . iSWAP = Z (x) Z up to phase on the superconducting pair
    isw = gate_matrix(Gate("partial_iswap", (0, 1)), -math.pi / 2)
    zz = np.kron(np.diag([1, -1]), np.diag([1, -1]))
    prod = isw @ isw
    phase = prod[0, 0]
    assert np.allclose(prod / phase, zz)


def test_expectation_basics():
    z0 = PauliString.from_map(1.0, {0: "Z"})
    assert expectation(basis_state(2, ()), z0) == pytest.approx(1.0)
    plus = np.ones(2, dtype=complex) / math.sqrt(2)
    assert expectation(plus, PauliString.from_map(1.0, {0: "X"})) == pytest.approx(1.0)


def test_energy_at_zero_equals_prep_energy():
    spec = LatticeSpec(2, 2, u=4.0)
    eng = AnsatzEngine(spec, n_blk=3)
    e0 = eng.energy(np.zeros(eng.n_params))
    prep = AnsatzEngine(spec, n_blk=0)
    assert e0 == pytest.approx(prep.energy([]), abs=1e-9)


def test_energy_invariant_under_ordering_rebuild():
    # vertical and horizontal builds bind the same parameters to the same
    # terms; on 1x2 and on square lattices the energies agree exactly
    for rows, cols, nb in [(1, 2, 2), (2, 2, 2)]:
        spec = LatticeSpec(rows, cols)
        smap = sharing_map(spec, nb)
        rng = np.random.default_rng(4)
        theta = rng.uniform(-0.7, 0.7, smap.n_para)
        e_h = AnsatzEngine(spec, nb, axis="horizontal", sharing=smap).energy(theta)
        e_v = AnsatzEngine(spec, nb, axis="vertical", sharing=smap).energy(theta)
        assert e_h == pytest.approx(e_v, abs=1e-9)


def test_particle_number_conserved_through_ansatz():
    spec = LatticeSpec(2, 2)
    eng = AnsatzEngine(spec, n_blk=2)
    rng = np.random.default_rng(2)
    state = eng.state(rng.uniform(-1, 1, eng.n_params))
    ordering = eng.ordering
    for spin, count in ((SPIN_UP, spec.n_up), (SPIN_DOWN, spec.n_down)):
        total = 0.0
        for w in ordering.spin_wires(spin):
            z = PauliString.from_map(1.0, {w: "Z"})
            total += (1 - expectation(state, z)) / 2
        assert total == pytest.approx(count, abs=1e-9)


def test_gradient_direct_matches_fd_many_seeds():
    spec = LatticeSpec(1, 2)
    eng = AnsatzEngine(spec, n_blk=2)
    rng = np.random.default_rng(50)
    for _ in range(50):
        theta = rng.uniform(-math.pi, math.pi, eng.n_params)
        direct = eng.gradient_direct(theta)
        fd = eng.gradient_fd(theta, delta=1e-4)
        assert np.max(np.abs(direct - fd)) < 1e-6


def test_gradient_fd_richardson_order():
    spec = LatticeSpec(1, 2)
    eng = AnsatzEngine(spec, n_blk=1)
    theta = np.array([0.31, -0.42][: eng.n_params])
    exact = eng.gradient_adjoint(theta)
    err1 = np.abs(eng.gradient_fd(theta, delta=2e-2) - exact)
    err2 = np.abs(eng.gradient_fd(theta, delta=1e-2) - exact)
    ratios = err1[err1 > 1e-10] / err2[err1 > 1e-10]
    assert np.all(ratios > 3.0) and np.all(ratios < 5.0)


def test_gradient_zero_entries_at_symmetric_point():
    spec = LatticeSpec(1, 2)
    eng = AnsatzEngine(spec, n_blk=2)
    grad = eng.gradient_direct(np.zeros(eng.n_params))
    assert np.allclose(grad, eng.gradient_fd(np.zeros(eng.n_params)), atol=1e-8)
    assert np.allclose(grad, 0.0, atol=1e-10)  # stationary reference point


def test_shared_parameter_sum_rule_via_unsharing():
    # the shared gradient equals the sum of per-instance gradients computed
    # with every owning gate given its own parameter
    from hubvqe.lattice import hubbard_terms
    from hubvqe.sampling import SharingMap
    spec = LatticeSpec(1, 2)
    shared = sharing_map(spec, 1)
    terms = hubbard_terms(spec)
    solo = SharingMap(n_eq=4, n_para_site=3, n_blocks=1)
    solo.class_of = {t.key: i for i, t in enumerate(terms)}
    solo.class_sizes = [1] * len(terms)
    eng_shared = AnsatzEngine(spec, 1, sharing=shared)
    eng_solo = AnsatzEngine(spec, 1, sharing=solo)
    rng = np.random.default_rng(9)
    th_shared = rng.uniform(-1, 1, eng_shared.n_params)
    th_solo = np.array([th_shared[shared.param_id(t.key, 1)] for t in terms])
    g_shared = eng_shared.gradient_direct(th_shared)
    g_solo = eng_solo.gradient_direct(th_solo)
    for t in terms:
        k = shared.param_id(t.key, 1)
        partial = sum(g_solo[i] for i, u in enumerate(terms)
                      if shared.param_id(u.key, 1) == k)
        assert g_shared[k] == pytest.approx(partial, abs=1e-9)


# ---------------------------------------------------------------------------
# noise and sampling
# ---------------------------------------------------------------------------

def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(p_2q=0.6, boost=2.0)


def test_noiseless_trajectory_is_clean():
    spec = LatticeSpec(1, 2)
    circ = full_ansatz(spec, 1)
    bound = bind(circ, np.zeros(circ.n_params))
    rng = _shot_rng(NoiseSpec(0.0), 0, 0)
    state, log = noisy_trajectory(bound, NoiseSpec(0.0), rng)
    assert log == []
    assert np.allclose(state, run(bound), atol=1e-12)


def test_trajectory_error_count_statistics():
    spec = LatticeSpec(1, 2)
    circ = full_ansatz(spec, 1)
    bound = bind(circ, np.zeros(circ.n_params))
    noise = NoiseSpec(p_2q=0.02, boost=2.0, seed=3)
    m = len(circ.components)
    total = 0
    trials = 4000
    for s in range(trials):
        _, log = noisy_trajectory(bound, noise, _shot_rng(noise, 0, s))
        total += len(log)
    expect = trials * m * 0.04
    sigma = math.sqrt(trials * m * 0.04 * 0.96)
    assert abs(total - expect) < 3 * sigma


def test_injected_x_flips_parity():
    # a single X on an up wire flips the measured up parity of that shot
    spec = LatticeSpec(1, 2)
    programs = measurement_programs(spec, np.zeros(sharing_map(spec, 1).n_para), 1)
    prog = next(p for p in programs if p.group_id == "repulsion")
    sampler = ProgramSampler(prog, NoiseSpec(0.0), stream=0)
    clean = sampler.sample(1)[0]
    n = prog.circuit.circuit.n_wires
    state = run(prog.circuit, include_tail=False)
    up_wire = prog.ordering.spin_wires(SPIN_UP)[0]
    state = apply_gate(state, Gate("pauli_x", (up_wire,)), 0.0, n)
    bits = [int(b) for b in format(int(np.argmax(np.abs(state) ** 2)), f"0{n}b")]
    up, down = prog.masks.parities(bits)
    assert up == -clean.parity_up
    assert down == clean.parity_down


def test_reproducible_across_shot_order():
    spec = LatticeSpec(1, 2)
    programs = measurement_programs(spec, np.zeros(sharing_map(spec, 2).n_para), 2)
    prog = next(p for p in programs if p.group_id == "hop_h_even")
    noise = NoiseSpec(p_2q=0.01, seed=42)
    sampler = ProgramSampler(prog, noise, stream=1)
    first = sampler.sample(20)
    again = ProgramSampler(prog, noise, stream=1).sample(20)
    assert [s.bits for s in first] == [s.bits for s in again]
    # per-shot streams: sampling a suffix alone gives the same records
    tail = ProgramSampler(prog, noise, stream=1).sample(5, shot_offset=15)
    assert [s.bits for s in tail] == [s.bits for s in first[15:]]


def test_noiseless_sampling_unbiased():
    spec = LatticeSpec(1, 2, u=4.0)
    smap = sharing_map(spec, 1)
    rng = np.random.default_rng(8)
    theta = rng.uniform(-0.5, 0.5, smap.n_para)
    programs = measurement_programs(spec, theta, 1, sharing=smap)
    records = sample(programs, shots=60_000, noise=NoiseSpec(0.0, seed=5))
    est, frac = sampled_energy(records, spec, verify=False)
    assert frac == 1.0
    exact = AnsatzEngine(spec, 1, sharing=smap).energy(theta)
    # five-sigma statistical window for the summed estimator
    sig = 5 * 6.0 / math.sqrt(60_000)
    assert abs(est - exact) < sig
    ver, vfrac = sampled_energy(records, spec, verify=True)
    assert vfrac == 1.0 and ver == pytest.approx(est)


def test_term_means_match_statevector_expectations():
    from hubvqe.lattice import jordan_wigner, measurement_groups
    spec = LatticeSpec(1, 2, u=4.0)
    smap = sharing_map(spec, 1)
    theta = np.array([0.37, -0.21][: smap.n_para])
    programs = measurement_programs(spec, theta, 1, sharing=smap)
    records = sample(programs, shots=50_000, noise=NoiseSpec(0.0, seed=6))
    groups = {g.id: g for g in measurement_groups(spec)}
    for prog in programs:
        if prog.empty:
            continue
        state = run(prog.circuit, include_tail=False)
        shots = records[prog.group_id]
        for term in groups[prog.group_id].terms:
            exact = sum(expectation(state, p)
                        for p in jordan_wigner(term, prog.ordering))
            mean = np.mean([s.term_values[term.key] for s in shots])
            scale = abs(term.coefficient)
            assert abs(mean - exact) < 5 * scale / math.sqrt(len(shots) / 4)


def test_trajectory_pass_fraction_matches_composition_analytics():
    # the physical Pauli-injection engine against the exact per-circuit
    # detectability composition, and loosely against the idealized model
    spec = LatticeSpec(2, 3)
    smap = sharing_map(spec, 2)
    programs = measurement_programs(spec, np.zeros(smap.n_para), 2, sharing=smap)
    prog = next(p for p in programs if p.group_id == "repulsion")
    comps = prog.circuit.circuit.components
    mu = 2.0
    noise = NoiseSpec(p_2q=mu / len(comps), seed=21)
    p = noise.p_2q
    # exact joint parity distribution via the character sum over sign pairs,
    # which keeps the correlation from both-sector flips
    sign_products = {(su, sd): 1.0 for su in (1, -1) for sd in (1, -1)}
    for comp in comps:
        probs = {}
        for pauli_pair in [(a, b) for a in "IXYZ" for b in "IXYZ"][1:]:
            up = sum(1 for spin, letter in zip(comp.spins, pauli_pair)
                     if spin == SPIN_UP and letter in "XY") % 2
            dn = sum(1 for spin, letter in zip(comp.spins, pauli_pair)
                     if spin == SPIN_DOWN and letter in "XY") % 2
            probs[(up, dn)] = probs.get((up, dn), 0.0) + p / 15.0
        probs[(0, 0)] = probs.get((0, 0), 0.0) + 1 - p
        for (su, sd) in sign_products:
            sign_products[(su, sd)] *= sum(
                pr * (su ** fu) * (sd ** fd) for (fu, fd), pr in probs.items())
    p_pass_exact = sum(sign_products.values()) / 4
    sampler = ProgramSampler(prog, noise, stream=0)
    shots = sampler.sample(6000)
    exp_up, exp_dn = (-1) ** spec.n_up, (-1) ** spec.n_down
    frac = np.mean([s.parity_up == exp_up and s.parity_down == exp_dn for s in shots])
    sigma = math.sqrt(p_pass_exact * (1 - p_pass_exact) / len(shots))
    assert abs(frac - p_pass_exact) < 3 * sigma
    # the idealized equal-composition model is only approximate for a real
    # circuit; the gap (~0.04 here) quantifies that approximation
    _, p_s_model = pass_probabilities(mu)
    assert abs(frac - p_s_model) < max(3 * sigma, 0.06)


def test_mitigated_energy_beats_raw_on_most_seeds():
    spec = LatticeSpec(1, 2, u=4.0)
    smap = sharing_map(spec, 2)
    theta = 0.15 * np.ones(smap.n_para)
    exact = AnsatzEngine(spec, 2, sharing=smap).energy(theta)
    plan = MitigationPlan(lam=2.0)
    wins = 0
    seeds = range(8)
    programs = measurement_programs(spec, theta, 2, sharing=smap)
    for seed in seeds:
        est = mitigated_energy(spec, theta, 2, mu=0.5, plan=plan, shots=6000,
                               seed=seed, programs=programs)
        if abs(est.extrapolated - exact) < abs(est.raw - exact):
            wins += 1
    assert wins >= 6


def test_vqe_1x2_reaches_ground_state():
    spec = LatticeSpec(1, 2, u=4.0)
    trace = vqe(spec, n_blk=2, step_size=0.05, threshold=1e-8, max_iter=500)
    assert abs(trace.energy - ED_1X2_U4) < 1e-3
    assert trace.iterations[0][1] == pytest.approx(0.0, abs=1e-9)  # Slater anchor


def test_vqe_zero_step_is_single_evaluation():
    spec = LatticeSpec(1, 2)
    trace = vqe(spec, n_blk=1, step_size=0.0, max_iter=10)
    assert len(trace.iterations) == 2
    assert trace.energy == pytest.approx(trace.iterations[0][1])
    assert np.allclose(trace.theta, 0.0)


def test_vqe_sampled_mode_smoke():
    spec = LatticeSpec(1, 2)
    trace = vqe(spec, n_blk=1, step_size=0.05, max_iter=2, mode="sampled",
                mu=0.3, shots=300, seed=1)
    assert trace.iterations[-1][3] > 0  # shots were spent
