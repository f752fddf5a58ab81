"""Exact statevector engine, energy and gradient evaluation, noisy
trajectory sampling through measurement programs, and the VQE driver.

Wire 0 is the most significant bit of the basis index.  States are
normalized to 1e-10 after every component; the engine caps at
``QUBIT_CAP`` qubits (dense amplitudes).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import BoundCircuit, Circuit, Component, Gate, bind
from .lattice import (SPIN_DOWN, SPIN_UP, LatticeSpec, OrbitalOrdering,
                      PauliString, hamiltonian_paulis, snake_ordering)
from .mitigation import (MitigationPlan, ShotRecord, direct_verify, extrapolate,
                         term_averages)
from .sampling import SharingMap, sharing_map
from .synthesis import (_PROBE_FACTORS, MeasurementProgram, full_ansatz,
                        gradient_probe_circuits, measurement_programs)

QUBIT_CAP = 14
NORM_TOL = 1e-10

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_PAULI = {"X": _X, "Y": _Y, "Z": _Z}

_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
                 dtype=complex)
_P_MINUS = (np.eye(4) - _SWAP) / 2
_P_PLUS = (np.eye(4) + _SWAP) / 2
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
                 dtype=complex)
_XX = np.kron(_X, _X)
_YY = np.kron(_Y, _Y)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)

# the 15 non-identity two-qubit Pauli pairs, in a fixed draw order
_PAULI_PAIRS = [(p, q) for p in "IXYZ" for q in "IXYZ"][1:]


def gate_matrix(gate: Gate, angle: float) -> np.ndarray:
    kind = gate.kind
    if kind == "z_rot":
        return np.diag([np.exp(-1j * angle / 2), np.exp(1j * angle / 2)])
    if kind == "x_rot":
        return math.cos(angle / 2) * _I - 1j * math.sin(angle / 2) * _X
    if kind == "hadamard":
        return _H
    if kind in ("pauli_x", "pauli_y", "pauli_z"):
        return _PAULI[kind[-1].upper()]
    if kind in ("partial_swap", "fixed_swap_power"):
        return _P_PLUS + np.exp(1j * angle) * _P_MINUS
    if kind == "partial_iswap":
        m = np.eye(4, dtype=complex)
        m[1:3, 1:3] = [[math.cos(angle), -1j * math.sin(angle)],
                       [-1j * math.sin(angle), math.cos(angle)]]
        return m
    if kind == "cnot":
        return _CNOT
    if kind == "xx_rot":
        return math.cos(angle / 2) * np.eye(4) - 1j * math.sin(angle / 2) * _XX
    if kind == "yy_rot":
        return math.cos(angle / 2) * np.eye(4) - 1j * math.sin(angle / 2) * _YY
    if kind == "czgen_rot":
        return np.diag(np.exp(-1j * angle / 2 * np.diag(_CZ)))
    raise ValueError(f"unknown gate kind {kind!r}")


def _apply_1q(state: np.ndarray, m: np.ndarray, w: int, n: int) -> np.ndarray:
    psi = state.reshape(1 << w, 2, -1)
    out = np.empty_like(psi)
    out[:, 0, :] = m[0, 0] * psi[:, 0, :] + m[0, 1] * psi[:, 1, :]
    out[:, 1, :] = m[1, 0] * psi[:, 0, :] + m[1, 1] * psi[:, 1, :]
    return out.reshape(-1)


def _apply_2q(state: np.ndarray, m: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    psi = np.moveaxis(state.reshape([2] * n), (a, b), (n - 2, n - 1))
    shape = psi.shape
    psi = psi.reshape(-1, 4) @ m.T
    return np.moveaxis(psi.reshape(shape), (n - 2, n - 1), (a, b)).reshape(-1)


def apply_gate(state: np.ndarray, gate: Gate, angle: float, n: int) -> np.ndarray:
    m = gate_matrix(gate, angle)
    if gate.n_wires == 1:
        return _apply_1q(state, m, gate.wires[0], n)
    return _apply_2q(state, m, gate.wires[0], gate.wires[1], n)


def basis_state(n_wires: int, occupied) -> np.ndarray:
    if n_wires > QUBIT_CAP:
        raise ValueError(f"{n_wires} qubits exceeds the {QUBIT_CAP}-qubit cap")
    idx = 0
    for w in occupied:
        idx |= 1 << (n_wires - 1 - w)
    state = np.zeros(1 << n_wires, dtype=complex)
    state[idx] = 1.0
    return state


def initial_state(circuit: Circuit) -> np.ndarray:
    return basis_state(circuit.n_wires, circuit.meta.get("initial_wires", ()))


def apply(state: np.ndarray, bound: BoundCircuit, include_tail: bool = True,
          check_norm: bool = True) -> np.ndarray:
    """Apply every gate of a bound circuit in order."""
    n = bound.circuit.n_wires
    if len(state) != 1 << n:
        raise ValueError("state dimension does not match the circuit")
    for comp in bound.circuit.components:
        for g in comp.gates:
            state = apply_gate(state, g, bound.angle(g), n)
        if check_norm:
            assert abs(np.vdot(state, state).real - 1.0) < NORM_TOL
    if include_tail:
        for g in bound.circuit.tail:
            state = apply_gate(state, g, bound.angle(g), n)
    return state


def run(bound: BoundCircuit, include_tail: bool = True) -> np.ndarray:
    return apply(initial_state(bound.circuit), bound, include_tail=include_tail)


def expectation(state: np.ndarray, pauli: PauliString) -> float:
    """<state| P |state> for a Hermitian weighted Pauli string."""
    n = int(round(math.log2(len(state))))
    phi = state
    for w, p in pauli.letters:
        phi = _apply_1q(phi, _PAULI[p], w, n)
    return float((pauli.coefficient * np.vdot(state, phi)).real)


def expectation_sum(state: np.ndarray, paulis) -> float:
    return sum(expectation(state, p) for p in paulis)


def apply_pauli_sum(state: np.ndarray, paulis) -> np.ndarray:
    n = int(round(math.log2(len(state))))
    out = np.zeros_like(state)
    for p in paulis:
        phi = state
        for w, letter in p.letters:
            phi = _apply_1q(phi, _PAULI[letter], w, n)
        out += p.coefficient * phi
    return out


# ---------------------------------------------------------------------------
# Energy and gradients of the ansatz
# ---------------------------------------------------------------------------

@dataclass
class AnsatzEngine:
    """One synthesized ansatz plus its Hamiltonian, rebound per theta."""

    spec: LatticeSpec
    n_blk: int
    gate_set: str = "silicon"
    axis: str = "horizontal"
    scheme: str = "simple"
    sharing: SharingMap | None = None

    def __post_init__(self):
        if self.spec.n_wires > QUBIT_CAP:
            raise ValueError("lattice exceeds the statevector cap")
        self.sharing = self.sharing or sharing_map(self.spec, max(self.n_blk, 1))
        self.ordering = snake_ordering(self.spec, self.axis)
        self.circuit = full_ansatz(self.spec, self.n_blk, self.gate_set,
                                   self.ordering, self.scheme, self.sharing)
        # gradients insert generators at component boundaries, which only
        # line up with the defining unitaries in the uncancelled lowering
        self.probe_circuit = full_ansatz(self.spec, self.n_blk, self.gate_set,
                                         self.ordering, self.scheme,
                                         self.sharing, cancel=False)
        self.paulis = hamiltonian_paulis(self.spec, self.ordering)

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    def state(self, theta) -> np.ndarray:
        return run(bind(self.circuit, theta))

    def energy(self, theta) -> float:
        return expectation_sum(self.state(theta), self.paulis)

    def gradient_fd(self, theta, delta: float = 1e-4) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        grad = np.zeros_like(theta)
        for m in range(len(theta)):
            shift = np.zeros_like(theta)
            shift[m] = delta / 2
            grad[m] = (self.energy(theta + shift) - self.energy(theta - shift)) / delta
        return grad

    def gradient_direct(self, theta) -> np.ndarray:
        """Probe-circuit gradient: weighted A_+ - A_- differences summed over
        the gate instances sharing each parameter."""
        bound = bind(self.probe_circuit, theta)
        grad = np.zeros(self.n_params)
        for k in range(self.n_params):
            for probe in gradient_probe_circuits(bound, k):
                val = expectation_sum(run(probe.circuit), self.paulis)
                grad[k] += probe.weight * probe.sign * val
        return grad

    def gradient_adjoint(self, theta) -> np.ndarray:
        """Reverse-mode evaluation of the same derivative (one forward and
        one backward sweep); equals gradient_direct to numerical precision."""
        bound = bind(self.probe_circuit, theta)
        circ = self.probe_circuit
        n = circ.n_wires
        psi = run(bound, include_tail=False)
        lam = apply_pauli_sum(psi, self.paulis)
        grad = np.zeros(self.n_params)
        for comp in reversed(circ.components):
            if comp.param is not None:
                for beta, kind in _PROBE_FACTORS[comp.kind]:
                    probe = Gate(kind, comp.wires)
                    f_psi = apply_gate(psi, probe, math.pi, n)  # exp(-i pi F/2) = -iF
                    f_psi *= 1j
                    grad[comp.param] += 2 * beta * np.vdot(lam, f_psi).imag
            for g in reversed(comp.gates):
                inv = -bound.angle(g)
                psi = apply_gate(psi, g, inv, n)
                lam = apply_gate(lam, g, inv, n)
        return grad


def energy(spec: LatticeSpec, theta, n_blk: int, gate_set: str = "silicon",
           axis: str = "horizontal", scheme: str = "simple") -> float:
    return AnsatzEngine(spec, n_blk, gate_set, axis, scheme).energy(theta)


# ---------------------------------------------------------------------------
# Noise injection and shot sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Per-component depolarizing noise with an error-boost tier."""

    p_2q: float
    boost: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_2q * self.boost <= 1.0:
            raise ValueError("boosted error probability must stay in [0, 1]")


@dataclass(frozen=True)
class InjectedError:
    component: int
    paulis: tuple[str, str]
    flips_up: bool
    flips_down: bool


def _error_flips(comp: Component, paulis: tuple[str, str]) -> tuple[bool, bool]:
    up = down = 0
    for spin, p in zip(comp.spins, paulis):
        if p in ("X", "Y"):
            if spin == SPIN_UP:
                up ^= 1
            else:
                down ^= 1
    return bool(up), bool(down)


def _shot_rng(noise: NoiseSpec, stream: int, shot: int) -> np.random.Generator:
    # counter-style keying: one 128-bit Philox key per (seed, stream, shot)
    key = ((noise.seed * 1_000_003 + stream) % (1 << 64), shot % (1 << 64))
    return np.random.Generator(np.random.Philox(key=key))


def noisy_trajectory(bound: BoundCircuit, noise: NoiseSpec,
                     rng: np.random.Generator,
                     prefix: list[np.ndarray] | None = None,
                     include_tail: bool = True) -> tuple[np.ndarray, list[InjectedError]]:
    """One pure-state trajectory: after each two-qubit component, with
    probability boost * p_2q one of the 15 two-qubit Paulis hits its wires.

    ``prefix`` optionally caches the noiseless state after each component so
    error-free heads of the circuit are skipped.
    """
    circ = bound.circuit
    n = circ.n_wires
    comps = circ.components
    p = noise.p_2q * noise.boost
    draws = rng.random(len(comps))
    hits = np.flatnonzero(draws < p)
    log: list[InjectedError] = []
    if len(hits) == 0 and prefix is not None:
        state = prefix[len(comps) - 1] if comps else initial_state(circ)
    else:
        start = 0
        if prefix is not None and len(hits) > 0 and hits[0] > 0:
            start = int(hits[0])
            state = prefix[start - 1].copy()
        else:
            state = initial_state(circ)
        for idx in range(start, len(comps)):
            comp = comps[idx]
            for g in comp.gates:
                state = apply_gate(state, g, bound.angle(g), n)
            if draws[idx] < p:
                pa, pb = _PAULI_PAIRS[rng.integers(0, 15)]
                for wire, letter in zip(comp.wires, (pa, pb)):
                    if letter != "I":
                        state = _apply_1q(state, _PAULI[letter], wire, n)
                up, down = _error_flips(comp, (pa, pb))
                log.append(InjectedError(idx, (pa, pb), up, down))
    if include_tail:
        for g in circ.tail:
            state = apply_gate(state, g, bound.angle(g), n)
    return state, log


class ProgramSampler:
    """Shot sampler for one measurement program at one noise tier."""

    def __init__(self, program: MeasurementProgram, noise: NoiseSpec, stream: int = 0):
        if program.empty:
            raise ValueError("cannot sample an empty program")
        self.program = program
        self.noise = noise
        self.stream = stream
        bound = program.circuit
        n = bound.circuit.n_wires
        # noiseless prefix states after each component, and final distribution
        self.prefix: list[np.ndarray] = []
        state = initial_state(bound.circuit)
        for comp in bound.circuit.components:
            for g in comp.gates:
                state = apply_gate(state, g, bound.angle(g), n)
            self.prefix.append(state.copy())
        for g in bound.circuit.tail:
            state = apply_gate(state, g, bound.angle(g), n)
        self.clean_probs = np.abs(state) ** 2
        self.clean_probs /= self.clean_probs.sum()
        self.clean_cdf = np.cumsum(self.clean_probs)
        self.n = n

    def _record(self, bits_index: int, n_errors: int) -> ShotRecord:
        bits = [(bits_index >> (self.n - 1 - w)) & 1 for w in range(self.n)]
        masks = self.program.masks
        up, down = masks.parities(bits)
        return ShotRecord(bits=bits_index, term_values=masks.term_values(bits),
                          parity_up=up, parity_down=down,
                          noise_boost=self.noise.boost, n_errors=n_errors)

    def sample(self, shots: int, shot_offset: int = 0) -> list[ShotRecord]:
        out = []
        for s in range(shots):
            rng = _shot_rng(self.noise, self.stream, shot_offset + s)
            state, log = noisy_trajectory(self.program.circuit, self.noise, rng,
                                          prefix=self.prefix)
            if log:
                probs = np.abs(state) ** 2
                cdf = np.cumsum(probs / probs.sum())
            else:
                cdf = self.clean_cdf
            idx = int(np.searchsorted(cdf, rng.random(), side="right"))
            out.append(self._record(min(idx, len(cdf) - 1), len(log)))
        return out


def sample(programs, shots: int, noise: NoiseSpec) -> dict[str, list[ShotRecord]]:
    """Sample every non-empty program; returns records per group id."""
    out: dict[str, list[ShotRecord]] = {}
    for stream, prog in enumerate(programs):
        if prog.empty:
            out[prog.group_id] = []
            continue
        out[prog.group_id] = ProgramSampler(prog, noise, stream).sample(shots)
    return out


def expected_parities(spec: LatticeSpec) -> tuple[int, int]:
    return (-1) ** spec.n_up, (-1) ** spec.n_down


def sampled_energy(records: dict[str, list[ShotRecord]], spec: LatticeSpec,
                   verify: bool = False) -> tuple[float, float]:
    """(energy, pass_fraction) from shot records of all groups.

    With ``verify`` set, shots failing either spin parity are discarded
    before averaging (direct symmetry verification).
    """
    exp_up, exp_down = expected_parities(spec)
    total = 0.0
    kept_frac = []
    for group_records in records.values():
        if not group_records:
            continue
        if verify:
            means, frac = direct_verify(group_records, exp_up, exp_down)
            kept_frac.append(frac)
        else:
            means = term_averages(group_records)
            kept_frac.append(1.0)
        total += sum(means.values())
    return total, float(np.mean(kept_frac)) if kept_frac else 1.0


@dataclass
class MitigatedEnergy:
    raw: float
    verified_mu: float
    verified_boosted: float
    extrapolated: float
    pass_fraction_mu: float
    pass_fraction_boosted: float
    shots_used: int


def mitigated_energy(spec: LatticeSpec, theta, n_blk: int, mu: float,
                     plan: MitigationPlan, shots: int, seed: int,
                     gate_set: str = "silicon", scheme: str = "simple",
                     programs=None) -> MitigatedEnergy:
    """End-to-end mitigated estimate: sample at mu and lam*mu, verify the
    spin parities, and extrapolate the verified values to zero noise."""
    programs = programs or measurement_programs(spec, theta, n_blk, gate_set, scheme)
    live = [p for p in programs if not p.empty]
    used = 0
    tier_results = {}
    for tier_idx, boost in enumerate((1.0, plan.lam)):
        records = {}
        for stream, prog in enumerate(live):
            # p is per circuit so every group runs at the same mean error count
            p_2q = mu / len(prog.circuit.circuit.components)
            noise = NoiseSpec(p_2q=p_2q, boost=boost, seed=seed)
            sampler = ProgramSampler(prog, noise, stream=stream + 100 * tier_idx)
            records[prog.group_id] = sampler.sample(shots)
            used += shots
        tier_results[boost] = records
    raw, _ = sampled_energy(tier_results[1.0], spec, verify=False)
    e_mu, frac_mu = sampled_energy(tier_results[1.0], spec, verify=True)
    e_b, frac_b = sampled_energy(tier_results[plan.lam], spec, verify=True)
    return MitigatedEnergy(
        raw=raw, verified_mu=e_mu, verified_boosted=e_b,
        extrapolated=extrapolate(e_mu, e_b, plan.lam),
        pass_fraction_mu=frac_mu, pass_fraction_boosted=frac_b,
        shots_used=used,
    )


# ---------------------------------------------------------------------------
# VQE driver
# ---------------------------------------------------------------------------

@dataclass
class VqeTrace:
    iterations: list[tuple[int, float, float, int]] = field(default_factory=list)
    theta: np.ndarray | None = None
    energy: float = math.nan
    converged: bool = False
    aborted: str = ""

    def rows(self):
        return [{"iter": i, "energy": e, "grad_norm": g, "shots_used": s}
                for i, e, g, s in self.iterations]


def vqe(spec: LatticeSpec, n_blk: int, step_size: float = 0.05,
        threshold: float = 1e-6, max_iter: int = 500, mode: str = "analytic",
        gate_set: str = "silicon", scheme: str = "simple", mu: float = 0.5,
        plan: MitigationPlan | None = None, shots: int = 2000,
        seed: int = 11) -> VqeTrace:
    """Plain gradient descent from theta = 0.

    Terminates when the energy change drops below threshold * V or at
    max_iter.  The step halves whenever a step raises the energy (the move
    is retried from the previous point) and creeps back up on success.
    In sampled mode each energy comes from the full measurement-program,
    verification and extrapolation pipeline and gradients from central
    differences of those estimates.
    """
    if mode not in ("analytic", "sampled"):
        raise ValueError("mode must be analytic or sampled")
    engine = AnsatzEngine(spec, n_blk, gate_set, scheme=scheme)
    plan = plan or MitigationPlan()
    theta = np.zeros(engine.n_params)
    trace = VqeTrace()
    shots_used = 0

    def measure(th) -> float:
        nonlocal shots_used
        if mode == "analytic":
            return engine.energy(th)
        est = mitigated_energy(spec, th, n_blk, mu, plan, shots,
                               seed + 7919 * len(trace.iterations), gate_set, scheme)
        shots_used += est.shots_used
        return est.extrapolated

    def gradient(th) -> np.ndarray:
        if mode == "analytic":
            return engine.gradient_adjoint(th)
        g = np.zeros_like(th)
        delta = 0.05
        for m in range(len(th)):
            shift = np.zeros_like(th)
            shift[m] = delta / 2
            g[m] = (measure(th + shift) - measure(th - shift)) / delta
        return g

    e_prev = measure(theta)
    e_first = e_prev
    step = step_size
    tol = threshold * spec.n_sites
    trace.iterations.append((0, e_prev, math.nan, shots_used))
    kicked = False
    for it in range(1, max_iter + 1):
        grad = gradient(theta)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-9 and not kicked and step_size != 0.0:
            # theta = 0 is an exact stationary point of the half-filled
            # ansatz; nudge all parameters to break it, once
            kicked = True
            theta = theta + 0.1
            e_prev = measure(theta)
            trace.iterations.append((it, e_prev, gnorm, shots_used))
            continue
        if step_size == 0.0:
            trace.iterations.append((it, e_prev, gnorm, shots_used))
            break
        proposal = theta - step * grad
        e_new = measure(proposal)
        if e_new > e_prev + 1e-12 and mode == "analytic":
            step /= 2
            trace.iterations.append((it, e_prev, gnorm, shots_used))
            if step < 1e-12:
                break
            continue
        theta = proposal
        delta_e = abs(e_new - e_prev)
        e_prev = e_new
        step = min(step * 1.05, 10 * step_size)
        trace.iterations.append((it, e_new, gnorm, shots_used))
        if e_new > e_first + 10 * max(1.0, abs(e_first)):
            trace.aborted = "divergence guard tripped"
            break
        if delta_e < tol:
            trace.converged = True
            break
    trace.theta = theta
    trace.energy = e_prev
    return trace
