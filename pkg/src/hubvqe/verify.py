"""Programmatic oracle suite behind the ``verify`` subcommand: each check
rebuilds an independent reference (occupation-basis matrices, dense products,
finite differences, Monte Carlo) and compares the pipeline against it."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import bind, count_gates, profile_for
from .lattice import (LatticeSpec, hubbard_terms, jordan_wigner,
                      lowest_orbital_energies, snake_ordering)
from .mitigation import poisson_model_mc
from .resources import closed_form, counted
from .sampling import sharing_map
from .simulator import AnsatzEngine, apply_gate, run
from .synthesis import full_ansatz, ha_block, lower, slater_prep

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
FSWAP = (np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, I2) + np.kron(I2, Z)) / 2


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _expm(h, t=1.0):
    vals, vecs = np.linalg.eigh(h)
    return vecs @ np.diag(np.exp(-1j * t * vals)) @ vecs.conj().T


def _component_matrix(kind, theta):
    hop = _expm((np.kron(X, X) + np.kron(Y, Y)) / 2, theta)
    rep = _expm(np.kron(I2 - Z, I2 - Z) / 2, theta)
    giv = _expm((np.kron(Y, X) - np.kron(X, Y)) / 2, theta)
    return {"hopping": hop, "repulsion": rep, "fswap": FSWAP,
            "fswap_hopping": FSWAP @ hop, "fswap_repulsion": FSWAP @ rep,
            "givens": giv}[kind]


def _embed(m4, a, b, n):
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        ba, bb = (col >> (n - 1 - a)) & 1, (col >> (n - 1 - b)) & 1
        base = col & ~(1 << (n - 1 - a)) & ~(1 << (n - 1 - b))
        for dst in range(4):
            amp = m4[dst, 2 * ba + bb]
            if amp:
                row = base | ((dst >> 1) << (n - 1 - a)) | ((dst & 1) << (n - 1 - b))
                out[row, col] += amp
    return out


def check_jw_construction(spec: LatticeSpec) -> CheckResult:
    """Pauli route against the occupation-basis fermionic construction."""
    from .lattice import fermion_term_matrix
    worst = 0.0
    for axis in ("horizontal", "vertical"):
        ordering = snake_ordering(spec, axis)
        for term in hubbard_terms(spec):
            direct = fermion_term_matrix(term, ordering)
            viajw = sum(p.to_sparse(spec.n_wires)
                        for p in jordan_wigner(term, ordering))
            diff = abs(direct - viajw)
            worst = max(worst, diff.max() if diff.nnz else 0.0)
    return CheckResult("jordan_wigner_vs_fermionic", worst < 1e-10,
                       f"max deviation {worst:.2e}")


def check_block_unitary(spec: LatticeSpec, gate_set: str, seed: int = 0) -> CheckResult:
    """Lowered ansatz block against the ordered component-matrix product."""
    sharing = sharing_map(spec, 1)
    comps = ha_block(spec, snake_ordering(spec), 1, sharing)
    circ = lower(comps, gate_set)
    circ.n_params = sharing.n_para
    circ.meta["initial_wires"] = ()
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-1.5, 1.5, sharing.n_para)
    bound = bind(circ, theta)
    n = spec.n_wires
    dim = 1 << n
    u_circ = np.eye(dim, dtype=complex)
    for c in range(dim):
        state = u_circ[:, c].copy()
        for comp in bound.circuit.components:
            for g in comp.gates:
                state = apply_gate(state, g, bound.angle(g), n)
        u_circ[:, c] = state
    u_ref = np.eye(dim, dtype=complex)
    for comp in comps:
        ang = comp.term_key[1] if comp.kind == "givens" else (
            theta[comp.param] if comp.param is not None else 0.0)
        u_ref = _embed(_component_matrix(comp.kind, ang), *comp.wires, n) @ u_ref
    ov = np.trace(u_ref.conj().T @ u_circ) / dim
    err = np.linalg.norm(u_circ - (ov / abs(ov)) * u_ref, 2) if abs(ov) > 0 else 2.0
    return CheckResult(f"block_unitary_{gate_set}", err < 1e-8,
                       f"operator-norm deviation {err:.2e}")


def check_prep_energy(spec: LatticeSpec, scheme: str = "simple") -> CheckResult:
    """Prepared-state energy against the occupied single-particle sum."""
    free = LatticeSpec(spec.rows, spec.cols, t=spec.t, u=0.0,
                       n_up=spec.n_up, n_down=spec.n_down)
    eng = AnsatzEngine(free, n_blk=0, scheme=scheme)
    e = eng.energy([])
    target, _ = lowest_orbital_energies(free)
    return CheckResult(f"prep_energy_{scheme}", abs(e - target) < 1e-9,
                       f"prepared {e:.10f} vs occupied-orbital sum {target:.10f}")


def check_gradients(spec: LatticeSpec, n_blk: int = 2, seeds: int = 10) -> CheckResult:
    """Probe-circuit gradient against central finite differences."""
    eng = AnsatzEngine(spec, n_blk=n_blk)
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(seeds):
        theta = rng.uniform(-math.pi, math.pi, eng.n_params)
        diff = np.abs(eng.gradient_direct(theta) - eng.gradient_fd(theta, 1e-4))
        worst = max(worst, float(diff.max()))
    return CheckResult("gradient_direct_vs_fd", worst < 1e-6,
                       f"max deviation {worst:.2e} over {seeds} samples")


def check_counts(spec: LatticeSpec, n_blk: int, gate_set: str) -> CheckResult:
    """Counted circuit against the closed forms (boundary tolerance)."""
    circ = full_ansatz(spec, n_blk, gate_set)
    rep = counted(circ, profile_for(gate_set))
    cf = closed_form(spec.rows, spec.cols, n_blk, gate_set)
    ok1 = abs(rep.n_1q - cf.n_1q) <= max(0.02 * cf.n_1q, 3 * n_blk)
    ok2 = abs(rep.n_2q - cf.n_2q) <= 0.02 * cf.n_2q
    return CheckResult(
        f"counts_{gate_set}", ok1 and ok2,
        f"counted ({rep.n_1q:.0f}, {rep.n_2q:.0f}) vs closed form "
        f"({cf.n_1q:.0f}, {cf.n_2q:.0f})")


def check_poisson_model(mu_values=(0.5, 1.0, 2.0, 4.0), trials: int = 100_000) -> CheckResult:
    """Class-sampled Monte Carlo against the verification closed forms."""
    details = []
    ok = True
    for mu in mu_values:
        res = poisson_model_mc(mu, n_components=304, trials=trials, seed=17)
        pass_ok = abs(res.pass_fraction - res.pass_fraction_analytic) < 3 * res.pass_fraction_sigma
        res_ok = abs(res.residual_mu - res.residual_mu_analytic) < 3 * res.residual_mu_sigma
        ok = ok and pass_ok and res_ok
        details.append(f"mu={mu}: P {res.pass_fraction:.4f}/{res.pass_fraction_analytic:.4f},"
                       f" mu_S {res.residual_mu:.4f}/{res.residual_mu_analytic:.4f}")
    return CheckResult("poisson_model_mc", ok, "; ".join(details))


def oracle_suite(spec: LatticeSpec | None = None, fast: bool = False) -> list[CheckResult]:
    spec = spec or LatticeSpec(1, 2)
    results = [
        check_jw_construction(spec),
        check_block_unitary(spec, "silicon"),
        check_block_unitary(spec, "superconducting"),
        check_prep_energy(spec, "simple"),
        check_prep_energy(spec, "spin_sector"),
        check_gradients(spec, seeds=3 if fast else 10),
        check_counts(spec, 2, "silicon"),
        check_counts(spec, 2, "superconducting"),
        check_poisson_model(trials=20_000 if fast else 100_000),
    ]
    return results
