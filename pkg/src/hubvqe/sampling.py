"""Parameter sharing from lattice symmetry, and shot-budget / wall-clock formulas.

All precision targets treat the tunnelling energy as the unit (t = 1); the
per-site energy target is eps = 1e-3 in those units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .lattice import SPIN_DOWN, SPIN_UP, FermionTerm, LatticeSpec, hubbard_terms

EPS_SITE = 1e-3
THIRD_DERIVATIVE_SCALE = 6.0  # magnitude sqrt(2^2 + 6^2) ~ 6 of d^3 E / d theta^3


def _layout_ops(spec: LatticeSpec):
    """Site maps of the mirror group (plus the diagonal mirrors when square)."""
    rows, cols = spec.rows, spec.cols
    ops = []
    base = [
        lambda r, c: (r, c),
        lambda r, c: (r, cols - 1 - c),
        lambda r, c: (rows - 1 - r, c),
        lambda r, c: (rows - 1 - r, cols - 1 - c),
    ]
    for f in base:
        ops.append(lambda s, f=f: spec.site(*f(*spec.site_rc(s))))
    if rows == cols:
        for f in base:
            ops.append(lambda s, f=f: spec.site(*reversed(f(*spec.site_rc(s)))))
    return ops


@dataclass
class SharingMap:
    """Term equivalence classes under layout (and spin-flip) symmetry.

    One shared parameter id per (class, block); ``eq14_estimate`` is the
    approximate closed-form count, ``n_para`` the exact enumerated one.
    """

    n_eq: int
    n_para_site: int
    n_blocks: int
    class_of: dict = field(default_factory=dict)   # term key -> class index
    class_sizes: list = field(default_factory=list)
    spin_flip: bool = False

    @property
    def n_classes(self) -> int:
        return len(self.class_sizes)

    @property
    def n_para(self) -> int:
        return self.n_classes * self.n_blocks

    @property
    def eq14_estimate(self) -> float:
        v = len({k[1] for k in self.class_of if k[0] == "repulsion"})
        return self.n_para_site * v * self.n_blocks / self.n_eq

    def param_id(self, term_key: tuple, block: int) -> int:
        if not 1 <= block <= self.n_blocks:
            raise KeyError(f"block {block} outside 1..{self.n_blocks}")
        return (block - 1) * self.n_classes + self.class_of[term_key]

    def n_sh(self, param: int) -> int:
        return self.class_sizes[param % self.n_classes]


def sharing_map(spec: LatticeSpec, n_blk: int) -> SharingMap:
    """Enumerate symmetry orbits of Hamiltonian terms.

    Layout mirrors give n_eq = 4 (8 with the diagonal mirror on square
    grids); spin-flip sharing applies at even site count, where the
    half-filled ground state has equal spin populations.
    """
    ops = _layout_ops(spec)
    spin_flip = spec.n_sites % 2 == 0
    spin_images = [False, True] if spin_flip else [False]

    def images(key: tuple):
        out = set()
        for op in ops:
            for flip in spin_images:
                if key[0] == "repulsion":
                    out.add(("repulsion", op(key[1])))
                else:
                    _, a, b, spin = key
                    ia, ib = op(a), op(b)
                    sp = spin
                    if flip:
                        sp = SPIN_DOWN if spin == SPIN_UP else SPIN_UP
                    out.add(("hopping", min(ia, ib), max(ia, ib), sp))
        return out

    smap = SharingMap(
        n_eq=8 if spec.rows == spec.cols else 4,
        n_para_site=3 if spin_flip else 5,
        n_blocks=n_blk,
        spin_flip=spin_flip,
    )
    terms = hubbard_terms(spec)
    seen: dict[tuple, int] = {}
    sizes: list[int] = []
    for term in terms:
        if term.key in seen:
            continue
        orbit = images(term.key)
        idx = len(sizes)
        for k in orbit:
            seen[k] = idx
        sizes.append(len(orbit))
    smap.class_of = seen
    smap.class_sizes = sizes
    assert sum(sizes) == len(terms), "classes must partition the term set"
    return smap


# ---------------------------------------------------------------------------
# Shot budgets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyBudget:
    var_e_j: float   # target variance of one Pauli-term sample average
    m_ej: float      # shots per measurement group
    m_e: float       # total shots for one energy estimate (five groups)


def energy_budget(v_sites: int) -> EnergyBudget:
    """Shots needed to pin the energy per site to EPS_SITE.

    Var(E_site) = eps^2 spreads over V repulsion + 4V hopping terms whose
    Pauli pieces carry weights 1/4 and 1/2, giving
    Var(E_j) = (16/35) V eps^2 per Pauli term.
    """
    var_e_j = (16.0 / 35.0) * v_sites * EPS_SITE ** 2
    m_ej = 1.0 / var_e_j
    return EnergyBudget(var_e_j=var_e_j, m_ej=m_ej, m_e=5.0 * m_ej)


@dataclass(frozen=True)
class FdBudget:
    m_grad_fd: float
    delta_opt: float
    var_grad: float


def fd_budget(v_sites: int, n_para: float, n_sh: float,
              m_e: float | None = None) -> FdBudget:
    """Finite-difference gradient budget at the optimal step size.

    The optimal step balances shot noise against the cubic step-size error,
    whose scale is set by THIRD_DERIVATIVE_SCALE; with N_sh gates sharing
    each parameter the achievable gradient variance is
    0.63 N_sh^2 Var(E_j)^(2/3).
    """
    eb = energy_budget(v_sites)
    if m_e is None:
        m_e = eb.m_e
    delta = (24.0 * math.sqrt(2.0 * eb.var_e_j)
             / (THIRD_DERIVATIVE_SCALE * n_sh ** 3)) ** (1.0 / 3.0)
    var_grad = 0.63 * n_sh ** 2 * eb.var_e_j ** (2.0 / 3.0)
    return FdBudget(m_grad_fd=2.0 * n_para * m_e, delta_opt=delta, var_grad=var_grad)


@dataclass(frozen=True)
class DmBudget:
    m_dm: float       # shots per (term, parameter) pair
    m_grad_j: float   # shots for one term's full gradient vector
    m_grad: float     # shots for the full gradient (five groups)


def dm_budget(v_sites: int, n_eq: int, n_para: float) -> DmBudget:
    """Direct-measurement gradient budget at the same precision as fd_budget.

    Uses the global N_sh = 4 n_eq approximation; N_sh cancels between the
    2 N_sh probe pairs and the N_sh^2 in the target variance.
    """
    n_sh = 4.0 * n_eq
    var_grad = fd_budget(v_sites, n_para, n_sh).var_grad
    m_dm = (2.0 * n_sh) ** 2 / var_grad
    m_grad_j = m_dm * n_para
    return DmBudget(m_dm=m_dm, m_grad_j=m_grad_j, m_grad=5.0 * m_grad_j)


def breakeven(n_sh: float) -> float:
    """Gradient-std break-even between finite difference and direct probes."""
    if n_sh < 1:
        raise ValueError("n_sh must be at least 1")
    return n_sh / 4.0


def method_ratio(eps_grad: float, n_sh: float) -> float:
    """M_dm / M_fd at gradient precision eps_grad; 1 at the break-even point."""
    return 4.0 * eps_grad / n_sh


def n_iterations(m_tot: float, n_para: float, m_e: float) -> int:
    """Effective plain-gradient-descent iterations a total shot budget buys."""
    return round(m_tot / (2.0 * n_para * m_e))


@dataclass(frozen=True)
class WallClock:
    m_e_mitigated: float
    m_grad_mitigated: float
    t_e: float
    t_grad: float
    per_iteration: float
    total: float


def wallclock(t_circ: float, m_e: float, m_grad: float, c_se: float,
              n_qpu: int = 1, n_iter: int = 1) -> WallClock:
    """Wall-clock projection with the mitigation sampling overhead applied."""
    if min(t_circ, m_e, m_grad, c_se) <= 0 or n_qpu < 1 or n_iter < 1:
        raise ValueError("wallclock inputs must be positive")
    m_e_star = c_se * m_e
    m_grad_star = c_se * m_grad
    t_grad = t_circ * m_grad_star
    per_iter = t_grad / n_qpu
    return WallClock(
        m_e_mitigated=m_e_star,
        m_grad_mitigated=m_grad_star,
        t_e=t_circ * m_e_star,
        t_grad=t_grad,
        per_iteration=per_iter,
        total=n_iter * per_iter,
    )
