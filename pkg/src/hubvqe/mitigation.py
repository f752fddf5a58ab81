"""Symmetry-verification and extrapolation analytics, estimators, and the
Monte Carlo validator for the Poisson error-count model.

The analytic model: each two-qubit component suffers a depolarizing error
with probability p, giving a mean circuit error count mu = M p.  Components
acting within one spin sector host detectable errors (odd X/Y weight) with
probability p/2; components straddling the sectors split p into p/4
undetectable and 3p/8 detectable by each sector's parity.  With alternating
layers (half the components cross-sector) the detectable count per sector is
mu_d = 5 mu / 16 and error counts Poissonize for large circuits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DENOM_TOL = 1e-9


def detectable_mu(mu: float) -> float:
    """Detectable mean error count per spin sector: 5 mu / 16."""
    if mu < 0:
        raise ValueError("mu must be non-negative")
    return 5.0 * mu / 16.0


def pass_probabilities(mu: float) -> tuple[float, float]:
    """(P_S_one, P_S): pass fraction of one parity test, and of both."""
    mu_d = detectable_mu(mu)
    p_one = (1.0 + math.exp(-2.0 * mu_d)) / 2.0
    return p_one, p_one ** 2


def verification_cost(mu: float) -> tuple[float, float, float]:
    """(C_S, P_S, P_S_one): sampling cost factor of direct verification."""
    p_one, p_s = pass_probabilities(mu)
    return 1.0 / p_s, p_s, p_one


def residual_mu(mu: float) -> tuple[float, float]:
    """(mu_S, reduction): error count surviving verification and its
    fractional reduction (5/8)(1 - tanh(5 mu/16))."""
    if mu < 0:
        raise ValueError("mu must be non-negative")
    mu_d = detectable_mu(mu)
    mu_s = 3.0 * mu / 8.0 + 5.0 * mu / 8.0 * math.tanh(mu_d)
    reduction = 5.0 / 8.0 * (1.0 - math.tanh(mu_d))
    return mu_s, reduction


def postprocess_verify(o_bar: float, os_bar: float, s_bar: float, s: int) -> float:
    """Symmetry-verified expectation from post-processing:
    (O + s*OS) / (1 + s*S) for a Pauli symmetry with eigenvalue s = +/-1."""
    if s not in (-1, 1):
        raise ValueError("s must be +1 or -1")
    denom = 1.0 + s * s_bar
    if abs(denom) < DENOM_TOL:
        raise ZeroDivisionError("symmetry sector has vanishing weight")
    return (o_bar + s * os_bar) / denom


def extrapolate(o_mu: float, o_lambda_mu: float, lam: float) -> float:
    """Two-point linear extrapolation to zero noise."""
    if lam <= 1:
        raise ValueError("the boost factor must exceed 1")
    return (lam * o_mu - o_lambda_mu) / (lam - 1.0)


def combined_estimate(o_s_mu: float, o_s_lambda_mu: float, lam: float) -> float:
    """Extrapolation applied to symmetry-verified observables."""
    return extrapolate(o_s_mu, o_s_lambda_mu, lam)


def combined_cost(mu: float, lam: float) -> float:
    """Sampling cost of verification plus two-point extrapolation:
    C_SE = 2 (lam^2 C_{S,1} + C_{S,lam}) / (lam - 1)^2."""
    if lam <= 1:
        raise ValueError("the boost factor must exceed 1")
    c_s1 = verification_cost(mu)[0]
    c_sl = verification_cost(lam * mu)[0]
    return 2.0 * (lam ** 2 * c_s1 + c_sl) / (lam - 1.0) ** 2


@dataclass(frozen=True)
class MitigationPlan:
    lam: float = 2.0
    verify_up: bool = True
    verify_down: bool = True
    mode: str = "direct"  # "direct" | "postprocess"

    def __post_init__(self):
        if self.lam <= 1:
            raise ValueError("lam must exceed 1 for extrapolation")
        if self.mode not in ("direct", "postprocess"):
            raise ValueError("mode must be direct or postprocess")

    def cost(self, mu: float) -> float:
        c = combined_cost(mu, self.lam)
        return c ** 2 if self.mode == "postprocess" else c


@dataclass(frozen=True)
class ShotRecord:
    """One sampled circuit run: bit outcomes reduced to term values and parities."""

    bits: int
    term_values: dict
    parity_up: int
    parity_down: int
    noise_boost: float = 1.0
    n_errors: int = 0


def direct_verify(shots: Sequence[ShotRecord], expected_up: int, expected_down: int,
                  plan: MitigationPlan | None = None) -> tuple[dict, float]:
    """Averages over shots passing the parity tests, plus the pass fraction.

    The implied sampling cost factor is 1 / pass_fraction.
    """
    plan = plan or MitigationPlan()
    if not shots:
        raise ValueError("no shots to verify")
    kept = [
        s for s in shots
        if (not plan.verify_up or s.parity_up == expected_up)
        and (not plan.verify_down or s.parity_down == expected_down)
    ]
    if not kept:
        raise ZeroDivisionError("every shot failed the symmetry test")
    keys = kept[0].term_values.keys()
    means = {k: float(np.mean([s.term_values[k] for s in kept])) for k in keys}
    return means, len(kept) / len(shots)


def term_averages(shots: Sequence[ShotRecord]) -> dict:
    if not shots:
        raise ValueError("no shots")
    keys = shots[0].term_values.keys()
    return {k: float(np.mean([s.term_values[k] for s in shots])) for k in keys}


# ---------------------------------------------------------------------------
# Monte Carlo validation of the Poisson model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoissonMcResult:
    mu: float
    n_components: int
    trials: int
    pass_fraction: float
    pass_fraction_sigma: float
    pass_fraction_analytic: float
    residual_mu: float
    residual_mu_sigma: float
    residual_mu_analytic: float


def poisson_model_mc(mu: float, n_components: int, trials: int = 100_000,
                     seed: int = 7) -> PoissonMcResult:
    """Class-sampled Monte Carlo of the verification model.

    Components follow the alternating-layer composition (half cross-sector,
    a quarter within each spin sector) with errors drawn per component at
    probability p = mu / M and classified per the channel approximations.
    Validates the closed forms for P_S and mu_S in the large-M regime.
    """
    if n_components < 4:
        raise ValueError("need at least four components")
    rng = np.random.default_rng(seed)
    p = mu / n_components
    if not 0 <= p <= 1:
        raise ValueError("mu / n_components must be a probability")
    n_cross = n_components // 2
    n_wu = (n_components - n_cross + 1) // 2
    n_wd = n_components - n_cross - n_wu

    # within-sector: error w.p. p, detectable half the time
    k_wu = rng.binomial(n_wu, p, size=trials)
    k_wd = rng.binomial(n_wd, p, size=trials)
    det_u_w = rng.binomial(k_wu, 0.5)
    det_d_w = rng.binomial(k_wd, 0.5)
    # cross-sector: error w.p. p, then undetectable 1/4, per-sector 3/8 each
    k_cross = rng.binomial(n_cross, p, size=trials)
    det_u_c = rng.binomial(k_cross, 3.0 / 8.0)
    rest = k_cross - det_u_c
    det_d_c = rng.binomial(rest, (3.0 / 8.0) / (5.0 / 8.0))

    flips_up = (det_u_w + det_u_c) % 2
    flips_down = (det_d_w + det_d_c) % 2
    passed = (flips_up == 0) & (flips_down == 0)
    totals = k_wu + k_wd + k_cross

    frac = float(passed.mean())
    frac_sigma = math.sqrt(max(frac * (1 - frac), 1e-12) / trials)
    surviving = totals[passed]
    res = float(surviving.mean())
    res_sigma = float(surviving.std(ddof=1) / math.sqrt(len(surviving)))

    _, p_s = pass_probabilities(mu)
    mu_s, _ = residual_mu(mu)
    return PoissonMcResult(
        mu=mu, n_components=n_components, trials=trials,
        pass_fraction=frac, pass_fraction_sigma=frac_sigma,
        pass_fraction_analytic=p_s,
        residual_mu=res, residual_mu_sigma=res_sigma,
        residual_mu_analytic=mu_s,
    )
