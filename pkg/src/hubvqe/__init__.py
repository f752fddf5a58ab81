"""Resource estimation and desk-scale simulation of Hubbard-model VQE on
silicon-spin and superconducting gate sets."""

from .lattice import (LatticeSpec, OrbitalOrdering, FermionTerm, PauliString,
                      MeasurementGroup, snake_ordering, hubbard_terms,
                      jordan_wigner, parity_ops, measurement_groups,
                      exact_ground_energy)
from .circuit import (Circuit, Component, Gate, ParamExpr, HardwareProfile,
                      SILICON, SUPERCONDUCTING, bind, count_gates, schedule)
from .synthesis import (ha_block, slater_prep, full_ansatz, lower,
                        measurement_program, measurement_programs,
                        gradient_probe_circuits)
from .resources import ResourceReport, closed_form, counted, reconcile
from .mitigation import (detectable_mu, verification_cost, residual_mu,
                         postprocess_verify, direct_verify, extrapolate,
                         combined_cost, combined_estimate, MitigationPlan,
                         poisson_model_mc)
from .sampling import (sharing_map, energy_budget, fd_budget, dm_budget,
                       breakeven, wallclock, n_iterations)
from .simulator import (AnsatzEngine, NoiseSpec, apply, expectation, energy,
                        noisy_trajectory, sample, vqe, mitigated_energy)

__version__ = "0.1.0"
