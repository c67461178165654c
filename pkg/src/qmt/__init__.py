"""Quantal measure theory on finite sample spaces.

Decoherence functionals and their positivity hierarchy, the inner-product
space of a strongly positive functional, the two-analyzer spin-pair
scenario with its CHSH machinery and bounds, screening-off models, and a
linear-programming search for the maximal CHSH quantity over weakly
positive joint functionals.
"""

from .epr import (ADMISSIBLE_PATTERNS, EprScenario, ExperimentalProbabilities,
                  SCENARIO, SignPattern, TSIRELSON_BOUND, check_bounds,
                  check_nonsignaling, chsh_q, classical_joint_marginals,
                  correlator, experimental_probabilities, marginal, max_chsh_q)
from .errors import (ConditionUndefined, ConvergenceError, InvalidMeasure,
                     LpError, MarginalsNotDiagonal, NotStronglyPositive,
                     QmtError, SpaceMismatch)
from .gns import GnsSpace, gns_construct, inner, setting_vector, tsirelson_certificate
from .linalg import hermitian_eigen, signature_counts
from .lp import (LpProblem, LpSolution, build_max_q_lp, section5_example,
                 solve_lp, solve_max_q, verify_candidate)
from .measure import (ClassicalMeasure, DecoherenceFunctional, conditional_mu,
                      interference, max_interference, measure_level)
from .positivity import (PositivityReport, check_strong_positivity,
                         check_weak_positivity, eigensignature,
                         scan_subset_measures)
from .quantum import (ProjectorFamily, SpinDirections, build_df_commuting,
                      build_df_convex, build_df_ordered, build_df_sym,
                      df_sym_closed_form, df_sym_closed_form_matrix,
                      singlet_state, spin_projector, standard_directions)
from .screening import (SettingWeights, StructuredModel, augment_classical,
                        augment_quantal, check_classical_screening,
                        check_quantal_screening, classical_model,
                        conditional_experimental_probabilities,
                        joint_from_screening, quantal_model,
                        random_screening_model)
from .space import Event, SampleSpace

__version__ = "0.1.0"
