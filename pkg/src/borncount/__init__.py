"""Born-rule branch counting on discretized configuration spaces."""

from .errors import (BornCountError, DepthGuardError, EmptySupportError,
                     GridMismatchError, MonotonicityError, NormalizationError,
                     UnknownLabelError)
from .measure import (CumulativeTable, DensityField, MeasurableSubset,
                      MonotoneMap, SampleGrid, cubic_map, cumulative_order,
                      integrate, linear_map, pushforward_density, uniform_grid)
from .refinement import (BranchVector, ConsistencyIndex, ConvergenceReport,
                         RefinementSequence, branch_vector, build_refinement,
                         consistency_index, convergence_study,
                         counting_probability, max_safe_depth, mu_prime,
                         reconstruct, support)
from .scenarios import (FiniteCaseConfig, SternGerlachConfig, build_scenario,
                        finite_uniform_case, finite_uniform_state,
                        gaussian_ket, halfline_partition, naive_branch_count,
                        random_ket, random_partition, stern_gerlach_state)
from .state import (GaugeRecord, Ket, MacrostatePartition, PolarForm,
                    born_probabilities, born_probability, gauge_absorb,
                    inner_product, polar_decompose, project,
                    uniformized_identity_check)
from .wavefunctional import (DensityPhaseMap, FieldConfigSpace,
                             build_config_space, emit_density_phase_map)

__version__ = "0.1.0"
