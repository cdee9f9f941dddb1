"""Random perforated domains, capacity functionals, and effective-equation
sweeps on regular grids."""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateConfigurationError,
                     InvalidArgumentError, SolverFailureError,
                     UnsupportedDimensionError)
from .points import (Box, PointConfiguration, count_in, empty_cell_frequency,
                     load_points, sample_poisson, save_points, scale, translate)
from .geometry import (BallRadiusRule, ConnectivityFunction, EdgeSet,
                       GeometryFamily, ObstacleSet, PerforatedMask,
                       build_balls, build_rcm_edges, build_tubes,
                       connected_components, density_ratio_check,
                       hole_free_mask, load_mask, mask_stats,
                       min_pairwise_distance, rasterize, rcm_obstacles,
                       sample_family, save_mask, scale_obstacles,
                       volume_fraction)
from .solver import (GridField, SolveReport, cg_solve, energy_gamma,
                     friedrichs_constant, gradient_energy, h1_norm,
                     l2_distance, l2_norm, load_field, make_operator,
                     save_field, solve_dirichlet_perforated, solve_homogenized)
from .capacity import (CapacityEstimate, ConductivityTensor,
                       affine_dirichlet_energy, boolean_capacity_constant,
                       conductivity_tensor, local_capacity,
                       local_capacity_minimizer, newton_capacity,
                       penalized_functional, strange_term)
from .sweep import (AuditResult, ErgodicSpec, HomogenizationReport, SweepSpec,
                    build_corrector, build_partition_of_unity,
                    ergodic_average_experiment, local_minimizers_for_partition,
                    partition_sum, run_sweep, uniform_bound_audit)
from .rng import substream, substream_seed
