"""edgeplace: joint microservice/layer placement, access-point selection and
task assignment for small-cell edge networks.

Pipeline: generate a scenario, build the latency table, flatten to a binary
program, relax with sphere-box ADMM, round greedily, compare against greedy
baselines and (on small instances) an exact oracle.
"""

from .model import (NodeSpec, Topology, MicroserviceCatalog, UserSpec, Scenario,
                    Solution, ScenarioError, FeasibilityReport, coverage_matrix,
                    validate_scenario, check_feasible, evaluate_objective)
from .latency import LatencyTable, uplink_rate, latency_table, reduce_access
from .scenario import (GenerationConfig, generate, fit_popularity,
                       popularity_weights, sample_requests, save_scenario,
                       load_scenario)
from .ilp import (VariableLayout, IlpInstance, build_ilp, matrix_feasible,
                  binary_check_equivalence, export_lp)
from .admm import (AdmmParams, AdmmState, AdmmResult, AdmmError, PcgError,
                   DivergenceError, project_box, project_sphere, update_slack,
                   solve_v, update_duals, run, near_binary_fraction)
from .rounding import round_layers, assign_tasks, round_solution
from .baselines import ldg, mdg, gr, exact, OracleLimits, OracleLimitError
from .harness import (ExperimentPlan, ResultRow, InfeasibleResultError,
                      derive_seed, run_experiment, write_csv, read_csv,
                      emit_plot_data, count_edge_containers,
                      count_container_groups, solve_one)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
