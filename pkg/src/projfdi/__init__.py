"""Orthogonal-projection-based fault detection, isolation and classification
for discrete-time LTI systems.

The toolkit represents system behavior as image/kernel subspaces of
normalized coprime factor pairs, detects faults as the distance of measured
data from those subspaces, sets residual-driven thresholds from gap-metric
uncertainty radii, and extends the same machinery to feedback loops,
multi-class isolation, finite-horizon parity residuals and additive
disturbances.
"""
from .additive import (AdditiveModel, conservative_threshold,
                       disturbance_factor, post_filter, unified_filter,
                       unified_threshold)
from .classification import (ClassificationVerdict, FaultClassModel,
                             binary_classify, classifiability_check,
                             estimate_overlap, multiclass_classify,
                             overlap_construct, residual_range_bound)
from .closed_loop import (ClosedLoopSIR, ControllerRealization,
                          SchemeADetector, closed_loop_sim,
                          closed_loop_sir_build, perturbed_plant,
                          scheme_a_residual, scheme_b_residual,
                          settled_loop_data, youla_controller)
from .exceptions import (ConvergenceError, DimensionError, IdentificationError,
                         IllPosedLoopError, NumericError, OverflowGuardError,
                         ProjFdiError, StructuralError, ThresholdDomainError)
from .factorization import (BezoutSet, CoprimeFactorization,
                            NormalizedRepresentation, bezout_complements,
                            make_coprime, normalized_gains, spectral_factor,
                            verify_bezout)
from .gap import (GapResult, MmpResult, directed_gap, directed_gap_detailed,
                  gap, kgap_directed, windowed_sup_inf)
from .harness import (DetectionReport, ScenarioConfig, UncertaintyDraw,
                      benchmark_plant, default_parity_model, export_report,
                      inject_uncertainty, random_stable_system, run_scenario)
from .norms import hinf_norm, sigma_max_grid
from .parity import (IOKernelModel, build_io_model, deadbeat_observer_gain,
                     identify_io_model, io_threshold, parity_residual,
                     read_log_csv, sliding_detection, sliding_detection_csv,
                     write_log_csv)
from .projection import (ProjectionEngine, ResidualDecomposition,
                         distance_to_image, engine_for, hankel_past_term,
                         image_data, observer_residual,
                         projection_residual_norm, sir_adjoint_output)
from .riccati import dare_stabilizing, solve_dare
from .signals import FrequencyGrid, SignalWindow
from .statespace import (StateSpaceModel, adjoint_response, freq_response,
                         is_schur, simulate)
from .thresholds import (ThresholdReport, adaptive_threshold,
                         kernel_scheme_threshold, normalized_detect)

__version__ = "0.1.0"
