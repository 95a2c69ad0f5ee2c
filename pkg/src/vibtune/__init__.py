"""Frequency-response analysis and adaptive PD tuning for convergent systems."""

from .mdof import (MdofSystem, StateVector, HarmonicInput, duffing_preset,
                   eval_dynamics, eval_nonlinearity, eval_nonlinearity_jacobian)
from .engine import (IntegratorConfig, Trajectory, SteadyStateReport, MultiIcReport,
                     DivergenceError, rk4_step, integrate, detect_steady_state,
                     multi_ic_convergence)
from .satellite import (SatelliteParams, MrpAttitude, RwDisturbanceModel, skew,
                        mrp_kinematics_jacobian, mrp_jacobian_rate, mrp_shadow,
                        body_dynamics, lagrangian_form, kinetic_energy,
                        kinetic_energy_body, propagate_satellite, rw_disturbance,
                        rw_excitation_cells)
from .control import (PdGains, pd_control, TrackingControllerConfig, tracking_error,
                      energy_tracking_control, MdofPlant, SatellitePlant)
from .convergence import (JacobianReport, jacobian_open_loop, jacobian_closed_loop,
                          transformation_matrix, generalized_jacobian,
                          definiteness_diagnostic, sample_region_check,
                          empirical_convergence_check)
from .frf import (ExcitationGrid, FrfMatrix, SweepFailure, amplification_gain,
                  frf_sweep, frobenius_norm, default_grid)
from .tuning import (AdaptationConfig, TuningHistory, adaptation_step, tune,
                     satellite_vibration_scenario, SatelliteScenarioResult)
from .io import (ConfigError, ScenarioConfig, load_config, parse_grid_override,
                 format_float, write_frf_csv, write_trajectory_csv,
                 write_history_csv, write_history_json, write_gains_json,
                 read_gains_json, write_json, sha256_file, RunManifest)

__version__ = "0.1.0"
