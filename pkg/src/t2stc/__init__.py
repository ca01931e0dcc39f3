"""Adaptive interval type-2 fuzzy super-twisting control of uncertain chaotic plants."""

from .config import ExperimentConfig, PRESETS, parse_config, serialize_config
from .controller import (
    AdaptiveController, FirstOrderSMC, IdealSTC, NoControl, SlidingSpec, SuperTwistingGains,
    build_adaptive_controller, delta_s, project_params, sliding_value,
)
from .experiment import compare, run_experiment
from .export import CSV_COLUMNS, read_csv, write_csv
from .it2fls import (
    FuzzyApproximator, IT2GaussianSet, NonFiringInputError, Rule, Rulebase, basis_vector,
    build_grid_rulebase, defuzzify, eval_mf_bounds, firing_interval, km_type_reduce,
)
from .plant import (
    NoiseSpec, PlantModel, ReferenceSignal, add_measurement_noise, duffing_preset,
    plant_derivative, reference_preset,
)
from .sim import (
    Metrics, SimConfig, SimulationDiverged, Trajectory, compute_metrics, rk4_step,
    run_closed_loop, sliding_consistency_check,
)

__version__ = "0.1.0"
