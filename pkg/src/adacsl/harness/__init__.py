from .config import ExperimentConfig, load_config
from .data import SyntheticSpec, generate_synthetic, load_csv, split_dataset, split_indices
from .experiment import emit_series, illustrate_subgroups, run_experiment, subgroup_report
