import math
from pathlib import Path

# Locations of bundled resources
schemas_dir = Path(__file__).parent.parent / "schemas"
configs_dir = Path(__file__).parent.parent / "configs"

# Root finding
bisection_tolerance = 1e-11
bisection_max_iterations = 200
golden_section_tolerance = 1e-10

# Spectra
null_eigenvalue_tolerance = 1e-9
disconnection_tolerance = 1e-12
kernel_tolerance = 1e-10

# Fundamental solution of the scalar delay equation
dde_steps_per_delay = 256
dde_min_steps_per_delay = 64
dde_decay_threshold = 1e-8
dde_horizon_cap = 200.0  # divided by lambda
dde_zero_delay_steps = 4096

# Euler-Maruyama simulator
sim_steps_per_delay = 100
sim_burn_in_factor = 30.0  # divided by lambda_2
sim_decimation_delays = 5.0
sim_chunk_steps = 2048
sim_max_dt_lambda = 0.1

# Monte Carlo for joint quantities
mc_block_size = 50_000
mc_default_samples = 100_000
covariance_clamp = 1e-10

# Random graphs
random_graph_margin = 0.95
random_graph_resamples_per_node = 10

# Canned runs
default_eps = 0.05
default_b = 1.0
default_beta = 1.0
default_seed = 1
example_scenario_nodes = 30

# Cached constants
half_pi = math.pi / 2

# Columns emitted by each command, in order. These mirror schemas/*.schema.json
risk_report_columns = ["tau", "t", "observable", "measure", "value", "classification"]
sweep_columns = [
    "tau",
    "safe",
    "marginal",
    "unsafe",
    "safe_connectivity",
    "marginal_connectivity",
    "unsafe_connectivity",
]
tradeoff_columns = ["sqrt_resistance", "risk", "passes_hard", "passes_tradeoff"]
tradeoff_curve_columns = ["curve", "sqrt_resistance", "risk"]
topology_columns = ["kind", "n", "node", "tau", "risk", "group"]
simulation_columns = [
    "time",
    "observable",
    "analytic_mean",
    "empirical_mean",
    "analytic_variance",
    "empirical_variance",
    "variance_se",
    "z_score",
]
sample_columns = ["trajectory", "time", "obs_index", "value"]
limit_columns = [
    "observable",
    "tau",
    "resistance",
    "resistance_floor",
    "var_risk",
    "var_hard_limit",
    "sigma",
    "sigma_star",
    "quad_risk",
    "quad_hard_limit",
    "exp_risk",
    "exp_hard_limit",
    "var_tradeoff",
    "var_tradeoff_floor",
    "quad_tradeoff",
    "quad_tradeoff_delta",
    "exp_tradeoff",
    "exp_tradeoff_delta",
    "passes",
]

report_schemas = {
    "analyze": "risk_report.schema.json",
    "sweep": "sweep.schema.json",
    "tradeoff": "tradeoff.schema.json",
    "tradeoff_curves": "tradeoff_curves.schema.json",
    "table": "topology_profile.schema.json",
    "simulate": "simulation.schema.json",
    "samples": "samples.schema.json",
    "limits": "limits.schema.json",
}

parquet = {
    "compression": "zstd",
    "compression_level": 3,
}
