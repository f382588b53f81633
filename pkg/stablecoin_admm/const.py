"""Constants for the stablecoin monetary-policy stack."""

from typing import Final

DOMAIN: Final = "stablecoin_admm"
DEFAULT_NAME: Final = "Stablecoin ADMM"

# Numerical tolerances
DEFAULT_PRICE_FLOOR: Final = 1e-9
LEDGER_TOLERANCE: Final = 1e-6
QP_EPS: Final = 1e-9
QP_MAX_ITER: Final = 200_000
QP_ACTIVE_TOL: Final = 1e-7
QP_FEASIBILITY_TOL: Final = 1e-8

# Scenario MPC
DEFAULT_RHO: Final = 1.0
DEFAULT_EPS_PRIMAL: Final = 1e-6
DEFAULT_EPS_DUAL: Final = 1e-6
DEFAULT_ADMM_MAX_ITERS: Final = 10_000
RESIDUAL_BALANCE_RATIO: Final = 10.0
RESIDUAL_BALANCE_FACTOR: Final = 2.0
DEFAULT_RESIDUAL_BALANCING: Final = True

# Deep predictor
DEFAULT_BETA: Final = 1.0
DEFAULT_GAMMA: Final = 10.0
DEFAULT_TRAIN_TOLERANCE: Final = 1e-6

# Auction
OVERSTATEMENT_PENALTY_FACTOR: Final = 2.0
TIE_BREAK_WEIGHT: Final = 1e-9
ALLOCATION_TOLERANCE: Final = 1e-6

# Consensus network
MANAGER_NODE: Final = -1
DEFAULT_CONSENSUS_Q: Final = 1.0
DEFAULT_CONSENSUS_SIGMA: Final = 1.0
DEFAULT_CONSENSUS_EPS: Final = 1e-8
DEFAULT_CONSENSUS_MAX_ITERS: Final = 50_000

# Secure shares
DEFAULT_PRIME: Final = 2**61 - 1
DEFAULT_FIXED_POINT_BITS: Final = 20
COMMITMENT_RANDOMNESS_BYTES: Final = 32

# Experiment defaults
DEFAULT_SEED: Final = 0
DEFAULT_EPOCHS: Final = 200
DEFAULT_PEG: Final = 1.0
DEFAULT_THREADS: Final = 1
DEFAULT_OUTPUT_DIR: Final = "runs"
DEFAULT_DEPRECIATION_RATE: Final = 0.0

DEFAULT_P0: Final = 1.0
DEFAULT_MU: Final = 0.0
DEFAULT_SIGMA: Final = 0.05
DEFAULT_DT: Final = 1.0

DEFAULT_HORIZON: Final = 5
DEFAULT_SCENARIOS: Final = 4
DEFAULT_CONSENSUS_HORIZON: Final = 1
DEFAULT_LAMBDA: Final = 0.1
DEFAULT_U_MIN: Final = -1.0
DEFAULT_U_MAX: Final = 1.0
DEFAULT_TRACKING_WEIGHT: Final = 10.0
DEFAULT_INPUT_WEIGHT: Final = 0.01
DEFAULT_PRICE_IMPACT: Final = 0.05

DEFAULT_TAYLOR: Final = {
    "alpha": 0.3,
    "rho": 0.9,
    "zeta": 0.5,
    "phi_y": 0.5,
    "phi_pi": 1.5,
    "i_star": 0.02,
    "pi_star": 0.02,
    "r_star": 0.0,
    "beta_discount": 0.95,
    "lambda_weight": 0.5,
}
DEFAULT_TAYLOR_HORIZON: Final = 8
DEFAULT_SHOCK_SIGMA: Final = 0.002
DEFAULT_INITIAL_STATE: Final = (0.01, 0.01)

DEFAULT_S_INITIAL: Final = 1_000.0
DEFAULT_S_MAX: Final = 1_000_000.0
DEFAULT_BR: Final = 1.0
DEFAULT_BR_MAX: Final = 2.0
DEFAULT_AUC: Final = 10.0
DEFAULT_AUC_MAX: Final = 20.0
DEFAULT_COLLATERAL_RATIO: Final = 1.0
DEFAULT_LAMBDA_MAX: Final = 2.0

DEFAULT_KAPPA0: Final = 0.0
DEFAULT_KAPPA2: Final = 0.01
DEFAULT_USERS: Final = (
    {"id": "u1", "x_min": 0.0, "x": 8.0, "x_max": 20.0, "a": 0.0, "c": 0.1},
    {"id": "u2", "x_min": 0.0, "x": 12.0, "x_max": 20.0, "a": 0.0, "c": 0.1},
)

DEFAULT_WINDOW: Final = 5
DEFAULT_SWEEPS: Final = 20
DEFAULT_WARMUP: Final = 30
DEFAULT_PARTIES: Final = 3

MODEL_ALGORITHMIC: Final = "algorithmic"
MODEL_COLLATERALISED: Final = "collateralised"
MODEL_TAYLOR: Final = "taylor"
MODELS: Final = (MODEL_ALGORITHMIC, MODEL_COLLATERALISED, MODEL_TAYLOR)

SOLVER_ADMM: Final = "admm"
SOLVER_CENTRALIZED: Final = "centralized"

# Random stream labels
STREAM_MARKET: Final = "market"
STREAM_SCENARIOS: Final = "scenarios"
STREAM_PREDICTOR: Final = "predictor"
STREAM_NETWORK: Final = "network"
STREAM_SECURE: Final = "secure"

# Config keys
CONF_SEED: Final = "seed"
CONF_EPOCHS: Final = "epochs"
CONF_MODEL: Final = "model"
CONF_OUTPUT_DIR: Final = "output_dir"
CONF_THREADS: Final = "threads"
CONF_DEPRECIATION_RATE: Final = "depreciation_rate"

CONF_GBM: Final = "gbm"
CONF_P0: Final = "p0"
CONF_MU: Final = "mu"
CONF_SIGMA: Final = "sigma"
CONF_DT: Final = "dt"
CONF_PRICE_FLOOR: Final = "price_floor"
CONF_PEG: Final = "peg"

CONF_MPC: Final = "mpc"
CONF_HORIZON: Final = "horizon"
CONF_SCENARIOS: Final = "scenarios"
CONF_CONSENSUS_HORIZON: Final = "consensus_horizon"
CONF_LAMBDA: Final = "lambda"
CONF_RHO: Final = "rho"
CONF_EPS_PRIMAL: Final = "eps_primal"
CONF_EPS_DUAL: Final = "eps_dual"
CONF_MAX_ITERS: Final = "max_iters"
CONF_U_MIN: Final = "u_min"
CONF_U_MAX: Final = "u_max"
CONF_TRACKING_WEIGHT: Final = "tracking_weight"
CONF_INPUT_WEIGHT: Final = "input_weight"
CONF_PRICE_IMPACT: Final = "price_impact"
CONF_SOLVER: Final = "solver"
CONF_RESIDUAL_BALANCING: Final = "residual_balancing"

CONF_TAYLOR: Final = "taylor"
CONF_ALPHA: Final = "alpha"
CONF_ZETA: Final = "zeta"
CONF_PHI_Y: Final = "phi_y"
CONF_PHI_PI: Final = "phi_pi"
CONF_I_STAR: Final = "i_star"
CONF_PI_STAR: Final = "pi_star"
CONF_R_STAR: Final = "r_star"
CONF_BETA_DISCOUNT: Final = "beta_discount"
CONF_LAMBDA_WEIGHT: Final = "lambda_weight"
CONF_ALLOW_NEGATIVE_RATES: Final = "allow_negative_rates"
CONF_R_WEIGHT: Final = "r_weight"
CONF_S_WEIGHT: Final = "s_weight"
CONF_BLOCKING: Final = "blocking"
CONF_INITIAL_STATE: Final = "initial_state"
CONF_SHOCK_SIGMA: Final = "shock_sigma"

CONF_SUPPLY: Final = "supply"
CONF_S_INITIAL: Final = "s_initial"
CONF_S_MAX: Final = "s_max"
CONF_BR: Final = "br"
CONF_BR_MAX: Final = "br_max"
CONF_AUC: Final = "auc"
CONF_AUC_MAX: Final = "auc_max"
CONF_COLLATERAL_RATIO: Final = "collateral_ratio"
CONF_LAMBDA_MAX: Final = "lambda_max"

CONF_AUCTION: Final = "auction"
CONF_USERS: Final = "users"
CONF_USER_ID: Final = "id"
CONF_VALUE_A: Final = "a"
CONF_VALUE_B: Final = "b"
CONF_VALUE_C: Final = "c"
CONF_X: Final = "x"
CONF_X_MIN: Final = "x_min"
CONF_X_MAX: Final = "x_max"
CONF_KAPPA0: Final = "kappa0"
CONF_KAPPA2: Final = "kappa2"
CONF_DECENTRALISED: Final = "decentralised"

CONF_NETWORK: Final = "network"
CONF_P_E: Final = "p_e"
CONF_Q: Final = "q"
CONF_EPS1: Final = "eps1"
CONF_EPS2: Final = "eps2"

CONF_PREDICTOR: Final = "predictor"
CONF_ENABLED: Final = "enabled"
CONF_WINDOW: Final = "window"
CONF_HIDDEN: Final = "hidden"
CONF_SWEEPS: Final = "sweeps"
CONF_BETA: Final = "beta"
CONF_GAMMA: Final = "gamma"
CONF_WARMUP: Final = "warmup"

CONF_SECURE: Final = "secure"
CONF_PRIME: Final = "prime"
CONF_FIXED_POINT_BITS: Final = "fixed_point_bits"
CONF_PARTIES: Final = "parties"

# Per-epoch CSV columns
ATTR_EPOCH: Final = "epoch"
ATTR_PRICE: Final = "price"
ATTR_S_MAX: Final = "s_max"
ATTR_S_OUTSTANDING: Final = "s_outstanding"
ATTR_BR: Final = "br"
ATTR_AUC: Final = "auc"
ATTR_COLLATERAL_RATIO: Final = "collateral_ratio"
ATTR_MPC_OBJECTIVE: Final = "mpc_objective"
ATTR_AUCTION_PAYMENTS: Final = "auction_payments"
ATTR_CONSENSUS_ITERATIONS: Final = "consensus_iterations"
ATTR_VERIFICATION_STATUS: Final = "verification_status"
ATTR_S_DEPRECIATED: Final = "s_depreciated"
ATTR_CONTROL_STATUS: Final = "control_status"

EPOCH_COLUMNS: Final = (
    ATTR_EPOCH,
    ATTR_PRICE,
    ATTR_S_MAX,
    ATTR_S_OUTSTANDING,
    ATTR_BR,
    ATTR_AUC,
    ATTR_COLLATERAL_RATIO,
    ATTR_MPC_OBJECTIVE,
    ATTR_AUCTION_PAYMENTS,
    ATTR_CONSENSUS_ITERATIONS,
    ATTR_VERIFICATION_STATUS,
    ATTR_S_DEPRECIATED,
    ATTR_CONTROL_STATUS,
)

STATUS_OK: Final = "ok"
STATUS_OFF: Final = "off"
STATUS_SKIPPED: Final = "skipped"
STATUS_VERIFIED: Final = "verified"
STATUS_ITERATION_LIMIT: Final = "iteration_limit"
STATUS_BASELINE: Final = "baseline"

CSV_FLOAT_FORMAT: Final = "%.12g"
EPOCHS_FILE: Final = "epochs.csv"
SUMMARY_FILE: Final = "summary.csv"
TRACE_FILE: Final = "consensus_trace.csv"
TRANSCRIPT_FILE: Final = "transcript.jsonl"
VERIFICATION_FILE: Final = "verification.csv"
COMPARISON_FILE: Final = "comparison.csv"
STABILITY_FILE: Final = "stability_region.csv"
PROBE_FILE: Final = "auction_probe.csv"

# CLI exit codes
EXIT_OK: Final = 0
EXIT_CONFIG_ERROR: Final = 2
EXIT_RUNTIME_ERROR: Final = 3
EXIT_ITERATION_LIMIT: Final = 4
