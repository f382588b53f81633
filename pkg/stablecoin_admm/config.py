"""Experiment configuration: JSON document validated by voluptuous schemas."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any

import voluptuous as vol

from .const import (
    CONF_ALLOW_NEGATIVE_RATES,
    CONF_ALPHA,
    CONF_AUC,
    CONF_AUC_MAX,
    CONF_AUCTION,
    CONF_BETA,
    CONF_BETA_DISCOUNT,
    CONF_BLOCKING,
    CONF_BR,
    CONF_BR_MAX,
    CONF_COLLATERAL_RATIO,
    CONF_CONSENSUS_HORIZON,
    CONF_DECENTRALISED,
    CONF_DEPRECIATION_RATE,
    CONF_DT,
    CONF_ENABLED,
    CONF_EPOCHS,
    CONF_EPS1,
    CONF_EPS2,
    CONF_EPS_DUAL,
    CONF_EPS_PRIMAL,
    CONF_FIXED_POINT_BITS,
    CONF_GAMMA,
    CONF_GBM,
    CONF_HIDDEN,
    CONF_HORIZON,
    CONF_I_STAR,
    CONF_INITIAL_STATE,
    CONF_INPUT_WEIGHT,
    CONF_KAPPA0,
    CONF_KAPPA2,
    CONF_LAMBDA,
    CONF_LAMBDA_MAX,
    CONF_LAMBDA_WEIGHT,
    CONF_MAX_ITERS,
    CONF_MODEL,
    CONF_MPC,
    CONF_MU,
    CONF_NETWORK,
    CONF_OUTPUT_DIR,
    CONF_P0,
    CONF_P_E,
    CONF_PARTIES,
    CONF_PEG,
    CONF_PHI_PI,
    CONF_PHI_Y,
    CONF_PI_STAR,
    CONF_PREDICTOR,
    CONF_PRICE_FLOOR,
    CONF_PRICE_IMPACT,
    CONF_PRIME,
    CONF_Q,
    CONF_R_STAR,
    CONF_R_WEIGHT,
    CONF_RESIDUAL_BALANCING,
    CONF_RHO,
    CONF_S_INITIAL,
    CONF_S_MAX,
    CONF_S_WEIGHT,
    CONF_SCENARIOS,
    CONF_SECURE,
    CONF_SEED,
    CONF_SHOCK_SIGMA,
    CONF_SIGMA,
    CONF_SOLVER,
    CONF_SUPPLY,
    CONF_SWEEPS,
    CONF_TAYLOR,
    CONF_THREADS,
    CONF_TRACKING_WEIGHT,
    CONF_U_MAX,
    CONF_U_MIN,
    CONF_USER_ID,
    CONF_USERS,
    CONF_VALUE_A,
    CONF_VALUE_B,
    CONF_VALUE_C,
    CONF_WARMUP,
    CONF_WINDOW,
    CONF_X,
    CONF_X_MAX,
    CONF_X_MIN,
    CONF_ZETA,
    DEFAULT_ADMM_MAX_ITERS,
    DEFAULT_AUC,
    DEFAULT_AUC_MAX,
    DEFAULT_BETA,
    DEFAULT_BR,
    DEFAULT_BR_MAX,
    DEFAULT_COLLATERAL_RATIO,
    DEFAULT_CONSENSUS_EPS,
    DEFAULT_CONSENSUS_HORIZON,
    DEFAULT_CONSENSUS_MAX_ITERS,
    DEFAULT_CONSENSUS_Q,
    DEFAULT_CONSENSUS_SIGMA,
    DEFAULT_DEPRECIATION_RATE,
    DEFAULT_DT,
    DEFAULT_EPOCHS,
    DEFAULT_EPS_DUAL,
    DEFAULT_EPS_PRIMAL,
    DEFAULT_FIXED_POINT_BITS,
    DEFAULT_GAMMA,
    DEFAULT_HORIZON,
    DEFAULT_INITIAL_STATE,
    DEFAULT_INPUT_WEIGHT,
    DEFAULT_KAPPA0,
    DEFAULT_KAPPA2,
    DEFAULT_LAMBDA,
    DEFAULT_LAMBDA_MAX,
    DEFAULT_MU,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_P0,
    DEFAULT_PARTIES,
    DEFAULT_PEG,
    DEFAULT_PRICE_FLOOR,
    DEFAULT_PRICE_IMPACT,
    DEFAULT_PRIME,
    DEFAULT_RESIDUAL_BALANCING,
    DEFAULT_RHO,
    DEFAULT_S_INITIAL,
    DEFAULT_S_MAX,
    DEFAULT_SCENARIOS,
    DEFAULT_SEED,
    DEFAULT_SHOCK_SIGMA,
    DEFAULT_SIGMA,
    DEFAULT_SWEEPS,
    DEFAULT_TAYLOR,
    DEFAULT_TAYLOR_HORIZON,
    DEFAULT_THREADS,
    DEFAULT_TRACKING_WEIGHT,
    DEFAULT_U_MAX,
    DEFAULT_U_MIN,
    DEFAULT_USERS,
    DEFAULT_WARMUP,
    DEFAULT_WINDOW,
    MODEL_ALGORITHMIC,
    MODELS,
    SOLVER_ADMM,
    SOLVER_CENTRALIZED,
)
from .exceptions import ConfigError
from .taylor import TaylorHorizon, TaylorParams

_LOGGER = logging.getLogger(__name__)

_FLOAT = vol.Coerce(float)


def _bounded(
    low: float | None = None,
    high: float | None = None,
    *,
    low_open: bool = False,
    high_open: bool = False,
) -> vol.All:
    return vol.All(
        _FLOAT,
        vol.Range(min=low, max=high, min_included=not low_open, max_included=not high_open),
    )


def _count(low: int) -> vol.All:
    return vol.All(vol.Coerce(int), vol.Range(min=low))


_PROBABILITY = _bounded(0.0, 1.0)
_POSITIVE = _bounded(0.0, low_open=True)
_NON_NEGATIVE = _bounded(0.0)

GBM_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_P0, default=DEFAULT_P0): _POSITIVE,
        vol.Optional(CONF_MU, default=DEFAULT_MU): _FLOAT,
        vol.Optional(CONF_SIGMA, default=DEFAULT_SIGMA): _NON_NEGATIVE,
        vol.Optional(CONF_DT, default=DEFAULT_DT): _POSITIVE,
        vol.Optional(CONF_PRICE_FLOOR, default=DEFAULT_PRICE_FLOOR): _POSITIVE,
        vol.Optional(CONF_PEG, default=DEFAULT_PEG): _POSITIVE,
    }
)

MPC_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_HORIZON, default=DEFAULT_HORIZON): _count(1),
        vol.Optional(CONF_SCENARIOS, default=DEFAULT_SCENARIOS): _count(2),
        vol.Optional(CONF_CONSENSUS_HORIZON, default=DEFAULT_CONSENSUS_HORIZON): _count(0),
        vol.Optional(CONF_LAMBDA, default=DEFAULT_LAMBDA): _PROBABILITY,
        vol.Optional(CONF_RHO, default=DEFAULT_RHO): _POSITIVE,
        vol.Optional(CONF_EPS_PRIMAL, default=DEFAULT_EPS_PRIMAL): _POSITIVE,
        vol.Optional(CONF_EPS_DUAL, default=DEFAULT_EPS_DUAL): _POSITIVE,
        vol.Optional(CONF_MAX_ITERS, default=DEFAULT_ADMM_MAX_ITERS): _count(1),
        # issuance deviation relative to the nominal auction, so u >= -1
        vol.Optional(CONF_U_MIN, default=DEFAULT_U_MIN): _bounded(-1.0),
        vol.Optional(CONF_U_MAX, default=DEFAULT_U_MAX): _FLOAT,
        vol.Optional(CONF_TRACKING_WEIGHT, default=DEFAULT_TRACKING_WEIGHT): _NON_NEGATIVE,
        vol.Optional(CONF_INPUT_WEIGHT, default=DEFAULT_INPUT_WEIGHT): _NON_NEGATIVE,
        vol.Optional(CONF_PRICE_IMPACT, default=DEFAULT_PRICE_IMPACT): _POSITIVE,
        vol.Optional(CONF_SOLVER, default=SOLVER_CENTRALIZED): vol.In(
            [SOLVER_CENTRALIZED, SOLVER_ADMM]
        ),
        vol.Optional(
            CONF_RESIDUAL_BALANCING, default=DEFAULT_RESIDUAL_BALANCING
        ): vol.Boolean(),
    }
)

TAYLOR_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_ALPHA, default=DEFAULT_TAYLOR[CONF_ALPHA]): _FLOAT,
        vol.Optional(CONF_RHO, default=DEFAULT_TAYLOR[CONF_RHO]): _FLOAT,
        vol.Optional(CONF_ZETA, default=DEFAULT_TAYLOR[CONF_ZETA]): _FLOAT,
        vol.Optional(CONF_PHI_Y, default=DEFAULT_TAYLOR[CONF_PHI_Y]): _FLOAT,
        vol.Optional(CONF_PHI_PI, default=DEFAULT_TAYLOR[CONF_PHI_PI]): _FLOAT,
        vol.Optional(CONF_I_STAR, default=DEFAULT_TAYLOR[CONF_I_STAR]): _FLOAT,
        vol.Optional(CONF_PI_STAR, default=DEFAULT_TAYLOR[CONF_PI_STAR]): _FLOAT,
        vol.Optional(CONF_R_STAR, default=DEFAULT_TAYLOR[CONF_R_STAR]): _FLOAT,
        vol.Optional(
            CONF_BETA_DISCOUNT, default=DEFAULT_TAYLOR[CONF_BETA_DISCOUNT]
        ): _bounded(0.0, 1.0, low_open=True, high_open=True),
        vol.Optional(
            CONF_LAMBDA_WEIGHT, default=DEFAULT_TAYLOR[CONF_LAMBDA_WEIGHT]
        ): _bounded(0.0, 1.0, low_open=True, high_open=True),
        vol.Optional(CONF_HORIZON, default=DEFAULT_TAYLOR_HORIZON): _count(1),
        vol.Optional(CONF_ALLOW_NEGATIVE_RATES, default=False): vol.Boolean(),
        vol.Optional(CONF_R_WEIGHT, default=1.0): _NON_NEGATIVE,
        vol.Optional(CONF_S_WEIGHT, default=0.0): _NON_NEGATIVE,
        vol.Optional(CONF_BLOCKING, default=None): vol.Any(None, _count(1)),
        vol.Optional(CONF_INITIAL_STATE, default=list(DEFAULT_INITIAL_STATE)): vol.All(
            [_FLOAT], vol.Length(min=2, max=2)
        ),
        vol.Optional(CONF_SHOCK_SIGMA, default=DEFAULT_SHOCK_SIGMA): _NON_NEGATIVE,
    }
)

SUPPLY_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_S_INITIAL, default=DEFAULT_S_INITIAL): _NON_NEGATIVE,
        vol.Optional(CONF_S_MAX, default=DEFAULT_S_MAX): _NON_NEGATIVE,
        vol.Optional(CONF_BR, default=DEFAULT_BR): _NON_NEGATIVE,
        vol.Optional(CONF_BR_MAX, default=DEFAULT_BR_MAX): _NON_NEGATIVE,
        vol.Optional(CONF_AUC, default=DEFAULT_AUC): _POSITIVE,
        vol.Optional(CONF_AUC_MAX, default=DEFAULT_AUC_MAX): _NON_NEGATIVE,
        vol.Optional(CONF_COLLATERAL_RATIO, default=DEFAULT_COLLATERAL_RATIO): _bounded(1.0),
        vol.Optional(CONF_LAMBDA_MAX, default=DEFAULT_LAMBDA_MAX): _bounded(1.0),
    }
)

USER_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_USER_ID): vol.Coerce(str),
        vol.Required(CONF_X_MIN): _NON_NEGATIVE,
        vol.Required(CONF_X): _NON_NEGATIVE,
        vol.Required(CONF_X_MAX): _NON_NEGATIVE,
        vol.Optional(CONF_VALUE_A, default=0.0): _FLOAT,
        vol.Optional(CONF_VALUE_B, default=0.0): _NON_NEGATIVE,
        vol.Required(CONF_VALUE_C): _NON_NEGATIVE,
    }
)

AUCTION_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_USERS, default=[dict(u) for u in DEFAULT_USERS]): vol.All(
            [USER_SCHEMA], vol.Length(min=1)
        ),
        vol.Optional(CONF_KAPPA0, default=DEFAULT_KAPPA0): _NON_NEGATIVE,
        vol.Optional(CONF_KAPPA2, default=DEFAULT_KAPPA2): _NON_NEGATIVE,
        vol.Optional(CONF_DECENTRALISED, default=False): vol.Boolean(),
    }
)

_ONLINE = _bounded(0.0, 1.0, low_open=True)

NETWORK_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_ALPHA, default=1.0): vol.Any(_ONLINE, [_ONLINE]),
        vol.Optional(CONF_P_E, default=0.0): _PROBABILITY,
        vol.Optional(CONF_Q, default=DEFAULT_CONSENSUS_Q): _POSITIVE,
        vol.Optional(CONF_SIGMA, default=DEFAULT_CONSENSUS_SIGMA): _POSITIVE,
        vol.Optional(CONF_EPS1, default=DEFAULT_CONSENSUS_EPS): _POSITIVE,
        vol.Optional(CONF_EPS2, default=DEFAULT_CONSENSUS_EPS): _POSITIVE,
        vol.Optional(CONF_MAX_ITERS, default=DEFAULT_CONSENSUS_MAX_ITERS): _count(2),
    }
)

PREDICTOR_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_ENABLED, default=True): vol.Boolean(),
        vol.Optional(CONF_WINDOW, default=DEFAULT_WINDOW): _count(1),
        vol.Optional(CONF_HIDDEN, default=[]): [_count(1)],
        vol.Optional(CONF_SWEEPS, default=DEFAULT_SWEEPS): _count(0),
        vol.Optional(CONF_BETA, default=DEFAULT_BETA): _POSITIVE,
        vol.Optional(CONF_GAMMA, default=DEFAULT_GAMMA): _POSITIVE,
        vol.Optional(CONF_WARMUP, default=DEFAULT_WARMUP): _count(2),
    }
)

SECURE_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_ENABLED, default=False): vol.Boolean(),
        vol.Optional(CONF_PRIME, default=DEFAULT_PRIME): vol.All(
            vol.Coerce(int), vol.Range(min=3, max=2**63 - 1)
        ),
        vol.Optional(CONF_FIXED_POINT_BITS, default=DEFAULT_FIXED_POINT_BITS): vol.All(
            vol.Coerce(int), vol.Range(min=0, max=40)
        ),
        vol.Optional(CONF_PARTIES, default=DEFAULT_PARTIES): _count(1),
    }
)

EXPERIMENT_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): _count(0),
        vol.Optional(CONF_EPOCHS, default=DEFAULT_EPOCHS): _count(0),
        vol.Optional(CONF_MODEL, default=MODEL_ALGORITHMIC): vol.In(MODELS),
        vol.Optional(CONF_DEPRECIATION_RATE, default=DEFAULT_DEPRECIATION_RATE): _PROBABILITY,
        vol.Optional(CONF_OUTPUT_DIR, default=DEFAULT_OUTPUT_DIR): str,
        vol.Optional(CONF_THREADS, default=DEFAULT_THREADS): _count(1),
        vol.Optional(CONF_GBM, default={}): GBM_SCHEMA,
        vol.Optional(CONF_MPC, default={}): MPC_SCHEMA,
        vol.Optional(CONF_TAYLOR, default={}): TAYLOR_SCHEMA,
        vol.Optional(CONF_SUPPLY, default={}): SUPPLY_SCHEMA,
        vol.Optional(CONF_AUCTION, default={}): AUCTION_SCHEMA,
        vol.Optional(CONF_NETWORK, default={}): NETWORK_SCHEMA,
        vol.Optional(CONF_PREDICTOR, default={}): PREDICTOR_SCHEMA,
        vol.Optional(CONF_SECURE, default={}): SECURE_SCHEMA,
    }
)


@dataclass(frozen=True)
class GbmConfig:
    p0: float
    mu: float
    sigma: float
    dt: float
    price_floor: float
    peg: float


@dataclass(frozen=True)
class MpcConfig:
    horizon: int
    scenarios: int
    consensus_horizon: int
    lambda_tradeoff: float
    rho: float
    eps_primal: float
    eps_dual: float
    max_iters: int
    u_min: float
    u_max: float
    tracking_weight: float
    input_weight: float
    price_impact: float
    solver: str
    residual_balancing: bool


@dataclass(frozen=True)
class TaylorConfig:
    alpha: float
    rho: float
    zeta: float
    phi_y: float
    phi_pi: float
    i_star: float
    pi_star: float
    r_star: float
    beta_discount: float
    lambda_weight: float
    horizon: int
    allow_negative_rates: bool
    r_weight: float
    s_weight: float
    blocking: int | None
    initial_state: tuple[float, float]
    shock_sigma: float

    def params(self) -> TaylorParams:
        return TaylorParams(
            alpha=self.alpha,
            rho=self.rho,
            zeta=self.zeta,
            phi_y=self.phi_y,
            phi_pi=self.phi_pi,
            i_star=self.i_star,
            pi_star=self.pi_star,
            r_star=self.r_star,
            beta_discount=self.beta_discount,
            lambda_weight=self.lambda_weight,
            horizon=self.horizon,
            allow_negative_rates=self.allow_negative_rates,
        )

    def horizon_data(self) -> TaylorHorizon:
        return TaylorHorizon(
            r_weight=self.r_weight, s_weight=self.s_weight, blocking=self.blocking
        )


@dataclass(frozen=True)
class SupplyConfig:
    s_initial: float
    s_max: float
    br: float
    br_max: float
    auc: float
    auc_max: float
    collateral_ratio: float
    lambda_max: float


@dataclass(frozen=True)
class AuctionConfig:
    users: tuple[dict[str, Any], ...]
    kappa0: float
    kappa2: float
    decentralised: bool


@dataclass(frozen=True)
class NetworkConfig:
    alpha: tuple[float, ...]
    p_e: float
    q: float
    sigma: float
    eps1: float
    eps2: float
    max_iters: int


@dataclass(frozen=True)
class PredictorConfig:
    enabled: bool
    window: int
    hidden: tuple[int, ...]
    sweeps: int
    beta: float
    gamma: float
    warmup: int


@dataclass(frozen=True)
class SecureConfig:
    enabled: bool
    prime: int
    fixed_point_bits: int
    parties: int


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration."""

    seed: int
    epochs: int
    model: str
    depreciation_rate: float
    output_dir: str
    threads: int
    gbm: GbmConfig
    mpc: MpcConfig
    taylor: TaylorConfig
    supply: SupplyConfig
    auction: AuctionConfig
    network: NetworkConfig
    predictor: PredictorConfig
    secure: SecureConfig

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data[CONF_MPC][CONF_LAMBDA] = data[CONF_MPC].pop("lambda_tradeoff")
        data[CONF_AUCTION][CONF_USERS] = [dict(u) for u in self.auction.users]
        data[CONF_TAYLOR][CONF_INITIAL_STATE] = list(self.taylor.initial_state)
        data[CONF_NETWORK][CONF_ALPHA] = list(self.network.alpha)
        data[CONF_PREDICTOR][CONF_HIDDEN] = list(self.predictor.hidden)
        return data

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """Copy with top-level fields replaced, skipping None values."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def _path(path: list[Any]) -> str:
    return ".".join(str(part) for part in path) or "<root>"


def _cross_field_errors(data: dict[str, Any]) -> dict[str, str]:
    errors: dict[str, str] = {}
    mpc = data[CONF_MPC]
    if mpc[CONF_CONSENSUS_HORIZON] > mpc[CONF_HORIZON]:
        errors[f"{CONF_MPC}.{CONF_CONSENSUS_HORIZON}"] = "must not exceed the horizon"
    if mpc[CONF_U_MIN] > mpc[CONF_U_MAX]:
        errors[f"{CONF_MPC}.{CONF_U_MIN}"] = "must not exceed u_max"

    supply = data[CONF_SUPPLY]
    if supply[CONF_S_INITIAL] > supply[CONF_S_MAX]:
        errors[f"{CONF_SUPPLY}.{CONF_S_INITIAL}"] = "must not exceed s_max"
    if supply[CONF_BR] > supply[CONF_BR_MAX]:
        errors[f"{CONF_SUPPLY}.{CONF_BR}"] = "must not exceed br_max"
    if supply[CONF_AUC] > supply[CONF_AUC_MAX]:
        errors[f"{CONF_SUPPLY}.{CONF_AUC}"] = "must not exceed auc_max"
    if supply[CONF_COLLATERAL_RATIO] > supply[CONF_LAMBDA_MAX]:
        errors[f"{CONF_SUPPLY}.{CONF_COLLATERAL_RATIO}"] = "must not exceed lambda_max"

    users = data[CONF_AUCTION][CONF_USERS]
    for index, user in enumerate(users):
        if not user[CONF_X_MIN] <= user[CONF_X] <= user[CONF_X_MAX]:
            errors[f"{CONF_AUCTION}.{CONF_USERS}.{index}"] = "needs x_min <= x <= x_max"
    ids = [user[CONF_USER_ID] for user in users]
    if len(set(ids)) != len(ids):
        errors[f"{CONF_AUCTION}.{CONF_USERS}"] = "user ids must be unique"

    alpha = data[CONF_NETWORK][CONF_ALPHA]
    if isinstance(alpha, list) and len(alpha) != len(users):
        errors[f"{CONF_NETWORK}.{CONF_ALPHA}"] = (
            f"needs one entry per auction user ({len(users)})"
        )

    predictor = data[CONF_PREDICTOR]
    if predictor[CONF_ENABLED] and predictor[CONF_WARMUP] <= predictor[CONF_WINDOW] + 1:
        errors[f"{CONF_PREDICTOR}.{CONF_WARMUP}"] = "must exceed window + 1"

    taylor = data[CONF_TAYLOR]
    if taylor[CONF_BLOCKING] is not None and taylor[CONF_BLOCKING] > taylor[CONF_HORIZON]:
        errors[f"{CONF_TAYLOR}.{CONF_BLOCKING}"] = "must not exceed the horizon"

    if data[CONF_SECURE][CONF_ENABLED] and not data[CONF_AUCTION][CONF_DECENTRALISED]:
        errors[f"{CONF_SECURE}.{CONF_ENABLED}"] = "requires auction.decentralised"
    return errors


def _build(data: dict[str, Any]) -> ExperimentConfig:
    mpc = dict(data[CONF_MPC])
    mpc["lambda_tradeoff"] = mpc.pop(CONF_LAMBDA)
    taylor = dict(data[CONF_TAYLOR])
    taylor[CONF_INITIAL_STATE] = tuple(taylor[CONF_INITIAL_STATE])
    auction = dict(data[CONF_AUCTION])
    auction[CONF_USERS] = tuple(dict(u) for u in auction[CONF_USERS])
    network = dict(data[CONF_NETWORK])
    alpha = network[CONF_ALPHA]
    users = len(auction[CONF_USERS])
    network[CONF_ALPHA] = tuple(alpha) if isinstance(alpha, list) else (alpha,) * users
    predictor = dict(data[CONF_PREDICTOR])
    predictor[CONF_HIDDEN] = tuple(predictor[CONF_HIDDEN])
    return ExperimentConfig(
        seed=data[CONF_SEED],
        epochs=data[CONF_EPOCHS],
        model=data[CONF_MODEL],
        depreciation_rate=data[CONF_DEPRECIATION_RATE],
        output_dir=data[CONF_OUTPUT_DIR],
        threads=data[CONF_THREADS],
        gbm=GbmConfig(**data[CONF_GBM]),
        mpc=MpcConfig(**mpc),
        taylor=TaylorConfig(**taylor),
        supply=SupplyConfig(**data[CONF_SUPPLY]),
        auction=AuctionConfig(**auction),
        network=NetworkConfig(**network),
        predictor=PredictorConfig(**predictor),
        secure=SecureConfig(**data[CONF_SECURE]),
    )


def validate_config(raw: dict[str, Any]) -> ExperimentConfig:
    """Validate a configuration document and fill in defaults.

    Args:
        raw: Parsed JSON document

    Returns:
        The validated configuration

    Raises:
        ConfigError: With one message per offending dotted field path
    """
    errors: dict[str, str] = {}
    try:
        data = EXPERIMENT_SCHEMA(raw)
    except vol.MultipleInvalid as err:
        for error in err.errors:
            errors[_path(error.path)] = error.msg
        _LOGGER.debug("Schema rejected %s fields", len(errors))
        raise ConfigError(errors) from err

    errors.update(_cross_field_errors(data))
    if errors:
        raise ConfigError(errors)
    return _build(data)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON configuration file.

    Raises:
        ConfigError: If the file is unreadable, not JSON or invalid
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as err:
        raise ConfigError({"<file>": f"cannot read {path}: {err}"}) from err
    except json.JSONDecodeError as err:
        raise ConfigError({"<file>": f"invalid JSON: {err}"}) from err
    if not isinstance(raw, dict):
        raise ConfigError({"<root>": "expected a JSON object"})
    return validate_config(raw)


def default_config() -> ExperimentConfig:
    return validate_config({})
