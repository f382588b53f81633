"""Experiment coordinator: seeded end-to-end simulation of the policy stack.

Each epoch of an algorithmic or collateralised run draws a market return,
asks the scenario MPC for the issuance deviation u, pays the block reward,
auctions (1 + u) times the nominal issuance and moves the log price by the
market return minus price_impact times the realised deviation. Baseline
runs skip the controller, so their price is the plain GBM path.
"""

from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .auction import AuctionInstance, AuctionOutcome, IssuanceBounds, run_auction
from .config import ExperimentConfig, validate_config
from .consensus import (
    NetworkModel,
    protocol_outcome,
    run_dual_consensus,
    standalone_allocations,
)
from .const import (
    ATTR_AUC,
    ATTR_AUCTION_PAYMENTS,
    ATTR_BR,
    ATTR_COLLATERAL_RATIO,
    ATTR_CONSENSUS_ITERATIONS,
    ATTR_CONTROL_STATUS,
    ATTR_EPOCH,
    ATTR_MPC_OBJECTIVE,
    ATTR_PRICE,
    ATTR_S_DEPRECIATED,
    ATTR_S_MAX,
    ATTR_S_OUTSTANDING,
    ATTR_VERIFICATION_STATUS,
    CONF_KAPPA0,
    CONF_KAPPA2,
    CONF_USERS,
    CSV_FLOAT_FORMAT,
    EPOCH_COLUMNS,
    EPOCHS_FILE,
    MODEL_COLLATERALISED,
    MODEL_TAYLOR,
    STATUS_BASELINE,
    STATUS_ITERATION_LIMIT,
    STATUS_OFF,
    STATUS_OK,
    STATUS_SKIPPED,
    STATUS_VERIFIED,
    STREAM_MARKET,
    STREAM_NETWORK,
    STREAM_PREDICTOR,
    STREAM_SCENARIOS,
    STREAM_SECURE,
    SUMMARY_FILE,
    TRACE_FILE,
    TRANSCRIPT_FILE,
    VERIFICATION_FILE,
)
from .exceptions import (
    ExperimentError,
    IterationLimit,
    SchemaMismatch,
    StablecoinError,
)
from .predictor import PricePredictor
from .price import gbm_step, simulate_gbm_paths
from .scenario_mpc import LinearSystem, ScenarioOcp, solve_ocp
from .secure import committed_protocol_run
from .supply import (
    DepreciationSchedule,
    SupplyState,
    adjust_controls,
    advance_epoch,
    apply_auction_issuance,
    apply_controls,
    outstanding_with_depreciation,
    step_block_reward,
)
from .taylor import taylor_model_step, taylor_mpc_solve, taylor_objective

_LOGGER = logging.getLogger(__name__)

MODULE_ECON = "econ-model"
MODULE_MPC = "scenario-mpc"
MODULE_PREDICT = "deep-predict"
MODULE_AUCTION = "auction"
MODULE_CONSENSUS = "consensus-net"
MODULE_SECURE = "secure-shares"

SUMMARY_PRICE_VARIANCE = "price_variance"
SUMMARY_PEG_DEVIATION = "peg_deviation"
SUMMARY_MAX_PEG_DEVIATION = "max_peg_deviation"
SUMMARY_MEAN_OBJECTIVE = "mean_mpc_objective"
SUMMARY_TOTAL_PAYMENTS = "total_auction_payments"
SUMMARY_TOTAL_ITERATIONS = "total_consensus_iterations"
SUMMARY_FINAL_OUTSTANDING = "final_s_outstanding"
SUMMARY_EPOCHS = "epochs"


def stream_rng(seed: int, label: str) -> np.random.Generator:
    """Generator for one labelled stream of a run.

    The label is hashed into the spawn key, so streams never share draws and
    adding a stream leaves every other one untouched.
    """
    key = int.from_bytes(hashlib.sha256(label.encode()).digest()[:4], "big")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


@contextmanager
def _stage(epoch: int, module: str) -> Iterator[None]:
    try:
        yield
    except ExperimentError:
        raise
    except (StablecoinError, ValueError, ArithmeticError) as err:
        _LOGGER.error("Epoch %s failed in %s: %s", epoch, module, err)
        raise ExperimentError(epoch, module, str(err)) from err


def summarise(epochs: pd.DataFrame, peg: float) -> dict[str, float]:
    """Price variance, peg deviation and totals of a run."""
    prices = epochs[ATTR_PRICE].to_numpy(dtype=float)
    deviation = np.abs(prices - peg)
    empty = prices.size == 0
    return {
        SUMMARY_EPOCHS: float(prices.size),
        SUMMARY_PRICE_VARIANCE: 0.0 if empty else float(np.var(prices)),
        SUMMARY_PEG_DEVIATION: 0.0 if empty else float(deviation.mean()),
        SUMMARY_MAX_PEG_DEVIATION: 0.0 if empty else float(deviation.max()),
        SUMMARY_MEAN_OBJECTIVE: 0.0
        if empty
        else float(epochs[ATTR_MPC_OBJECTIVE].to_numpy(dtype=float).mean()),
        SUMMARY_TOTAL_PAYMENTS: float(epochs[ATTR_AUCTION_PAYMENTS].to_numpy(dtype=float).sum()),
        SUMMARY_TOTAL_ITERATIONS: float(
            epochs[ATTR_CONSENSUS_ITERATIONS].to_numpy(dtype=float).sum()
        ),
        SUMMARY_FINAL_OUTSTANDING: 0.0
        if empty
        else float(epochs[ATTR_S_OUTSTANDING].to_numpy(dtype=float)[-1]),
    }


def _write_frame(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


@dataclass
class RunArtifacts:
    """Per-epoch rows, summary statistics and optional protocol logs."""

    epochs: pd.DataFrame
    summary: dict[str, float]
    trace: pd.DataFrame | None = None
    transcript: str | None = None
    verification: pd.DataFrame | None = None

    @property
    def degraded_epochs(self) -> list[int]:
        """Epochs where the controller or the consensus hit its iteration cap."""
        flags = (self.epochs[ATTR_CONTROL_STATUS] == STATUS_ITERATION_LIMIT) | (
            self.epochs[ATTR_VERIFICATION_STATUS] == STATUS_ITERATION_LIMIT
        )
        return [int(e) for e in self.epochs.loc[flags, ATTR_EPOCH]]

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"metric": list(self.summary), "value": list(self.summary.values())}
        )

    def write(self, out_dir: str | Path) -> Path:
        """Write every artifact as CSV (and the transcript as JSON lines)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_frame(self.epochs, out / EPOCHS_FILE)
        _write_frame(self.summary_frame(), out / SUMMARY_FILE)
        if self.trace is not None:
            _write_frame(self.trace, out / TRACE_FILE)
        if self.verification is not None:
            _write_frame(self.verification, out / VERIFICATION_FILE)
        if self.transcript is not None:
            (out / TRANSCRIPT_FILE).write_text(self.transcript, encoding="utf-8")
        _LOGGER.info("Wrote run artifacts to %s", out)
        return out

    @classmethod
    def load(cls, out_dir: str | Path) -> RunArtifacts:
        """Read the epoch rows and summary written by write().

        Raises:
            SchemaMismatch: If a file is missing or lacks expected columns
        """
        out = Path(out_dir)
        try:
            epochs = pd.read_csv(out / EPOCHS_FILE)
            summary = pd.read_csv(out / SUMMARY_FILE)
        except (OSError, pd.errors.EmptyDataError) as err:
            raise SchemaMismatch(f"Cannot read run artifacts in {out}: {err}") from err
        if list(epochs.columns) != list(EPOCH_COLUMNS):
            raise SchemaMismatch(f"{out / EPOCHS_FILE} does not have the epoch columns")
        if list(summary.columns) != ["metric", "value"]:
            raise SchemaMismatch(f"{out / SUMMARY_FILE} is not a metric/value table")
        return cls(
            epochs=epochs,
            summary={str(k): float(v) for k, v in zip(summary["metric"], summary["value"], strict=True)},
        )


class ExperimentCoordinator:
    """Drives one seeded run epoch by epoch."""

    def __init__(self, config: ExperimentConfig, baseline: bool = False) -> None:
        """Initialize the coordinator.

        Args:
            config: Validated experiment configuration
            baseline: Skip every controller (uncontrolled comparison run)
        """
        self.config = config
        self.baseline = baseline
        seed = config.seed
        self._market = stream_rng(seed, STREAM_MARKET)
        self._scenarios = stream_rng(seed, STREAM_SCENARIOS)
        self._predictor_rng = stream_rng(seed, STREAM_PREDICTOR)
        self._network = stream_rng(seed, STREAM_NETWORK)
        self._secure = stream_rng(seed, STREAM_SECURE)

        supply = config.supply
        self._supply = SupplyState.initial(
            s_initial=supply.s_initial,
            s_max=supply.s_max,
            br_max=supply.br_max,
            auc_max=supply.auc_max,
            collateral_ratio=supply.collateral_ratio,
            lambda_max=supply.lambda_max,
        )
        self._br = supply.br
        self._auc = supply.auc
        self._price = config.gbm.p0
        self._market_index = [1.0]

        auction = config.auction
        self._instance = AuctionInstance.from_dict(
            {
                CONF_USERS: [dict(u) for u in auction.users],
                CONF_KAPPA0: auction.kappa0,
                CONF_KAPPA2: auction.kappa2,
                "y_max": 0.0,
            }
        )
        self._valuations = self._instance.valuation
        self._net = NetworkModel.star(config.network.alpha, config.network.p_e)

        self._taylor = config.taylor.params()
        self._taylor_horizon = config.taylor.horizon_data()
        self._taylor_state = np.asarray(config.taylor.initial_state, dtype=float)

        predictor = config.predictor
        self._predictor: PricePredictor | None = None
        if predictor.enabled and not baseline and config.model != MODEL_TAYLOR:
            self._predictor = PricePredictor(
                window=predictor.window,
                hidden=predictor.hidden,
                betas=predictor.beta,
                gammas=predictor.gamma,
                sweeps=predictor.sweeps,
            )

        self._degraded: dict[int, str] = {}
        self._traces: list[pd.DataFrame] = []
        self._transcripts: list[str] = []
        self._reports: list[pd.DataFrame] = []

    def run(self) -> RunArtifacts:
        """Simulate every epoch and collect the artifacts."""
        _LOGGER.info(
            "Starting %s run (seed %s, %s epochs, baseline=%s)",
            self.config.model,
            self.config.seed,
            self.config.epochs,
            self.baseline,
        )
        rows = [self._step(epoch) for epoch in range(self.config.epochs)]
        epochs = pd.DataFrame(rows, columns=list(EPOCH_COLUMNS))
        if self._degraded:
            _LOGGER.warning("Epochs finished with degraded results: %s", self._degraded)

        decentralised = self.config.auction.decentralised and self.config.model != MODEL_TAYLOR
        secure = decentralised and self.config.secure.enabled
        artifacts = RunArtifacts(
            epochs=epochs,
            summary=summarise(epochs, self.config.gbm.peg),
            trace=pd.concat(self._traces, ignore_index=True)
            if decentralised and not secure and self._traces
            else None,
            transcript="".join(self._transcripts) if secure else None,
            verification=pd.concat(self._reports, ignore_index=True)
            if secure and self._reports
            else None,
        )
        _LOGGER.info("Finished run with price variance %s", artifacts.summary[SUMMARY_PRICE_VARIANCE])
        return artifacts

    def _step(self, epoch: int) -> dict[str, Any]:
        network_seed = int(self._network.integers(0, 2**32))
        if epoch > 0:
            self._supply = advance_epoch(self._supply)
        if self.config.model == MODEL_TAYLOR:
            row = self._taylor_step(epoch)
        else:
            row = self._stablecoin_step(epoch, network_seed)
        with _stage(epoch, MODULE_ECON):
            schedule = DepreciationSchedule(
                self.config.depreciation_rate, self._supply.s_minted_history
            )
            depreciated = outstanding_with_depreciation(schedule, self._supply.t)
        row.update(
            {
                ATTR_EPOCH: epoch,
                ATTR_PRICE: self._price,
                ATTR_S_MAX: self._supply.s_max,
                ATTR_S_OUTSTANDING: self._supply.s_outstanding,
                ATTR_COLLATERAL_RATIO: self._supply.collateral_ratio,
                ATTR_S_DEPRECIATED: depreciated,
            }
        )
        return row

    def _stablecoin_step(self, epoch: int, network_seed: int) -> dict[str, Any]:
        gbm = self.config.gbm
        with _stage(epoch, MODULE_ECON):
            noise = float(self._market.standard_normal())
            market = gbm_step(1.0, gbm.mu, gbm.sigma, gbm.dt, noise, gbm.price_floor)

        u, objective, control_status = 0.0, 0.0, STATUS_BASELINE
        if not self.baseline:
            drift = self._predicted_drift(epoch)
            with _stage(epoch, MODULE_MPC):
                u, objective, control_status = self._control(epoch, drift)

        with _stage(epoch, MODULE_ECON):
            br = min(self._br, self._supply.s_unissued)
            self._supply = step_block_reward(self._supply, br)

        coins, payments, iterations, verification = self._issue(
            epoch, self._auc * (1.0 + u), network_seed
        )
        realised = 0.0 if self.baseline or self._auc <= 0.0 else coins / self._auc - 1.0

        price_prev = self._price
        impact = math.exp(-self.config.mpc.price_impact * realised)
        self._price = max(price_prev * market * impact, gbm.price_floor)
        self._market_index.append(self._market_index[-1] * market)

        if not self.baseline:
            with _stage(epoch, MODULE_ECON):
                update = adjust_controls(self._supply, self._br, self._auc, self._price, price_prev)
                self._supply = apply_controls(
                    self._supply,
                    update,
                    adjust_collateral=self.config.model == MODEL_COLLATERALISED,
                )
                self._br, self._auc = update.br, update.auc

        return {
            ATTR_BR: br,
            ATTR_AUC: coins,
            ATTR_MPC_OBJECTIVE: objective,
            ATTR_AUCTION_PAYMENTS: payments,
            ATTR_CONSENSUS_ITERATIONS: iterations,
            ATTR_VERIFICATION_STATUS: verification,
            ATTR_CONTROL_STATUS: control_status,
        }

    def _predicted_drift(self, epoch: int) -> float:
        if self._predictor is None or len(self._market_index) <= self.config.predictor.warmup:
            return 0.0
        with _stage(epoch, MODULE_PREDICT):
            if self._predictor.net is None:
                self._predictor.fit(self._market_index, self._predictor_rng)
            return self._predictor.expected_return(self._market_index)

    def _control(self, epoch: int, drift: float) -> tuple[float, float, str]:
        """First input, objective and status of the scenario MPC."""
        mpc, gbm = self.config.mpc, self.config.gbm
        paths = simulate_gbm_paths(
            1.0,
            gbm.mu,
            gbm.sigma,
            gbm.dt,
            mpc.horizon,
            mpc.scenarios,
            self._scenarios,
            gbm.price_floor,
        )
        noise = np.diff(np.log(paths), axis=1)
        noise[:, 0] += drift
        ocp = ScenarioOcp(
            sys=LinearSystem(A=[[1.0]], B=[[-mpc.price_impact]], C_z=[[1.0]]),
            x0=[math.log(self._price / gbm.peg)],
            horizon=mpc.horizon,
            noise_draws=noise[:, :, np.newaxis],
            lambda_tradeoff=mpc.lambda_tradeoff,
            u_lower=mpc.u_min,
            u_upper=mpc.u_max,
            consensus_horizon=mpc.consensus_horizon,
            tracking_weight=mpc.tracking_weight,
            input_weight=mpc.input_weight,
        )
        try:
            solution = solve_ocp(
                ocp,
                mpc.solver,
                rho=mpc.rho,
                eps_primal=mpc.eps_primal,
                eps_dual=mpc.eps_dual,
                max_iters=mpc.max_iters,
                residual_balancing=mpc.residual_balancing,
            )
        except IterationLimit as err:
            self._degraded[epoch] = str(err)
            partial = err.result
            u = float(np.clip(partial.first_input[0], mpc.u_min, mpc.u_max))
            return u, float(partial.objective), STATUS_ITERATION_LIMIT
        return float(solution.first_input[0]), float(solution.objective), STATUS_OK

    def _issue(
        self, epoch: int, target: float, network_seed: int
    ) -> tuple[float, float, int, str]:
        """Auction target coins; returns issued coins, payments, rounds and status."""
        reports = self._instance.reports
        lowest = float(sum(r.x_min.sum() for r in reports))
        highest = min(
            float(sum(r.x_max.sum() for r in reports)),
            self._supply.auc_max,
            self._supply.s_unissued,
        )
        if highest <= 0.0 or lowest > highest:
            return 0.0, 0.0, 0, STATUS_SKIPPED
        coins = float(np.clip(target, lowest, highest))
        bounds = IssuanceBounds(y_min=[coins], y_max=[coins])

        outcome, iterations, status = self._allocate(epoch, bounds, network_seed)
        issued = float(outcome.allocation.sum())
        with _stage(epoch, MODULE_ECON):
            self._supply = apply_auction_issuance(
                self._supply,
                issued,
                outcome.allocation[:, 0],
                [(float(r.x_min[0]), float(r.x_max[0])) for r in reports],
            )
        return issued, float(outcome.payments.sum()), iterations, status

    def _allocate(
        self, epoch: int, bounds: IssuanceBounds, network_seed: int
    ) -> tuple[AuctionOutcome, int, str]:
        reports, valuations = self._instance.reports, self._valuations
        if not self.config.auction.decentralised:
            with _stage(epoch, MODULE_AUCTION):
                return run_auction(reports, valuations, bounds), 0, STATUS_OFF

        network = self.config.network
        net = replace(self._net, seed=network_seed)
        options: dict[str, Any] = {
            "q": network.q,
            "sigma": network.sigma,
            "eps1": network.eps1,
            "eps2": network.eps2,
            "max_iters": network.max_iters,
        }
        if self.config.secure.enabled:
            secure = self.config.secure
            with _stage(epoch, MODULE_SECURE):
                try:
                    run = committed_protocol_run(
                        reports,
                        valuations,
                        bounds,
                        net,
                        self._secure,
                        parties=secure.parties,
                        bits=secure.fixed_point_bits,
                        prime=secure.prime,
                        **options,
                    )
                    status = STATUS_VERIFIED
                except IterationLimit as err:
                    self._degraded[epoch] = str(err)
                    run, status = err.result, STATUS_ITERATION_LIMIT
            self._transcripts.append(run.transcript.to_jsonl(epoch=epoch))
            report = run.report.to_frame()
            report.insert(0, ATTR_EPOCH, epoch)
            self._reports.append(report)
            return run.outcome, run.outcome.iterations or 0, status

        with _stage(epoch, MODULE_CONSENSUS):
            status = STATUS_OK
            try:
                result = run_dual_consensus(reports, valuations, bounds, net, **options)
            except IterationLimit as err:
                self._degraded[epoch] = str(err)
                result, status = err.result, STATUS_ITERATION_LIMIT
            trace = result.diagnostics.to_frame()
            trace.insert(0, ATTR_EPOCH, epoch)
            self._traces.append(trace)
            outcome = protocol_outcome(
                valuations,
                standalone_allocations(reports, valuations),
                result.allocation,
                [r.user_id for r in reports],
                result.diagnostics.iterations,
            )
        return outcome, result.diagnostics.iterations, status

    def _taylor_step(self, epoch: int) -> dict[str, Any]:
        taylor = self.config.taylor
        shock = self._market.standard_normal(2) * taylor.shock_sigma
        with _stage(epoch, MODULE_ECON):
            if self.baseline:
                # plain Taylor-rule feedback, giving the closed loop A'
                u = float(np.dot((taylor.phi_y, taylor.phi_pi), self._taylor_state))
                objective, status = 0.0, STATUS_BASELINE
            else:
                sequence = taylor_mpc_solve(
                    self._taylor, self._taylor_state, self._taylor_horizon
                )
                objective = taylor_objective(
                    self._taylor, self._taylor_state, sequence, self._taylor_horizon
                )
                u, status = float(sequence[0]), STATUS_OK
                self._taylor_horizon = replace(self._taylor_horizon, u_prev=u)
            self._taylor_state = taylor_model_step(
                self._taylor, self._taylor_state, u, shock
            )
            self._price = self.config.gbm.peg * math.exp(float(self._taylor_state[1]))
        return {
            ATTR_BR: 0.0,
            ATTR_AUC: 0.0,
            ATTR_MPC_OBJECTIVE: objective,
            ATTR_AUCTION_PAYMENTS: 0.0,
            ATTR_CONSENSUS_ITERATIONS: 0,
            ATTR_VERIFICATION_STATUS: STATUS_SKIPPED,
            ATTR_CONTROL_STATUS: status,
        }


def run_experiment(
    config: ExperimentConfig | dict[str, Any], baseline: bool = False
) -> RunArtifacts:
    """Run one seeded simulation.

    Args:
        config: Validated configuration or a raw configuration document
        baseline: Skip the controllers for an uncontrolled comparison run

    Returns:
        Per-epoch rows and summary statistics

    Raises:
        ConfigError: If a raw document fails validation
        ExperimentError: If an epoch fails; carries the epoch and module
    """
    if not isinstance(config, ExperimentConfig):
        config = validate_config(config)
    return ExperimentCoordinator(config, baseline).run()


def run_seeds(
    config: ExperimentConfig,
    seeds: Sequence[int],
    baseline: bool = False,
    threads: int = 1,
) -> list[RunArtifacts]:
    """Run one experiment per seed, in parallel when threads > 1."""
    configs = [config.with_overrides(seed=seed) for seed in seeds]
    if threads <= 1:
        return [run_experiment(c, baseline) for c in configs]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(lambda c: run_experiment(c, baseline), configs))


def compare_runs(a: RunArtifacts, b: RunArtifacts) -> pd.DataFrame:
    """Per-metric values of two runs with their difference a − b and ratio a / b.

    Raises:
        SchemaMismatch: If the runs differ in epoch count, columns or metrics
    """
    if len(a.epochs) != len(b.epochs):
        raise SchemaMismatch(
            f"Runs have {len(a.epochs)} and {len(b.epochs)} epochs"
        )
    if list(a.epochs.columns) != list(b.epochs.columns) or set(a.summary) != set(b.summary):
        raise SchemaMismatch("Runs do not share one artifact schema")
    rows = []
    for metric in a.summary:
        left, right = a.summary[metric], b.summary[metric]
        rows.append(
            {
                "metric": metric,
                "a": left,
                "b": right,
                "delta": left - right,
                "ratio": left / right if right != 0.0 else math.nan,
            }
        )
    return pd.DataFrame(rows, columns=["metric", "a", "b", "delta", "ratio"])
