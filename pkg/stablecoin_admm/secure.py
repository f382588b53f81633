"""Secret shares with MACs, hash commitments and verifiable protocol runs.

Values live in the prime field Z_p. A shared value ⟨a⟩ is held by m parties
as additive shares a_i with Σa_i ≡ a together with MAC shares γ(a)_i with
Σγ(a)_i ≡ α(a + δ), where α is the session key revealed only at check time.

Commitments are sha256 digests of a canonical JSON encoding of the value
followed by fresh random bytes. A committed protocol run records every
message in an append-only transcript; the verifier opens the input
commitments and re-executes every node from them to attribute deviations.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
import pandas as pd

from .auction import AuctionOutcome, DemandReport, IssuanceBounds, ValuationModel
from .const import (
    COMMITMENT_RANDOMNESS_BYTES,
    DEFAULT_CONSENSUS_EPS,
    DEFAULT_CONSENSUS_MAX_ITERS,
    DEFAULT_CONSENSUS_Q,
    DEFAULT_CONSENSUS_SIGMA,
    DEFAULT_FIXED_POINT_BITS,
    DEFAULT_PRIME,
    MANAGER_NODE,
)
from .consensus import (
    ConsensusDiagnostics,
    NetworkModel,
    UserNodeState,
    consensus_round,
    initial_states,
    manager_receive,
    manager_step,
    protocol_outcome,
    sample_active_sets,
    standalone_allocations,
    user_step,
)
from .exceptions import (
    CommitmentMismatch,
    DeviationDetected,
    InvalidParameter,
    IterationLimit,
)

_LOGGER = logging.getLogger(__name__)

KIND_INPUT = "input"
KIND_MESSAGE = "message"
KIND_RELEASE = "release"

CHECK_OPENING = "opening"
CHECK_DIGEST = "digest"
CHECK_REEXECUTION = "reexecution"
CHECK_CONVERSION = "conversion"

REPORT_COLUMNS = ("node", "round", "check", "detail")


def _check_prime(prime: int) -> None:
    # share sampling draws from numpy's int64 range
    if not 2 < prime < 2**63:
        raise InvalidParameter(f"prime must lie in (2, 2**63), got {prime}")


def _uniform(rng: np.random.Generator, prime: int) -> int:
    return int(rng.integers(0, prime, dtype=np.int64))


@dataclass(frozen=True)
class FieldElement:
    """An element of Z_p."""

    value: int
    prime: int = DEFAULT_PRIME

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.prime:
            raise InvalidParameter(f"{self.value} is not reduced modulo {self.prime}")

    @classmethod
    def of(cls, value: int, prime: int = DEFAULT_PRIME) -> FieldElement:
        return cls(int(value) % prime, prime)

    def _coerce(self, other: FieldElement | int) -> int:
        if isinstance(other, FieldElement):
            if other.prime != self.prime:
                raise InvalidParameter("Field elements belong to different fields")
            return other.value
        return int(other)

    def __add__(self, other: FieldElement | int) -> FieldElement:
        return FieldElement.of(self.value + self._coerce(other), self.prime)

    def __sub__(self, other: FieldElement | int) -> FieldElement:
        return FieldElement.of(self.value - self._coerce(other), self.prime)

    def __mul__(self, other: FieldElement | int) -> FieldElement:
        return FieldElement.of(self.value * self._coerce(other), self.prime)

    def __neg__(self) -> FieldElement:
        return FieldElement.of(-self.value, self.prime)


@dataclass(frozen=True)
class MacKey:
    """Global MAC key α of a session."""

    alpha: int
    prime: int = DEFAULT_PRIME

    @classmethod
    def generate(cls, rng: np.random.Generator, prime: int = DEFAULT_PRIME) -> MacKey:
        _check_prime(prime)
        return cls(int(rng.integers(1, prime, dtype=np.int64)), prime)


@dataclass(frozen=True)
class SharedValue:
    """⟨a⟩: additive shares, MAC shares and the public offset δ."""

    shares: tuple[int, ...]
    mac_shares: tuple[int, ...]
    delta: int = 0
    prime: int = DEFAULT_PRIME

    def __post_init__(self) -> None:
        if not self.shares or len(self.shares) != len(self.mac_shares):
            raise InvalidParameter("Every party needs one share and one MAC share")

    @property
    def parties(self) -> int:
        return len(self.shares)


def _split(total: int, m: int, rng: np.random.Generator, prime: int) -> tuple[int, ...]:
    head = [_uniform(rng, prime) for _ in range(m - 1)]
    return (*head, (total - sum(head)) % prime)


def share(
    a: FieldElement | int,
    m: int,
    rng: np.random.Generator,
    key: MacKey,
    delta: int = 0,
) -> SharedValue:
    """Split a among m parties and authenticate it under key.

    The first m − 1 shares and MAC shares are uniform; the last ones
    complete the sums.

    Raises:
        InvalidParameter: If m < 1
    """
    if m < 1:
        raise InvalidParameter("At least one party is required")
    prime = key.prime
    _check_prime(prime)
    value = a.value if isinstance(a, FieldElement) else int(a) % prime
    mac = key.alpha * (value + delta) % prime
    return SharedValue(
        shares=_split(value, m, rng, prime),
        mac_shares=_split(mac, m, rng, prime),
        delta=delta % prime,
        prime=prime,
    )


def reconstruct(sv: SharedValue) -> FieldElement:
    return FieldElement.of(sum(sv.shares), sv.prime)


def mac_check(sv: SharedValue, key: MacKey, opened: FieldElement | int) -> bool:
    """Whether α(a + δ) ≡ Σγ(a)_i for the opened value a."""
    value = opened.value if isinstance(opened, FieldElement) else int(opened)
    expected = key.alpha * (value + sv.delta) % sv.prime
    return expected == sum(sv.mac_shares) % sv.prime


def add_public(sv: SharedValue, constant: int) -> SharedValue:
    """⟨a + c⟩ from ⟨a⟩ without touching the MAC shares.

    Party 0 adds c to its share and the offset absorbs it: δ' = δ − c.
    """
    shares = ((sv.shares[0] + constant) % sv.prime, *sv.shares[1:])
    return replace(sv, shares=shares, delta=(sv.delta - constant) % sv.prime)


def encode_fixed(
    x: float, bits: int = DEFAULT_FIXED_POINT_BITS, prime: int = DEFAULT_PRIME
) -> FieldElement:
    """Fixed-point embedding round(x·2^bits) mod p; negatives wrap around."""
    return FieldElement.of(round(float(x) * (1 << bits)), prime)


def decode_fixed(element: FieldElement, bits: int = DEFAULT_FIXED_POINT_BITS) -> float:
    value = element.value
    if value > element.prime // 2:
        value -= element.prime
    return value / (1 << bits)


def _encode(value: int | float, bits: int, prime: int) -> FieldElement:
    if isinstance(value, int | np.integer) and not isinstance(value, bool):
        return FieldElement.of(int(value), prime)
    return encode_fixed(float(value), bits, prime)


def _flatten(value: Any) -> list[int | float]:
    if isinstance(value, Mapping):
        return [v for key in sorted(value) for v in _flatten(value[key])]
    if isinstance(value, list | tuple):
        return [v for item in value for v in _flatten(item)]
    return [value]


def share_values(
    value: Any,
    m: int,
    rng: np.random.Generator,
    key: MacKey,
    bits: int = DEFAULT_FIXED_POINT_BITS,
) -> list[SharedValue]:
    """Share every number of a (nested) committed value.

    Integers are embedded exactly, floats in fixed point.
    """
    return [share(_encode(v, bits, key.prime), m, rng, key) for v in _flatten(value)]


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    return value


def canonical_json(value: Any) -> str:
    """Key-sorted, whitespace-free JSON; floats keep their shortest repr."""
    return json.dumps(_plain(value), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Commitment:
    digest: str


@dataclass(frozen=True)
class Opening:
    """Committed value and the hex randomness that hides it."""

    value: Any
    randomness: str


def _digest(value: Any, randomness: str) -> str:
    payload = canonical_json(value).encode() + bytes.fromhex(randomness)
    return hashlib.sha256(payload).hexdigest()


def commit(value: Any, rng: np.random.Generator) -> tuple[Commitment, Opening]:
    """Commit to a JSON-representable value."""
    randomness = rng.bytes(COMMITMENT_RANDOMNESS_BYTES).hex()
    plain = _plain(value)
    return Commitment(_digest(plain, randomness)), Opening(plain, randomness)


def verify(commitment: Commitment, opening: Opening) -> bool:
    try:
        return _digest(opening.value, opening.randomness) == commitment.digest
    except (TypeError, ValueError):
        return False


def verify_conversion(
    commitment: Commitment,
    opening: Opening,
    shared: Sequence[SharedValue],
    key: MacKey,
    bits: int = DEFAULT_FIXED_POINT_BITS,
) -> bool:
    """Check that shares carry the committed value with valid MACs.

    Every number of the opened value must equal the sum of its shares
    modulo p and every MAC must verify under key.
    """
    if not verify(commitment, opening):
        return False
    values = _flatten(opening.value)
    if len(values) != len(shared):
        return False
    for value, sv in zip(values, shared, strict=True):
        encoded = _encode(value, bits, sv.prime)
        if reconstruct(sv) != encoded or not mac_check(sv, key, encoded):
            return False
    return True


@dataclass(frozen=True)
class TranscriptRecord:
    """One append-only transcript entry.

    Input commitments carry no payload until their opening is released.
    """

    round: int
    sender: int
    kind: str
    digest: str
    payload: Any = None
    randomness: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "sender": self.sender,
            "kind": self.kind,
            "digest": self.digest,
            "payload": self.payload,
            "randomness": self.randomness,
        }


@dataclass
class Transcript:
    """Ordered protocol log written as JSON lines."""

    records: list[TranscriptRecord] = field(default_factory=list)

    def commit_input(self, sender: int, commitment: Commitment) -> TranscriptRecord:
        record = TranscriptRecord(0, sender, KIND_INPUT, commitment.digest)
        self.records.append(record)
        return record

    def publish(
        self, round_: int, sender: int, kind: str, payload: Any, rng: np.random.Generator
    ) -> tuple[TranscriptRecord, Opening]:
        """Append a committed message together with its opening."""
        commitment, opening = commit(payload, rng)
        record = TranscriptRecord(
            round_, sender, kind, commitment.digest, opening.value, opening.randomness
        )
        self.records.append(record)
        return record, opening

    def input_commitments(self) -> dict[int, Commitment]:
        return {
            r.sender: Commitment(r.digest) for r in self.records if r.kind == KIND_INPUT
        }

    def messages(self) -> dict[int, dict[int, Any]]:
        """Message payloads by round, then by sender."""
        rounds: dict[int, dict[int, Any]] = {}
        for record in self.records:
            if record.kind == KIND_MESSAGE:
                rounds.setdefault(record.round, {})[record.sender] = record.payload
        return rounds

    def releases(self) -> dict[int, TranscriptRecord]:
        return {r.sender: r for r in self.records if r.kind == KIND_RELEASE}

    def to_jsonl(self, epoch: int | None = None) -> str:
        """JSON lines, each tagged with the epoch when one is given."""
        tag = {} if epoch is None else {"epoch": epoch}
        return "".join(canonical_json({**tag, **r.to_dict()}) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, epoch: int | None = None) -> Transcript:
        """Read a transcript file, keeping one epoch of a multi-epoch log."""
        names = {f.name for f in fields(TranscriptRecord)}
        records = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            if epoch is not None and data.get("epoch") != epoch:
                continue
            records.append(TranscriptRecord(**{k: v for k, v in data.items() if k in names}))
        return cls(records)


@dataclass(frozen=True)
class VerificationFailure:
    node: int
    round: int
    check: str
    detail: str


@dataclass
class VerificationReport:
    """Failed checks of a verification pass; empty when the run was honest."""

    failures: list[VerificationFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def add(self, node: int, round_: int, check: str, detail: str) -> None:
        _LOGGER.debug("Verification failure: node %s round %s %s", node, round_, check)
        self.failures.append(VerificationFailure(node, round_, check, detail))

    def by_check(self, check: str) -> list[VerificationFailure]:
        return [f for f in self.failures if f.check == check]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(f.node, f.round, f.check, f.detail) for f in self.failures],
            columns=list(REPORT_COLUMNS),
        )

    def write_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    def raise_first(self) -> None:
        """Raise for the most basic failure: bad openings before deviations."""
        for check in (CHECK_OPENING, CHECK_DIGEST):
            failures = self.by_check(check)
            if failures:
                raise CommitmentMismatch(failures[0].node, failures[0].detail, self)
        deviations = self.by_check(CHECK_REEXECUTION) + self.by_check(CHECK_CONVERSION)
        if deviations:
            first = min(deviations, key=lambda f: (f.round, f.node))
            raise DeviationDetected(first.node, first.round, self)


@dataclass(frozen=True)
class LambdaBias:
    """Node adds bias to the λ_i it sends in one round."""

    node: int
    round: int
    bias: float


@dataclass(frozen=True)
class InputSwap:
    """Node silently replaces its committed report from one round on."""

    node: int
    round: int
    report: DemandReport


Fault = LambdaBias | InputSwap


class CommittedRun(NamedTuple):
    outcome: AuctionOutcome
    transcript: Transcript
    report: VerificationReport


def user_input(
    report: DemandReport, valuations: ValuationModel, i: int, standalone: np.ndarray
) -> dict[str, Any]:
    """Private inputs user i commits to before round 1."""
    return _plain(
        {
            "user_id": report.user_id,
            "x_min": report.x_min,
            "x": report.x,
            "x_max": report.x_max,
            "a": valuations.a[i],
            "b": valuations.b[i],
            "c": valuations.c[i],
            "standalone": standalone,
        }
    )


def manager_input(valuations: ValuationModel, bounds: IssuanceBounds) -> dict[str, Any]:
    return _plain(
        {
            "kappa0": valuations.kappa0,
            "kappa2": valuations.kappa2,
            "y_min": bounds.y_min,
            "y_max": bounds.y_max,
        }
    )


def _inputs_from_openings(
    openings: Mapping[int, Opening],
) -> tuple[list[DemandReport], ValuationModel, IssuanceBounds]:
    users = sorted(node for node in openings if node != MANAGER_NODE)
    values = [openings[i].value for i in users]
    manager = openings[MANAGER_NODE].value
    reports = [
        DemandReport(v["user_id"], v["x_min"], v["x"], v["x_max"]) for v in values
    ]
    valuations = ValuationModel(
        a=np.array([v["a"] for v in values]),
        b=np.array([v["b"] for v in values]),
        c=np.array([v["c"] for v in values]),
        kappa0=manager["kappa0"],
        kappa2=manager["kappa2"],
    )
    return reports, valuations, IssuanceBounds(manager["y_min"], manager["y_max"])


def _swap_input(state: UserNodeState, report: DemandReport) -> UserNodeState:
    b = np.where(state.c > 0.0, 2.0 * state.c * report.x, state.b)
    return replace(state, x_min=report.x_min, x_max=report.x_max, b=b)


def _same(payload: Any, expected: np.ndarray) -> bool:
    return np.array_equal(np.asarray(payload, dtype=float), expected)


def verify_transcript(
    transcript: Transcript,
    openings: Mapping[int, Opening],
    net: NetworkModel,
    *,
    q: float = DEFAULT_CONSENSUS_Q,
    sigma: float = DEFAULT_CONSENSUS_SIGMA,
    key: MacKey | None = None,
    conversions: Mapping[int, Sequence[SharedValue]] | None = None,
    bits: int = DEFAULT_FIXED_POINT_BITS,
) -> VerificationReport:
    """Check a finished run against the commitments made before round 1.

    Input openings and message digests are checked first; only when they
    hold is every node re-executed from its opened inputs and the messages
    it received. Share conversions of the released allocations are checked
    last.

    Args:
        transcript: The run's message log
        openings: Input opening released by every node
        net: Public network model; active sets are replayed from its seed
        q: Manager penalty of the run
        sigma: User penalty of the run
        key: Session MAC key, revealed at the end of the run
        conversions: Shares of each user's released allocation
        bits: Fixed-point precision of the conversions

    Returns:
        Report listing every failed check with the node and round at fault
    """
    report = VerificationReport()
    for node, commitment in sorted(transcript.input_commitments().items()):
        opening = openings.get(node)
        if opening is None or not verify(commitment, opening):
            report.add(node, 0, CHECK_OPENING, "input")
    for record in transcript.records:
        if record.kind == KIND_INPUT or record.randomness is None:
            continue
        if not verify(Commitment(record.digest), Opening(record.payload, record.randomness)):
            report.add(record.sender, record.round, CHECK_DIGEST, record.kind)
    if not report.ok:
        return report

    reports, valuations, bounds = _inputs_from_openings(openings)
    manager, users = initial_states(reports, valuations, bounds, q, sigma)
    deviated: set[int] = set()

    def flag(node: int, round_: int, detail: str) -> None:
        if node not in deviated:
            deviated.add(node)
            report.add(node, round_, CHECK_REEXECUTION, detail)

    rounds = transcript.messages()
    last_round = max(rounds, default=0)
    for k in range(1, last_round + 1):
        sent = rounds.get(k, {})
        active_users, active_edges = sample_active_sets(net, k)
        manager = manager_step(manager)
        broadcast = manager.lam
        if MANAGER_NODE not in sent:
            flag(MANAGER_NODE, k, "missing broadcast")
        else:
            if not _same(sent[MANAGER_NODE]["lam"], manager.lam):
                flag(MANAGER_NODE, k, "lambda broadcast")
            broadcast = np.asarray(sent[MANAGER_NODE]["lam"], dtype=float)
        received: dict[int, np.ndarray] = {}
        for i in range(len(users)):
            edge_active = (i, MANAGER_NODE) in active_edges
            users[i] = user_step(
                users[i], broadcast, active=i in active_users, edge_active=edge_active
            )
            if not edge_active:
                if i in sent:
                    flag(i, k, "message on an inactive link")
                continue
            if i not in sent:
                flag(i, k, "missing message")
                continue
            lam_i = np.asarray(sent[i]["lam"], dtype=float)
            if not _same(lam_i, users[i].lam):
                flag(i, k, "lambda message")
            received[i] = lam_i
        manager = manager_receive(manager, received)

    releases = transcript.releases()
    release_round = last_round + 1
    for i, user in enumerate(users):
        record = releases.get(i)
        if record is None or not _same(record.payload, user.x):
            flag(i, release_round, "released allocation")

    if key is not None and conversions is not None:
        for i, record in sorted(releases.items()):
            commitment = Commitment(record.digest)
            opening = Opening(record.payload, record.randomness or "")
            if not verify_conversion(commitment, opening, conversions.get(i, ()), key, bits):
                report.add(i, release_round, CHECK_CONVERSION, "allocation shares")
    return report


def committed_protocol_run(
    reports: Sequence[DemandReport],
    valuations: ValuationModel,
    bounds: IssuanceBounds,
    net: NetworkModel,
    rng: np.random.Generator,
    *,
    parties: int = 3,
    faults: Iterable[Fault] = (),
    bits: int = DEFAULT_FIXED_POINT_BITS,
    prime: int = DEFAULT_PRIME,
    q: float = DEFAULT_CONSENSUS_Q,
    sigma: float = DEFAULT_CONSENSUS_SIGMA,
    eps1: float = DEFAULT_CONSENSUS_EPS,
    eps2: float = DEFAULT_CONSENSUS_EPS,
    max_iters: int = DEFAULT_CONSENSUS_MAX_ITERS,
) -> CommittedRun:
    """Run the decentralised auction with committed inputs and messages.

    Every node commits to its inputs before round 1, every λ message is
    logged with a commitment and the final allocations are converted to
    MAC-authenticated shares. The verifier then checks the run; honest runs
    return exactly the outcome of the plain protocol.

    Args:
        reports: Reported demands, one per user node
        valuations: Valuations used by the users
        bounds: Issuance bounds of the manager
        net: Network reliability model
        rng: Source of commitment randomness, shares and the MAC key
        parties: Number of share holders m
        faults: Injected deviations
        bits: Fixed-point precision of shared allocations
        prime: Field modulus

    Returns:
        The outcome, the transcript and an empty verification report

    Raises:
        CommitmentMismatch: If an opening does not match its commitment
        DeviationDetected: If re-execution exposes a node; names the first one
        InvalidParameter: If a fault names no user node or a round that never runs
        IterationLimit: If consensus is not reached; carries the CommittedRun
    """
    faults = list(faults)
    for fault in faults:
        if fault.round < 1 or not 0 <= fault.node < len(reports):
            raise InvalidParameter(
                f"Fault {fault!r} must name a user node and a round of at least 1"
            )
    key = MacKey.generate(rng, prime)
    standalone = standalone_allocations(reports, valuations)
    user_ids = [r.user_id for r in reports]
    transcript = Transcript()

    openings: dict[int, Opening] = {}
    for i, report in enumerate(reports):
        commitment, openings[i] = commit(user_input(report, valuations, i, standalone[i]), rng)
        transcript.commit_input(i, commitment)
    commitment, openings[MANAGER_NODE] = commit(manager_input(valuations, bounds), rng)
    transcript.commit_input(MANAGER_NODE, commitment)

    manager, users = initial_states(reports, valuations, bounds, q, sigma)
    diag = ConsensusDiagnostics(eps1=eps1, eps2=eps2)
    lam_bar: np.ndarray | None = None

    for k in range(1, max_iters + 1):
        for fault in faults:
            if isinstance(fault, InputSwap) and fault.round == k:
                users[fault.node] = _swap_input(users[fault.node], fault.report)
                swapped = user_input(fault.report, valuations, fault.node, standalone[fault.node])
                swapped["b"] = users[fault.node].b.tolist()
                openings[fault.node] = Opening(swapped, openings[fault.node].randomness)
        biases = {
            f.node: f.bias for f in faults if isinstance(f, LambdaBias) and f.round == k
        }

        def tamper(
            k: int, node: int, lam: np.ndarray, biases: dict[int, float] = biases
        ) -> np.ndarray:
            return lam + biases[node] if node in biases else lam

        step = consensus_round(manager, users, net, k, tamper if biases else None)
        transcript.publish(
            k, MANAGER_NODE, KIND_MESSAGE, {"lam": step.manager.lam, "y": step.manager.y}, rng
        )
        for i, lam_i in sorted(step.messages.items()):
            transcript.publish(k, i, KIND_MESSAGE, {"lam": lam_i}, rng)
        manager, users = step.manager, step.users
        e1, e2, lam_bar = diag.record(step, lam_bar)
        if k >= 2 and e1 <= eps1 and e2 <= eps2:
            diag.converged = True
            break

    unfired = [f for f in faults if f.round > diag.iterations]
    if unfired:
        raise InvalidParameter(
            f"{len(unfired)} faults are scheduled after the last round {diag.iterations}"
        )
    release_round = diag.iterations + 1
    conversions: dict[int, list[SharedValue]] = {}
    for i, user in enumerate(users):
        _, opening = transcript.publish(release_round, i, KIND_RELEASE, user.x, rng)
        conversions[i] = share_values(opening.value, parties, rng, key, bits)

    allocation = np.vstack([u.x for u in users])
    outcome = protocol_outcome(valuations, standalone, allocation, user_ids, diag.iterations)
    report = verify_transcript(
        transcript, openings, net, q=q, sigma=sigma, key=key, conversions=conversions, bits=bits
    )
    run = CommittedRun(outcome, transcript, report)
    if not report.ok:
        _LOGGER.warning("Verification found %s failed checks", len(report.failures))
        report.raise_first()
    if not diag.converged:
        raise IterationLimit(
            f"Committed run did not converge within {max_iters} rounds", result=run
        )
    _LOGGER.debug("Committed run verified after %s rounds", diag.iterations)
    return run
