"""Tests for shares, commitments and verified protocol runs."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from stablecoin_admm.const import MANAGER_NODE
from stablecoin_admm.consensus import NetworkModel, run_protocol_one
from stablecoin_admm.exceptions import (
    CommitmentMismatch,
    DeviationDetected,
    InvalidParameter,
)
from stablecoin_admm.secure import (
    CHECK_DIGEST,
    CHECK_OPENING,
    KIND_INPUT,
    KIND_MESSAGE,
    KIND_RELEASE,
    REPORT_COLUMNS,
    FieldElement,
    InputSwap,
    LambdaBias,
    MacKey,
    Opening,
    SharedValue,
    Transcript,
    add_public,
    canonical_json,
    commit,
    committed_protocol_run,
    decode_fixed,
    encode_fixed,
    mac_check,
    reconstruct,
    share,
    share_values,
    verify,
    verify_conversion,
    verify_transcript,
)


@pytest.fixture
def key(rng) -> MacKey:
    return MacKey.generate(rng)


def _committed(instance, rng, **options):
    net = NetworkModel.reliable(len(instance.reports))
    return committed_protocol_run(
        instance.reports, instance.valuation, instance.bounds, net, rng, **options
    )


def test_field_arithmetic():
    """Test modular arithmetic of field elements."""
    a = FieldElement.of(5, 7)

    assert (a + 4).value == 2
    assert (a - 6).value == 6
    assert (a * 3).value == 1
    assert (-a).value == 2
    with pytest.raises(InvalidParameter):
        FieldElement(7, 7)
    with pytest.raises(InvalidParameter):
        a + FieldElement.of(1, 11)


def test_share_reconstructs_with_valid_mac(rng, key):
    """Test that shares sum to the value and the MAC verifies."""
    for m in (1, 3, 5):
        sv = share(123_456_789, m, rng, key)

        assert sv.parties == m
        assert reconstruct(sv) == FieldElement.of(123_456_789)
        assert mac_check(sv, key, reconstruct(sv))


def test_share_round_trip_random_values(rng, key):
    """Test exact reconstruction and valid MACs over many random sharings."""
    values = rng.integers(0, key.prime, size=10_000, dtype=np.int64)
    parties = rng.integers(1, 6, size=values.size)
    for value, m in zip(values, parties, strict=True):
        sv = share(int(value), int(m), rng, key)

        assert reconstruct(sv).value == int(value)
        assert mac_check(sv, key, reconstruct(sv))


def test_share_needs_a_party(rng, key):
    """Test that m >= 1 is enforced."""
    with pytest.raises(InvalidParameter):
        share(1, 0, rng, key)


def test_share_rejects_unusable_prime(rng):
    """Test the supported field size."""
    with pytest.raises(InvalidParameter):
        share(1, 2, rng, MacKey(alpha=1, prime=2))


def test_mismatched_share_counts():
    """Test that every party holds a MAC share."""
    with pytest.raises(InvalidParameter):
        SharedValue(shares=(1, 2), mac_shares=(1,))


@pytest.mark.slow
def test_tampered_share_is_caught(rng, key):
    """Test that additive tampering passes the MAC check with negligible probability."""
    accepted = 0
    trials = 100_000
    for _ in range(trials):
        sv = share(42, 3, rng, key)
        error = int(rng.integers(1, key.prime, dtype=np.int64))
        mac_error = int(rng.integers(0, key.prime, dtype=np.int64))
        shares = list(sv.shares)
        shares[1] = (shares[1] + error) % key.prime
        macs = list(sv.mac_shares)
        macs[2] = (macs[2] + mac_error) % key.prime
        forged = replace(sv, shares=tuple(shares), mac_shares=tuple(macs))
        accepted += mac_check(forged, key, reconstruct(forged))
    assert accepted / trials <= 1e-3


def test_add_public_keeps_mac_valid(rng, key):
    """Test ⟨a + c⟩ from ⟨a⟩."""
    sv = add_public(share(10, 3, rng, key), 32)

    assert reconstruct(sv).value == 42
    assert mac_check(sv, key, 42)
    assert not mac_check(sv, key, 10)


def test_fixed_point_encoding():
    """Test the fixed-point embedding of signed reals."""
    assert decode_fixed(encode_fixed(1.5)) == 1.5
    assert decode_fixed(encode_fixed(-2.25)) == -2.25
    assert encode_fixed(-1.0).value > encode_fixed(1.0).value
    assert decode_fixed(encode_fixed(1.0 / 3.0)) == pytest.approx(1.0 / 3.0, abs=2**-20)


def test_canonical_json():
    """Test key order, compact separators and numpy conversion."""
    assert canonical_json({"b": 1, "a": np.array([1.5, 2.0])}) == '{"a":[1.5,2.0],"b":1}'
    assert canonical_json({"n": np.int64(3)}) == '{"n":3}'


def test_commitment_binds_value_and_randomness(rng):
    """Test that openings verify only for the committed value."""
    commitment, opening = commit({"x": [1.0, 2.0]}, rng)

    assert verify(commitment, opening)
    assert not verify(commitment, Opening({"x": [1.0, 2.5]}, opening.randomness))
    assert not verify(commitment, Opening(opening.value, "00" * 32))
    assert not verify(commitment, Opening(opening.value, "not hex"))


def test_commitments_hide_equal_values(rng):
    """Test that fresh randomness gives distinct digests for equal values."""
    first, _ = commit([1, 2, 3], rng)
    second, _ = commit([1, 2, 3], rng)
    assert first != second


def test_verify_conversion(rng, key):
    """Test that committed values and their shares agree."""
    value = {"x": [0.5, -1.25], "id": 7}
    commitment, opening = commit(value, rng)
    shared = share_values(opening.value, 3, rng, key)

    assert len(shared) == 3
    assert verify_conversion(commitment, opening, shared, key)
    assert not verify_conversion(commitment, opening, shared[:2], key)
    broken = replace(shared[0], shares=((shared[0].shares[0] + 1) % key.prime, *shared[0].shares[1:]))
    assert not verify_conversion(commitment, opening, [broken, *shared[1:]], key)


def test_honest_run_matches_plain_protocol(instance_fixture, rng):
    """Test that commitments and verification leave the outcome unchanged."""
    instance = instance_fixture("two_users.json")
    run = _committed(instance, rng)
    plain = run_protocol_one(
        instance.reports, instance.valuation, instance.bounds, NetworkModel.reliable(2)
    )

    assert run.report.ok
    np.testing.assert_array_equal(run.outcome.allocation, plain.allocation)
    np.testing.assert_array_equal(run.outcome.payments, plain.payments)
    assert set(run.transcript.input_commitments()) == {0, 1, MANAGER_NODE}
    assert set(run.transcript.releases()) == {0, 1}
    kinds = {record.kind for record in run.transcript.records}
    assert kinds == {KIND_INPUT, KIND_MESSAGE, KIND_RELEASE}


def test_lambda_bias_is_attributed(instance_fixture, rng):
    """Test that a biased λ message names the node and round at fault."""
    instance = instance_fixture("two_users.json")
    for node, round_ in ((0, 1), (1, 2), (0, 3)):
        with pytest.raises(DeviationDetected) as err:
            _committed(instance, rng, faults=[LambdaBias(node, round_, 0.05)])

        assert err.value.node == node
        assert err.value.round == round_
        assert not err.value.report.ok


@pytest.mark.slow
def test_lambda_bias_suite_attribution(instance_fixture):
    """Test that every injected λ bias is attributed to its node and round."""
    instance = instance_fixture("two_users.json")
    honest = _committed(instance, np.random.default_rng(0)).outcome.iterations
    assert honest > 10

    rng = np.random.default_rng(11)
    cases = [(0, 10, 0.05)]
    while len(cases) < 50:
        bias = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.01, 1.0))
        cases.append((int(rng.integers(0, 2)), int(rng.integers(1, honest)), bias))

    attributed = 0
    for node, round_, bias in cases:
        with pytest.raises(DeviationDetected) as err:
            _committed(instance, rng, faults=[LambdaBias(node, round_, bias)])
        attributed += (err.value.node, err.value.round) == (node, round_)
    assert attributed == len(cases)


def test_faults_outside_the_run_are_rejected(instance_fixture, rng):
    """Test that a fault which would never fire is an error."""
    instance = instance_fixture("two_users.json")
    for fault in (LambdaBias(0, 10**6, 0.1), LambdaBias(0, 0, 0.1), LambdaBias(5, 1, 0.1)):
        with pytest.raises(InvalidParameter):
            _committed(instance, rng, faults=[fault])


def test_input_swap_breaks_commitment(instance_fixture, rng):
    """Test that silently changing a committed report is detected."""
    instance = instance_fixture("two_users.json")
    swapped = replace(instance.reports[0], x=np.array([8.0]))
    with pytest.raises(CommitmentMismatch) as err:
        _committed(instance, rng, faults=[InputSwap(0, 2, swapped)])

    assert err.value.node == 0
    assert err.value.report.by_check(CHECK_OPENING)


def test_missing_openings_and_altered_messages(instance_fixture, rng):
    """Test the opening and digest checks of the verifier."""
    instance = instance_fixture("two_users.json")
    run = _committed(instance, rng)
    records = list(run.transcript.records)
    index = next(i for i, r in enumerate(records) if r.kind == KIND_MESSAGE and r.sender == 1)
    records[index] = replace(records[index], payload={"lam": [99.0]})
    altered = Transcript(records)

    report = verify_transcript(altered, {}, NetworkModel.reliable(2))

    assert len(report.by_check(CHECK_OPENING)) == 3
    assert [(f.node, f.check) for f in report.by_check(CHECK_DIGEST)] == [(1, CHECK_DIGEST)]
    assert list(report.to_frame().columns) == list(REPORT_COLUMNS)
    with pytest.raises(CommitmentMismatch):
        report.raise_first()


def test_transcript_epochs(instance_fixture, rng, tmp_path):
    """Test that a multi-epoch log loads one epoch at a time."""
    instance = instance_fixture("single_user.json")
    first = _committed(instance, rng).transcript
    second = _committed(instance, rng).transcript
    path = tmp_path / "transcript.jsonl"
    path.write_text(first.to_jsonl(epoch=0) + second.to_jsonl(epoch=1), encoding="utf-8")

    loaded = Transcript.load(path, epoch=1)
    assert [r.digest for r in loaded.records] == [r.digest for r in second.records]
    assert len(Transcript.load(path).records) == len(first.records) + len(second.records)


def test_transcript_file_round_trip(instance_fixture, rng, tmp_path):
    """Test that a written transcript reloads record for record."""
    run = _committed(instance_fixture("single_user.json"), rng)
    path = tmp_path / "transcript.jsonl"
    run.transcript.write(path)

    assert Transcript.load(path).records == run.transcript.records
