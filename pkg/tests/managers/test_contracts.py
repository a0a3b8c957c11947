import random

import pytest

from provchain.errors import (
    BadInterface,
    BadTerms,
    InsufficientFunds,
    NotYetExpired,
    RequestNotPending,
    TimeBeforeRequest,
    UnknownContract,
    UnknownNode,
    UnknownParticipant,
)
from provchain.managers.accounts import (
    fund_account,
    get_balance,
    register_participant,
    total_balances,
    total_escrow,
    total_supply,
)
from provchain.managers.bols import instantiate_bol
from provchain.managers.boms import load_static_bom, register_bom, validate_bom
from provchain.managers.contracts import (
    Accepted,
    Expired,
    RejectedLate,
    deliver_data,
    deploy_contract,
    expire_request,
    get_contract,
    get_interface,
    get_request,
    get_requests,
    replay_contract_state,
    request_data,
)
from provchain.models.bom import Threshold
from provchain.models.contract import RequestState
from provchain.models.events import PaymentRefunded, PaymentSettled

LIMIT = 500
PRICE = 10


@pytest.fixture
def market(engine):
    register_participant(engine, "hpc-cs")
    register_participant(engine, "uk-node")
    fund_account(engine, "uk-node", 100)
    address = deploy_contract(engine, "hpc-cs", price=PRICE, max_response_ms=LIMIT)
    return address


def requested(engine, address, requester="uk-node"):
    request_id = request_data(engine, requester, address, params=b'{"camera": "hyde-park-corner"}')
    return request_id, get_request(engine, request_id).requestedAt


def event_types_since(engine, seq):
    return [e.type for e in engine.ledger.entries[seq:]]


# region Deploy


def test_deploy(engine, market):
    contract = get_contract(engine, market)

    assert contract.provider == "hpc-cs"
    assert contract.price == PRICE
    assert contract.maxResponseMs == LIMIT
    assert contract.thresholds == []
    assert get_interface(engine, contract).parameters == []


def test_deploy_bad_terms(engine, market):
    with pytest.raises(BadTerms):
        deploy_contract(engine, "hpc-cs", price=10, max_response_ms=0)
    with pytest.raises(BadTerms):
        deploy_contract(engine, "hpc-cs", price=-1, max_response_ms=500)
    with pytest.raises(UnknownParticipant):
        deploy_contract(engine, "nobody", price=1, max_response_ms=500)
    with pytest.raises(BadInterface):
        deploy_contract(engine, "hpc-cs", price=1, max_response_ms=500, interface={"colour": "x"})


def test_identical_terms_get_distinct_addresses(engine, market):
    again = deploy_contract(engine, "hpc-cs", price=PRICE, max_response_ms=LIMIT)
    assert again != market


# region Request


def test_request_escrows_price(engine, market):
    request_id, _ = requested(engine, market)

    request = get_request(engine, request_id)
    assert request.state == RequestState.PENDING
    assert request.escrow == PRICE
    assert get_balance(engine, "uk-node") == 90
    assert total_escrow(engine) == PRICE


def test_insufficient_funds(engine, market):
    register_participant(engine, "poor-node")
    fund_account(engine, "poor-node", 5)
    before = len(engine.ledger)

    with pytest.raises(InsufficientFunds) as exc:
        request_data(engine, "poor-node", market)
    assert (exc.value.needed, exc.value.available) == (10, 5)
    assert len(engine.ledger) == before
    assert get_balance(engine, "poor-node") == 5


def test_free_contract(engine, market):
    register_participant(engine, "open-node")
    free = deploy_contract(engine, "hpc-cs", price=0, max_response_ms=LIMIT)

    request_id = request_data(engine, "open-node", free)
    assert get_request(engine, request_id).escrow == 0
    assert get_balance(engine, "open-node") == 0


def test_unknown_contract(engine, market):
    with pytest.raises(UnknownContract):
        request_data(engine, "uk-node", "e" * 64)


# region Deliver


def test_on_time_delivery_settles(engine, market):
    request_id, requested_at = requested(engine, market)
    seq = len(engine.ledger)

    outcome = deliver_data(engine, request_id, b"photo", at=requested_at + 300)

    assert isinstance(outcome, Accepted)
    assert outcome.elapsed_ms == 300
    assert engine.blobs.get(outcome.payload_ref) == b"photo"
    assert get_balance(engine, "hpc-cs") == 10
    assert get_balance(engine, "uk-node") == 90
    assert get_request(engine, request_id).state == RequestState.SETTLED
    assert event_types_since(engine, seq)[-2:] == ["DataDelivered", "PaymentSettled"]
    assert engine.ledger.entries[-2].author == "hpc-cs"
    assert engine.ledger.entries[-1].author == engine.engine_participant


def test_late_delivery_is_refunded(engine, market):
    request_id, requested_at = requested(engine, market)
    seq = len(engine.ledger)

    outcome = deliver_data(engine, request_id, b"photo", at=requested_at + 700)

    assert isinstance(outcome, RejectedLate)
    assert (outcome.elapsed_ms, outcome.limit_ms) == (700, 500)
    # payload is archived for audit
    assert engine.blobs.get(outcome.payload_ref) == b"photo"
    assert get_balance(engine, "uk-node") == 100
    assert get_balance(engine, "hpc-cs") == 0
    request = get_request(engine, request_id)
    assert request.state == RequestState.REFUNDED
    assert request.violations == 1
    assert event_types_since(engine, seq)[-3:] == ["DataDelivered", "QosViolation", "PaymentRefunded"]


@pytest.mark.parametrize("elapsed,settled", [(LIMIT, True), (LIMIT + 1, False), (0, True)])
def test_delivery_boundary(engine, market, elapsed, settled):
    request_id, requested_at = requested(engine, market)
    outcome = deliver_data(engine, request_id, b"photo", at=requested_at + elapsed)

    assert isinstance(outcome, Accepted) is settled
    expected = RequestState.SETTLED if settled else RequestState.REFUNDED
    assert get_request(engine, request_id).state == expected
    types = [e.type for e in engine.ledger.entries]
    assert ("QosViolation" in types) is not settled


def test_delivery_rejections(engine, market):
    request_id, requested_at = requested(engine, market)
    with pytest.raises(TimeBeforeRequest):
        deliver_data(engine, request_id, b"photo", at=requested_at - 1)
    hpc = instantiate_bol_for(engine)
    with pytest.raises(UnknownNode):
        deliver_data(engine, request_id, b"photo", source=(hpc, "no-such-node"))

    deliver_data(engine, request_id, b"photo")
    with pytest.raises(RequestNotPending):
        deliver_data(engine, request_id, b"photo")


def instantiate_bol_for(engine):
    bom = validate_bom(load_static_bom("hpc-cs"))
    register_bom(engine, bom)
    return instantiate_bol(engine, bom).id


def test_advisory_thresholds_have_no_financial_effect(engine, market):
    register_participant(engine, "ml-lab")
    address = deploy_contract(
        engine,
        "hpc-cs",
        price=PRICE,
        max_response_ms=LIMIT,
        thresholds=[Threshold(metric="accuracy", min=0.8), Threshold(metric="latency", max=50)],
    )
    fund_account(engine, "ml-lab", 20)
    request_id, requested_at = requested(engine, address, requester="ml-lab")
    seq = len(engine.ledger)

    outcome = deliver_data(
        engine,
        request_id,
        b"model",
        at=requested_at + 100,
        metrics={"accuracy": 0.5, "latency": 10},
    )

    assert isinstance(outcome, Accepted)
    assert event_types_since(engine, seq)[-3:] == ["DataDelivered", "PaymentSettled", "QosViolation"]
    violation = engine.ledger.tip.event
    assert violation.advisory
    assert (violation.metric, violation.observed) == ("accuracy", 0.5)
    assert get_balance(engine, "ml-lab") == 10
    assert get_request(engine, request_id).state == RequestState.SETTLED


# region Expire


def test_expire(engine, market):
    request_id, requested_at = requested(engine, market)

    with pytest.raises(NotYetExpired):
        expire_request(engine, request_id, at=requested_at + LIMIT)
    outcome = expire_request(engine, request_id, at=requested_at + LIMIT + 1)

    assert outcome == Expired(request_id=request_id, elapsed_ms=LIMIT + 1, limit_ms=LIMIT)
    assert get_request(engine, request_id).state == RequestState.REFUNDED
    assert get_balance(engine, "uk-node") == 100
    assert [e.type for e in engine.ledger.entries[-2:]] == ["QosViolation", "PaymentRefunded"]


def test_expire_settled(engine, market):
    request_id, requested_at = requested(engine, market)
    deliver_data(engine, request_id, b"photo", at=requested_at + 10)
    with pytest.raises(RequestNotPending):
        expire_request(engine, request_id, at=requested_at + 10_000)


def test_request_tagged_with_bol_appears_in_its_events(engine, market):
    bol_id = instantiate_bol_for(engine)
    request_id = request_data(engine, "uk-node", market, bol_id=bol_id)
    deliver_data(engine, request_id, b"photo", at=get_request(engine, request_id).requestedAt + 1)

    types = [e.type for e in engine.ledger.events_for_bol(bol_id)]
    assert types == ["BolOpened", "DataRequested", "DataDelivered", "PaymentSettled"]


# region Randomized schedule


def check_conservation(engine, participants):
    supply = total_supply(engine)
    assert total_balances(engine) + total_escrow(engine) == supply
    replayed = replay_contract_state(engine.ledger.entries)
    assert replayed.supply == supply
    assert sum(replayed.balances.values()) + replayed.pending_escrow == supply
    for name in participants:
        assert replayed.balances[name] == get_balance(engine, name)


@pytest.mark.slow
def test_random_schedule_conserves_money(engine):
    rng = random.Random(200)
    providers = ["prov-a", "prov-b"]
    requesters = ["req-a", "req-b", "req-c"]
    for name in providers + requesters:
        register_participant(engine, name)
    for name in requesters:
        fund_account(engine, name, rng.randint(20, 80))
    addresses = [
        deploy_contract(
            engine,
            rng.choice(providers),
            price=rng.randint(0, 15),
            max_response_ms=rng.randint(100, 600),
        )
        for _ in range(4)
    ]
    participants = providers + requesters

    operations = 0
    while operations < 200:
        pending = [r.id for r in get_requests(engine, RequestState.PENDING)]
        action = rng.choice(["request", "request", "deliver", "expire"])
        if action == "request" or not pending:
            address = rng.choice(addresses)
            requester = rng.choice(requesters)
            price = get_contract(engine, address).price
            if get_balance(engine, requester) < price:
                before = len(engine.ledger)
                with pytest.raises(InsufficientFunds):
                    request_data(engine, requester, address)
                assert len(engine.ledger) == before
            else:
                request_data(engine, requester, address)
        elif action == "deliver":
            request = get_request(engine, rng.choice(pending))
            at = max(engine.ledger.tip_timestamp, request.requestedAt) + rng.randint(0, 800)
            outcome = deliver_data(engine, request.id, rng.randbytes(16), at=at)
            limit = request.contract.maxResponseMs
            assert isinstance(outcome, Accepted) is (at - request.requestedAt <= limit)
        else:
            request = get_request(engine, rng.choice(pending))
            limit = request.contract.maxResponseMs
            at = max(engine.ledger.tip_timestamp, request.requestedAt + limit + 1) + rng.randint(0, 50)
            expire_request(engine, request.id, at=at)
        operations += 1
        check_conservation(engine, participants)

    # every request resolves at most once, and resolved requests exactly once
    resolutions: dict[str, int] = {}
    for entry in engine.ledger.entries:
        if isinstance(entry.event, (PaymentSettled, PaymentRefunded)):
            resolutions[entry.event.request_id] = resolutions.get(entry.event.request_id, 0) + 1
    assert all(count == 1 for count in resolutions.values())
    for request in get_requests(engine):
        assert (request.id in resolutions) is (request.state != RequestState.PENDING)
