import pytest

from provchain.errors import UnknownScenario
from provchain.managers.accounts import total_balances, total_escrow, total_supply
from provchain.managers.bols import get_bol
from provchain.managers.boms import get_all_boms
from provchain.managers.contracts import replay_contract_state
from provchain.managers.scenarios import (
    SCENARIOS,
    run_congestion_aggregator,
    run_fusion_ai,
    run_hpc_cs,
    run_ltc_cs,
    run_scenario,
    trained_model_ref,
)
from provchain.managers.traceability import build_graph, cost_breakdown, trace, track
from provchain.models.bol import BolStatus


def test_hpc_cs_runs(engine):
    bol_ids = run_hpc_cs(engine, 10)
    graph = build_graph(engine.ledger, engine.blobs)

    assert len(set(bol_ids)) == 10
    for bol_id in bol_ids:
        bol = get_bol(engine, bol_id)
        assert bol.status == BolStatus.SEALED
        assert set(bol.shadow_map) == {"location-photo", "congestion-model", "congestion-score"}
        ancestry = trace(graph, (bol_id, "congestion-score"))
        assert {(n.bol_id, n.node) for n in ancestry.nodes} == {
            (bol_id, "location-photo"),
            (bol_id, "congestion-model"),
            (bol_id, "traffic-scene-analysis"),
        }
    assert engine.ledger.verify().ok


def test_hpc_cs_is_deterministic(engine_factory):
    first, second = engine_factory(), engine_factory()
    assert run_hpc_cs(first, 3) == run_hpc_cs(second, 3)
    assert first.ledger.to_bytes() == second.ledger.to_bytes()


def test_hpc_cs_zero_runs(engine):
    assert run_hpc_cs(engine, 0) == []
    assert [b.name for b in get_all_boms(engine)] == ["hpc-cs"]


def test_ltc_cs_chains_training_into_scoring(engine):
    training, *runs = run_ltc_cs(engine, 2)
    graph = build_graph(engine.ledger, engine.blobs)
    model_ref = trained_model_ref(engine, training)

    for bol_id in runs:
        assert get_bol(engine, bol_id).shadow_map["congestion-model"].blobRef == model_ref
        ancestry = trace(graph, (bol_id, "congestion-score"))
        assert graph.node(training, "trained-model") in ancestry
        assert graph.node(training, "source-images") in ancestry
        assert graph.node(training, "staff-roster") in ancestry

    descendants = track(graph, (training, "source-images"))
    for bol_id in runs:
        assert graph.node(bol_id, "congestion-score") in descendants


def test_fusion_ai(engine):
    fused = run_fusion_ai(engine)
    graph = build_graph(engine.ledger, engine.blobs)

    members = [b for b in graph.bols if b != fused]
    assert len(members) == 3
    ancestry = trace(graph, (fused, "fused-model"))
    for member in members:
        assert graph.node(member, "source-data") in ancestry
        assert graph.node(member, "labelling-policy") in ancestry
    assert get_bol(engine, fused).shadow_map["fusing-factors"].valueKind == "blob"

    (member_b,) = [b for b in members if graph.bol(b).bom_name == "fusion-member-b"]
    assert graph.node(fused, "fused-model") in track(graph, (member_b, "source-data"))


def test_congestion_aggregator(engine):
    bol_id = run_congestion_aggregator(engine)
    graph = build_graph(engine.ledger, engine.blobs)

    report = cost_breakdown(engine.ledger, bol_id)
    assert report.total == 15
    assert sorted(r.state for r in report.requests) == ["Refunded", "Settled", "Settled"]
    # the late rating is refunded but still recorded
    assert set(get_bol(engine, bol_id).shadow_map) == {
        "rating-a",
        "rating-b",
        "rating-c",
        "aggregation-policy",
        "area-congestion",
    }

    ancestry = trace(graph, (bol_id, "area-congestion"))
    photos = [n for n in ancestry.nodes if n.node == "location-photo"]
    assert len(photos) == 3
    assert len({n.bol_id for n in photos}) == 3


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_every_scenario_keeps_the_books(engine, name):
    bol_ids = run_scenario(engine, name, runs=2)

    assert bol_ids
    assert engine.ledger.verify().ok
    supply = total_supply(engine)
    assert total_balances(engine) + total_escrow(engine) == supply
    replayed = replay_contract_state(engine.ledger.entries)
    assert sum(replayed.balances.values()) + replayed.pending_escrow == supply
    assert replayed.pending_escrow == 0


def test_unknown_scenario(engine):
    with pytest.raises(UnknownScenario):
        run_scenario(engine, "no-such-scenario")
