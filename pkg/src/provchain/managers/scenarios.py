"""End-to-end runs of the traffic congestion and coalition fusion supply chains."""

import json
from pathlib import Path
from typing import TYPE_CHECKING, Callable

import yaml

from provchain.errors import UnknownScenario
from provchain.log import get_logger
from provchain.managers.accounts import fund_account, register_participant
from provchain.managers.bols import (
    get_bol,
    instantiate_bol,
    record_shadow,
    seal_bol,
    store_value,
)
from provchain.managers.boms import load_static_bom, register_bom, validate_bom
from provchain.managers.contracts import deliver_data, deploy_contract, get_request, request_data
from provchain.models.bom import ContractAccess, ValidatedBom
from provchain.models.events import Blob, Computed, Delivered, Fetched, Inline
from provchain.utils.fixtures import congestion_score, payload

if TYPE_CHECKING:
    from provchain.engine import Engine

logger = get_logger(__name__)

INTERFACE_DIRECTORY = Path(__file__).parent.parent / "static" / "interfaces"

PHOTO_BYTES = 200 * 1024
MODEL_BYTES = 4096
DATASET_BYTES = 64 * 1024

# (provider, price, delivery delay in ms); the last one misses the 500 ms limit
AGGREGATOR_PROVIDERS = (("hpc-cs-a", 10, 300), ("hpc-cs-b", 5, 200), ("hpc-cs-c", 8, 700))
RATING_LIMIT_MS = 500

Progress = Callable[[], None] | None


def load_interface(name: str) -> dict:
    with open(INTERFACE_DIRECTORY / f"{name}.yaml", "r") as file:
        return yaml.safe_load(file)


def _participant(engine: "Engine", participant: str) -> str:
    if participant not in engine.ledger.keys:
        register_participant(engine, participant)
    return participant


def _register(engine: "Engine", definition, author: str) -> ValidatedBom:
    bom = validate_bom(definition)
    register_bom(engine, bom, author=author)
    return bom


def _blob(engine: "Engine", content: bytes) -> Blob:
    return Blob(ref=engine.blobs.put(content))


def _record(engine: "Engine", bol_id: str, node: str, value, provenance, author: str) -> None:
    record_shadow(engine, bol_id, node, value, provenance, author=author)


# region HPC-CS


def run_hpc_cs(
    engine: "Engine",
    n_runs: int,
    model_ref: str | None = None,
    operator: str = "hpc-cs",
    camera: str = "hyde-park-corner",
    progress: Progress = None,
) -> list[str]:
    """Score the camera ``n_runs`` times; every photo is fetched through a free contract."""
    _participant(engine, operator)
    _participant(engine, "tfl")
    photo_contract = deploy_contract(
        engine, "tfl", price=0, max_response_ms=500, interface=load_interface("tfl-jamcam")
    )
    definition = load_static_bom("hpc-cs").with_access(
        "location-photo",
        ContractAccess(address=photo_contract, interface=load_interface("tfl-jamcam")),
    )
    bom = _register(engine, definition, author=operator)

    if model_ref is None:
        model_ref = engine.blobs.put(payload("congestion-model", MODEL_BYTES))
        model_origin = f"https://models.{operator}.example/congestion-model"
    else:
        engine.blobs.get(model_ref)
        model_origin = "ltc-cs:model-registry/congestion-model"

    bol_ids = []
    for run in range(n_runs):
        bol = instantiate_bol(engine, bom, author=operator)
        request_id = request_data(
            engine,
            operator,
            photo_contract,
            params=json.dumps({"camera": camera}, sort_keys=True).encode(),
            bol_id=bol.id,
        )
        photo = payload(f"{camera}/photo/{run}", PHOTO_BYTES)
        outcome = deliver_data(engine, request_id, photo)
        _record(
            engine, bol.id, "location-photo", Blob(ref=outcome.payload_ref),
            Delivered(request_id=request_id), operator,
        )
        _record(
            engine, bol.id, "congestion-model", Blob(ref=model_ref),
            Fetched(origin=model_origin), operator,
        )
        score = congestion_score(photo)
        _record(
            engine, bol.id, "congestion-score", Inline(data=str(score).encode()),
            Computed(assembly="traffic-scene-analysis"), operator,
        )
        seal_bol(engine, bol.id, author=operator)
        bol_ids.append(bol.id)
        logger.info("scenario.hpc_cs.run", run=run, bol_id=bol.id, score=score)
        if progress:
            progress()
    return bol_ids


# region LTC-CS training


def run_ltc_cs_training(engine: "Engine", operator: str = "ltc-cs") -> str:
    """One training run: clean and augment, label, train."""
    _participant(engine, operator)
    bom = _register(engine, load_static_bom("ltc-cs-training"), author=operator)
    bol = instantiate_bol(engine, bom, author=operator)

    def record(node, value, provenance):
        _record(engine, bol.id, node, value, provenance, operator)

    source = _blob(engine, payload("ltc-cs/source-images", DATASET_BYTES))
    record("source-images", source, Fetched(origin="https://api.tfl.gov.uk/Place/Type/JamCam"))
    record(
        "image-license",
        Inline(data=b"Powered by TfL Open Data; Open Government Licence v2.0"),
        Fetched(origin="https://tfl.gov.uk/corporate/terms-and-conditions/transport-data-service"),
    )
    modified = _blob(engine, payload(f"modified-dataset/{source.ref}", DATASET_BYTES))
    record("modified-dataset", modified, Computed(assembly="clean-and-augment"))

    record(
        "staff-roster",
        store_value(engine, payload("ltc-cs/staff-roster", 512)),
        Fetched(origin="ltc-cs:hr/labelling-staff"),
    )
    labelled = _blob(engine, payload(f"labelled-scenes/{modified.ref}", DATASET_BYTES))
    record("labelled-scenes", labelled, Computed(assembly="label-scenes"))

    parameters = json.dumps({"epochs": 40, "learning_rate": 0.001, "seed": 7}, sort_keys=True)
    record(
        "training-parameters",
        Inline(data=parameters.encode()),
        Fetched(origin="ltc-cs:training/config"),
    )
    model = _blob(engine, payload(f"trained-model/{labelled.ref}", MODEL_BYTES))
    record("trained-model", model, Computed(assembly="train-model"))

    seal_bol(engine, bol.id, author=operator)
    logger.info("scenario.ltc_cs_training", bol_id=bol.id, model_ref=model.ref)
    return bol.id


def trained_model_ref(engine: "Engine", bol_id: str) -> str:
    return get_bol(engine, bol_id).shadow_map["trained-model"].blobRef


def run_ltc_cs(engine: "Engine", n_runs: int, progress: Progress = None) -> list[str]:
    """Training followed by HPC-CS runs that consume the trained model."""
    training = run_ltc_cs_training(engine)
    return [training] + run_hpc_cs(
        engine, n_runs, model_ref=trained_model_ref(engine, training), progress=progress
    )


# region Fusion


def _run_member(engine: "Engine", member: str) -> tuple[str, str]:
    operator = _participant(engine, f"member-{member}")
    definition = load_static_bom("fusion-member").model_copy(
        update={"name": f"fusion-member-{member}"}
    )
    bom = _register(engine, definition, author=operator)
    bol = instantiate_bol(engine, bom, author=operator)

    def record(node, value, provenance):
        _record(engine, bol.id, node, value, provenance, operator)

    source = _blob(engine, payload(f"member-{member}/source-data", 8192))
    record("source-data", source, Fetched(origin=f"https://data.member-{member}.example/feed"))
    record(
        "data-license",
        Inline(data=f"member-{member} coalition data sharing agreement".encode()),
        Fetched(origin=f"https://data.member-{member}.example/licence"),
    )
    ingested = _blob(engine, payload(f"ingested/{source.ref}", 8192))
    record("ingested-data", ingested, Computed(assembly="ingest"))
    record(
        "labelling-policy",
        Inline(data=b"label vehicles, pedestrians and cyclists"),
        Fetched(origin=f"member-{member}:policies/labelling"),
    )
    labelled = _blob(engine, payload(f"labelled/{ingested.ref}", 8192))
    record("labelled-data", labelled, Computed(assembly="transform-label"))
    model = _blob(engine, payload(f"component-model/{labelled.ref}", MODEL_BYTES))
    record("component-model", model, Computed(assembly="train-component"))
    seal_bol(engine, bol.id, author=operator)
    return bol.id, model.ref


def run_fusion_ai(engine: "Engine", progress: Progress = None) -> str:
    """Three member pipelines and one fused model built from their component models."""
    components = {}
    for member in ("a", "b", "c"):
        components[member] = _run_member(engine, member)
        if progress:
            progress()

    operator = _participant(engine, "keystone")
    bom = _register(engine, load_static_bom("fusion"), author=operator)
    bol = instantiate_bol(engine, bom, author=operator)

    def record(node, value, provenance):
        _record(engine, bol.id, node, value, provenance, operator)

    for member, (_, model_ref) in sorted(components.items()):
        record(
            f"component-model-{member}",
            Blob(ref=model_ref),
            Fetched(origin=f"https://models.member-{member}.example/component-model"),
        )
    factors = {
        "algorithm": "weighted-average",
        "order": ["a", "b", "c"],
        "weights": {"a": 0.5, "b": 0.3, "c": 0.2},
    }
    record(
        "fusing-factors",
        _blob(engine, json.dumps(factors, sort_keys=True).encode()),
        Fetched(origin="keystone:fusion/factors"),
    )
    record(
        "fusion-policy",
        Inline(data=b"contribution weighted by labelled sample count"),
        Fetched(origin="keystone:policies/contribution"),
    )
    fused_input = "/".join(ref for _, ref in sorted(components.values()))
    record(
        "fused-model",
        _blob(engine, payload(f"fused-model/{fused_input}", MODEL_BYTES)),
        Computed(assembly="fuse-models"),
    )
    seal_bol(engine, bol.id, author=operator)
    if progress:
        progress()
    logger.info("scenario.fusion_ai", bol_id=bol.id)
    return bol.id


# region Congestion aggregator


def run_congestion_aggregator(engine: "Engine", progress: Progress = None) -> str:
    """Buy ratings from three HPC-CS deployments; the third arrives late and is refunded."""
    aggregator = _participant(engine, "aggregator")
    fund_account(engine, aggregator, 100)

    sources = {}
    for (provider, price, _), slot in zip(AGGREGATOR_PROVIDERS, "abc"):
        (provider_bol,) = run_hpc_cs(
            engine, 1, operator=provider, camera=f"hyde-park-corner-{slot}"
        )
        address = deploy_contract(
            engine,
            provider,
            price=price,
            max_response_ms=RATING_LIMIT_MS,
            interface=load_interface("congestion-rating"),
        )
        sources[slot] = (provider_bol, address)
        if progress:
            progress()

    definition = load_static_bom("congestion-aggregator")
    for slot, (_, address) in sorted(sources.items()):
        definition = definition.with_access(
            f"rating-{slot}",
            ContractAccess(address=address, interface=load_interface("congestion-rating")),
        )
    bom = _register(engine, definition, author=aggregator)
    bol = instantiate_bol(engine, bom, author=aggregator)

    scores = []
    for (provider, _, delay), slot in zip(AGGREGATOR_PROVIDERS, "abc"):
        provider_bol, address = sources[slot]
        request_id = request_data(
            engine, aggregator, address, params=b"hyde-park-corner", bol_id=bol.id
        )
        score = get_bol(engine, provider_bol).shadow_map["congestion-score"].inlineData
        outcome = deliver_data(
            engine,
            request_id,
            score,
            at=get_request(engine, request_id).requestedAt + delay,
            source=(provider_bol, "congestion-score"),
        )
        record_shadow(
            engine,
            bol.id,
            f"rating-{slot}",
            Blob(ref=outcome.payload_ref),
            Delivered(request_id=request_id),
            author=aggregator,
        )
        scores.append(int(score))
        logger.info("scenario.aggregator.rating", slot=slot, outcome=outcome.outcome)

    record_shadow(
        engine,
        bol.id,
        "aggregation-policy",
        Inline(data=b"mean of delivered ratings"),
        Fetched(origin="aggregator:policies/mean"),
        author=aggregator,
    )
    area = sum(scores) * 10 // len(scores)
    record_shadow(
        engine,
        bol.id,
        "area-congestion",
        Inline(data=str(area).encode()),
        Computed(assembly="aggregate-ratings"),
        author=aggregator,
    )
    seal_bol(engine, bol.id, author=aggregator)
    if progress:
        progress()
    return bol.id


# region Registry


SCENARIOS: dict[str, Callable[["Engine", int, Progress], list[str]]] = {
    "hpc-cs": lambda engine, runs, progress=None: run_hpc_cs(engine, runs, progress=progress),
    "ltc-cs-training": lambda engine, runs, progress=None: [run_ltc_cs_training(engine)],
    "ltc-cs": lambda engine, runs, progress=None: run_ltc_cs(engine, runs, progress=progress),
    "fusion-ai": lambda engine, runs, progress=None: [run_fusion_ai(engine, progress=progress)],
    "congestion-aggregator": lambda engine, runs, progress=None: [
        run_congestion_aggregator(engine, progress=progress)
    ],
}

# progress steps each scenario reports, for sizing progress bars
SCENARIO_STEPS: dict[str, Callable[[int], int]] = {
    "hpc-cs": lambda runs: runs,
    "ltc-cs-training": lambda runs: 0,
    "ltc-cs": lambda runs: runs,
    "fusion-ai": lambda runs: 4,
    "congestion-aggregator": lambda runs: len(AGGREGATOR_PROVIDERS) + 1,
}


def run_scenario(engine: "Engine", name: str, runs: int = 1, progress: Progress = None) -> list[str]:
    try:
        runner = SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(name) from None
    return runner(engine, runs, progress)
