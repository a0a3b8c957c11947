from provchain.constants import EXIT_DOMAIN, EXIT_INTEGRITY


class ProvchainError(Exception):
    """Base class for domain errors. Messages are single-line and stable."""

    exit_code = EXIT_DOMAIN

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message

    @property
    def name(self) -> str:
        return type(self).__name__

    def __str__(self) -> str:
        return self.message or self.name


class IntegrityError(ProvchainError):
    exit_code = EXIT_INTEGRITY


# region model


class BomParseError(ProvchainError):
    pass


class EmptyBom(ProvchainError):
    def __init__(self):
        super().__init__("BoM declares no assemblies")


class CyclicBom(ProvchainError):
    def __init__(self, path: list[str]):
        self.path = path
        super().__init__("cycle " + " -> ".join(path))


class DanglingReference(ProvchainError):
    def __init__(self, node: str):
        self.node = node
        super().__init__(f"unresolved reference {node}")


class DuplicateId(ProvchainError):
    def __init__(self, node: str):
        self.node = node
        super().__init__(f"duplicate id {node}")


class MultipleProducers(ProvchainError):
    def __init__(self, node: str):
        self.node = node
        super().__init__(f"{node} is produced by more than one assembly")


class BadAccessSpec(ProvchainError):
    def __init__(self, node: str, reason: str = ""):
        self.node = node
        self.reason = reason
        super().__init__(f"bad access spec on {node}" + (f": {reason}" if reason else ""))


class IncompleteAssembly(ProvchainError):
    def __init__(self, node: str):
        self.node = node
        super().__init__(f"assembly {node} needs an input and an output")


class UnknownBom(ProvchainError):
    def __init__(self, ref: str):
        self.ref = ref
        super().__init__(f"BoM {ref} is not registered")


class UnknownBol(ProvchainError):
    def __init__(self, bol_id: str):
        self.bol_id = bol_id
        super().__init__(f"no BoL {bol_id}")


class BolNotOpen(ProvchainError):
    def __init__(self, bol_id: str, status: str):
        self.bol_id = bol_id
        self.status = status
        super().__init__(f"BoL {bol_id} is {status}")


class UnknownNode(ProvchainError):
    def __init__(self, node: str):
        self.node = node
        super().__init__(f"node {node} is not part of the BoM")


class DuplicateShadow(ProvchainError):
    def __init__(self, node: str):
        self.node = node
        super().__init__(f"shadow for {node} already recorded")


class OversizeInline(ProvchainError):
    def __init__(self, actual: int, limit: int):
        self.actual = actual
        self.limit = limit
        super().__init__(f"inline value of {actual} bytes exceeds {limit}")


class OversizeText(ProvchainError):
    def __init__(self, actual: int, limit: int):
        self.actual = actual
        self.limit = limit
        super().__init__(f"text of {actual} bytes exceeds {limit}; store it as a blob")


class MissingBlob(ProvchainError):
    def __init__(self, ref: str):
        self.ref = ref
        super().__init__(f"blob {ref} is not in the blobstore")


class MissingShadows(ProvchainError):
    def __init__(self, nodes: list[str]):
        self.nodes = nodes
        super().__init__("missing shadows: " + ", ".join(nodes))


class BadProvenance(ProvchainError):
    pass


# region ledger


class UnknownParticipant(ProvchainError):
    def __init__(self, participant: str):
        self.participant = participant
        super().__init__(f"participant {participant} is not registered")


class ParticipantExists(ProvchainError):
    def __init__(self, participant: str):
        self.participant = participant
        super().__init__(f"participant {participant} is already registered")


class NonMonotoneTimestamp(ProvchainError):
    def __init__(self, at: int, tip: int):
        self.at = at
        self.tip = tip
        super().__init__(f"timestamp {at} is before ledger tip {tip}")


class LedgerIntegrityError(IntegrityError):
    def __init__(self, seq: int, cause: str):
        self.seq = seq
        self.cause = cause
        super().__init__(f"violation at seq={seq} cause={cause}")


class LedgerInvalid(LedgerIntegrityError):
    pass


# region blobstore


class OversizeBlob(ProvchainError):
    def __init__(self, actual: int, limit: int):
        self.actual = actual
        self.limit = limit
        super().__init__(f"blob of {actual} bytes exceeds {limit}")


class NotFound(ProvchainError):
    def __init__(self, ref: str):
        self.ref = ref
        super().__init__(f"blob {ref} not found")


class CorruptBlob(IntegrityError):
    def __init__(self, ref: str):
        self.ref = ref
        super().__init__(f"blob {ref} does not match its digest")


class BadContentRef(ProvchainError):
    def __init__(self, ref: str):
        self.ref = ref
        super().__init__(f"{ref!r} is not a content reference")


# region traceability


class UnknownProvNode(ProvchainError):
    def __init__(self, bol_id: str, node: str):
        self.bol_id = bol_id
        self.node = node
        super().__init__(f"{node}@{bol_id} is not in the provenance graph")


class ProvenanceCycle(IntegrityError):
    def __init__(self, path: list[str]):
        self.path = path
        super().__init__("provenance graph has a cycle: " + " -> ".join(path))


# region contracts


class BadTerms(ProvchainError):
    pass


class BadInterface(ProvchainError):
    pass


class UnknownContract(ProvchainError):
    def __init__(self, address: str):
        self.address = address
        super().__init__(f"no contract at {address}")


class InsufficientFunds(ProvchainError):
    def __init__(self, needed: int, available: int):
        self.needed = needed
        self.available = available
        super().__init__(f"needed {needed}, available {available}")


class UnknownRequest(ProvchainError):
    def __init__(self, request_id: str):
        self.request_id = request_id
        super().__init__(f"no request {request_id}")


class RequestNotPending(ProvchainError):
    def __init__(self, request_id: str, state: str):
        self.request_id = request_id
        self.state = state
        super().__init__(f"request {request_id} is {state}")


class TimeBeforeRequest(ProvchainError):
    def __init__(self, at: int, requested_at: int):
        self.at = at
        self.requested_at = requested_at
        super().__init__(f"delivery at {at} precedes request at {requested_at}")


class NotYetExpired(ProvchainError):
    def __init__(self, elapsed: int, limit: int):
        self.elapsed = elapsed
        self.limit = limit
        super().__init__(f"elapsed {elapsed} ms is within the {limit} ms limit")


# region cli / config


class LayoutMismatch(ProvchainError):
    def __init__(self, found: str, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(f"data dir layout {found!r}, expected {expected}")


class UnknownScenario(ProvchainError):
    def __init__(self, name: str):
        self.scenario = name
        super().__init__(f"no scenario named {name}")
