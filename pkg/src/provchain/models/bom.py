import math
from functools import cached_property
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, StringConstraints, field_validator

NodeId = Annotated[str, StringConstraints(pattern=r"^[A-Za-z0-9._-]{1,128}$")]

ArtifactKind = Literal[
    "model",
    "license",
    "roster",
    "policy",
    "software",
    "datasheet",
    "document",
    "fusing-factors",
]


class _Definition(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# region access


class StaticUrlAccess(_Definition):
    type: Literal["static_url"] = "static_url"
    url: str


class ContractAccess(_Definition):
    type: Literal["contract"] = "contract"
    address: str
    interface: dict[str, Any] = Field(default_factory=dict)


class InternalAccess(_Definition):
    type: Literal["internal"] = "internal"


AccessSpec = Annotated[
    Union[StaticUrlAccess, ContractAccess, InternalAccess],
    Field(discriminator="type"),
]


class InterfaceParameter(_Definition):
    name: str
    type: Literal["string", "integer", "number", "boolean", "bytes"] = "string"
    required: bool = True
    description: str | None = None


class ContractInterface(_Definition):
    """Descriptor of what a data contract expects in a request."""

    name: str | None = None
    description: str | None = None
    parameters: list[InterfaceParameter] = Field(default_factory=list)
    returns: str | None = None


# region qos


class Threshold(_Definition):
    metric: str
    min: float | None = None
    max: float | None = None

    @field_validator("min", "max")
    @classmethod
    def finite(cls, v: float | None) -> float | None:
        if v is not None and not math.isfinite(v):
            raise ValueError("threshold bounds must be finite")
        return v

    def violated_by(self, observed: float) -> bool:
        if self.min is not None and observed < self.min:
            return True
        if self.max is not None and observed > self.max:
            return True
        return False


class QosSpec(_Definition):
    max_response_ms: int = Field(gt=0)
    thresholds: list[Threshold] = Field(default_factory=list)


# region nodes


class DataSourceDef(_Definition):
    id: NodeId
    name: str
    description: str | None = None
    access: AccessSpec = InternalAccess()
    qos: QosSpec | None = None


class ArtifactDef(_Definition):
    id: NodeId
    name: str
    description: str | None = None
    kind: ArtifactKind
    content_ref: str | None = None


class AssemblyDef(_Definition):
    id: NodeId
    name: str
    description: str | None = None
    inputs: list[NodeId] = Field(default_factory=list)
    artifacts: list[NodeId] = Field(default_factory=list)
    outputs: list[NodeId] = Field(default_factory=list)


class BomDef(_Definition):
    name: str
    version: str
    description: str | None = None
    assemblies: list[AssemblyDef] = Field(default_factory=list)
    data_sources: list[DataSourceDef] = Field(default_factory=list)
    artifacts: list[ArtifactDef] = Field(default_factory=list)

    def canonical(self) -> "BomDef":
        """Same definition with every list sorted, so declaration order never matters."""
        return self.model_copy(
            update={
                "assemblies": sorted(
                    (
                        a.model_copy(
                            update={
                                "inputs": sorted(a.inputs),
                                "artifacts": sorted(a.artifacts),
                                "outputs": sorted(a.outputs),
                            }
                        )
                        for a in self.assemblies
                    ),
                    key=lambda a: a.id,
                ),
                "data_sources": sorted(self.data_sources, key=lambda d: d.id),
                "artifacts": sorted(self.artifacts, key=lambda a: a.id),
            }
        )

    def to_canonical(self) -> dict[str, Any]:
        return self.canonical().model_dump(mode="python")

    def with_access(self, node: str, access: StaticUrlAccess | ContractAccess | InternalAccess) -> "BomDef":
        return self.model_copy(
            update={
                "data_sources": [
                    d.model_copy(update={"access": access}) if d.id == node else d
                    for d in self.data_sources
                ]
            }
        )


class ValidatedBom(BaseModel):
    """A BomDef that passed validation, in canonical order, with its ContentRef."""

    model_config = ConfigDict(frozen=True)

    ref: str
    definition: BomDef

    @property
    def name(self) -> str:
        return self.definition.name

    @property
    def version(self) -> str:
        return self.definition.version

    @cached_property
    def assemblies(self) -> dict[str, AssemblyDef]:
        return {a.id: a for a in self.definition.assemblies}

    @cached_property
    def data_sources(self) -> dict[str, DataSourceDef]:
        return {d.id: d for d in self.definition.data_sources}

    @cached_property
    def artifacts(self) -> dict[str, ArtifactDef]:
        return {a.id: a for a in self.definition.artifacts}

    @cached_property
    def producers(self) -> dict[str, str]:
        """Produced node -> the assembly producing it."""
        return {
            output: assembly.id
            for assembly in self.definition.assemblies
            for output in assembly.outputs
        }

    @property
    def shadowable(self) -> list[str]:
        return sorted([*self.data_sources, *self.artifacts])

    @property
    def node_count(self) -> int:
        return len(self.assemblies) + len(self.data_sources) + len(self.artifacts)

    def node_kind(self, node: str) -> Literal["assembly", "data_source", "artifact"] | None:
        if node in self.assemblies:
            return "assembly"
        if node in self.data_sources:
            return "data_source"
        if node in self.artifacts:
            return "artifact"
        return None

    def name_of(self, node: str) -> str:
        for table in (self.assemblies, self.data_sources, self.artifacts):
            if node in table:
                return table[node].name
        return node

    def is_output(self, node: str) -> bool:
        return node in self.producers

    def consumers(self, node: str) -> list[str]:
        return sorted(
            a.id
            for a in self.definition.assemblies
            if node in a.inputs or node in a.artifacts
        )
