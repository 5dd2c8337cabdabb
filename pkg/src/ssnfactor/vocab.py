"""Vocabulary of sensor-graph roles.

Eleven predicate/class roles describe the canonical observation shape:
an observation entity typed with a phenomenon class, linked to a
procedure, an observed property, a measurement (which carries a value
and a unit), and a sampling-time entity (which carries a timestamp).
The ``observation_of`` predicate is reserved for factorization output
and must not occur in input graphs.

A vocabulary can be loaded from a JSON config file; the built-in
default uses the ``http://ssn.example/`` fixture prefix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .rdf import RDF_TYPE, Iri

FIXTURE_PREFIX = "http://ssn.example/"

_ROLE_FIELDS = (
    "observation_class",
    "measure_data_class",
    "type_predicate",
    "procedure",
    "observed_property",
    "result",
    "sampling_time",
    "value",
    "unit",
    "observation_of",
    "timestamp",
)


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    observation_class: Iri
    measure_data_class: Iri
    type_predicate: Iri
    procedure: Iri
    observed_property: Iri
    result: Iri
    sampling_time: Iri
    value: Iri
    unit: Iri
    observation_of: Iri
    timestamp: Iri
    observation_phenomena: frozenset[Iri] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        roles = [getattr(self, name) for name in _ROLE_FIELDS]
        if len({r.value for r in roles}) != len(roles):
            raise VocabularyError("vocabulary roles must be pairwise distinct IRIs")

    def observation_classes(self) -> frozenset[Iri]:
        """Classes whose instances count as observations."""
        return self.observation_phenomena | {self.observation_class}


def default_vocabulary() -> Vocabulary:
    p = FIXTURE_PREFIX
    return Vocabulary(
        observation_class=Iri(p + "Observation"),
        measure_data_class=Iri(p + "MeasureData"),
        type_predicate=Iri(RDF_TYPE),
        procedure=Iri(p + "procedure"),
        observed_property=Iri(p + "property"),
        result=Iri(p + "result"),
        sampling_time=Iri(p + "samplingTime"),
        value=Iri(p + "value"),
        unit=Iri(p + "unit"),
        observation_of=Iri(p + "observationOf"),
        timestamp=Iri(p + "timestamp"),
        observation_phenomena=frozenset({Iri(p + "RainfallObs"), Iri(p + "TempObs")}),
    )


def load_vocabulary(path: str) -> Vocabulary:
    """Load a vocabulary from JSON; absent keys fall back to the default."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise VocabularyError("vocabulary config must be a JSON object")
    base = default_vocabulary()
    updates: dict = {}
    for key, val in raw.items():
        if key == "observation_phenomena":
            if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
                raise VocabularyError("observation_phenomena must be a list of IRI strings")
            updates[key] = frozenset(Iri(v) for v in val)
        elif key in _ROLE_FIELDS:
            if not isinstance(val, str):
                raise VocabularyError(f"{key} must be an IRI string")
            updates[key] = Iri(val)
        else:
            raise VocabularyError(f"unknown vocabulary key: {key}")
    return replace(base, **updates)


def save_vocabulary(v: Vocabulary, path: str) -> None:
    data = {name: getattr(v, name).value for name in _ROLE_FIELDS}
    data["observation_phenomena"] = sorted(p.value for p in v.observation_phenomena)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
