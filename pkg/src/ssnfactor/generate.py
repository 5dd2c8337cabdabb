"""Synthetic observation corpora with known ground truth.

Each generated observation contributes nine triples: five on the
observation entity (type, procedure, observed property, result,
sampling time), three on its measurement (type, value, unit), and one
timestamp on its sampling-time instant.  Values are drawn from a fixed
number of levels — round-robin when ``zipf_s`` is zero, so every level
is used and group sizes are equal, or from a seeded Zipf distribution
for skewed corpora.  Procedures and phenomena are drawn from the seeded
generator, so a configuration is fully reproducible.

:func:`generate_with_truth` also returns the group structure implied by
the generation choices, computed while generating rather than read back
from the graph, for use as an independent check against the grouping
and factorization code.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .rdf import Graph, Iri, Literal, Triple
from .ssn import MeasurementKey, ObservationGroupKey
from .vocab import FIXTURE_PREFIX, Vocabulary, default_vocabulary


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class PhenomenonSpec:
    phenomenon: Iri
    observed_property: Iri
    unit: Iri


DEFAULT_PHENOMENA = (
    PhenomenonSpec(
        phenomenon=Iri(FIXTURE_PREFIX + "TempObs"),
        observed_property=Iri(FIXTURE_PREFIX + "AirTemperature"),
        unit=Iri(FIXTURE_PREFIX + "degC"),
    ),
    PhenomenonSpec(
        phenomenon=Iri(FIXTURE_PREFIX + "RainfallObs"),
        observed_property=Iri(FIXTURE_PREFIX + "Rainfall"),
        unit=Iri(FIXTURE_PREFIX + "cm"),
    ),
)

_START = datetime(2023, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class GeneratorConfig:
    observations: int = 1000
    procedures: int = 1
    distinct_values: int = 100
    zipf_s: float = 0.0
    seed: int = 0
    prefix: str = FIXTURE_PREFIX
    phenomena: tuple[PhenomenonSpec, ...] = DEFAULT_PHENOMENA

    def __post_init__(self):
        if self.observations < 0:
            raise GenerationError("observations must be non-negative")
        if self.procedures < 1:
            raise GenerationError("procedures must be positive")
        if self.distinct_values < 1:
            raise GenerationError("distinct_values must be positive")
        if self.zipf_s < 0:
            raise GenerationError("zipf_s must be non-negative")
        if not self.phenomena:
            raise GenerationError("at least one phenomenon is required")


@dataclass(frozen=True)
class GenerationTruth:
    """Group structure implied by the generation choices."""

    observations: int
    group_counts: dict[ObservationGroupKey, int] = field(default_factory=dict)

    @property
    def group_keys(self) -> int:
        return len(self.group_counts)

    @property
    def measurement_keys(self) -> int:
        return len({k.measurement_key for k in self.group_counts})

    @property
    def original_triples(self) -> int:
        return 9 * self.observations

    @property
    def factorized_triples(self) -> int:
        return 4 * self.observations + 4 * self.group_keys + 3 * self.measurement_keys


class _ZipfLevels:
    """Inverse-CDF sampling over ``1/(rank+1)**s`` weights."""

    def __init__(self, levels: int, s: float):
        weights = [1.0 / (rank + 1) ** s for rank in range(levels)]
        total = 0.0
        self._cumulative = []
        for w in weights:
            total += w
            self._cumulative.append(total)

    def draw(self, rng: random.Random) -> int:
        x = rng.random() * self._cumulative[-1]
        return bisect_right(self._cumulative, x)


def _value_literal(level: int) -> Literal:
    return Literal(f"{(level + 1) / 10:.1f}")


def procedure_iri(prefix: str, index: int) -> Iri:
    return Iri(f"{prefix}LGVI{index + 1}")


def generate_with_truth(
    config: GeneratorConfig, v: Vocabulary | None = None
) -> tuple[Graph, GenerationTruth]:
    v = v or default_vocabulary()
    rng = random.Random(config.seed)
    zipf = _ZipfLevels(config.distinct_values, config.zipf_s) if config.zipf_s > 0 else None
    procedures = [procedure_iri(config.prefix, i) for i in range(config.procedures)]
    g = Graph()
    group_counts: dict[ObservationGroupKey, int] = {}
    for i in range(config.observations):
        obs = Iri(f"{config.prefix}obs{i}")
        meas = Iri(f"{config.prefix}meas{i}")
        instant = Iri(f"{config.prefix}inst{i}")
        spec = config.phenomena[rng.randrange(len(config.phenomena))]
        procedure = procedures[rng.randrange(len(procedures))]
        level = zipf.draw(rng) if zipf else i % config.distinct_values
        value = _value_literal(level)
        timestamp = Literal((_START + timedelta(minutes=i)).strftime("%Y-%m-%dT%H:%M:%SZ"))
        g.add(Triple(obs, v.type_predicate, spec.phenomenon))
        g.add(Triple(obs, v.procedure, procedure))
        g.add(Triple(obs, v.observed_property, spec.observed_property))
        g.add(Triple(obs, v.result, meas))
        g.add(Triple(obs, v.sampling_time, instant))
        g.add(Triple(meas, v.type_predicate, v.measure_data_class))
        g.add(Triple(meas, v.value, value))
        g.add(Triple(meas, v.unit, spec.unit))
        g.add(Triple(instant, v.timestamp, timestamp))
        key = ObservationGroupKey(
            procedure=procedure,
            phenomenon=spec.phenomenon,
            observed_property=spec.observed_property,
            value=value,
            unit=spec.unit,
        )
        group_counts[key] = group_counts.get(key, 0) + 1
    truth = GenerationTruth(observations=config.observations, group_counts=group_counts)
    return g, truth


def generate(config: GeneratorConfig, v: Vocabulary | None = None) -> Graph:
    g, _ = generate_with_truth(config, v)
    return g


def value_profile(truth: GenerationTruth) -> dict[MeasurementKey, int]:
    """Observation count per distinct (value, unit), for reporting."""
    out: dict[MeasurementKey, int] = {}
    for key, count in truth.group_counts.items():
        mk = key.measurement_key
        out[mk] = out.get(mk, 0) + count
    return out
