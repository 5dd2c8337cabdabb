"""Canonical observation shape: molecule keys, multiplicities, groups.

An observation description is *pattern-complete* when eight triples are
present: the observation's phenomenon type, procedure, observed
property, and result link, plus the referenced measurement's class
type, value, and unit.  Pattern-complete observations partition into
groups keyed by (procedure, phenomenon, property, value, unit); the
measurement side of a group is keyed by (value, unit) alone, so groups
sharing a value/unit pair share their measurement set.

Multiplicity counts follow the raw conjunctive patterns and apply no
cleanup; group enumeration additionally excludes observations that
violate the single-valued-property assumptions and reports them as
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rdf import Graph, Iri, Literal, Term, term_sort_key
from .vocab import Vocabulary


@dataclass(frozen=True)
class MeasurementKey:
    value: Literal
    unit: Iri


@dataclass(frozen=True)
class ObservationGroupKey:
    procedure: Iri
    phenomenon: Iri
    observed_property: Iri
    value: Literal
    unit: Iri

    @property
    def measurement_key(self) -> MeasurementKey:
        return MeasurementKey(self.value, self.unit)

    def sort_key(self) -> tuple:
        return (
            term_sort_key(self.procedure),
            term_sort_key(self.phenomenon),
            term_sort_key(self.observed_property),
            term_sort_key(self.value),
            term_sort_key(self.unit),
        )


@dataclass(frozen=True)
class GroupEntry:
    observations: frozenset[Term]
    measurements: frozenset[Term]


@dataclass
class GroupDiagnostics:
    """Entities excluded from every group, with the reason."""

    incomplete_observations: dict[Term, str] = field(default_factory=dict)
    unclean_measurements: dict[Term, str] = field(default_factory=dict)

    @property
    def incomplete_count(self) -> int:
        return len(self.incomplete_observations)


@dataclass
class GroupIndex:
    groups: dict[ObservationGroupKey, GroupEntry]
    diagnostics: GroupDiagnostics

    def sorted_keys(self) -> list[ObservationGroupKey]:
        return sorted(self.groups, key=ObservationGroupKey.sort_key)

    @property
    def observation_count(self) -> int:
        return sum(len(e.observations) for e in self.groups.values())

    def mapped_observations(self) -> set[Term]:
        out: set[Term] = set()
        for e in self.groups.values():
            out.update(e.observations)
        return out

    def mapped_measurements(self) -> set[Term]:
        out: set[Term] = set()
        for e in self.groups.values():
            out.update(e.measurements)
        return out


def measurement_multiplicity(g: Graph, key: MeasurementKey, v: Vocabulary) -> int:
    """Number of entities carrying the full measurement description for key."""
    candidates = g.subjects(v.type_predicate, v.measure_data_class)
    count = 0
    for m in candidates:
        if key.unit in g.objects(m, v.unit) and key.value in g.objects(m, v.value):
            count += 1
    return count


def observation_multiplicity(g: Graph, key: ObservationGroupKey, v: Vocabulary) -> int:
    """Number of entities matching the eight-triple observation pattern for key."""
    count = 0
    for obs in g.subjects(v.type_predicate, key.phenomenon):
        if key.procedure not in g.objects(obs, v.procedure):
            continue
        if key.observed_property not in g.objects(obs, v.observed_property):
            continue
        for m in g.objects(obs, v.result):
            if (
                v.measure_data_class in g.objects(m, v.type_predicate)
                and key.unit in g.objects(m, v.unit)
                and key.value in g.objects(m, v.value)
            ):
                count += 1
                break
    return count


def _clean_measurements(g: Graph, v: Vocabulary, diags: GroupDiagnostics) -> dict[Term, MeasurementKey]:
    """Measurement entities with exactly one value and one unit, by key."""
    out: dict[Term, MeasurementKey] = {}
    for m in g.subjects(v.type_predicate, v.measure_data_class):
        values = g.objects(m, v.value)
        units = g.objects(m, v.unit)
        if len(values) != 1 or len(units) != 1:
            if values or units:
                diags.unclean_measurements[m] = (
                    f"{len(values)} value(s), {len(units)} unit(s); expected exactly one of each"
                )
            continue
        (value,) = values
        (unit,) = units
        if not isinstance(value, Literal) or not isinstance(unit, Iri):
            diags.unclean_measurements[m] = "value must be a literal and unit an IRI"
            continue
        out[m] = MeasurementKey(value, unit)
    return out


def enumerate_groups(g: Graph, v: Vocabulary) -> GroupIndex:
    """Group pattern-complete observations by their five-part key.

    Observations with more than one procedure, property, result, or
    phenomenon type, and measurements with more than one value or unit,
    are excluded everywhere and reported in the diagnostics.  An entity
    typed with both the base observation class and a single phenomenon
    class groups under the phenomenon.
    """
    diags = GroupDiagnostics()
    meas_keys = _clean_measurements(g, v, diags)

    candidates: set[Term] = set()
    for cls in v.observation_classes():
        candidates.update(g.subjects(v.type_predicate, cls))

    obs_key: dict[Term, ObservationGroupKey] = {}
    for obs in candidates:
        types = g.objects(obs, v.type_predicate)
        phen = types & v.observation_phenomena
        if len(phen) > 1:
            diags.incomplete_observations[obs] = "multiple phenomenon types"
            continue
        phenomenon = next(iter(phen)) if phen else v.observation_class
        procedures = g.objects(obs, v.procedure)
        properties = g.objects(obs, v.observed_property)
        results = g.objects(obs, v.result)
        if len(procedures) != 1 or len(properties) != 1 or len(results) != 1:
            missing = []
            if len(procedures) != 1:
                missing.append(f"{len(procedures)} procedure(s)")
            if len(properties) != 1:
                missing.append(f"{len(properties)} property(s)")
            if len(results) != 1:
                missing.append(f"{len(results)} result(s)")
            diags.incomplete_observations[obs] = ", ".join(missing)
            continue
        (procedure,) = procedures
        (prop,) = properties
        (m,) = results
        if m not in meas_keys:
            diags.incomplete_observations[obs] = "measurement description incomplete"
            continue
        if not isinstance(procedure, Iri) or not isinstance(prop, Iri) or not isinstance(phenomenon, Iri):
            diags.incomplete_observations[obs] = "procedure/property/type must be IRIs"
            continue
        mk = meas_keys[m]
        obs_key[obs] = ObservationGroupKey(procedure, phenomenon, prop, mk.value, mk.unit)

    # measurement sets are shared by every group with the same (value, unit)
    sm_by_key: dict[MeasurementKey, set[Term]] = {}
    for m, mk in meas_keys.items():
        sm_by_key.setdefault(mk, set()).add(m)

    so_by_key: dict[ObservationGroupKey, set[Term]] = {}
    for obs, key in obs_key.items():
        so_by_key.setdefault(key, set()).add(obs)

    groups = {
        key: GroupEntry(frozenset(so), frozenset(sm_by_key[key.measurement_key]))
        for key, so in so_by_key.items()
    }
    return GroupIndex(groups=groups, diagnostics=diags)


# ---------------------------------------------------------------------------
# Class templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassTemplate:
    """Shape of one class: its predicates and its links to other classes.

    ``intra_links`` pairs a predicate with the class of its (typed)
    objects; ``inter_links`` lists object-valued predicates whose
    objects carry no type in this graph (target class unknown).
    """

    cls: Iri
    sp: frozenset[Iri]
    intra_links: frozenset[tuple[Iri, Iri]]
    inter_links: frozenset[Iri]


def extract_class_templates(g: Graph, v: Vocabulary) -> dict[Iri, ClassTemplate]:
    """One template per class occurring as an rdf:type object."""
    classes = {c for c in g.objects(predicate=v.type_predicate) if isinstance(c, Iri)}
    out: dict[Iri, ClassTemplate] = {}
    for cls in classes:
        sp: set[Iri] = set()
        intra: set[tuple[Iri, Iri]] = set()
        inter: set[Iri] = set()
        for inst in g.subjects(v.type_predicate, cls):
            for pred in g.predicates(inst):
                if pred == v.type_predicate:
                    continue
                sp.add(pred)
                for obj in g.objects(inst, pred):
                    if isinstance(obj, Literal):
                        continue
                    obj_types = {
                        c for c in g.objects(obj, v.type_predicate) if isinstance(c, Iri)
                    }
                    if obj_types:
                        for oc in obj_types:
                            intra.add((pred, oc))
                    else:
                        inter.add(pred)
        out[cls] = ClassTemplate(
            cls=cls,
            sp=frozenset(sp),
            intra_links=frozenset(intra),
            inter_links=frozenset(inter),
        )
    return out
