"""Graph factorization: collapse repeated observation descriptions.

Each group of pattern-complete observations sharing a (procedure,
phenomenon, property, value, unit) key gets one surrogate observation
entity carrying the shared description once; each distinct (value,
unit) pair gets one surrogate measurement entity.  Originals keep
their identity triples (result link, sampling time, and a new
``observationOf`` link to their surrogate) while the descriptive
triples move to the surrogates.

Factorization is incremental: a prior state (factorized graph, entity
mapping, group-key registry) can be supplied and the output extends
it.  Surrogate IRIs are minted deterministically from the key content,
so separately factorized batches agree with a single-shot run.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .rdf import (
    Blank,
    Graph,
    Iri,
    Literal,
    Term,
    Triple,
    load_ntriples,
    render_term,
    term_sort_key,
)
from .ssn import (
    GroupIndex,
    MeasurementKey,
    ObservationGroupKey,
    enumerate_groups,
    measurement_multiplicity,
    observation_multiplicity,
)
from .vocab import FIXTURE_PREFIX, Vocabulary

SURROGATE_NAMESPACE = FIXTURE_PREFIX + "surrogate/"


class FactorizationError(ValueError):
    pass


class AlreadyFactorizedError(FactorizationError):
    """The input graph already carries observationOf links."""


@dataclass(frozen=True)
class SurrogatePair:
    observation: Iri
    measurement: Iri


def _digest(parts: tuple[str, ...]) -> str:
    payload = "\x1f".join(parts).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def mint_surrogates(key: ObservationGroupKey) -> SurrogatePair:
    """Deterministic surrogate IRIs for a group key.

    The observation surrogate hashes the whole key; the measurement
    surrogate hashes (value, unit) only, so groups sharing a value/unit
    pair share one surrogate measurement.
    """
    obs_digest = _digest(
        (
            render_term(key.procedure),
            render_term(key.phenomenon),
            render_term(key.observed_property),
            render_term(key.value),
            render_term(key.unit),
        )
    )
    meas_digest = _digest((render_term(key.value), render_term(key.unit)))
    return SurrogatePair(
        observation=Iri(f"{SURROGATE_NAMESPACE}obs-{obs_digest[:20]}"),
        measurement=Iri(f"{SURROGATE_NAMESPACE}meas-{meas_digest[:20]}"),
    )


def _avoid_collisions(candidate: Iri, forbidden: set[Term]) -> Iri:
    # defensive: input graphs normally never use the surrogate namespace
    out = candidate
    counter = 0
    while out in forbidden:
        counter += 1
        out = Iri(f"{candidate.value}-{counter}")
    return out


@dataclass
class FactorizationState:
    """Everything needed to continue factorizing into the same output."""

    graph: Graph
    mapping: dict[Term, Iri]
    registry: dict[ObservationGroupKey, SurrogatePair]

    @classmethod
    def empty(cls) -> "FactorizationState":
        return cls(graph=Graph(), mapping={}, registry={})


@dataclass
class FactorizationReport:
    input_triples: int = 0
    output_triples: int = 0
    groups_total: int = 0
    groups_minted: int = 0
    groups_reused: int = 0
    observations_mapped: int = 0
    measurements_mapped: int = 0
    incomplete_observations: int = 0
    unclean_measurements: int = 0
    incomplete_examples: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "input_triples": self.input_triples,
            "output_triples": self.output_triples,
            "groups_total": self.groups_total,
            "groups_minted": self.groups_minted,
            "groups_reused": self.groups_reused,
            "observations_mapped": self.observations_mapped,
            "measurements_mapped": self.measurements_mapped,
            "incomplete_observations": self.incomplete_observations,
            "unclean_measurements": self.unclean_measurements,
            "incomplete_examples": self.incomplete_examples,
        }


@dataclass
class FactorizationResult:
    graph: Graph
    mapping: dict[Term, Iri]
    state: FactorizationState
    index: GroupIndex
    report: FactorizationReport


def factorize(
    g: Graph, v: Vocabulary, prior: FactorizationState | None = None
) -> FactorizationResult:
    """Factorize ``g``, extending ``prior`` when given.

    Raises :class:`AlreadyFactorizedError` if ``g`` contains the
    reserved ``observationOf`` predicate.  Pattern-incomplete
    observations pass through verbatim and are counted in the report.
    """
    if g.subjects(predicate=v.observation_of):
        raise AlreadyFactorizedError(
            f"input graph already contains {v.observation_of.value} links"
        )
    if prior is None:
        prior = FactorizationState.empty()

    index = enumerate_groups(g, v)
    report = FactorizationReport(input_triples=len(g), groups_total=len(index.groups))

    out = Graph(prior.graph)
    mapping: dict[Term, Iri] = dict(prior.mapping)
    registry: dict[ObservationGroupKey, SurrogatePair] = dict(prior.registry)
    forbidden = g.nodes() | prior.graph.nodes()
    meas_by_key: dict[MeasurementKey, Iri] = {
        key.measurement_key: pair.measurement for key, pair in registry.items()
    }

    for key in index.sorted_keys():
        entry = index.groups[key]
        if key in registry:
            pair = registry[key]
            report.groups_reused += 1
        else:
            minted = mint_surrogates(key)
            meas = meas_by_key.get(key.measurement_key)
            if meas is None:
                meas = _avoid_collisions(minted.measurement, forbidden)
                meas_by_key[key.measurement_key] = meas
            pair = SurrogatePair(
                observation=_avoid_collisions(minted.observation, forbidden),
                measurement=meas,
            )
            registry[key] = pair
            report.groups_minted += 1
        for m in entry.measurements:
            mapping[m] = pair.measurement
        for obs in entry.observations:
            mapping[obs] = pair.observation

    mapped_obs = index.mapped_observations()
    mapped_meas = index.mapped_measurements()
    report.observations_mapped = len(mapped_obs)
    report.measurements_mapped = len(mapped_meas)
    report.incomplete_observations = index.diagnostics.incomplete_count
    report.unclean_measurements = len(index.diagnostics.unclean_measurements)
    report.incomplete_examples = [
        f"{render_term(e)}: {reason}"
        for e, reason in sorted(
            index.diagnostics.incomplete_observations.items(),
            key=lambda kv: term_sort_key(kv[0]),
        )[:10]
    ]

    relocating = {v.procedure, v.observed_property, v.value, v.unit}
    for t in g:
        s, p, o = t.subject, t.predicate, t.object
        mapped = s in mapped_obs or s in mapped_meas
        if not mapped:
            out.add(t)
        elif p == v.result and s in mapped_obs:
            out.add(t)
            out.add_triple(mapping[s], p, mapping[o])
            out.add_triple(s, v.observation_of, mapping[s])
        elif p == v.type_predicate:
            out.add_triple(mapping[s], p, o)
        elif p in relocating:
            out.add_triple(mapping[s], p, o)
        else:
            # sampling time and any other predicate stays on the original
            out.add(t)

    report.output_triples = len(out)
    state = FactorizationState(graph=out, mapping=mapping, registry=registry)
    return FactorizationResult(
        graph=out, mapping=mapping, state=state, index=index, report=report
    )


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

_DETAIL_CAP = 10


@dataclass
class BulletCheck:
    name: str
    passed: bool
    details: list[str] = field(default_factory=list)


@dataclass
class VerificationReport:
    bullets: list[BulletCheck]

    @property
    def ok(self) -> bool:
        return all(b.passed for b in self.bullets)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "bullets": [
                {"name": b.name, "passed": b.passed, "details": b.details}
                for b in self.bullets
            ],
        }


def _key_label(key: ObservationGroupKey) -> str:
    return (
        f"({render_term(key.procedure)}, {render_term(key.phenomenon)}, "
        f"{render_term(key.observed_property)}, {render_term(key.value)}, "
        f"{render_term(key.unit)})"
    )


def verify_factorized(
    g: Graph, g_prime: Graph, mapping: dict[Term, Iri], v: Vocabulary
) -> VerificationReport:
    """Check the factorized-graph conditions, with counterexamples.

    Bullets: node preservation, surrogate molecules per group, mapping
    domain and link consistency, per-triple edge translation,
    multiplicity collapse, and reconstruction of the group index from
    the factorized graph alone.
    """
    index = enumerate_groups(g, v)
    mapped_obs = index.mapped_observations()
    mapped_meas = index.mapped_measurements()
    bullets: list[BulletCheck] = []

    missing_nodes = [
        render_term(n)
        for n in sorted(g.nodes() - g_prime.nodes(), key=term_sort_key)[:_DETAIL_CAP]
    ]
    bullets.append(BulletCheck("nodes-preserved", not missing_nodes, missing_nodes))

    no_molecule = [
        _key_label(key)
        for key in index.sorted_keys()
        if observation_multiplicity(g_prime, key, v) == 0
    ]
    bullets.append(
        BulletCheck("surrogate-molecules-present", not no_molecule, no_molecule[:_DETAIL_CAP])
    )

    domain_issues: list[str] = []
    for e in sorted(mapped_obs | mapped_meas, key=term_sort_key):
        if e not in mapping:
            domain_issues.append(f"unmapped group member {render_term(e)}")
    for e in sorted(set(mapping) & (g.nodes() - (mapped_obs | mapped_meas)), key=term_sort_key):
        if g.predicates(e):
            domain_issues.append(f"mapped entity outside every group: {render_term(e)}")
    for obs in sorted(mapped_obs, key=term_sort_key):
        links = g_prime.objects(obs, v.observation_of)
        if obs in mapping and links != {mapping[obs]}:
            domain_issues.append(
                f"{render_term(obs)} observationOf links {sorted(render_term(x) for x in links)}"
                f" do not match mapping"
            )
    bullets.append(
        BulletCheck("mapping-domain", not domain_issues, domain_issues[:_DETAIL_CAP])
    )

    relocating = {v.procedure, v.observed_property, v.value, v.unit}
    translation_issues: list[str] = []
    for t in sorted(g, key=lambda x: (term_sort_key(x.subject), term_sort_key(x.predicate))):
        if len(translation_issues) >= _DETAIL_CAP:
            break
        s, p, o = t.subject, t.predicate, t.object
        mapped = s in mapped_obs or s in mapped_meas
        if mapped and s not in mapping:
            continue  # already reported under mapping-domain
        if not mapped:
            if t not in g_prime:
                translation_issues.append(f"verbatim triple missing: {render_term(s)} {render_term(p)}")
        elif p == v.result and s in mapped_obs:
            if o not in mapping:
                continue  # already reported under mapping-domain
            expected = [
                t,
                Triple(mapping[s], p, mapping[o]),
                Triple(s, v.observation_of, mapping[s]),
            ]
            for e in expected:
                if e not in g_prime:
                    translation_issues.append(
                        f"result translation missing {render_term(e.subject)} {render_term(e.predicate)} {render_term(e.object)}"
                    )
        elif p == v.type_predicate or p in relocating:
            if Triple(mapping[s], p, o) not in g_prime:
                translation_issues.append(
                    f"relocated triple missing: {render_term(mapping[s])} {render_term(p)} {render_term(o)}"
                )
            if s in mapped_obs and p in relocating and t in g_prime:
                translation_issues.append(
                    f"descriptive triple left on original: {render_term(s)} {render_term(p)}"
                )
        else:
            if t not in g_prime:
                translation_issues.append(
                    f"retained triple missing: {render_term(s)} {render_term(p)}"
                )
    bullets.append(
        BulletCheck("edge-translation", not translation_issues, translation_issues)
    )

    multiplicity_issues: list[str] = []
    seen_mk: set[MeasurementKey] = set()
    for key in index.sorted_keys():
        mo = observation_multiplicity(g_prime, key, v)
        if mo != 1:
            multiplicity_issues.append(f"observation multiplicity {mo} for {_key_label(key)}")
        mk = key.measurement_key
        if mk not in seen_mk:
            seen_mk.add(mk)
            mm = measurement_multiplicity(g_prime, mk, v)
            if mm != 1:
                multiplicity_issues.append(
                    f"measurement multiplicity {mm} for ({render_term(mk.value)}, {render_term(mk.unit)})"
                )
    bullets.append(
        BulletCheck(
            "multiplicity-collapse", not multiplicity_issues, multiplicity_issues[:_DETAIL_CAP]
        )
    )

    recon_issues = _check_reconstruction(index, g_prime, v)
    bullets.append(
        BulletCheck("group-reconstruction", not recon_issues, recon_issues[:_DETAIL_CAP])
    )

    return VerificationReport(bullets=bullets)


def _check_reconstruction(
    index: GroupIndex, g_prime: Graph, v: Vocabulary
) -> list[str]:
    """Rebuild (key -> original observations) from the factorized graph."""
    rebuilt: dict[ObservationGroupKey, set[Term]] = {}
    issues: list[str] = []
    for obs in g_prime.subjects(predicate=v.observation_of):
        surrogates = g_prime.objects(obs, v.observation_of)
        if len(surrogates) != 1:
            issues.append(f"{render_term(obs)} has {len(surrogates)} observationOf links")
            continue
        (surr,) = surrogates
        types = g_prime.objects(surr, v.type_predicate)
        phen = types & v.observation_phenomena
        phenomenon = next(iter(phen)) if len(phen) == 1 else v.observation_class
        procs = g_prime.objects(surr, v.procedure)
        props = g_prime.objects(surr, v.observed_property)
        meas = g_prime.objects(surr, v.result)
        if len(procs) != 1 or len(props) != 1 or len(meas) != 1:
            issues.append(f"surrogate {render_term(surr)} molecule not single-valued")
            continue
        (m,) = meas
        values = g_prime.objects(m, v.value)
        units = g_prime.objects(m, v.unit)
        if len(values) != 1 or len(units) != 1:
            issues.append(f"surrogate measurement {render_term(m)} not single-valued")
            continue
        key = ObservationGroupKey(
            next(iter(procs)), phenomenon, next(iter(props)),
            next(iter(values)), next(iter(units)),
        )
        rebuilt.setdefault(key, set()).add(obs)
    expected = {key: set(entry.observations) for key, entry in index.groups.items()}
    for key in sorted(set(expected) | set(rebuilt), key=ObservationGroupKey.sort_key):
        if expected.get(key, set()) != rebuilt.get(key, set()):
            issues.append(
                f"group mismatch for {_key_label(key)}: "
                f"{len(expected.get(key, set()))} expected, {len(rebuilt.get(key, set()))} rebuilt"
            )
    return issues


def relabel_surrogates(g: Graph, v: Vocabulary) -> Graph:
    """Rename surrogates to names derived from their own descriptions.

    Two factorized graphs with the same structure but differently minted
    surrogate identifiers relabel to equal graphs, so fixtures and
    regression baselines can be compared without depending on the
    minting scheme.
    """
    obs_surrogates = {
        t.object for t in g.triples() if t.predicate == v.observation_of
    }
    meas_surrogates: set[Term] = set()
    for s in obs_surrogates:
        meas_surrogates |= g.objects(s, v.result)
    meas_surrogates -= obs_surrogates

    def meas_signature(m: Term) -> str:
        parts = sorted(
            f"{render_term(t.predicate)} {render_term(t.object)}"
            for t in g.molecule(m)
        )
        return "|".join(parts)

    def obs_signature(s: Term) -> str:
        parts = []
        for t in g.molecule(s):
            if t.predicate == v.result and t.object in meas_surrogates:
                parts.append(f"{render_term(t.predicate)} [{meas_signature(t.object)}]")
            else:
                parts.append(f"{render_term(t.predicate)} {render_term(t.object)}")
        return "|".join(sorted(parts))

    renames: dict[Term, Iri] = {}
    for m in meas_surrogates:
        digest = _digest(("meas", meas_signature(m)))
        renames[m] = Iri(f"{SURROGATE_NAMESPACE}canon-meas-{digest[:20]}")
    for s in obs_surrogates:
        digest = _digest(("obs", obs_signature(s)))
        renames[s] = Iri(f"{SURROGATE_NAMESPACE}canon-obs-{digest[:20]}")

    out = Graph()
    for t in g.triples():
        out.add(
            Triple(
                renames.get(t.subject, t.subject),
                t.predicate,
                renames.get(t.object, t.object),
            )
        )
    return out


# ---------------------------------------------------------------------------
# State persistence
# ---------------------------------------------------------------------------


def _term_to_key(t: Term) -> str:
    return render_term(t)


def _term_from_key(s: str) -> Term:
    if s.startswith("<") and s.endswith(">"):
        return Iri(s[1:-1])
    if s.startswith("_:"):
        return Blank(s[2:])
    raise FactorizationError(f"cannot parse mapped entity {s!r}")


def _literal_to_json(lit: Literal) -> dict:
    return {"lexical": lit.lexical, "datatype": lit.datatype, "language": lit.language}


def _literal_from_json(d: dict) -> Literal:
    return Literal(d["lexical"], datatype=d.get("datatype"), language=d.get("language"))


def save_state(state: FactorizationState, path: str, graph_path: str | None) -> None:
    """Write mapping + registry JSON; the graph itself lives in ``graph_path``."""
    data = {
        "version": 1,
        "factorized_graph": graph_path,
        "registry": [
            {
                "procedure": key.procedure.value,
                "phenomenon": key.phenomenon.value,
                "observed_property": key.observed_property.value,
                "value": _literal_to_json(key.value),
                "unit": key.unit.value,
                "surrogate_observation": pair.observation.value,
                "surrogate_measurement": pair.measurement.value,
            }
            for key, pair in sorted(
                state.registry.items(), key=lambda kv: kv[0].sort_key()
            )
        ],
        "entities": {
            _term_to_key(e): s.value
            for e, s in sorted(state.mapping.items(), key=lambda kv: term_sort_key(kv[0]))
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def load_state(path: str) -> FactorizationState:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("version") != 1:
        raise FactorizationError(f"unsupported state version in {path}")
    graph = Graph()
    graph_path = data.get("factorized_graph")
    if graph_path:
        resolved = graph_path
        if not os.path.isabs(resolved):
            resolved = os.path.join(os.path.dirname(os.path.abspath(path)), resolved)
        graph = load_ntriples(resolved)
    elif data.get("registry"):
        raise FactorizationError(
            f"state {path} has a registry but no factorized_graph path"
        )
    registry: dict[ObservationGroupKey, SurrogatePair] = {}
    for row in data.get("registry", []):
        key = ObservationGroupKey(
            procedure=Iri(row["procedure"]),
            phenomenon=Iri(row["phenomenon"]),
            observed_property=Iri(row["observed_property"]),
            value=_literal_from_json(row["value"]),
            unit=Iri(row["unit"]),
        )
        registry[key] = SurrogatePair(
            observation=Iri(row["surrogate_observation"]),
            measurement=Iri(row["surrogate_measurement"]),
        )
    mapping = {
        _term_from_key(k): Iri(s) for k, s in data.get("entities", {}).items()
    }
    return FactorizationState(graph=graph, mapping=mapping, registry=registry)
