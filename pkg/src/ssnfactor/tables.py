"""Relational exports of observation graphs, with verification.

Four table sets cover an observation corpus:

* ``universal`` — one wide table, one row per fully described
  observation (type, procedure, property, measurement with value and
  unit, sampling-time instant with timestamp).
* ``factorized`` — the universal table split along the surrogate
  structure: per-observation facts, shared observation descriptions,
  and shared measurement descriptions.
* ``ct`` — class templates: one narrow table per observation class plus
  link tables to measurements and instants.
* ``fct`` — factorized class templates: per-class description tables
  keyed by observation surrogates, with membership links back to the
  original observations.

``universal`` and ``ct`` read the original graph; ``factorized`` and
``fct`` read the factorized graph.  Cells hold terms in their
serialized form, and an absent value is the empty string.  Every
decomposed set reconstructs the universal table by natural joins
(:func:`verify_lossless`), and its declared functional dependencies
both hold on the data and satisfy third normal form
(:func:`check_fds`) — the universal table itself keeps its transitive
dependencies and is the expected 3NF failure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .rdf import Graph, Iri, Term, render_term
from .ssn import enumerate_groups
from .vocab import Vocabulary

NULL = ""

UNIVERSAL_ATTRIBUTES = (
    "ObsID",
    "Type",
    "Procedure",
    "Property",
    "MID",
    "SamplingTime",
    "Value",
    "Unit",
    "Timestamp",
)

TABLE_MODES = ("universal", "factorized", "ct", "fct")


class TableError(ValueError):
    pass


@dataclass(frozen=True)
class Relation:
    name: str
    attributes: tuple[str, ...]
    rows: frozenset[tuple[str, ...]]
    key: tuple[str, ...] = ()

    def __post_init__(self):
        width = len(self.attributes)
        for row in self.rows:
            if len(row) != width:
                raise TableError(
                    f"relation {self.name}: row width {len(row)} != {width}"
                )
        for attr in self.key:
            if attr not in self.attributes:
                raise TableError(
                    f"relation {self.name}: key attribute {attr} not present"
                )

    def sorted_rows(self) -> list[tuple[str, ...]]:
        return sorted(self.rows)

    def index(self, attr: str) -> int:
        return self.attributes.index(attr)


def project(r: Relation, attributes: tuple[str, ...], name: str | None = None) -> Relation:
    idx = [r.index(a) for a in attributes]
    rows = frozenset(tuple(row[i] for i in idx) for row in r.rows)
    return Relation(name or r.name, attributes, rows)


def natural_join(r1: Relation, r2: Relation, name: str | None = None) -> Relation:
    shared = [a for a in r1.attributes if a in r2.attributes]
    extra = [a for a in r2.attributes if a not in r1.attributes]
    out_attrs = r1.attributes + tuple(extra)
    idx1 = [r1.index(a) for a in shared]
    idx2 = [r2.index(a) for a in shared]
    extra_idx = [r2.index(a) for a in extra]
    by_key: dict[tuple[str, ...], list[tuple[str, ...]]] = {}
    for row in r2.rows:
        by_key.setdefault(tuple(row[i] for i in idx2), []).append(row)
    rows = set()
    for row in r1.rows:
        key = tuple(row[i] for i in idx1)
        for other in by_key.get(key, ()):
            rows.add(row + tuple(other[i] for i in extra_idx))
    return Relation(name or f"({r1.name}*{r2.name})", out_attrs, frozenset(rows))


def extend(r: Relation, attr: str, value: str, name: str | None = None) -> Relation:
    """Add a constant-valued column (used to restore per-class types)."""
    return Relation(
        name or r.name,
        r.attributes + (attr,),
        frozenset(row + (value,) for row in r.rows),
    )


def union(rs: list[Relation], name: str) -> Relation:
    if not rs:
        raise TableError("union of no relations")
    attrs = rs[0].attributes
    rows: set[tuple[str, ...]] = set()
    for r in rs:
        if r.attributes != attrs:
            raise TableError("union over mismatched attributes")
        rows |= r.rows
    return Relation(name, attrs, frozenset(rows))


# ---------------------------------------------------------------------------
# Shared graph readers
# ---------------------------------------------------------------------------


def _single_object(g: Graph, s: Term, p: Iri) -> Term | None:
    objs = g.objects(s, p)
    if len(objs) == 1:
        return next(iter(objs))
    return None


def _render_or_null(t: Term | None) -> str:
    return NULL if t is None else render_term(t)


def _class_for(g: Graph, entity: Term, v: Vocabulary) -> Iri:
    """Observation class: its one phenomenon type, else the base class."""
    types = g.objects(entity, v.type_predicate)
    phenomena = {t for t in types if isinstance(t, Iri) and t in v.observation_phenomena}
    if len(phenomena) == 1:
        return next(iter(phenomena))
    return v.observation_class


def local_name(iri: Iri) -> str:
    value = iri.value
    for sep in ("#", "/"):
        if sep in value:
            value = value.rsplit(sep, 1)[1]
    return value or iri.value


def _observation_links(g: Graph, v: Vocabulary) -> list[tuple[Term, Term]]:
    """(original, surrogate) pairs, sorted for deterministic output."""
    pairs = []
    for t in g.triples():
        if t.predicate == v.observation_of:
            pairs.append((t.subject, t.object))
    pairs.sort(key=lambda p: (render_term(p[0]), render_term(p[1])))
    return pairs


def _time_cells(g: Graph, obs: Term, v: Vocabulary) -> tuple[str, str]:
    instant = _single_object(g, obs, v.sampling_time)
    if instant is None:
        return NULL, NULL
    ts = _single_object(g, instant, v.timestamp)
    return render_term(instant), _render_or_null(ts)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_universal(g: Graph, v: Vocabulary) -> Relation:
    """One row per fully described observation of the original graph."""
    index = enumerate_groups(g, v)
    rows = set()
    for key in index.sorted_keys():
        entry = index.groups[key]
        for obs in sorted(entry.observations, key=render_term):
            mid = _single_object(g, obs, v.result)
            sampling, ts = _time_cells(g, obs, v)
            rows.add(
                (
                    render_term(obs),
                    render_term(_class_for(g, obs, v)),
                    render_term(key.procedure),
                    render_term(key.observed_property),
                    _render_or_null(mid),
                    sampling,
                    render_term(key.value),
                    render_term(key.unit),
                    ts,
                )
            )
    return Relation("Universal", UNIVERSAL_ATTRIBUTES, frozenset(rows), key=("ObsID",))


def build_factorized_tables(g_fact: Graph, v: Vocabulary) -> dict[str, Relation]:
    """Three-way split of the universal table, read off a factorized graph."""
    obs_rows = set()
    molecule_rows = set()
    measurement_rows = set()
    seen_surrogates = set()
    for orig, surr in _observation_links(g_fact, v):
        mid = _single_object(g_fact, orig, v.result)
        sampling, ts = _time_cells(g_fact, orig, v)
        obs_rows.add(
            (render_term(orig), sampling, ts, _render_or_null(mid), render_term(surr))
        )
        if surr in seen_surrogates:
            continue
        seen_surrogates.add(surr)
        mmid = _single_object(g_fact, surr, v.result)
        molecule_rows.add(
            (
                render_term(surr),
                render_term(_class_for(g_fact, surr, v)),
                _render_or_null(_single_object(g_fact, surr, v.procedure)),
                _render_or_null(_single_object(g_fact, surr, v.observed_property)),
                _render_or_null(mmid),
            )
        )
        if mmid is not None:
            measurement_rows.add(
                (
                    render_term(mmid),
                    _render_or_null(_single_object(g_fact, mmid, v.value)),
                    _render_or_null(_single_object(g_fact, mmid, v.unit)),
                )
            )
    return {
        "Observation": Relation(
            "Observation",
            ("ObsID", "SamplingTime", "Timestamp", "MID", "ObsMID"),
            frozenset(obs_rows),
            key=("ObsID",),
        ),
        "CompactObservationMolecule": Relation(
            "CompactObservationMolecule",
            ("ObsMID", "Type", "Procedure", "Property", "MMID"),
            frozenset(molecule_rows),
            key=("ObsMID",),
        ),
        "CompactMeasurementMolecule": Relation(
            "CompactMeasurementMolecule",
            ("MMID", "Value", "Unit"),
            frozenset(measurement_rows),
            key=("MMID",),
        ),
    }


def build_class_templates(g: Graph, v: Vocabulary) -> dict[str, Relation]:
    """Per-class tables over the original graph, plus shared link targets."""
    index = enumerate_groups(g, v)
    per_class: dict[str, set] = {}
    class_meas: dict[str, set] = {}
    class_instant: dict[str, set] = {}
    measurement_rows = set()
    instant_rows = set()
    for key in index.sorted_keys():
        entry = index.groups[key]
        for obs in sorted(entry.observations, key=render_term):
            cls = local_name(_class_for(g, obs, v))
            obs_id = render_term(obs)
            per_class.setdefault(cls, set()).add(
                (obs_id, render_term(key.procedure), render_term(key.observed_property))
            )
            mid = _single_object(g, obs, v.result)
            if mid is not None:
                class_meas.setdefault(cls, set()).add((obs_id, render_term(mid)))
                measurement_rows.add(
                    (render_term(mid), render_term(key.value), render_term(key.unit))
                )
            sampling, ts = _time_cells(g, obs, v)
            if sampling != NULL:
                class_instant.setdefault(cls, set()).add((obs_id, sampling))
                if ts != NULL:
                    instant_rows.add((sampling, ts))
    out: dict[str, Relation] = {}
    for cls in sorted(per_class):
        out[cls] = Relation(
            cls, ("ObsID", "Procedure", "Property"), frozenset(per_class[cls]),
            key=("ObsID",),
        )
        out[f"{cls}_Measurement"] = Relation(
            f"{cls}_Measurement", ("ObsID", "MID"),
            frozenset(class_meas.get(cls, set())), key=("ObsID",),
        )
        out[f"{cls}_Instant"] = Relation(
            f"{cls}_Instant", ("ObsID", "SamplingTime"),
            frozenset(class_instant.get(cls, set())), key=("ObsID",),
        )
    out["Measurement"] = Relation(
        "Measurement", ("MID", "Value", "Unit"), frozenset(measurement_rows),
        key=("MID",),
    )
    out["Instant"] = Relation(
        "Instant", ("SamplingTime", "Timestamp"), frozenset(instant_rows),
        key=("SamplingTime",),
    )
    return out


def build_fct_tables(g_fact: Graph, v: Vocabulary) -> dict[str, Relation]:
    """Class templates over the factorized graph: descriptions keyed by
    observation surrogates, plus membership and retained links."""
    membership: dict[str, set] = {}
    class_meas: dict[str, set] = {}
    class_instant: dict[str, set] = {}
    fclass: dict[str, set] = {}
    fclass_meas: dict[str, set] = {}
    f_measurement_rows = set()
    instant_rows = set()
    for orig, surr in _observation_links(g_fact, v):
        cls = local_name(_class_for(g_fact, surr, v))
        obs_id, surr_id = render_term(orig), render_term(surr)
        membership.setdefault(cls, set()).add((obs_id, surr_id))
        mid = _single_object(g_fact, orig, v.result)
        if mid is not None:
            class_meas.setdefault(cls, set()).add((obs_id, render_term(mid)))
        sampling, ts = _time_cells(g_fact, orig, v)
        if sampling != NULL:
            class_instant.setdefault(cls, set()).add((obs_id, sampling))
            if ts != NULL:
                instant_rows.add((sampling, ts))
        fclass.setdefault(cls, set()).add(
            (
                surr_id,
                _render_or_null(_single_object(g_fact, surr, v.procedure)),
                _render_or_null(_single_object(g_fact, surr, v.observed_property)),
            )
        )
        mmid = _single_object(g_fact, surr, v.result)
        if mmid is not None:
            fclass_meas.setdefault(cls, set()).add((surr_id, render_term(mmid)))
            f_measurement_rows.add(
                (
                    render_term(mmid),
                    _render_or_null(_single_object(g_fact, mmid, v.value)),
                    _render_or_null(_single_object(g_fact, mmid, v.unit)),
                )
            )
    out: dict[str, Relation] = {}
    for cls in sorted(membership):
        out[f"F_{cls}"] = Relation(
            f"F_{cls}", ("ObsMID", "Procedure", "Property"),
            frozenset(fclass.get(cls, set())), key=("ObsMID",),
        )
        out[f"F_{cls}_Measurement"] = Relation(
            f"F_{cls}_Measurement", ("ObsMID", "MMID"),
            frozenset(fclass_meas.get(cls, set())), key=("ObsMID",),
        )
        out[f"{cls}_Observation"] = Relation(
            f"{cls}_Observation", ("ObsID", "ObsMID"),
            frozenset(membership[cls]), key=("ObsID",),
        )
        out[f"{cls}_Measurement"] = Relation(
            f"{cls}_Measurement", ("ObsID", "MID"),
            frozenset(class_meas.get(cls, set())), key=("ObsID",),
        )
        out[f"{cls}_Instant"] = Relation(
            f"{cls}_Instant", ("ObsID", "SamplingTime"),
            frozenset(class_instant.get(cls, set())), key=("ObsID",),
        )
    out["F_Measurement"] = Relation(
        "F_Measurement", ("MMID", "Value", "Unit"), frozenset(f_measurement_rows),
        key=("MMID",),
    )
    out["Instant"] = Relation(
        "Instant", ("SamplingTime", "Timestamp"), frozenset(instant_rows),
        key=("SamplingTime",),
    )
    return out


def build_tables(g: Graph, v: Vocabulary, mode: str) -> dict[str, Relation]:
    if mode == "universal":
        return {"Universal": build_universal(g, v)}
    if mode == "factorized":
        return build_factorized_tables(g, v)
    if mode == "ct":
        return build_class_templates(g, v)
    if mode == "fct":
        return build_fct_tables(g, v)
    raise TableError(f"unknown table mode {mode!r} (expected one of {TABLE_MODES})")


# ---------------------------------------------------------------------------
# Lossless-join verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LosslessReport:
    mode: str
    ok: bool
    universal_rows: int
    reconstructed_rows: int
    missing: tuple[tuple[str, ...], ...]
    extra: tuple[tuple[str, ...], ...]

    def summary(self) -> str:
        state = "lossless" if self.ok else "NOT lossless"
        return (
            f"{self.mode}: {state} "
            f"({self.reconstructed_rows}/{self.universal_rows} rows reconstructed, "
            f"{len(self.missing)} missing, {len(self.extra)} extra)"
        )


_SAMPLE_CAP = 10


def _reconstruct_factorized(tables: dict[str, Relation]) -> Relation:
    joined = natural_join(tables["Observation"], tables["CompactObservationMolecule"])
    joined = natural_join(joined, tables["CompactMeasurementMolecule"])
    return project(joined, UNIVERSAL_ATTRIBUTES, "Reconstructed")


def _class_locals(tables: dict[str, Relation], suffix: str) -> list[str]:
    out = []
    for name in tables:
        if name.endswith(suffix) and name != suffix.lstrip("_"):
            out.append(name[: -len(suffix)])
    return sorted(out)


def _reconstruct_ct(tables: dict[str, Relation], classes_by_iri: dict[str, str]) -> Relation:
    parts = []
    for cls in _class_locals(tables, "_Measurement"):
        if cls not in tables:
            continue  # F-CT link tables share the suffix; CT classes have a base table
        joined = natural_join(tables[cls], tables[f"{cls}_Measurement"])
        joined = natural_join(joined, tables["Measurement"])
        joined = natural_join(joined, tables[f"{cls}_Instant"])
        joined = natural_join(joined, tables["Instant"])
        joined = extend(joined, "Type", classes_by_iri[cls])
        parts.append(project(joined, UNIVERSAL_ATTRIBUTES, cls))
    return union(parts, "Reconstructed") if parts else Relation(
        "Reconstructed", UNIVERSAL_ATTRIBUTES, frozenset()
    )


def _reconstruct_fct(tables: dict[str, Relation], classes_by_iri: dict[str, str]) -> Relation:
    parts = []
    for cls in _class_locals(tables, "_Observation"):
        joined = natural_join(tables[f"{cls}_Observation"], tables[f"F_{cls}"])
        joined = natural_join(joined, tables[f"F_{cls}_Measurement"])
        joined = natural_join(joined, tables["F_Measurement"])
        joined = natural_join(joined, tables[f"{cls}_Measurement"])
        joined = natural_join(joined, tables[f"{cls}_Instant"])
        joined = natural_join(joined, tables["Instant"])
        joined = extend(joined, "Type", classes_by_iri[cls])
        parts.append(project(joined, UNIVERSAL_ATTRIBUTES, cls))
    return union(parts, "Reconstructed") if parts else Relation(
        "Reconstructed", UNIVERSAL_ATTRIBUTES, frozenset()
    )


def verify_lossless(
    universal: Relation, tables: dict[str, Relation], mode: str, v: Vocabulary
) -> LosslessReport:
    """Check that ``tables`` reconstructs ``universal`` by natural joins."""
    classes_by_iri = {
        local_name(c): render_term(c)
        for c in sorted(v.observation_classes(), key=lambda i: i.value)
    }
    if mode == "factorized":
        rebuilt = _reconstruct_factorized(tables)
    elif mode == "ct":
        rebuilt = _reconstruct_ct(tables, classes_by_iri)
    elif mode == "fct":
        rebuilt = _reconstruct_fct(tables, classes_by_iri)
    else:
        raise TableError(f"no reconstruction for mode {mode!r}")
    missing = sorted(universal.rows - rebuilt.rows)[:_SAMPLE_CAP]
    extra = sorted(rebuilt.rows - universal.rows)[:_SAMPLE_CAP]
    return LosslessReport(
        mode=mode,
        ok=universal.rows == rebuilt.rows,
        universal_rows=len(universal.rows),
        reconstructed_rows=len(rebuilt.rows),
        missing=tuple(missing),
        extra=tuple(extra),
    )


# ---------------------------------------------------------------------------
# Functional dependencies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionalDependency:
    relation: str
    lhs: tuple[str, ...]
    rhs: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.relation}: {','.join(self.lhs)} -> {','.join(self.rhs)}"


@dataclass(frozen=True)
class FdCheck:
    fd: FunctionalDependency
    holds: bool
    third_normal_form: bool
    detail: str = ""


@dataclass(frozen=True)
class FdReport:
    checks: tuple[FdCheck, ...]

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.checks)

    @property
    def all_3nf(self) -> bool:
        return all(c.third_normal_form for c in self.checks)

    def violations(self) -> list[FdCheck]:
        return [c for c in self.checks if not (c.holds and c.third_normal_form)]


def declared_fds(tables: dict[str, Relation]) -> list[FunctionalDependency]:
    """Key dependencies for every relation, plus the universal table's
    measurement dependency (the transitive one its decompositions remove)."""
    fds = []
    for name in sorted(tables):
        r = tables[name]
        if not r.key:
            continue
        rest = tuple(a for a in r.attributes if a not in r.key)
        if rest:
            fds.append(FunctionalDependency(name, r.key, rest))
        if name == "Universal":
            fds.append(FunctionalDependency(name, ("MID",), ("Value", "Unit")))
    return fds


def check_fds(
    tables: dict[str, Relation], fds: list[FunctionalDependency] | None = None
) -> FdReport:
    if fds is None:
        fds = declared_fds(tables)
    checks = []
    for fd in fds:
        r = tables.get(fd.relation)
        if r is None:
            checks.append(FdCheck(fd, False, False, "relation not present"))
            continue
        lhs_idx = [r.index(a) for a in fd.lhs]
        rhs_idx = [r.index(a) for a in fd.rhs]
        seen: dict[tuple[str, ...], tuple[str, ...]] = {}
        holds = True
        detail = ""
        for row in r.sorted_rows():
            left = tuple(row[i] for i in lhs_idx)
            right = tuple(row[i] for i in rhs_idx)
            if left in seen and seen[left] != right:
                holds = False
                detail = f"{left} maps to both {seen[left]} and {right}"
                break
            seen[left] = right
        prime = set(r.key)
        superkey = set(fd.lhs) >= set(r.key) and bool(r.key)
        third_nf = superkey or set(fd.rhs) - set(fd.lhs) <= prime
        if not third_nf and not detail:
            detail = "lhs is not a superkey and rhs is not prime"
        checks.append(FdCheck(fd, holds, third_nf, detail))
    return FdReport(tuple(checks))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def export_tables(
    tables: dict[str, Relation], directory: str | Path, tableset: str
) -> list[Path]:
    """Write one CSV per relation plus a JSON sidecar describing the set."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    manifest: dict[str, object] = {"tableset": tableset, "null": NULL, "tables": {}}
    for name in sorted(tables):
        r = tables[name]
        path = directory / f"{tableset}__{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(r.attributes)
            writer.writerows(r.sorted_rows())
        manifest["tables"][name] = {
            "file": path.name,
            "attributes": list(r.attributes),
            "key": list(r.key),
            "rows": len(r.rows),
        }
        written.append(path)
    sidecar = directory / f"{tableset}.json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(sidecar)
    return written
