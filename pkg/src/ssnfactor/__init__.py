"""Factorization toolkit for sensor observation graphs.

Compacts RDF graphs whose observations repeat the same descriptions
(type, procedure, property, value, unit) by storing each distinct
description once on a surrogate entity, rewrites queries so they run
unchanged over the compact graph, and exports both forms as verified
relational table sets.
"""

from .bench import BenchReport, MetricsReport, QueryTiming, compute_metrics, run_bench
from .factorize import (
    AlreadyFactorizedError,
    FactorizationError,
    FactorizationResult,
    FactorizationState,
    factorize,
    load_state,
    mint_surrogates,
    relabel_surrogates,
    save_state,
    verify_factorized,
)
from .generate import (
    DEFAULT_PHENOMENA,
    GenerationError,
    GenerationTruth,
    GeneratorConfig,
    PhenomenonSpec,
    generate,
    generate_with_truth,
)
from .rdf import (
    Blank,
    Graph,
    Iri,
    Literal,
    NTriplesParseError,
    RdfError,
    Triple,
    TriplePattern,
    Variable,
    load_ntriples,
    parse_ntriples,
    save_ntriples,
    serialize_ntriples,
)
from .rewrite import RewriteResult, check_structure, match_rule, rewrite_query
from .sparql import (
    Query,
    QueryError,
    QueryParseError,
    SolutionSet,
    UnsupportedFeatureError,
    evaluate,
    parse_query,
    serialize_query,
)
from .ssn import (
    GroupIndex,
    MeasurementKey,
    ObservationGroupKey,
    enumerate_groups,
    measurement_multiplicity,
    observation_multiplicity,
)
from .tables import (
    FunctionalDependency,
    Relation,
    build_tables,
    build_universal,
    check_fds,
    export_tables,
    verify_lossless,
)
from .vocab import Vocabulary, VocabularyError, default_vocabulary, load_vocabulary

__version__ = "0.1.0"

__all__ = [
    "AlreadyFactorizedError",
    "BenchReport",
    "Blank",
    "DEFAULT_PHENOMENA",
    "FactorizationError",
    "FactorizationResult",
    "FactorizationState",
    "FunctionalDependency",
    "GenerationError",
    "GenerationTruth",
    "GeneratorConfig",
    "Graph",
    "GroupIndex",
    "Iri",
    "Literal",
    "MeasurementKey",
    "MetricsReport",
    "NTriplesParseError",
    "ObservationGroupKey",
    "PhenomenonSpec",
    "Query",
    "QueryError",
    "QueryParseError",
    "QueryTiming",
    "RdfError",
    "Relation",
    "RewriteResult",
    "SolutionSet",
    "Triple",
    "TriplePattern",
    "UnsupportedFeatureError",
    "Variable",
    "Vocabulary",
    "VocabularyError",
    "build_tables",
    "build_universal",
    "check_fds",
    "check_structure",
    "compute_metrics",
    "default_vocabulary",
    "enumerate_groups",
    "evaluate",
    "export_tables",
    "factorize",
    "generate",
    "generate_with_truth",
    "load_ntriples",
    "load_state",
    "load_vocabulary",
    "match_rule",
    "measurement_multiplicity",
    "mint_surrogates",
    "observation_multiplicity",
    "parse_ntriples",
    "parse_query",
    "relabel_surrogates",
    "rewrite_query",
    "run_bench",
    "save_ntriples",
    "save_state",
    "serialize_ntriples",
    "serialize_query",
    "verify_factorized",
    "verify_lossless",
    "__version__",
]
