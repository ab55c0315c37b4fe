"""Training-free selection of distinctive classname-free descriptions
for zero-shot vision-language classification on precomputed embeddings."""

from .errors import (
    ConfigError,
    DataError,
    InsufficientSamples,
    NormViolation,
    PairMissingError,
)
from .evaluator import EvalConfig, EvalResult, classify, evaluate, sweep_wcls
from .neighborhood import CandidateSet, candidates, candidates_batch
from .selector import (
    ClassAssignment,
    ImageAssignment,
    SelectionConfig,
    assign_llm,
    assign_random,
    distinctiveness,
    dump_distinctiveness,
    select,
    select_batch,
)
from .similarity import (
    LookupMatrix,
    build_lookup,
    cosine,
    load_lookup,
    lookup_for,
    save_lookup,
    sim_matrix,
)
from .store import (
    DatasetStore,
    DescriptionPool,
    PairEmbeddingTable,
    ProbeSet,
    default_probe_count,
    load_store,
    sample_probe_set,
    save_store,
    validate_store,
)
from .synthgen import SynthSpec, generate, load_ground_truth, write_synthetic

__version__ = "0.1.0"
