"""KG-grounded QA dataset generation.

Pipeline: parse an N-Triples KG, link seed texts to entities, extract a
compact connected subgraph per document (one-hop expansion + Steiner tree
approximation + largest component), generate QA pairs with an LLM, verify
each answer path against the subgraph, filter through a multi-judge panel
with unanimous acceptance, and emit split dataset files. Dynamic variants
regenerate QA from cached subgraphs under a new reordering seed and
temperature; the stats module quantifies cross-variant consistency.
"""

from .kg_store import (
    EntityId,
    KnowledgeGraph,
    Literal,
    NTriplesSyntaxError,
    PredicateId,
    Triple,
    parse_ntriples,
)
from .seed_linker import (
    DictionaryLinker,
    LinkerConfig,
    SeedDocument,
    SeedEntitySet,
    link_entities,
    read_corpus,
)
from .subgraph import (
    ExpandedGraph,
    SeedSubgraph,
    SteinerResult,
    SubgraphConfig,
    build_seed_subgraph,
    expand_one_hop,
    largest_component,
    steiner_tree,
)
from .llm_gateway import (
    ChatRequest,
    ChatResponse,
    FixtureProvider,
    LlmGateway,
    MockProvider,
    OpenAiCompatProvider,
)
from .qa_gen import GenerationBatch, GenerationConfig, QaCandidate, generate_qa, reorder
from .verifier import VerificationOutcome, verify_path
from .judge import PanelDecision, decide, judge_answer, judge_question, run_panel
from .stats import (
    RunComparison,
    TopicDistribution,
    chi_square,
    classify_pairs,
    compare_runs,
    cramers_v,
)
from .dataset_io import DatasetRecord, DatasetVariant, assemble_record, read_split, write_split
from .config import PipelineConfig, load_config
from .pipeline import run_consistency, run_generate, run_variant

__version__ = "0.1.0"
