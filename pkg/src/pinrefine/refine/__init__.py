from .chat import ChatOutcome, EndpointConfig, chat_refine, chat_refine_batch
from .dictionary import (
    HomophoneDictionary,
    canonical_pinyin,
    chars_to_pinyin,
    load_dictionary,
    shipped_dictionary,
)
from .lattice import (
    EPSILON,
    Alignment,
    Candidate,
    Position,
    RefinementError,
    RefinementLattice,
    RefineResult,
    RefineWeights,
    align,
    build_lattice,
    refine,
)
from .ngram import END, NGramScorer, Scorer, UniformScorer, train_ngram

__all__ = [
    "EPSILON", "END", "Alignment", "Candidate", "ChatOutcome", "EndpointConfig",
    "HomophoneDictionary", "NGramScorer", "Position", "RefineResult", "RefineWeights",
    "RefinementError", "RefinementLattice", "Scorer", "UniformScorer", "align",
    "build_lattice", "canonical_pinyin", "chars_to_pinyin", "chat_refine",
    "chat_refine_batch", "load_dictionary", "refine", "shipped_dictionary", "train_ngram",
]
