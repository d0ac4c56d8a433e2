"""Pinyin-guided CTC decoding and N-best refinement for Mandarin lip reading."""
from .ctc import Hypothesis, collapse, ctc_loss, greedy_decode, prefix_beam_search
from .inventory import (
    PinyinSequence,
    SyllableInventory,
    load_inventory,
    segment_pinyin,
    shipped_inventory,
    validate_sequence,
)
from .losses import LossBreakdown, combine, cross_entropy, finite_diff_check
from .metrics import EditCounts, cer, corpus_cer, edit_counts
from .posteriors import PosteriorMatrix, read_posteriors, synth_posteriors, write_posteriors

__version__ = "0.1.0"
