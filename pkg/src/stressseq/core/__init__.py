from stressseq.core.types import (
    BinarizationRule,
    Dataset,
    SequenceWindow,
    Split,
)
from stressseq.core.ops import binarize, make_splits, segment
from stressseq.core.rng import derived_rng

__all__ = [
    "BinarizationRule",
    "Dataset",
    "SequenceWindow",
    "Split",
    "binarize",
    "make_splits",
    "segment",
    "derived_rng",
]
