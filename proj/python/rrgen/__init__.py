"""Retrieve-rerank-generate pipeline bindings."""

from ._rrgen import (
    Corpus,
    InvertedIndex,
    Passage,
    PipelineConfig,
    Runtime,
    SyntheticTask,
    TaskInstance,
    Tokenizer,
    exact_match,
    generate_synthetic_task,
    load_corpus,
    load_instances,
    normalize_answer,
    r_precision,
    recall_at_k,
    rouge_l,
    token_f1,
)

__all__ = [
    "Corpus",
    "InvertedIndex",
    "Passage",
    "PipelineConfig",
    "Runtime",
    "SyntheticTask",
    "TaskInstance",
    "Tokenizer",
    "exact_match",
    "generate_synthetic_task",
    "load_corpus",
    "load_instances",
    "normalize_answer",
    "r_precision",
    "recall_at_k",
    "rouge_l",
    "token_f1",
]
