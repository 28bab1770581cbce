"""Corpus construction: Java lexing, subtokenization, vocabularies, splits."""

from .dataset import (
    MethodExample,
    load_jsonl,
    save_jsonl,
    split_dataset,
    split_examples,
    tokenize_method,
    tokenize_snippet,
)
from .javalex import RawMethod, extract_methods, lex
from .subtokens import SELF_TOKEN, STRING_TOKEN, split_identifier
from .vocabulary import (
    BODY_END,
    BODY_START,
    NAME_END,
    NAME_START,
    PAD,
    SELF,
    SPECIAL_TOKENS,
    UNK,
    Vocabulary,
    build_vocabulary,
)

__all__ = [
    "BODY_END",
    "BODY_START",
    "MethodExample",
    "NAME_END",
    "NAME_START",
    "PAD",
    "RawMethod",
    "SELF",
    "SELF_TOKEN",
    "SPECIAL_TOKENS",
    "STRING_TOKEN",
    "UNK",
    "Vocabulary",
    "build_vocabulary",
    "extract_methods",
    "lex",
    "load_jsonl",
    "save_jsonl",
    "split_dataset",
    "split_examples",
    "tokenize_method",
    "tokenize_snippet",
]
