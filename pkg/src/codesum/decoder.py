"""Hybrid breadth-first/beam search over sequential subtoken predictions.

A max-heap holds partial names ranked by log-probability.  Each
iteration pops the best partial, runs one model step on its state, and
pushes the top successors back.  A partial whose log-probability falls
below the current k-th best completed name is pruned (only once k names
have completed).  The search stops after a fixed number of iterations
or when the heap empties.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .corpus.vocabulary import NAME_END, Vocabulary
from .model import (
    EncodedSnippet,
    ModelParams,
    StepOutput,
    merged_distribution,
    next_state,
    simple_state,
    step_fn,
)
from .tensorcore import Tensor


@dataclass
class SearchLimits:
    """Caps that keep the search tractable."""

    max_steps: int = 100       # heap iterations
    heap_size: int = 256       # partials kept; overflow drops the worst
    successors: int = 50       # children pushed per expansion
    max_name_len: int = 10     # hard cap on subtokens per name
    min_token_prob: float = 0.0


@dataclass
class StepRecord:
    """Attention snapshot for one generated subtoken (for visualization)."""

    token: str
    alpha: np.ndarray
    kappa: np.ndarray | None
    lam: float | None


@dataclass(frozen=True)
class PartialSuggestion:
    """A name prefix on the heap."""

    subtokens: tuple[str, ...]
    log_prob: float
    state: Tensor
    history: tuple[int, int]  # last two emitted ids (simple-state variant)
    steps: tuple[StepRecord, ...] = ()


@dataclass
class Suggestion:
    """A completed, ranked name."""

    name: list[str]
    log_prob: float
    steps: list[StepRecord]

    @property
    def probability(self) -> float:
        return math.exp(self.log_prob)


def _record(out: StepOutput, token: str) -> StepRecord:
    return StepRecord(
        token=token,
        alpha=out.alpha.data.copy(),
        kappa=out.kappa.data.copy() if out.kappa is not None else None,
        lam=float(out.lam.data) if out.lam is not None else None,
    )


def expand(partial: PartialSuggestion, out: StepOutput,
           snippet: EncodedSnippet, params: ModelParams, vocab: Vocabulary,
           limits: SearchLimits, state_kind: str = "gru",
           ) -> tuple[list[PartialSuggestion], list[Suggestion]]:
    """Children of a partial, split into open prefixes and completions.

    Successors are the highest-probability entries of the merged
    distribution, at most ``limits.successors`` of them; each open
    child's state advances in test mode.
    """
    merged = merged_distribution(out, snippet, vocab)
    ranked = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))
    if len(partial.subtokens) >= limits.max_name_len:
        ranked = [(tok, pr) for tok, pr in ranked if tok == NAME_END]
    ranked = ranked[:limits.successors]

    children: list[PartialSuggestion] = []
    completed: list[Suggestion] = []
    for token, prob in ranked:
        if prob <= limits.min_token_prob:
            continue
        log_prob = partial.log_prob + math.log(max(prob, 1e-300))
        record = _record(out, token)
        if token == NAME_END:
            if partial.subtokens:  # empty names are meaningless output
                completed.append(Suggestion(
                    name=list(partial.subtokens),
                    log_prob=log_prob,
                    steps=[*partial.steps, record],
                ))
            continue
        token_id = vocab.id(token)
        if state_kind == "simple":
            state = simple_state(params, token_id, partial.history[0])
            history = (token_id, partial.history[0])
        else:
            state = next_state(params, partial.state, token_id=token_id)
            history = partial.history
        children.append(PartialSuggestion(
            subtokens=(*partial.subtokens, token),
            log_prob=log_prob,
            state=state,
            history=history,
            steps=(*partial.steps, record),
        ))
    return children, completed


def suggest(snippet: EncodedSnippet, params: ModelParams, vocab: Vocabulary,
            k: int = 5, *, model_kind: str = "copy_attention",
            state_kind: str = "gru",
            limits: SearchLimits | None = None) -> list[Suggestion]:
    """Top-k full-name suggestions, best first.

    Returns an empty list when nothing completes within the limits.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if limits is None:
        limits = SearchLimits()
    step = step_fn(model_kind)

    if state_kind == "simple":
        start_id = vocab.name_start_id
        root_state = simple_state(params, start_id, start_id)
        history = (start_id, start_id)
    else:
        root_state = params.h_init
        history = (vocab.name_start_id, vocab.name_start_id)
    root = PartialSuggestion(subtokens=(), log_prob=0.0, state=root_state,
                             history=history)

    counter = itertools.count()  # heap tie-breaker
    heap: list[tuple[float, int, PartialSuggestion]] = [(0.0, next(counter), root)]
    best: dict[tuple[str, ...], Suggestion] = {}

    def kth_best() -> float | None:
        if len(best) < k:
            return None
        return sorted(s.log_prob for s in best.values())[-k]

    for _ in range(limits.max_steps):
        if not heap:
            break
        neg_lp, _, partial = heapq.heappop(heap)
        bar = kth_best()
        if bar is not None and partial.log_prob < bar:
            continue
        out = step(snippet, partial.state, params)
        children, completed = expand(partial, out, snippet, params, vocab,
                                     limits, state_kind)
        for s in completed:
            key = tuple(s.name)
            if key not in best or s.log_prob > best[key].log_prob:
                best[key] = s
        bar = kth_best()
        for child in children:
            if bar is not None and child.log_prob < bar:
                continue
            heapq.heappush(heap, (-child.log_prob, next(counter), child))
        while len(heap) > limits.heap_size:
            worst = max(range(len(heap)), key=lambda i: heap[i][0])
            heap.pop(worst)
            heapq.heapify(heap)

    ranked = sorted(best.values(), key=lambda s: (-s.log_prob, s.name))
    return ranked[:k]
