"""The convolutional attention architecture.

Two stacked narrow convolutions over the embedded input subtokens,
gated per position by the decoder state and globally L2-normalized,
produce attention features.  Single-channel convolution heads over
those features yield the attention vector (alpha), the copy vector
(kappa), and the copy-versus-vocabulary gate (lambda).  The predicted
embedding is the alpha-weighted sum of input embeddings, scored against
the full embedding table plus a frequency-initialized bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .corpus.vocabulary import BODY_END, BODY_START, Vocabulary
from .errors import DimensionMismatch, VariantDisabled
from .tensorcore import (
    GruParams,
    Tensor,
    constant,
    conv1d_narrow,
    gru_step,
    index_last,
    l2_normalize,
    log,
    matmul,
    pick,
    prelu,
    reshape,
    rows,
    sigmoid,
    softmax,
    tmax,
)

# Down-weights the vocabulary head's UNK when the copy head could have
# produced the exact target.
UNK_PENALTY = math.exp(-10.0)
# Keeps the step loss finite when a target gets vanishing mass.
LOSS_FLOOR = 1e-12


@dataclass
class SimpleStateParams:
    """Parameters of the lightweight two-token state variant."""

    G: Tensor  # (|V|, D) embedding table, separate from E
    W: Tensor  # (k2, D, 2) mixing tensor over the last two tokens


@dataclass
class ModelParams:
    """All trainable tensors of the summarizer."""

    E: Tensor          # (|V|, D) shared subtoken embeddings
    K_l1: Tensor       # (D, w1, k1)
    K_l2: Tensor       # (k1, w2, k2)
    K_att: Tensor      # (k2, w3, 1)
    K_copy: Tensor     # (k2, w3, 1)
    K_lambda: Tensor   # (k2, w3, 1)
    gru: GruParams
    b: Tensor          # (|V|,) output bias
    h_init: Tensor     # (k2,) first decoder state
    prelu_a1: Tensor   # scalar leak of the convolution nonlinearity
    prelu_a2: Tensor   # scalar, reserved second leak (kept for layout stability)
    simple_state: SimpleStateParams | None = None

    def named_tensors(self) -> Iterator[tuple[str, Tensor]]:
        yield "E", self.E
        yield "K_l1", self.K_l1
        yield "K_l2", self.K_l2
        yield "K_att", self.K_att
        yield "K_copy", self.K_copy
        yield "K_lambda", self.K_lambda
        for name, t in self.gru.named_tensors():
            yield f"gru.{name}", t
        yield "b", self.b
        yield "h_init", self.h_init
        yield "prelu_a1", self.prelu_a1
        yield "prelu_a2", self.prelu_a2
        if self.simple_state is not None:
            yield "simple.G", self.simple_state.G
            yield "simple.W", self.simple_state.W

    @property
    def dims(self) -> tuple[int, int, int, int, int, int]:
        """(D, k1, k2, w1, w2, w3)"""
        d, w1, k1 = self.K_l1.shape
        _, w2, k2 = self.K_l2.shape
        w3 = self.K_att.shape[1]
        return d, k1, k2, w1, w2, w3

    def validate(self) -> None:
        d, k1, k2, w1, w2, w3 = self.dims
        if self.E.shape[1] != d:
            raise DimensionMismatch(f"E columns {self.E.shape[1]} != K_l1 channels {d}")
        if self.K_l2.shape[0] != k1:
            raise DimensionMismatch("K_l2 input channels disagree with K_l1 output")
        for name in ("K_att", "K_copy", "K_lambda"):
            k = getattr(self, name)
            if k.shape != (k2, w3, 1):
                raise DimensionMismatch(f"{name} has shape {k.shape}, expected {(k2, w3, 1)}")
        if self.b.shape != (self.E.shape[0],):
            raise DimensionMismatch("bias length differs from vocabulary size")
        if self.h_init.shape != (k2,):
            raise DimensionMismatch("h_init width differs from k2")
        self.gru.validate()
        if self.gru.W_xr.shape[0] != d or self.gru.W_hr.shape[0] != k2:
            raise DimensionMismatch("GRU widths disagree with D/k2")


@dataclass
class EncodedSnippet:
    """Input subtoken sequence wrapped in body sentinels.

    ``ids`` carries vocabulary ids (UNK for out-of-vocabulary tokens);
    ``surface`` keeps the original strings so they can be copied;
    ``pad_id`` selects the embedding row used for convolution padding.
    """

    ids: np.ndarray
    surface: list[str]
    pad_id: int

    def __post_init__(self) -> None:
        if len(self.ids) != len(self.surface) or len(self.ids) < 2:
            raise DimensionMismatch("snippet ids/surface must align and include sentinels")

    def __len__(self) -> int:
        return len(self.surface)


def encode_snippet(body: list[str], vocab: Vocabulary) -> EncodedSnippet:
    surface = [BODY_START, *body, BODY_END]
    ids = np.array([vocab.id(t) for t in surface], dtype=np.intp)
    return EncodedSnippet(ids=ids, surface=surface, pad_id=vocab.pad_id)


@dataclass
class StepOutput:
    """One decoding step: distributions and attention records."""

    vocab_dist: Tensor           # (|V|,) probabilities from the vocabulary head
    alpha: Tensor                # (Len(c),) attention over input positions
    nhat: Tensor                 # (D,) predicted embedding
    kappa: Tensor | None = None  # (Len(c),) copy attention (copy model only)
    lam: Tensor | None = None    # scalar gate in (0, 1) (copy model only)


def padding_split(w1: int, w2: int, w3: int) -> tuple[int, int]:
    """Left/right PAD counts so the attention heads emit Len(c) positions."""
    total = (w1 - 1) + (w2 - 1) + (w3 - 1)
    return math.ceil(total / 2), total - math.ceil(total / 2)


def _act_mask(t: Tensor, act_dropout) -> Tensor:
    # act_dropout is (rate, generator) or None.  The default regularizer
    # is parameter dropout, applied by the trainer; this is the fallback
    # flavor that masks convolution activations instead.
    if act_dropout is None:
        return t
    rate, rng = act_dropout
    if rate <= 0.0:
        return t
    mask = (rng.random(t.shape) >= rate) / (1.0 - rate)
    return t * constant(mask)


def attention_features(snippet: EncodedSnippet, h_prev: Tensor, p: ModelParams,
                       act_dropout=None) -> Tensor:
    """Per-position attention features.

    The padded embedding matrix goes through conv(K_l1) + PReLU, then
    conv(K_l2) gated elementwise per position by the decoder state, and
    finally whole-matrix L2 normalization.
    """
    _, _, k2, w1, w2, w3 = p.dims
    if h_prev.shape != (k2,):
        raise DimensionMismatch(f"state has shape {h_prev.shape}, expected ({k2},)")
    left, right = padding_split(w1, w2, w3)
    padded = np.concatenate([
        np.full(left, snippet.pad_id, dtype=np.intp),
        snippet.ids,
        np.full(right, snippet.pad_id, dtype=np.intp),
    ])
    c_emb = rows(p.E, padded)
    l1 = _act_mask(prelu(conv1d_narrow(c_emb, p.K_l1), p.prelu_a1), act_dropout)
    l2 = _act_mask(conv1d_narrow(l1, p.K_l2) * h_prev, act_dropout)
    return l2_normalize(l2)


def attention_weights(l_feat: Tensor, kernel: Tensor) -> Tensor:
    """softmax(conv(L_feat, kernel)); length is exactly Len(c)."""
    logits = conv1d_narrow(l_feat, kernel)
    return softmax(reshape(logits, (logits.shape[0],)))


def _predict(snippet: EncodedSnippet, alpha: Tensor, p: ModelParams) -> tuple[Tensor, Tensor]:
    snippet_emb = rows(p.E, snippet.ids)
    nhat = matmul(alpha, snippet_emb)
    vocab_dist = softmax(matmul(p.E, nhat) + p.b)
    return nhat, vocab_dist


def conv_attention_step(snippet: EncodedSnippet, h_prev: Tensor, p: ModelParams,
                        act_dropout=None) -> StepOutput:
    """Vocabulary-only attention step."""
    l_feat = attention_features(snippet, h_prev, p, act_dropout)
    alpha = attention_weights(l_feat, p.K_att)
    nhat, vocab_dist = _predict(snippet, alpha, p)
    return StepOutput(vocab_dist=vocab_dist, alpha=alpha, nhat=nhat)


def copy_attention_step(snippet: EncodedSnippet, h_prev: Tensor, p: ModelParams,
                        act_dropout=None) -> StepOutput:
    """Attention step with the copy head and its meta-attention gate."""
    l_feat = attention_features(snippet, h_prev, p, act_dropout)
    alpha = attention_weights(l_feat, p.K_att)
    kappa = attention_weights(l_feat, p.K_copy)
    lam_logits = conv1d_narrow(l_feat, p.K_lambda)
    lam = tmax(sigmoid(reshape(lam_logits, (lam_logits.shape[0],))))
    nhat, vocab_dist = _predict(snippet, alpha, p)
    return StepOutput(vocab_dist=vocab_dist, alpha=alpha, nhat=nhat,
                      kappa=kappa, lam=lam)


def step_fn(model_kind: str):
    if model_kind == "conv_attention":
        return conv_attention_step
    if model_kind == "copy_attention":
        return copy_attention_step
    raise ValueError(f"unknown model kind {model_kind!r}")


# -- training objective ----------------------------------------------------------


def step_loss_from_ids(step: StepOutput, target_id: int,
                       copy_indicator: np.ndarray | None,
                       penalize_unk: bool) -> Tensor:
    """Negative log of the marginal probability of the target.

    ``copy_indicator`` marks the positions whose surface subtoken equals
    the target; ``penalize_unk`` applies the fixed down-weighting of the
    vocabulary head when the target is only reachable by copying.
    """
    r_target = pick(step.vocab_dist, target_id)
    if step.lam is None:
        prob = r_target
    else:
        mu = UNK_PENALTY if penalize_unk else 1.0
        copy_mass = matmul(step.kappa, constant(copy_indicator))
        prob = step.lam * copy_mass + (1.0 - step.lam) * (mu * r_target)
    return -log(prob + LOSS_FLOOR)


def step_loss(step: StepOutput, target: str, snippet: EncodedSnippet,
              vocab: Vocabulary) -> Tensor:
    """String-level loss: resolves the target id, the copy indicator and
    the UNK penalty from the snippet surface."""
    target_id = vocab.id(target)
    indicator = None
    penalize = False
    if step.lam is not None:
        indicator = np.array([1.0 if s == target else 0.0 for s in snippet.surface])
        penalize = target_id == vocab.unk_id and target != vocab.token(vocab.unk_id) \
            and bool(indicator.any())
    return step_loss_from_ids(step, target_id, indicator, penalize)


# -- merged generative distribution ----------------------------------------------


def merged_distribution(step: StepOutput, snippet: EncodedSnippet,
                        vocab: Vocabulary) -> dict[str, float]:
    """Probability of each candidate subtoken in V union c.

    Vocabulary ids are keyed by their surface string; copy mass lands on
    the snippet's surface strings, so identical subtokens pool their
    probability.  Detached from the graph: decoding does not backprop.
    """
    lam = float(step.lam.data) if step.lam is not None else 0.0
    out: dict[str, float] = {}
    vocab_probs = step.vocab_dist.data
    for idx, prob in enumerate(vocab_probs):
        key = vocab.token(idx)
        out[key] = out.get(key, 0.0) + (1.0 - lam) * float(prob)
    if step.kappa is not None:
        kappa = step.kappa.data
        for pos, key in enumerate(snippet.surface):
            out[key] = out.get(key, 0.0) + lam * float(kappa[pos])
    return out


# -- decoder state updates ---------------------------------------------------------


def next_state(p: ModelParams, h_prev: Tensor, *, token_id: int,
               nhat: Tensor | None = None, dropout_rate: float = 0.0,
               rng: np.random.Generator | None = None) -> Tensor:
    """GRU state update.

    At test time the embedding of the emitted subtoken feeds the GRU.
    During training, with probability equal to the dropout rate, the
    predicted embedding is used instead (scheduled-sampling-style).
    """
    use_predicted = (
        nhat is not None and rng is not None and dropout_rate > 0.0
        and rng.random() < dropout_rate
    )
    if use_predicted:
        x = nhat
    else:
        x = reshape(rows(p.E, np.array([token_id], dtype=np.intp)), (p.E.shape[1],))
    return gru_step(x, h_prev, p.gru)


def simple_state(p: ModelParams, prev1_id: int, prev2_id: int) -> Tensor:
    """State from the last two emitted tokens only: W x [G_prev1, G_prev2]."""
    if p.simple_state is None:
        raise VariantDisabled("simple-state parameters are not present")
    ss = p.simple_state
    d = ss.G.shape[1]
    g1 = reshape(rows(ss.G, np.array([prev1_id], dtype=np.intp)), (d,))
    g2 = reshape(rows(ss.G, np.array([prev2_id], dtype=np.intp)), (d,))
    return matmul(index_last(ss.W, 0), g1) + matmul(index_last(ss.W, 1), g2)
