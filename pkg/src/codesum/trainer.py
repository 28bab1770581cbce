"""Maximum-likelihood training with RMSProp and Nesterov momentum.

Update rule, applied after clipping the global gradient norm to
``clip_norm`` (these formulas are normative for this repository):

    a <- rho * a + (1 - rho) * g^2
    s <- g / sqrt(a + eps)
    v <- momentum * v + s
    theta <- theta - lr * (s + momentum * v)

Regularization is parameter dropout: for each example, every parameter
entry is zeroed with probability ``dropout_rate`` and survivors are
rescaled by 1/(1 - rate).  With the same probability, each state update
feeds the GRU the predicted embedding instead of the target embedding.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .corpus.dataset import MethodExample
from .corpus.vocabulary import NAME_END, Vocabulary, build_vocabulary
from .errors import EmptyTrainingSet, NonFiniteGradient
from .model import (
    EncodedSnippet,
    ModelParams,
    SimpleStateParams,
    StepOutput,
    encode_snippet,
    next_state,
    simple_state,
    step_fn,
    step_loss,
)
from .tensorcore import GruParams, Tensor

MODEL_KINDS = ("conv_attention", "copy_attention")

# Scale of the normal initialization noise.
INIT_SIGMA = 0.1
PRELU_INIT = 0.25


@dataclass
class TrainConfig:
    """Architecture, optimizer, and schedule knobs.

    Defaults are the tuned copy-model setting; ``preset`` returns the
    tuned setting for either model kind.
    """

    model_kind: str = "copy_attention"
    D: int = 128
    k1: int = 32
    k2: int = 16
    w1: int = 18
    w2: int = 19
    w3: int = 2
    dropout_rate: float = 0.4
    learning_rate: float = 1e-3
    rms_decay: float = 0.9
    momentum: float = 0.9
    epsilon: float = 1e-6
    clip_norm: float = 5.0
    epochs: int = 50
    patience: int = 5
    seed: int = 0
    minibatch: int = 1
    # plumbing beyond the core schedule
    min_count: int = 2
    eval_every: int = 1
    stop_exact_at_1: float | None = None
    dropout_kind: str = "params"  # or "activations" (see next_state for the state trick)
    state_kind: str = "gru"       # or "simple"

    def validate(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must be in [0, 1)")
        for name in ("D", "k1", "k2", "w1", "w2", "w3"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.minibatch < 1 or self.epochs < 0 or self.patience < 1:
            raise ValueError("bad schedule values")
        if self.dropout_kind not in ("params", "activations"):
            raise ValueError("dropout_kind must be 'params' or 'activations'")
        if self.state_kind not in ("gru", "simple"):
            raise ValueError("state_kind must be 'gru' or 'simple'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in obj.items() if k in known})


def preset(model_kind: str, **overrides) -> TrainConfig:
    """The tuned hyperparameters for each model kind."""
    if model_kind == "conv_attention":
        cfg = TrainConfig(model_kind="conv_attention", D=128, k1=8, k2=8,
                          w1=24, w2=29, w3=10, dropout_rate=0.5)
    elif model_kind == "copy_attention":
        cfg = TrainConfig(model_kind="copy_attention", D=128, k1=32, k2=16,
                          w1=18, w2=19, w3=2, dropout_rate=0.4)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


# -- initialization ---------------------------------------------------------------


def target_counts(examples: Iterable[MethodExample]) -> Counter[str]:
    """Occurrences of every training target subtoken, end marker included."""
    counts: Counter[str] = Counter()
    for ex in examples:
        counts.update(ex.name)
        counts[NAME_END] += 1
    return counts


def init_params(cfg: TrainConfig, vocab: Vocabulary,
                name_counts: Counter[str] | None = None,
                rng: np.random.Generator | None = None) -> ModelParams:
    """Normal noise around zero everywhere, except the output bias,
    which starts at the log empirical frequency of each target id
    (add-one smoothed so every entry is finite)."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if name_counts is None:
        name_counts = Counter()
    v, d, k1, k2 = len(vocab), cfg.D, cfg.k1, cfg.k2

    def noise(*shape) -> Tensor:
        return Tensor(rng.normal(0.0, INIT_SIGMA, size=shape), requires_grad=True)

    id_counts = np.zeros(v)
    for tok, c in name_counts.items():
        id_counts[vocab.id(tok)] += c
    total = id_counts.sum()
    b = np.log((id_counts + 1.0) / (total + v))

    gru = GruParams(
        W_xr=noise(d, k2), W_hr=noise(k2, k2),
        W_xu=noise(d, k2), W_hu=noise(k2, k2),
        W_xc=noise(d, k2), W_hc=noise(k2, k2),
        b_r=noise(k2), b_u=noise(k2), b_c=noise(k2),
    )
    simple = None
    if cfg.state_kind == "simple":
        simple = SimpleStateParams(G=noise(v, d), W=noise(k2, d, 2))
    params = ModelParams(
        E=noise(v, d),
        K_l1=noise(d, cfg.w1, k1),
        K_l2=noise(k1, cfg.w2, k2),
        K_att=noise(k2, cfg.w3, 1),
        K_copy=noise(k2, cfg.w3, 1),
        K_lambda=noise(k2, cfg.w3, 1),
        gru=gru,
        b=Tensor(b, requires_grad=True),
        h_init=noise(k2),
        prelu_a1=Tensor(PRELU_INIT, requires_grad=True),
        prelu_a2=Tensor(PRELU_INIT, requires_grad=True),
        simple_state=simple,
    )
    params.validate()
    return params


# -- optimizer ---------------------------------------------------------------------


@dataclass
class OptimizerState:
    """Per-parameter RMS accumulators and momentum buffers."""

    sq: dict[str, np.ndarray] = field(default_factory=dict)
    mom: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ModelParams) -> "OptimizerState":
        state = cls()
        for name, t in params.named_tensors():
            state.sq[name] = np.zeros_like(t.data)
            state.mom[name] = np.zeros_like(t.data)
        return state


def clip_global_norm(grads: dict[str, np.ndarray], clip_norm: float) -> float:
    """Scale all gradients so the joint norm is at most ``clip_norm``."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total > clip_norm and total > 0.0:
        scale = clip_norm / total
        for g in grads.values():
            g *= scale
    return total


def sgd_update(params: ModelParams, grads: dict[str, np.ndarray],
               opt_state: OptimizerState, cfg: TrainConfig) -> None:
    """One clipped RMSProp + Nesterov-momentum step, in place."""
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("gradient contains NaN or Inf")
    clip_global_norm(grads, cfg.clip_norm)
    rho, mu, lr, eps = cfg.rms_decay, cfg.momentum, cfg.learning_rate, cfg.epsilon
    for name, t in params.named_tensors():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(t.data)
        a = opt_state.sq[name]
        v = opt_state.mom[name]
        a *= rho
        a += (1.0 - rho) * g * g
        s = g / np.sqrt(a + eps)
        v *= mu
        v += s
        t.data -= lr * (s + mu * v)


# -- dropout ---------------------------------------------------------------------------


def masked_view(params: ModelParams, rate: float, rng: np.random.Generator) -> ModelParams:
    """A fresh parameter view with entries dropped at ``rate``.

    Masked entries contribute nothing to the forward pass; the mask
    applies identically to the gradient, so the underlying leaves keep
    accumulating correctly.
    """
    scale = 1.0 / (1.0 - rate)

    def drop(t: Tensor) -> Tensor:
        mask = (rng.random(t.shape) >= rate).astype(t.data.dtype) * scale
        return t * mask

    gru = GruParams(**{name: drop(t) for name, t in params.gru.named_tensors()})
    simple = None
    if params.simple_state is not None:
        simple = SimpleStateParams(G=drop(params.simple_state.G),
                                   W=drop(params.simple_state.W))
    return ModelParams(
        E=drop(params.E), K_l1=drop(params.K_l1), K_l2=drop(params.K_l2),
        K_att=drop(params.K_att), K_copy=drop(params.K_copy),
        K_lambda=drop(params.K_lambda), gru=gru, b=drop(params.b),
        h_init=drop(params.h_init), prelu_a1=drop(params.prelu_a1),
        prelu_a2=drop(params.prelu_a2), simple_state=simple,
    )


# -- training loop -----------------------------------------------------------------------


def example_loss(params: ModelParams, snippet: EncodedSnippet,
                 name: Sequence[str], vocab: Vocabulary, cfg: TrainConfig,
                 rng: np.random.Generator | None = None) -> Tensor:
    """Sum of per-subtoken losses for one example, end marker included."""
    step = step_fn(cfg.model_kind)
    targets = [*name, NAME_END]
    act_dropout = None
    if rng is not None and cfg.dropout_kind == "activations" and cfg.dropout_rate > 0.0:
        act_dropout = (cfg.dropout_rate, rng)
    total: Tensor | None = None
    if cfg.state_kind == "simple":
        prev1 = prev2 = vocab.name_start_id
        h = simple_state(params, prev1, prev2)
    else:
        h = params.h_init
    for t, target in enumerate(targets):
        out: StepOutput = step(snippet, h, params, act_dropout)
        loss = step_loss(out, target, snippet, vocab)
        total = loss if total is None else total + loss
        if t + 1 < len(targets):
            tid = vocab.id(target)
            if cfg.state_kind == "simple":
                prev1, prev2 = tid, prev1
                h = simple_state(params, prev1, prev2)
            else:
                h = next_state(params, h, token_id=tid, nhat=out.nhat,
                               dropout_rate=cfg.dropout_rate if rng is not None else 0.0,
                               rng=rng)
    return total


@dataclass
class TrainResult:
    params: ModelParams
    vocab: Vocabulary
    config: TrainConfig
    log: list[dict]
    best_epoch: int
    skipped_examples: int = 0


def _snapshot(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in params.named_tensors()}


def _restore(params: ModelParams, snap: dict[str, np.ndarray]) -> None:
    for name, t in params.named_tensors():
        t.data = snap[name].copy()


def _collect_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in params.named_tensors()
    }


def train(train_examples: Sequence[MethodExample],
          valid_examples: Sequence[MethodExample],
          cfg: TrainConfig,
          vocab: Vocabulary | None = None,
          log_sink=None) -> TrainResult:
    """Train until the epoch budget or the validation patience runs out.

    Early stopping follows the best validation F1 at rank 5; the result
    carries the best-validation parameters.
    """
    from .evaluation import score_suggestions
    from .decoder import suggest

    cfg.validate()
    if not train_examples:
        raise EmptyTrainingSet("no training examples")
    if vocab is None:
        vocab = build_vocabulary(train_examples, min_count=cfg.min_count)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg, vocab, target_counts(train_examples), rng)
    opt_state = OptimizerState.for_params(params)

    encoded = [(encode_snippet(ex.body, vocab), ex.name) for ex in train_examples]
    valid_encoded = [(encode_snippet(ex.body, vocab), ex.name) for ex in valid_examples]

    best = _snapshot(params)
    best_f1 = -1.0
    best_epoch = 0
    stale = 0
    skipped = 0
    log: list[dict] = []

    def validate_now() -> tuple[float, float]:
        f1s, exacts = [], []
        for snippet, name in valid_encoded:
            suggestions = suggest(snippet, params, vocab, k=5,
                                  model_kind=cfg.model_kind,
                                  state_kind=cfg.state_kind)
            ranked = [s.name for s in suggestions]
            scores = score_suggestions(ranked, name)
            f1s.append(scores["f1_at_5"])
            exacts.append(scores["exact_at_1"])
        if not f1s:
            return 0.0, 0.0
        return float(np.mean(f1s)), float(np.mean(exacts))

    stop = False
    for epoch in range(1, cfg.epochs + 1):
        tick = time.perf_counter()
        order = rng.permutation(len(encoded))
        window: dict[str, np.ndarray] = {}
        window_count = 0
        epoch_nll = 0.0
        counted = 0
        for pos, idx in enumerate(order):
            snippet, name = encoded[idx]
            view = params
            if cfg.dropout_rate > 0.0 and cfg.dropout_kind == "params":
                view = masked_view(params, cfg.dropout_rate, rng)
            loss = example_loss(view, snippet, name, vocab, cfg, rng=rng)
            if not np.isfinite(float(loss.data)):
                skipped += 1
                continue
            epoch_nll += float(loss.data)
            counted += 1
            for _, t in params.named_tensors():
                t.zero_grad()
            loss.backward()
            grads = _collect_grads(params)
            if any(not np.all(np.isfinite(g)) for g in grads.values()):
                skipped += 1
                continue
            for gname, g in grads.items():
                if gname in window:
                    window[gname] += g
                else:
                    window[gname] = g
            window_count += 1
            if window_count >= cfg.minibatch or pos == len(order) - 1:
                sgd_update(params, window, opt_state, cfg)
                window = {}
                window_count = 0

        entry: dict = {
            "epoch": epoch,
            "train_nll": epoch_nll / max(counted, 1),
            "valid_f1_at_5": None,
            "valid_exact_at_1": None,
            "seconds": None,
        }
        if valid_encoded and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
            f1_5, exact_1 = validate_now()
            entry["valid_f1_at_5"] = f1_5
            entry["valid_exact_at_1"] = exact_1
            if f1_5 > best_f1:
                best_f1 = f1_5
                best = _snapshot(params)
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    stop = True
            if cfg.stop_exact_at_1 is not None and exact_1 >= cfg.stop_exact_at_1:
                best = _snapshot(params)
                best_epoch = epoch
                stop = True
        elif not valid_encoded:
            best = _snapshot(params)
            best_epoch = epoch
        entry["seconds"] = time.perf_counter() - tick
        log.append(entry)
        if log_sink is not None:
            log_sink(entry)
        if stop:
            break

    _restore(params, best)
    return TrainResult(params=params, vocab=vocab, config=cfg, log=log,
                       best_epoch=best_epoch, skipped_examples=skipped)
