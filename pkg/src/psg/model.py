"""Two-head multi-task network, trained from scratch.

A shared sparse-linear + ReLU encoder feeds two affine heads: a K-way
multi-label tag head (binary cross-entropy per label) and a D-way
difficulty head (softmax cross-entropy over ordinal levels).  The batch
objective is l1 + lambda * l2, with samples missing a difficulty label
masked out of l2's mean.

Everything is float64 and deterministic: weight init and epoch shuffles
come from the package PRNG with per-tensor derived seeds, so adding or
dropping one head never shifts another tensor's init stream.  Gradients
are exact analytic derivatives (ReLU subgradient at 0 taken as 0) and are
cross-checked against central finite differences in grad_check.

Also provides a linear one-vs-rest baseline (K independent logistic
regressions plus one D-class softmax regression on the same features).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.special import expit, logsumexp

from .corpus import Dataset, DifficultyScale, TagVocabulary
from .errors import DataError, TrainingDivergedError
from .rng import Xoshiro256StarStar, derive_seed, uniform_array
from .text import DocumentVector, TokenizerConfig, Vectorizer, stack_vectors, tokenize, vectorize

CHECKPOINT_JSON = "params.json"
CHECKPOINT_BIN = "params.bin"
VECTORIZER_JSON = "vectorizer.json"


@dataclass(frozen=True)
class ModelDims:
    num_features: int
    hidden: int
    num_tags: int    # 0 means the tag head is absent
    num_levels: int  # 0 means the difficulty head is absent


def param_count(dims: ModelDims) -> int:
    """Exact parameter count: V*H + H for the encoder plus H*K + K and
    H*D + D for whichever heads are present."""
    v, h, k, d = dims.num_features, dims.hidden, dims.num_tags, dims.num_levels
    total = v * h + h
    if k:
        total += h * k + k
    if d:
        total += h * d + d
    return total


@dataclass
class ModelParams:
    """Encoder plus up-to-two head weight sets, all float64."""

    w_enc: np.ndarray            # (V, H)
    b_enc: np.ndarray            # (H,)
    w_tag: np.ndarray | None     # (H, K)
    b_tag: np.ndarray | None
    w_diff: np.ndarray | None    # (H, D)
    b_diff: np.ndarray | None

    @property
    def dims(self) -> ModelDims:
        return ModelDims(
            num_features=self.w_enc.shape[0],
            hidden=self.w_enc.shape[1],
            num_tags=0 if self.w_tag is None else self.w_tag.shape[1],
            num_levels=0 if self.w_diff is None else self.w_diff.shape[1],
        )

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        """Named tensors in the fixed checkpoint serialization order."""
        out = [("w_enc", self.w_enc), ("b_enc", self.b_enc)]
        if self.w_tag is not None:
            out += [("w_tag", self.w_tag), ("b_tag", self.b_tag)]
        if self.w_diff is not None:
            out += [("w_diff", self.w_diff), ("b_diff", self.b_diff)]
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(*(None if t is None else t.copy() for t in (
            self.w_enc, self.b_enc, self.w_tag, self.b_tag, self.w_diff, self.b_diff)))


def _glorot(seed: int, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return uniform_array(seed, fan_in * fan_out, -limit, limit).reshape(fan_in, fan_out)


def init_params(dims: ModelDims, seed: int) -> ModelParams:
    """Glorot-uniform matrices from per-tensor derived seeds, zero biases."""
    v, h, k, d = dims.num_features, dims.hidden, dims.num_tags, dims.num_levels
    return ModelParams(
        w_enc=_glorot(derive_seed(seed, "init", "w_enc"), v, h),
        b_enc=np.zeros(h),
        w_tag=_glorot(derive_seed(seed, "init", "w_tag"), h, k) if k else None,
        b_tag=np.zeros(k) if k else None,
        w_diff=_glorot(derive_seed(seed, "init", "w_diff"), h, d) if d else None,
        b_diff=np.zeros(d) if d else None,
    )


def forward(params: ModelParams, x: DocumentVector):
    """Single-sample forward pass: z = ReLU(x . W_enc + b_enc), then the
    affine heads.  Returns (z, tag_logits, diff_logits); an absent head's
    logits are None."""
    if x.dimension != params.w_enc.shape[0]:
        raise ValueError(
            f"input dimension {x.dimension} != encoder rows {params.w_enc.shape[0]}"
        )
    h = params.w_enc[x.indices].T @ x.values + params.b_enc
    z = np.maximum(h, 0.0)
    tag_logits = z @ params.w_tag + params.b_tag if params.w_tag is not None else None
    diff_logits = z @ params.w_diff + params.b_diff if params.w_diff is not None else None
    return z, tag_logits, diff_logits


def _forward_batch(params: ModelParams, x_batch: sparse.csr_matrix):
    h_pre = x_batch @ params.w_enc + params.b_enc
    z = np.maximum(h_pre, 0.0)
    a_tag = z @ params.w_tag + params.b_tag if params.w_tag is not None else None
    a_diff = z @ params.w_diff + params.b_diff if params.w_diff is not None else None
    return h_pre, z, a_tag, a_diff


def bce_loss(tag_logits, y) -> float:
    """Binary cross-entropy averaged over labels then over the batch,
    in the stable logit form max(a,0) - a*y + ln(1 + exp(-|a|))."""
    a = np.atleast_2d(np.asarray(tag_logits, dtype=np.float64))
    t = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if a.shape != t.shape:
        raise ValueError(f"logit shape {a.shape} != target shape {t.shape}")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise DataError("tag targets must be binary 0/1")
    per_elem = np.maximum(a, 0.0) - a * t + np.log1p(np.exp(-np.abs(a)))
    return float(np.mean(np.mean(per_elem, axis=1)))


def ce_loss(diff_logits, d_index) -> float:
    """Softmax cross-entropy via log-sum-exp, averaged over labeled
    samples only; -1 marks a missing target.  All-missing batches score 0."""
    a = np.atleast_2d(np.asarray(diff_logits, dtype=np.float64))
    d = np.atleast_1d(np.asarray(d_index, dtype=np.int64))
    if a.shape[0] != d.shape[0]:
        raise ValueError("batch sizes differ between logits and targets")
    if np.any(d >= a.shape[1]) or np.any(d < -1):
        raise DataError(f"difficulty index out of range [0, {a.shape[1]})")
    labeled = d >= 0
    if not np.any(labeled):
        return 0.0
    al = a[labeled]
    dl = d[labeled]
    lse = logsumexp(al, axis=1)
    return float(np.mean(lse - al[np.arange(len(dl)), dl]))


def joint_loss(l1: float, l2: float, lam: float) -> float:
    """l1 + lam * l2; with lam = 0 this is exactly l1."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0.0:
        return l1
    return l1 + lam * l2


@dataclass(frozen=True)
class Batch:
    """One training batch: CSR features, 0/1 tag matrix, difficulty
    indices with -1 for missing."""

    x: sparse.csr_matrix
    y: np.ndarray | None
    d: np.ndarray | None

    def __post_init__(self):
        n = self.x.shape[0]
        if self.y is not None and self.y.shape[0] != n:
            raise ValueError("tag target batch size mismatch")
        if self.d is not None and self.d.shape[0] != n:
            raise ValueError("difficulty target batch size mismatch")


def _losses(params: ModelParams, batch: Batch):
    h_pre, z, a_tag, a_diff = _forward_batch(params, batch.x)
    l1 = bce_loss(a_tag, batch.y) if a_tag is not None else None
    l2 = ce_loss(a_diff, batch.d) if a_diff is not None else None
    return h_pre, z, a_tag, a_diff, l1, l2


def batch_objective(params: ModelParams, batch: Batch, lam: float):
    """(objective, l1, l2) for one batch.  Multi-task models optimize
    l1 + lam*l2; single-head models optimize their own loss alone."""
    _, _, _, _, l1, l2 = _losses(params, batch)
    if l1 is not None and l2 is not None:
        return joint_loss(l1, l2, lam), l1, l2
    if l1 is not None:
        return l1, l1, None
    return l2, None, l2


def backward(params: ModelParams, batch: Batch, lam: float) -> dict[str, np.ndarray]:
    """Exact analytic gradients of the batch objective for every tensor.

    The lam = 0 path never touches the difficulty head's backward flow,
    so the encoder gradient is bit-identical to a tag-only model's.
    """
    h_pre, z, a_tag, a_diff = _forward_batch(params, batch.x)
    n = batch.x.shape[0]
    grads: dict[str, np.ndarray] = {}
    delta_z = np.zeros_like(z)

    if a_tag is not None:
        k = a_tag.shape[1]
        g_tag = (expit(a_tag) - batch.y) / (n * k)
        grads["w_tag"] = z.T @ g_tag
        grads["b_tag"] = g_tag.sum(axis=0)
        delta_z += g_tag @ params.w_tag.T

    if a_diff is not None:
        scale = 1.0 if a_tag is None else lam
        labeled = batch.d >= 0
        m = int(np.sum(labeled))
        g_diff = np.zeros_like(a_diff)
        if m > 0 and scale != 0.0:
            al = a_diff[labeled]
            soft = np.exp(al - logsumexp(al, axis=1, keepdims=True))
            soft[np.arange(m), batch.d[labeled]] -= 1.0
            g_diff[labeled] = scale * soft / m
            grads["w_diff"] = z.T @ g_diff
            grads["b_diff"] = g_diff.sum(axis=0)
            delta_z += g_diff @ params.w_diff.T
        else:
            grads["w_diff"] = np.zeros_like(params.w_diff)
            grads["b_diff"] = np.zeros_like(params.b_diff)

    delta_h = delta_z * (h_pre > 0.0)
    grads["w_enc"] = (batch.x.T @ delta_h).astype(np.float64, copy=False)
    grads["b_enc"] = delta_h.sum(axis=0)
    return grads


class AdamState:
    """Per-tensor first/second moment accumulators with bias correction."""

    def __init__(self, params: ModelParams, lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(t) for name, t in params.tensors()}
        self.v = {name: np.zeros_like(t) for name, t in params.tensors()}

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, tensor in params.tensors():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            tensor -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    lam: float | None = 10.0
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 20
    seed: int = 42
    hidden: int = 256
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int | None = None
    single_task: str | None = None  # None | "tag" | "difficulty"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1 or self.hidden < 1:
            raise ValueError("batch_size, epochs, and hidden must be >= 1")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.single_task not in (None, "tag", "difficulty"):
            raise ValueError(f"unknown single_task mode {self.single_task!r}")

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "hidden": self.hidden,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "patience": self.patience,
            "single_task": self.single_task,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        return cls(
            lam=obj.get("lambda"),
            learning_rate=obj["learning_rate"],
            batch_size=obj["batch_size"],
            epochs=obj["epochs"],
            seed=obj["seed"],
            hidden=obj["hidden"],
            beta1=obj.get("beta1", 0.9),
            beta2=obj.get("beta2", 0.999),
            eps=obj.get("eps", 1e-8),
            patience=obj.get("patience"),
            single_task=obj.get("single_task"),
        )


@dataclass
class Checkpoint:
    """Self-contained prediction artifact: params, config, vectorizer,
    vocabulary, scale, tokenizer settings, and the training log."""

    arch: str  # "two_head" | "baseline"
    params: "ModelParams | BaselineParams"
    config: dict
    vectorizer: Vectorizer
    vocab: TagVocabulary | None
    scale: DifficultyScale
    tokenizer: TokenizerConfig
    training_log: list[dict] = field(default_factory=list)


def _vectorize_dataset(dataset: Dataset, vectorizer: Vectorizer,
                       tokenizer: TokenizerConfig) -> list[DocumentVector]:
    return [vectorize(vectorizer, tokenize(r.statement, tokenizer)) for r in dataset.records]


def _epoch_order(seed: int, epoch: int, n: int) -> list[int]:
    order = list(range(n))
    Xoshiro256StarStar(derive_seed(seed, "epoch", str(epoch))).shuffle(order)
    return order


def train(
    dataset: Dataset,
    vectorizer: Vectorizer,
    config: TrainConfig,
    tokenizer: TokenizerConfig = TokenizerConfig(),
) -> Checkpoint:
    """Seeded mini-batch Adam training; fully deterministic given config.

    The training log records per-epoch l1, l2, and the objective.  A
    non-finite batch loss aborts with the epoch and batch in the message.
    """
    if len(dataset) == 0:
        raise DataError("training set is empty")
    vectors = _vectorize_dataset(dataset, vectorizer, tokenizer)
    x_all = stack_vectors(vectors)
    want_tag = config.single_task in (None, "tag")
    want_diff = config.single_task in (None, "difficulty")
    dims = ModelDims(
        num_features=vectorizer.dimension,
        hidden=config.hidden,
        num_tags=len(dataset.vocab) if want_tag else 0,
        num_levels=dataset.scale.num_levels if want_diff else 0,
    )
    params = init_params(dims, config.seed)
    multi_task = want_tag and want_diff
    lam = config.lam if multi_task else None
    if multi_task and lam is None:
        raise ValueError("multi-task training requires a lambda")
    if want_diff and not want_tag and np.all(dataset.difficulty_indices < 0):
        raise DataError("difficulty-only training needs at least one rated record")

    y_all = dataset.labels
    d_all = dataset.difficulty_indices
    opt = AdamState(params, config.learning_rate, config.beta1, config.beta2, config.eps)
    log: list[dict] = []
    best = np.inf
    stale = 0
    n = len(dataset)
    for epoch in range(1, config.epochs + 1):
        order = _epoch_order(config.seed, epoch, n)
        l1_sum = 0.0
        l2_sum = 0.0
        l2_count = 0
        for batch_no, start in enumerate(range(0, n, config.batch_size), start=1):
            idx = order[start : start + config.batch_size]
            batch = Batch(
                x=x_all[idx],
                y=y_all[idx] if want_tag else None,
                d=d_all[idx] if want_diff else None,
            )
            objective, l1, l2 = batch_objective(params, batch, lam if lam is not None else 0.0)
            if not np.isfinite(objective):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}"
                )
            grads = backward(params, batch, lam if lam is not None else 0.0)
            opt.step(params, grads)
            if l1 is not None:
                l1_sum += l1 * len(idx)
            if l2 is not None:
                labeled = int(np.sum(batch.d >= 0))
                l2_sum += l2 * labeled
                l2_count += labeled
        epoch_l1 = l1_sum / n if want_tag else None
        epoch_l2 = (l2_sum / l2_count) if (want_diff and l2_count) else (0.0 if want_diff else None)
        if multi_task:
            epoch_obj = joint_loss(epoch_l1, epoch_l2, lam)
        else:
            epoch_obj = epoch_l1 if want_tag else epoch_l2
        log.append({"epoch": epoch, "l1": epoch_l1, "l2": epoch_l2, "joint": epoch_obj})
        if config.patience is not None:
            if epoch_obj < best - 1e-12:
                best = epoch_obj
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break

    cfg = config.to_dict()
    if not multi_task:
        cfg["lambda"] = None
    return Checkpoint(
        arch="two_head",
        params=params,
        config=cfg,
        vectorizer=vectorizer,
        vocab=dataset.vocab if want_tag else None,
        scale=dataset.scale,
        tokenizer=tokenizer,
        training_log=log,
    )


# ---------------------------------------------------------------------------
# gradient checking

def _random_batch(dims: ModelDims, seed: int, n: int = 3,
                  with_missing: bool = True) -> Batch:
    """Small dense-ish random batch for gradient checks."""
    v = dims.num_features
    gen = Xoshiro256StarStar(derive_seed(seed, "gradcheck", "batch"))
    rows = []
    for i in range(n):
        nnz = 1 + gen.next_below(max(v - 1, 1))
        idx = sorted(set(gen.next_below(v) for _ in range(nnz))) or [0]
        vals = uniform_array(derive_seed(seed, "gradcheck", f"x{i}"), len(idx), -1.0, 1.0)
        rows.append(DocumentVector(
            indices=np.asarray(idx, dtype=np.int64),
            values=vals,
            dimension=v,
        ))
    x = stack_vectors(rows)
    y = None
    if dims.num_tags:
        bits = uniform_array(derive_seed(seed, "gradcheck", "y"), n * dims.num_tags, 0.0, 1.0)
        y = (bits.reshape(n, dims.num_tags) > 0.5).astype(np.float64)
    d = None
    if dims.num_levels:
        d = np.asarray(
            [gen.next_below(dims.num_levels) for _ in range(n)], dtype=np.int64
        )
        if with_missing and n > 1:
            d[0] = -1
    return Batch(x=x, y=y, d=d)


def _flatten(tensors: list[tuple[str, np.ndarray]]) -> np.ndarray:
    return np.concatenate([t.ravel() for _, t in tensors])


def _unflatten(flat: np.ndarray, template: ModelParams) -> ModelParams:
    out = template.copy()
    pos = 0
    for _, tensor in out.tensors():
        tensor.flat[:] = flat[pos : pos + tensor.size]
        pos += tensor.size
    return out


def grad_check(
    dims: ModelDims,
    seed: int,
    eps: float = 1e-5,
    lam: float = 10.0,
    zero_params: bool = False,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per coordinate is |a - n| / max(1e-8, |a| + |n|).
    Encoder coordinates feeding a hidden unit whose pre-activation is
    exactly 0 for some sample sit on the ReLU kink, where central
    differences are invalid; those coordinates are skipped.
    """
    params = init_params(dims, seed)
    if zero_params:
        for _, tensor in params.tensors():
            tensor[:] = 0.0
    batch = _random_batch(dims, seed)
    grads = backward(params, batch, lam)
    analytic = np.concatenate([grads[name].ravel() for name, _ in params.tensors()])

    h_pre = (batch.x @ params.w_enc + params.b_enc)
    kink_units = np.any(h_pre == 0.0, axis=0)

    skip = np.zeros(analytic.size, dtype=bool)
    pos = 0
    for name, tensor in params.tensors():
        if name == "w_enc":
            block = np.broadcast_to(kink_units, tensor.shape)
            skip[pos : pos + tensor.size] = block.ravel()
        elif name == "b_enc":
            skip[pos : pos + tensor.size] = kink_units
        pos += tensor.size

    theta = _flatten(params.tensors())
    numeric = np.zeros_like(analytic)
    for i in range(theta.size):
        if skip[i]:
            continue
        for sign in (+1.0, -1.0):
            probe = theta.copy()
            probe[i] += sign * eps
            obj, _, _ = batch_objective(_unflatten(probe, params), batch, lam)
            numeric[i] += sign * obj
        numeric[i] /= 2.0 * eps

    keep = ~skip
    denom = np.maximum(1e-8, np.abs(analytic[keep]) + np.abs(numeric[keep]))
    return float(np.max(np.abs(analytic[keep] - numeric[keep]) / denom))


# ---------------------------------------------------------------------------
# prediction

@dataclass
class Prediction:
    tags: list[dict] | None
    tag_probabilities: dict[str, float] | None
    difficulty_rating: int | None
    difficulty_probabilities: dict[int, float] | None

    def to_dict(self) -> dict:
        out: dict = {}
        if self.tags is not None:
            out["tags"] = self.tags
        if self.difficulty_rating is not None:
            out["difficulty"] = {
                "rating": self.difficulty_rating,
                "prob_dist": {str(r): p for r, p in self.difficulty_probabilities.items()},
            }
        return out


def predict(checkpoint: Checkpoint, statement: str, threshold: float = 0.5) -> Prediction:
    """Tags with sigmoid probability >= threshold plus the argmax
    difficulty level (ties resolve to the lowest index).  Probabilities
    are rounded to 6 decimals for reporting.  A threshold above 1 is
    allowed and selects nothing."""
    if threshold < 0.0:
        raise ValueError("threshold must be >= 0")
    tokens = tokenize(statement, checkpoint.tokenizer)
    vec = vectorize(checkpoint.vectorizer, tokens)
    if checkpoint.arch == "baseline":
        tag_logits, diff_logits = baseline_forward(checkpoint.params, vec)
    else:
        _, tag_logits, diff_logits = forward(checkpoint.params, vec)

    tags = tag_probs = None
    if tag_logits is not None:
        probs = expit(tag_logits)
        tag_probs = {
            name: round(float(p), 6)
            for name, p in zip(checkpoint.vocab.labels, probs)
        }
        tags = [
            {"name": name, "prob": tag_probs[name]}
            for name, p in zip(checkpoint.vocab.labels, probs)
            if p >= threshold
        ]

    rating = diff_probs = None
    if diff_logits is not None:
        log_p = diff_logits - logsumexp(diff_logits)
        probs = np.exp(log_p)
        best = int(np.argmax(diff_logits))
        rating = checkpoint.scale.to_rating(best)
        diff_probs = {
            checkpoint.scale.to_rating(i): round(float(p), 6)
            for i, p in enumerate(probs)
        }
    return Prediction(
        tags=tags,
        tag_probabilities=tag_probs,
        difficulty_rating=rating,
        difficulty_probabilities=diff_probs,
    )


# ---------------------------------------------------------------------------
# linear one-vs-rest baseline

@dataclass
class BaselineParams:
    """Direct linear maps from features to each task (no shared encoder)."""

    w_tag: np.ndarray | None    # (V, K)
    b_tag: np.ndarray | None
    w_diff: np.ndarray | None   # (V, D)
    b_diff: np.ndarray | None

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        out = []
        if self.w_tag is not None:
            out += [("w_tag", self.w_tag), ("b_tag", self.b_tag)]
        if self.w_diff is not None:
            out += [("w_diff", self.w_diff), ("b_diff", self.b_diff)]
        return out


@dataclass(frozen=True)
class BaselineConfig:
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 20
    seed: int = 42

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
        }


def baseline_forward(params: BaselineParams, x: DocumentVector):
    tag_logits = diff_logits = None
    if params.w_tag is not None:
        tag_logits = params.w_tag[x.indices].T @ x.values + params.b_tag
    if params.w_diff is not None:
        diff_logits = params.w_diff[x.indices].T @ x.values + params.b_diff
    return tag_logits, diff_logits


def baseline_ovr_train(
    dataset: Dataset,
    vectorizer: Vectorizer,
    config: BaselineConfig,
    tokenizer: TokenizerConfig = TokenizerConfig(),
) -> Checkpoint:
    """K independent logistic regressions for tags plus one D-class
    softmax regression for difficulty, trained with the same seeded Adam
    machinery.  The baseline has no lambda: the two tasks share no
    parameters, so a TrainConfig (which carries one) is rejected."""
    if isinstance(config, TrainConfig) or hasattr(config, "lam"):
        raise ValueError("the baseline has no lambda; use BaselineConfig")
    if len(dataset) == 0:
        raise DataError("training set is empty")
    vectors = _vectorize_dataset(dataset, vectorizer, tokenizer)
    x_all = stack_vectors(vectors)
    v = vectorizer.dimension
    k = len(dataset.vocab)
    d = dataset.scale.num_levels
    params = BaselineParams(
        w_tag=_glorot(derive_seed(config.seed, "init", "baseline_w_tag"), v, k),
        b_tag=np.zeros(k),
        w_diff=_glorot(derive_seed(config.seed, "init", "baseline_w_diff"), v, d),
        b_diff=np.zeros(d),
    )
    y_all = dataset.labels
    d_all = dataset.difficulty_indices
    opt = AdamState(params, config.learning_rate, 0.9, 0.999, 1e-8)
    log: list[dict] = []
    n = len(dataset)
    for epoch in range(1, config.epochs + 1):
        order = _epoch_order(config.seed, epoch, n)
        l1_sum = 0.0
        l2_sum = 0.0
        l2_count = 0
        for batch_no, start in enumerate(range(0, n, config.batch_size), start=1):
            idx = order[start : start + config.batch_size]
            xb = x_all[idx]
            yb = y_all[idx]
            db = d_all[idx]
            a_tag = xb @ params.w_tag + params.b_tag
            a_diff = xb @ params.w_diff + params.b_diff
            l1 = bce_loss(a_tag, yb)
            l2 = ce_loss(a_diff, db)
            if not np.isfinite(l1 + l2):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}"
                )
            nb = len(idx)
            g_tag = (expit(a_tag) - yb) / (nb * k)
            grads = {
                "w_tag": (xb.T @ g_tag).astype(np.float64, copy=False),
                "b_tag": g_tag.sum(axis=0),
            }
            labeled = db >= 0
            m = int(np.sum(labeled))
            g_diff = np.zeros_like(a_diff)
            if m > 0:
                al = a_diff[labeled]
                soft = np.exp(al - logsumexp(al, axis=1, keepdims=True))
                soft[np.arange(m), db[labeled]] -= 1.0
                g_diff[labeled] = soft / m
            grads["w_diff"] = (xb.T @ g_diff).astype(np.float64, copy=False)
            grads["b_diff"] = g_diff.sum(axis=0)
            opt.step(params, grads)
            l1_sum += l1 * nb
            l2_sum += l2 * m
            l2_count += m
        log.append({
            "epoch": epoch,
            "l1": l1_sum / n,
            "l2": (l2_sum / l2_count) if l2_count else 0.0,
            "joint": None,
        })
    cfg = config.to_dict()
    return Checkpoint(
        arch="baseline",
        params=params,
        config=cfg,
        vectorizer=vectorizer,
        vocab=dataset.vocab,
        scale=dataset.scale,
        tokenizer=tokenizer,
        training_log=log,
    )


# ---------------------------------------------------------------------------
# checkpoint persistence

def save_checkpoint(checkpoint: Checkpoint, out_dir: str | Path) -> None:
    """Write params.json + params.bin (+ vectorizer.json) into a directory.

    params.bin concatenates the tensors row-major as little-endian IEEE-754
    float64, in the order declared by params.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tensors = checkpoint.params.tensors()
    if checkpoint.arch == "baseline":
        dims = {"num_features": checkpoint.vectorizer.dimension}
    else:
        d = checkpoint.params.dims
        dims = {
            "num_features": d.num_features,
            "hidden": d.hidden,
            "num_tags": d.num_tags,
            "num_levels": d.num_levels,
        }
    meta = {
        "format_version": 1,
        "arch": checkpoint.arch,
        "dims": dims,
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in tensors],
        "optimizer_state": False,
        "config": checkpoint.config,
        "vocab": list(checkpoint.vocab.labels) if checkpoint.vocab else None,
        "scale": {
            "min_rating": checkpoint.scale.min_rating,
            "max_rating": checkpoint.scale.max_rating,
            "step": checkpoint.scale.step,
        },
        "tokenizer": {
            "lowercase": checkpoint.tokenizer.lowercase,
            "max_tokens": checkpoint.tokenizer.max_tokens,
        },
        "vectorizer_path": VECTORIZER_JSON,
        "training_log": checkpoint.training_log,
    }
    (out / CHECKPOINT_JSON).write_text(json.dumps(meta, indent=2), encoding="utf-8")
    with open(out / CHECKPOINT_BIN, "wb") as fh:
        for _, tensor in tensors:
            fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    checkpoint.vectorizer.save(out / VECTORIZER_JSON)


def load_checkpoint(ckpt_dir: str | Path) -> Checkpoint:
    ckpt = Path(ckpt_dir)
    meta = json.loads((ckpt / CHECKPOINT_JSON).read_text(encoding="utf-8"))
    raw = (ckpt / CHECKPOINT_BIN).read_bytes()
    arrays: dict[str, np.ndarray] = {}
    pos = 0
    for spec in meta["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).astype(np.float64)
        arrays[spec["name"]] = arr.reshape(shape)
        pos += count * 8
    if pos != len(raw):
        raise DataError(f"params.bin has {len(raw)} bytes, expected {pos}")
    if meta["arch"] == "baseline":
        params: ModelParams | BaselineParams = BaselineParams(
            w_tag=arrays.get("w_tag"), b_tag=arrays.get("b_tag"),
            w_diff=arrays.get("w_diff"), b_diff=arrays.get("b_diff"),
        )
    else:
        params = ModelParams(
            w_enc=arrays["w_enc"], b_enc=arrays["b_enc"],
            w_tag=arrays.get("w_tag"), b_tag=arrays.get("b_tag"),
            w_diff=arrays.get("w_diff"), b_diff=arrays.get("b_diff"),
        )
    scale = DifficultyScale(
        min_rating=meta["scale"]["min_rating"],
        max_rating=meta["scale"]["max_rating"],
        step=meta["scale"]["step"],
    )
    return Checkpoint(
        arch=meta["arch"],
        params=params,
        config=meta["config"],
        vectorizer=Vectorizer.load(ckpt / meta["vectorizer_path"]),
        vocab=TagVocabulary(tuple(meta["vocab"])) if meta["vocab"] else None,
        scale=scale,
        tokenizer=TokenizerConfig(
            lowercase=meta["tokenizer"]["lowercase"],
            max_tokens=meta["tokenizer"]["max_tokens"],
        ),
        training_log=meta["training_log"],
    )
