"""Task heads and fine-tuning for ADL recognition and next-k event forecasting.

Both heads consume the mean-pooled window representation. Next-k prediction
is a bag-of-events problem: the model scores event types (sensor, status) and
regresses expected counts, which are decoded to an integer multiset of total
k by largest-remainder apportionment.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .autodiff import Tensor, log_softmax, no_grad, softplus, tensor_mean, tensor_sum
from .events import EventStream
from .model import CONTEXT_GROUP, EVENT_GROUP, Model
from .nn import NumericError, ParamGroup, adam_step, group_grads, init_adam, init_linear, linear
from .segmentation import Window

ADL_GROUP = "adl_head"
NEXTK_GROUP = "nextk_head"


class FinetuneStrategy(str, Enum):
    """How much of the network the downstream task may move."""

    FROZEN_FEATURES = "frozen_features"  # realized as head-only training
    HEAD_ONLY = "head_only"
    FULL = "full"


@dataclass(frozen=True)
class EventMultiset:
    """Counts over (sensor_id, status) pairs."""

    counts: tuple[tuple[tuple[str, str], int], ...]

    @staticmethod
    def from_dict(mapping: dict[tuple[str, str], int]) -> "EventMultiset":
        for key, count in mapping.items():
            if count < 0:
                raise ValueError(f"multiset count for {key} must be nonnegative")
        return EventMultiset(tuple(sorted((k, int(v))
                                          for k, v in mapping.items() if v > 0)))

    @staticmethod
    def from_events(events) -> "EventMultiset":
        counts: dict[tuple[str, str], int] = {}
        for e in events:
            key = (e.sensor.id, e.status)
            counts[key] = counts.get(key, 0) + 1
        return EventMultiset.from_dict(counts)

    def as_dict(self) -> dict[tuple[str, str], int]:
        return dict(self.counts)

    @property
    def total(self) -> int:
        return sum(c for _, c in self.counts)

    def intersection_size(self, other: "EventMultiset") -> int:
        mine, theirs = self.as_dict(), other.as_dict()
        return sum(min(c, theirs.get(k, 0)) for k, c in mine.items())


@dataclass
class AdlHead:
    classes: tuple[str, ...]
    params: ParamGroup

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("ADL head needs at least 2 classes")


@dataclass
class NextKHead:
    vocabulary: tuple[tuple[str, str], ...]  # (sensor_id, status) event types
    params: ParamGroup

    def __post_init__(self):
        if not self.vocabulary:
            raise ValueError("next-k head needs a nonempty event-type vocabulary")


def init_adl_head(classes: Sequence[str], d: int, seed: int = 0) -> AdlHead:
    group = ParamGroup(ADL_GROUP)
    init_linear(group, "out", d, len(classes), np.random.default_rng([seed, 0xAD]))
    return AdlHead(tuple(classes), group)


def init_nextk_head(vocabulary: Sequence[tuple[str, str]], d: int,
                    seed: int = 0) -> NextKHead:
    group = ParamGroup(NEXTK_GROUP)
    rng = np.random.default_rng([seed, 0x9E])
    init_linear(group, "types", d, len(vocabulary), rng)
    init_linear(group, "counts", d, len(vocabulary), rng)
    return NextKHead(tuple((s, st) for s, st in vocabulary), group)


# -- prediction ----------------------------------------------------------------


def adl_logits(pooled: Tensor, head: AdlHead) -> Tensor:
    return linear(pooled, head.params["out.w"], head.params["out.b"])


def adl_predict(pooled, head: AdlHead) -> tuple[np.ndarray, int]:
    """(logits, argmax class index); ties break toward the lowest index."""
    pooled_t = pooled if isinstance(pooled, Tensor) else Tensor(pooled)
    if pooled_t.ndim == 1:
        pooled_t = Tensor(pooled_t.data[None, :])
    logits = adl_logits(pooled_t, head).data[0]
    return logits, int(np.argmax(logits))


def expected_counts(pooled: Tensor, head: NextKHead) -> Tensor:
    """Nonnegative expected per-type counts (softplus of the counts head)."""
    return softplus(linear(pooled, head.params["counts.w"], head.params["counts.b"]))


def largest_remainder(expected: np.ndarray, k: int) -> np.ndarray:
    """Integer apportionment of k items proportional to nonnegative scores.

    Floors first; the remaining mass goes to the largest fractional
    remainders, ties broken by lower index. All-zero scores fall back to
    uniform apportionment.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    expected = np.asarray(expected, dtype=np.float64)
    if expected.ndim != 1:
        raise ValueError("expected counts must be a vector")
    total = expected.sum()
    if total <= 0.0:
        expected = np.ones_like(expected)
        total = expected.sum()
    scaled = expected * (k / total)
    floors = np.floor(scaled).astype(np.int64)
    remaining = k - int(floors.sum())
    if remaining > 0:
        remainders = scaled - floors
        # sort by (-remainder, index): stable argsort on negated remainders
        order = np.argsort(-remainders, kind="stable")
        floors[order[:remaining]] += 1
    return floors


def nextk_predict(pooled, head: NextKHead, k: int) -> EventMultiset:
    """Decode an exact-total-k multiset from the counts head."""
    pooled_t = pooled if isinstance(pooled, Tensor) else Tensor(pooled)
    if pooled_t.ndim == 1:
        pooled_t = Tensor(pooled_t.data[None, :])
    scores = expected_counts(pooled_t, head).data[0]
    apportioned = largest_remainder(scores, k)
    counts = {etype: int(c) for etype, c in zip(head.vocabulary, apportioned) if c > 0}
    return EventMultiset.from_dict(counts)


def nextk_target(stream: EventStream, window_end_index: int, k: int) -> Optional[EventMultiset]:
    """Multiset of the k events following the window's last event.

    Returns None when fewer than k events follow (the window is excluded
    from next-k training and evaluation).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    following = stream.events[window_end_index + 1: window_end_index + 1 + k]
    if len(following) < k:
        return None
    return EventMultiset.from_events(following)


# -- fine-tuning ----------------------------------------------------------------


@dataclass
class FinetuneSettings:
    strategy: FinetuneStrategy = FinetuneStrategy.FULL
    epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-3
    count_loss_weight: float = 1.0  # lambda on the count MSE term
    seed: int = 0


@dataclass
class TrainItem:
    """One supervised example: a window plus its task target."""

    window: Window
    label: Optional[str] = None
    target: Optional[EventMultiset] = None


def adl_loss(pooled: Tensor, label_ids: np.ndarray, head: AdlHead) -> Tensor:
    logp = log_softmax(adl_logits(pooled, head), axis=-1)
    picked = logp[(np.arange(len(label_ids)), label_ids)]
    return -(picked.mean())


def nextk_loss(pooled: Tensor, target_counts: np.ndarray, head: NextKHead,
               count_loss_weight: float) -> Tensor:
    """Type cross-entropy against normalized counts plus count MSE."""
    k_totals = target_counts.sum(axis=1, keepdims=True)
    type_dist = target_counts / np.maximum(k_totals, 1.0)
    logp = log_softmax(linear(pooled, head.params["types.w"], head.params["types.b"]),
                       axis=-1)
    ce = -(tensor_sum(logp * Tensor(type_dist), axis=-1).mean())
    predicted = expected_counts(pooled, head)
    mse = tensor_mean((predicted - Tensor(target_counts)) * (predicted - Tensor(target_counts)))
    return ce + mse * count_loss_weight


def finetune(model: Model, train_set: Sequence[TrainItem], task: str,
             settings: FinetuneSettings,
             head: Optional[AdlHead | NextKHead] = None,
             classes: Optional[Sequence[str]] = None,
             vocabulary: Optional[Sequence[tuple[str, str]]] = None,
             context_enabled: Optional[bool] = None):
    """Train a task head (and optionally the backbone) on labeled windows.

    Returns the trained head. The model's encoder groups are updated in place
    when the strategy is FULL; both frozen strategies leave them bit-identical.
    """
    if not train_set:
        raise ValueError("empty training set")
    if task == "adl":
        if head is None:
            if classes is None:
                raise ValueError("ADL fine-tuning needs the class list")
            head = init_adl_head(classes, model.config.d, seed=settings.seed)
        class_index = {c: i for i, c in enumerate(head.classes)}
        for item in train_set:
            if item.label is None or item.label not in class_index:
                raise ValueError(f"window label {item.label!r} not in class list")
    elif task == "nextk":
        if head is None:
            if vocabulary is None:
                raise ValueError("next-k fine-tuning needs the event-type vocabulary")
            head = init_nextk_head(vocabulary, model.config.d, seed=settings.seed)
        type_index = {t: i for i, t in enumerate(head.vocabulary)}
        for item in train_set:
            if item.target is None:
                raise ValueError("next-k fine-tuning needs a target multiset per window")
            for etype in item.target.as_dict():
                if etype not in type_index:
                    raise ValueError(f"event type {etype} not in head vocabulary")
    else:
        raise ValueError(f"unknown task {task!r}")

    backbone_frozen = settings.strategy in (FinetuneStrategy.FROZEN_FEATURES,
                                            FinetuneStrategy.HEAD_ONLY)
    model.set_frozen(EVENT_GROUP, backbone_frozen)
    model.set_frozen(CONTEXT_GROUP, backbone_frozen)
    model.groups[head.params.name] = head.params
    states = {name: init_adam(g.tensors, lr=settings.lr)
              for name, g in model.groups.items() if not g.frozen}

    rng = np.random.default_rng([settings.seed, 0xF1])
    items = list(train_set)
    rep_cache: dict[int, np.ndarray] = {}
    for epoch in range(settings.epochs):
        order = rng.permutation(len(items))
        for lo in range(0, len(items), settings.batch_size):
            chunk = [items[i] for i in order[lo:lo + settings.batch_size]]
            windows = [item.window for item in chunk]
            if backbone_frozen:
                missing = [i for i, item in enumerate(chunk) if id(item) not in rep_cache]
                if missing:
                    with no_grad():
                        _, pooled_new = model.window_tensors(
                            [windows[i] for i in missing],
                            context_enabled=context_enabled)
                    for j, i in enumerate(missing):
                        rep_cache[id(chunk[i])] = pooled_new.data[j]
                pooled = Tensor(np.stack([rep_cache[id(item)] for item in chunk]))
            else:
                _, pooled = model.window_tensors(windows,
                                                 context_enabled=context_enabled)
            if task == "adl":
                ids = np.array([class_index[item.label] for item in chunk])
                loss = adl_loss(pooled, ids, head)
            else:
                targets = np.stack([_target_vector(item.target, type_index)
                                    for item in chunk])
                loss = nextk_loss(pooled, targets, head, settings.count_loss_weight)
            if not np.isfinite(loss.data).all():
                raise NumericError(f"non-finite fine-tuning loss at epoch {epoch}")
            loss.backward()
            for name, group in model.groups.items():
                if group.frozen:
                    group.zero_grad()
                    continue
                adam_step(group.tensors, group_grads(group), states[name])
                group.zero_grad()
    return head


def _target_vector(target: EventMultiset, type_index: dict) -> np.ndarray:
    vec = np.zeros(len(type_index))
    for etype, count in target.as_dict().items():
        vec[type_index[etype]] = count
    return vec
