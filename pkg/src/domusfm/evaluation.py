"""Metrics and the leave-one-dataset-out evaluation harness.

Cross-validation folds are contiguous blocks of the held-out stream, and any
training window sharing events with the test block is purged, so the heavy
window overlap cannot leak test events into training.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import no_grad
from .downstream import (
    AdlHead,
    EventMultiset,
    FinetuneSettings,
    NextKHead,
    TrainItem,
    adl_predict,
    finetune,
    nextk_predict,
    nextk_target,
)
from .event_encoder import ModelConfig
from .ingest import Dataset
from .model import Model
from .pretraining import PretrainConfig, pretrain
from .segmentation import Window, segment_events


@dataclass(frozen=True)
class EvalProtocol:
    held_out: str
    train_pcts: tuple = (5, 10, 15, 30)
    folds: int = 5
    k_values: tuple = (10, 30)
    seeds: tuple = (0,)

    def __post_init__(self):
        for pct in self.train_pcts:
            if not 0 < pct <= 100:
                raise ValueError(f"train percentage {pct} outside (0, 100]")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        for k in self.k_values:
            if k < 1:
                raise ValueError("k values must be positive")


@dataclass
class MetricRow:
    dataset: str
    task: str
    pct: float
    fold: int
    seed: int
    metric: str
    value: float


@dataclass
class MetricReport:
    """Per-(fold, seed) metric rows; aggregates are means and use fold=seed=-1."""

    rows: list[MetricRow] = field(default_factory=list)

    def add(self, **kwargs):
        self.rows.append(MetricRow(**kwargs))

    def aggregate(self) -> list[MetricRow]:
        groups: dict[tuple, list[float]] = {}
        for r in self.rows:
            groups.setdefault((r.dataset, r.task, r.pct, r.metric), []).append(r.value)
        return [MetricRow(ds, task, pct, -1, -1, metric, float(np.mean(vals)))
                for (ds, task, pct, metric), vals in sorted(groups.items())]

    def mean(self, task: str, metric: str, pct: Optional[float] = None) -> float:
        vals = [r.value for r in self.rows
                if r.task == task and r.metric == metric
                and (pct is None or r.pct == pct)]
        if not vals:
            raise KeyError(f"no rows for task={task!r} metric={metric!r} pct={pct}")
        return float(np.mean(vals))

    def to_csv(self) -> str:
        lines = ["dataset,task,pct,fold,seed,metric,value"]
        for r in self.rows + self.aggregate():
            lines.append(f"{r.dataset},{r.task},{r.pct:g},{r.fold},{r.seed},"
                         f"{r.metric},{r.value:.6f}")
        return "\n".join(lines) + "\n"


# -- metrics -------------------------------------------------------------------


def weighted_f1(predictions: Sequence, labels: Sequence, classes: Sequence) -> float:
    """Support-weighted mean of per-class F1 scores.

    Classes absent from the true labels carry zero weight; a class with zero
    precision and recall contributes F1 = 0.
    """
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have equal length")
    if not labels:
        raise ValueError("cannot score an empty label set")
    tp = {c: 0 for c in classes}
    fp = {c: 0 for c in classes}
    fn = {c: 0 for c in classes}
    for pred, true in zip(predictions, labels):
        if pred == true:
            tp[true] += 1
        else:
            fp[pred] += 1
            fn[true] += 1
    total = 0
    weighted = 0.0
    for c in classes:
        support = tp[c] + fn[c]
        if support == 0:
            continue
        precision = tp[c] / (tp[c] + fp[c]) if tp[c] + fp[c] else 0.0
        recall = tp[c] / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        weighted += support * f1
        total += support
    return weighted / total


def per_class_prf(predictions: Sequence, labels: Sequence,
                  classes: Sequence) -> dict[str, tuple[float, float, float]]:
    """(precision, recall, F1) per class with nonzero support."""
    tp = {c: 0 for c in classes}
    fp = {c: 0 for c in classes}
    fn = {c: 0 for c in classes}
    for pred, true in zip(predictions, labels):
        if pred == true:
            tp[true] += 1
        else:
            fp[pred] += 1
            fn[true] += 1
    out = {}
    for c in classes:
        support = tp[c] + fn[c]
        if support == 0:
            continue
        precision = tp[c] / (tp[c] + fp[c]) if tp[c] + fp[c] else 0.0
        recall = tp[c] / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[c] = (precision, recall, f1)
    return out


def multiset_prf(gt: EventMultiset, pred: EventMultiset) -> tuple[float, float, float]:
    """Precision, recall, F1 over multisets: |gt ∩ pred| with min-counts."""
    if gt.total == 0 or pred.total == 0:
        raise ValueError("multiset metrics need nonempty ground truth and prediction")
    inter = gt.intersection_size(pred)
    precision = inter / pred.total
    recall = inter / gt.total
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def subsample_training(windows: Sequence, pct: float, seed: int) -> list:
    """Uniform sample without replacement of round-half-up(pct% of n), min 1."""
    if not 0 < pct <= 100:
        raise ValueError(f"pct {pct} outside (0, 100]")
    n = len(windows)
    m = max(1, int(np.floor(pct / 100.0 * n + 0.5)))
    rng = np.random.default_rng([seed, 0x5A])
    picks = rng.choice(n, size=min(m, n), replace=False)
    return [windows[i] for i in picks]


def kfold_splits(windows: Sequence[Window], folds: int = 5) -> list[tuple[list, list]]:
    """Contiguous time-block folds with overlap purging.

    Windows are blocked in stream order; fold i tests block i, and training
    excludes every window that shares an event index with the test block.
    """
    n = len(windows)
    if n < folds:
        raise ValueError(f"{n} windows cannot form {folds} folds")
    ordered = sorted(windows, key=lambda w: w.start)
    sizes = [n // folds + (1 if i < n % folds else 0) for i in range(folds)]
    bounds = np.cumsum([0] + sizes)
    splits = []
    for i in range(folds):
        lo, hi = int(bounds[i]), int(bounds[i + 1])
        test = ordered[lo:hi]
        t_start, t_end = test[0].start, test[-1].end
        train = [w for j, w in enumerate(ordered)
                 if not lo <= j < hi and (w.end < t_start or w.start > t_end)]
        splits.append((train, test))
    return splits


def majority_baseline_f1(train_labels: Sequence[str], test_labels: Sequence[str],
                         classes: Sequence[str]) -> float:
    """Weighted F1 of always predicting the most frequent training label."""
    counts = {c: 0 for c in classes}
    for label in train_labels:
        counts[label] += 1
    majority = max(classes, key=lambda c: counts[c])
    return weighted_f1([majority] * len(test_labels), list(test_labels), classes)


# -- LODO harness ----------------------------------------------------------------


def eligible_adl_items(windows: Sequence[Window], classes: Sequence[str]) -> list[TrainItem]:
    allowed = set(classes)
    return [TrainItem(w, label=w.label) for w in windows if w.label in allowed]


def eligible_nextk_items(windows: Sequence[Window], dataset: Dataset,
                         k: int) -> list[TrainItem]:
    items = []
    for w in windows:
        target = nextk_target(dataset.stream, w.end, k)
        if target is not None:
            items.append(TrainItem(w, target=target))
    return items


def batched_pooled(model: Model, windows: Sequence[Window], chunk: int = 256,
                   context_enabled: Optional[bool] = None) -> np.ndarray:
    """Pooled representations for many windows, forward-only."""
    outputs = []
    with no_grad():
        for lo in range(0, len(windows), chunk):
            _, pooled = model.window_tensors(windows[lo:lo + chunk],
                                             context_enabled=context_enabled)
            outputs.append(pooled.data)
    return np.concatenate(outputs, axis=0)


def adl_predictions(model: Model, head: AdlHead, items: Sequence[TrainItem],
                    context_enabled: Optional[bool] = None) -> tuple[list, list]:
    pooled = batched_pooled(model, [it.window for it in items],
                            context_enabled=context_enabled)
    preds = [head.classes[adl_predict(pooled[i], head)[1]] for i in range(len(items))]
    return preds, [it.label for it in items]


def evaluate_adl(model: Model, head: AdlHead, items: Sequence[TrainItem],
                 context_enabled: Optional[bool] = None) -> float:
    preds, labels = adl_predictions(model, head, items, context_enabled)
    return weighted_f1(preds, labels, head.classes)


def evaluate_nextk(model: Model, head: NextKHead, items: Sequence[TrainItem], k: int,
                   context_enabled: Optional[bool] = None) -> tuple[float, float, float]:
    pooled = batched_pooled(model, [it.window for it in items],
                            context_enabled=context_enabled)
    scores = []
    for i, item in enumerate(items):
        pred = nextk_predict(pooled[i], head, k)
        scores.append(multiset_prf(item.target, pred))
    arr = np.asarray(scores)
    return tuple(float(x) for x in arr.mean(axis=0))


@dataclass
class LodoConfig:
    """Everything a LODO experiment needs besides the datasets."""

    model: ModelConfig
    protocol: EvalProtocol
    pretrain: PretrainConfig
    finetune: FinetuneSettings
    overlap: int = 29
    run_control: bool = True
    context_enabled: Optional[bool] = None  # None: follow model config


def lodo_run(datasets: Sequence[Dataset], config: LodoConfig,
             table=None, progress: Optional[Callable[[str], None]] = None) -> MetricReport:
    """Pretrain on all datasets but one; fine-tune and evaluate on the held-out.

    A random-init control with the identical architecture and fine-tuning
    (metric suffix ``_control``) runs alongside when ``run_control`` is set.
    """
    say = progress or (lambda msg: None)
    protocol = config.protocol
    names = [d.name for d in datasets]
    if protocol.held_out not in names:
        raise ValueError(f"held-out dataset {protocol.held_out!r} not among {names}")
    if len(datasets) < 2:
        raise ValueError("LODO needs at least 2 datasets")
    held_out = next(d for d in datasets if d.name == protocol.held_out)

    seg = {}
    for ds in datasets:
        seg[ds.name] = segment_events(ds.stream, config.model.n_window,
                                      config.overlap, dataset=ds.name)
    pretrain_windows = {name: ws for name, ws in seg.items()
                        if name != protocol.held_out and ws}
    if not pretrain_windows:
        raise ValueError("no pretraining windows outside the held-out dataset")

    splits = kfold_splits(seg[protocol.held_out], protocol.folds)
    report = MetricReport()

    for seed in protocol.seeds:
        pretrained = Model.init(config.model, table, seed=seed)
        for ds in datasets:
            pretrained.add_stream_features(ds.name, ds.stream.events)
        say(f"seed {seed}: pretraining on {sorted(pretrain_windows)}")
        pre_cfg = PretrainConfig(**{**config.pretrain.__dict__, "seed": seed})
        result = pretrain(pretrain_windows, pre_cfg, pretrained)
        if protocol.held_out in result.seen_datasets:
            raise AssertionError("held-out windows leaked into pretraining")

        control = Model.init(config.model, table, seed=seed + 104729) \
            if config.run_control else None
        if control is not None:
            control.features = pretrained.features

        variants = [("", pretrained)] + ([("_control", control)] if control else [])
        grid_run(report, variants, held_out, splits, config, seed, say)
    return report


def grid_run(report: MetricReport, variants: Sequence[tuple[str, Model]],
             held_out: Dataset, splits, config: LodoConfig, seed: int,
             progress: Optional[Callable[[str], None]] = None):
    """Fine-tune and evaluate every (pct, fold, variant) cell of the protocol."""
    say = progress or (lambda msg: None)
    for pct in config.protocol.train_pcts:
        for fold, (train_w, test_w) in enumerate(splits):
            for suffix, backbone in variants:
                _run_fold(report, backbone, held_out, train_w, test_w, pct, fold,
                          seed, suffix, config, say)


def _run_fold(report, backbone, held_out, train_w, test_w, pct, fold, seed,
              suffix, config, say):
    protocol = config.protocol
    classes = held_out.activity_set
    settings = FinetuneSettings(**{**config.finetune.__dict__,
                                   "seed": seed * 1009 + fold})
    sub_seed = seed * 9176 + fold * 31 + int(pct)

    train_adl = eligible_adl_items(train_w, classes)
    test_adl = eligible_adl_items(test_w, classes)
    if train_adl and test_adl and len(classes) >= 2:
        sub = subsample_training(train_adl, pct, sub_seed)
        model = backbone.copy()
        head = finetune(model, sub, "adl", settings, classes=classes,
                        context_enabled=config.context_enabled)
        preds, labels = adl_predictions(model, head, test_adl,
                                        context_enabled=config.context_enabled)
        score = weighted_f1(preds, labels, classes)
        report.add(dataset=held_out.name, task="adl", pct=pct, fold=fold, seed=seed,
                   metric=f"weighted_f1{suffix}", value=score)
        for cls, (p, r, f1) in per_class_prf(preds, labels, classes).items():
            for metric, value in (("precision", p), ("recall", r), ("f1", f1)):
                report.add(dataset=held_out.name, task="adl", pct=pct, fold=fold,
                           seed=seed, metric=f"{metric}[{cls}]{suffix}", value=value)
        say(f"  pct={pct} fold={fold} adl{suffix}: {score:.3f}")

    for k in protocol.k_values:
        train_k = eligible_nextk_items(train_w, held_out, k)
        test_k = eligible_nextk_items(test_w, held_out, k)
        if not train_k or not test_k:
            continue
        sub = subsample_training(train_k, pct, sub_seed + k)
        model = backbone.copy()
        head = finetune(model, sub, "nextk", settings,
                        vocabulary=held_out.event_vocabulary(),
                        context_enabled=config.context_enabled)
        p, r, f1 = evaluate_nextk(model, head, test_k, k,
                                  context_enabled=config.context_enabled)
        task = f"next{k}"
        for metric, value in (("precision", p), ("recall", r), ("f1", f1)):
            report.add(dataset=held_out.name, task=task, pct=pct, fold=fold,
                       seed=seed, metric=f"{metric}{suffix}", value=value)
        say(f"  pct={pct} fold={fold} {task}{suffix}: f1={f1:.3f}")
