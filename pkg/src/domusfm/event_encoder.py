"""Event-level feature extraction.

An event is encoded from seven slots: three semantic attributes (house item,
room, sensor type), two cyclical temporal attributes (day of week, hour),
the discretized second-in-hour, and the status. Each slot is embedded to the
model dimension, tagged with a learned slot embedding, fused by one
self-attention layer over the slots, mean-pooled, and projected. The result
is a context-free vector per event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .autodiff import Tensor, concat, reshape, take_rows, tensor_mean
from .embeddings import AttributeEmbeddingTable
from .events import Event, extract_time_features
from .nn import ParamGroup, init_attention, init_embedding, init_linear, init_vector, linear, multi_head_attention
from .segmentation import Window

SLOTS = ("house_item", "room", "sensor_type", "dow", "hour", "sec", "status")
TEXT_SLOTS = ("item", "room", "type")
N_SLOTS = 7
STATUS_INDEX = {"ON": 0, "OFF": 1, "MASK": 2}


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters shared by both encoder stages."""

    d: int = 64
    heads: int = 4
    layers: int = 2
    harmonics: int = 4
    seconds_buckets: int = 60
    n_window: int = 30
    context_enabled: bool = True
    d_text: Optional[int] = None  # None: follow the table (fallback tables use d)

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")
        if self.harmonics < 1:
            raise ValueError("harmonics must be >= 1")
        if 3600 % self.seconds_buckets != 0:
            raise ValueError(f"seconds_buckets={self.seconds_buckets} must divide 3600")
        if self.layers < 1 or self.n_window < 1:
            raise ValueError("layers and n_window must be positive")

    def text_dim(self) -> int:
        return self.d_text if self.d_text is not None else self.d

    @staticmethod
    def full_scale() -> "ModelConfig":
        return ModelConfig(d=384, heads=12, layers=12, d_text=384)

    def with_table(self, table: AttributeEmbeddingTable) -> "ModelConfig":
        if table.provenance == "file":
            return replace(self, d_text=table.d_text)
        return replace(self, d_text=self.text_dim())


def cyclical_features(x: float, period: float, harmonics: int) -> np.ndarray:
    """(sin, cos) pairs at harmonics 1..H of 2*pi*x/period.

    The phase is reduced modulo the period first, so shifting by a whole
    period reproduces the features bitwise.
    """
    x = x % period
    out = np.empty(2 * harmonics, dtype=np.float64)
    for m in range(1, harmonics + 1):
        angle = 2.0 * math.pi * m * x / period
        out[2 * (m - 1)] = math.sin(angle)
        out[2 * (m - 1) + 1] = math.cos(angle)
    return out


def seconds_bucket(sec_in_hour: int, buckets: int) -> int:
    if not 0 <= sec_in_hour < 3600:
        raise ValueError(f"second-in-hour out of range: {sec_in_hour}")
    return sec_in_hour // (3600 // buckets)


def init_event_encoder(config: ModelConfig, rng: np.random.Generator) -> ParamGroup:
    """All learnable parameters of the event-level extractor."""
    d, dt = config.d, config.text_dim()
    group = ParamGroup("event_encoder")
    for slot in TEXT_SLOTS:
        init_linear(group, f"proj_{slot}", dt, d, rng)
        init_vector(group, f"null_{slot}", dt, rng)
        init_vector(group, f"mask_{slot}", dt, rng)
    for name in ("dow", "hour"):
        init_linear(group, f"proj_{name}", 2 * config.harmonics, d, rng)
        init_vector(group, f"mask_{name}", d, rng)
    init_embedding(group, "sec_table", config.seconds_buckets, d, rng)
    init_vector(group, "mask_sec", d, rng)
    init_embedding(group, "status_table", 3, d, rng)
    init_embedding(group, "slot_emb", 6, d, rng)
    init_attention(group, "attn", d, rng)
    init_linear(group, "fuse", d, d, rng)
    return group


def embed_attribute_text(token: Optional[str], table: AttributeEmbeddingTable,
                         params: Optional[ParamGroup] = None,
                         slot: Optional[str] = None, masked: bool = False) -> Tensor:
    """d_text vector for one attribute value.

    Table hits return the stored vector, misses the hash fallback. NULL
    attributes and masked slots return the corresponding learned per-slot
    vector (never a text embedding), which requires ``params`` and ``slot``.
    """
    if masked or token is None or not token.strip():
        if params is None or slot is None:
            raise ValueError("NULL/MASK attribute embedding needs params and slot")
        return params[f"{'mask' if masked else 'null'}_{slot}"]
    return Tensor(table.lookup(token))


def encode_temporal(dow: int, hour: int, sec_in_hour: int, params: ParamGroup,
                    config: ModelConfig) -> tuple[Tensor, Tensor, Tensor]:
    """Projected cyclical day/hour features and the second-bucket embedding."""
    if not 0 <= dow <= 6:
        raise ValueError(f"day-of-week out of range: {dow}")
    if not 0 <= hour <= 23:
        raise ValueError(f"hour out of range: {hour}")
    v_dow = linear(Tensor(cyclical_features(dow, 7.0, config.harmonics)[None, :]),
                   params["proj_dow.w"], params["proj_dow.b"])
    v_hour = linear(Tensor(cyclical_features(hour, 24.0, config.harmonics)[None, :]),
                    params["proj_hour.w"], params["proj_hour.b"])
    bucket = seconds_bucket(sec_in_hour, config.seconds_buckets)
    v_sec = take_rows(params["sec_table"], np.array([bucket]))
    return (reshape(v_dow, (config.d,)), reshape(v_hour, (config.d,)),
            reshape(v_sec, (config.d,)))


def encode_status(status: str, params: ParamGroup) -> Tensor:
    """Learned embedding over {ON, OFF, MASK}."""
    if status not in STATUS_INDEX:
        raise ValueError(f"unknown status {status!r}")
    row = take_rows(params["status_table"], np.array([STATUS_INDEX[status]]))
    return reshape(row, (row.shape[-1],))


# -- batched featurization -----------------------------------------------------


@dataclass
class StreamFeatures:
    """Per-event constant model inputs, precomputed once per stream."""

    text: dict[str, np.ndarray]       # slot -> (T, d_text), zero where NULL
    null_mask: dict[str, np.ndarray]  # slot -> (T, 1) float
    dow_feats: np.ndarray             # (T, 2H)
    hour_feats: np.ndarray            # (T, 2H)
    sec_ids: np.ndarray               # (T,)
    status_ids: np.ndarray            # (T,)

    def __len__(self):
        return len(self.sec_ids)


def featurize_events(events: Sequence[Event], table: AttributeEmbeddingTable,
                     config: ModelConfig) -> StreamFeatures:
    t = len(events)
    dt = config.text_dim()
    text = {slot: np.zeros((t, dt)) for slot in TEXT_SLOTS}
    null_mask = {slot: np.zeros((t, 1)) for slot in TEXT_SLOTS}
    dow_feats = np.zeros((t, 2 * config.harmonics))
    hour_feats = np.zeros((t, 2 * config.harmonics))
    sec_ids = np.zeros(t, dtype=np.int64)
    status_ids = np.zeros(t, dtype=np.int64)
    for i, event in enumerate(events):
        attrs = {"item": event.sensor.house_item, "room": event.sensor.room,
                 "type": event.sensor.sensor_type}
        for slot, value in attrs.items():
            if value is None or not value.strip():
                null_mask[slot][i, 0] = 1.0
            else:
                text[slot][i] = table.lookup(value)
        dow, hour, sec = extract_time_features(event.timestamp)
        dow_feats[i] = cyclical_features(dow, 7.0, config.harmonics)
        hour_feats[i] = cyclical_features(hour, 24.0, config.harmonics)
        sec_ids[i] = seconds_bucket(sec, config.seconds_buckets)
        status_ids[i] = STATUS_INDEX[event.status]
    return StreamFeatures(text, null_mask, dow_feats, hour_feats, sec_ids, status_ids)


@dataclass
class EventBatch:
    """Stacked constant inputs for B windows of N events, plus mask flags."""

    text: dict[str, np.ndarray]       # slot -> (B, N, d_text)
    null_mask: dict[str, np.ndarray]  # slot -> (B, N, 1)
    dow_feats: np.ndarray
    hour_feats: np.ndarray
    sec_ids: np.ndarray               # (B, N)
    status_ids: np.ndarray            # (B, N), already MASK-substituted
    slot_mask: np.ndarray             # (B, N, 7) float

    @property
    def shape(self):
        return self.sec_ids.shape


def empty_masks(b: int, n: int) -> np.ndarray:
    return np.zeros((b, n, N_SLOTS))


def build_batch(windows: Sequence[Window],
                features: dict[str, StreamFeatures],
                masks: Optional[np.ndarray] = None,
                table: Optional[AttributeEmbeddingTable] = None,
                config: Optional[ModelConfig] = None) -> EventBatch:
    """Gather per-window feature slices into batch arrays.

    ``features`` maps dataset name to its precomputed stream features; windows
    whose dataset is missing are featurized on the fly (requires table+config).
    ``masks`` is (B, N, 7) float/bool; slot 6 masks the status.
    """
    rows = []
    for w in windows:
        feats = features.get(w.dataset)
        if feats is None:
            if table is None or config is None:
                raise ValueError(f"no features for dataset {w.dataset!r} and no "
                                 f"table/config to featurize ad hoc")
            feats = featurize_events(w.events, table, config)
            rows.append((feats, 0, len(w)))
        else:
            rows.append((feats, w.start, len(w)))
    n = rows[0][2]
    if any(length != n for _, _, length in rows):
        raise ValueError("all windows in a batch must have the same length")
    b = len(rows)

    def gather(select):
        return np.stack([select(feats)[start:start + n] for feats, start, _ in rows])

    text = {slot: gather(lambda f, s=slot: f.text[s]) for slot in TEXT_SLOTS}
    null_mask = {slot: gather(lambda f, s=slot: f.null_mask[s]) for slot in TEXT_SLOTS}
    batch = EventBatch(
        text=text,
        null_mask=null_mask,
        dow_feats=gather(lambda f: f.dow_feats),
        hour_feats=gather(lambda f: f.hour_feats),
        sec_ids=gather(lambda f: f.sec_ids),
        status_ids=gather(lambda f: f.status_ids).copy(),
        slot_mask=np.asarray(masks, dtype=np.float64) if masks is not None
        else empty_masks(b, n),
    )
    status_masked = batch.slot_mask[:, :, 6] > 0.5
    batch.status_ids[status_masked] = STATUS_INDEX["MASK"]
    return batch


def encode_batch(batch: EventBatch, params: ParamGroup, config: ModelConfig) -> Tensor:
    """h_e for every event: (B, N, d)."""
    b, n = batch.shape
    d = config.d
    slot_streams = []
    # text slots: learned NULL/MASK vectors substitute in text space, then project
    for idx, slot in enumerate(TEXT_SLOTS):
        m = batch.slot_mask[:, :, idx:idx + 1]
        nm = batch.null_mask[slot] * (1.0 - m)  # mask wins over NULL
        keep = 1.0 - nm - m
        text_in = (Tensor(batch.text[slot] * keep)
                   + params[f"null_{slot}"] * Tensor(nm)
                   + params[f"mask_{slot}"] * Tensor(m))
        slot_streams.append(linear(text_in, params[f"proj_{slot}.w"], params[f"proj_{slot}.b"]))
    # cyclical slots: project harmonics, replace with the mask vector where masked
    for feats, name, idx in ((batch.dow_feats, "dow", 3), (batch.hour_feats, "hour", 4)):
        m = batch.slot_mask[:, :, idx:idx + 1]
        enc = linear(Tensor(feats), params[f"proj_{name}.w"], params[f"proj_{name}.b"])
        slot_streams.append(enc * Tensor(1.0 - m) + params[f"mask_{name}"] * Tensor(m))
    # second-of-hour bucket embedding
    m = batch.slot_mask[:, :, 5:6]
    sec = take_rows(params["sec_table"], batch.sec_ids)
    slot_streams.append(sec * Tensor(1.0 - m) + params["mask_sec"] * Tensor(m))
    # status embedding (MASK substitution already applied to the ids)
    status = take_rows(params["status_table"], batch.status_ids)

    stacked = concat([reshape(s, (b, n, 1, d)) for s in slot_streams], axis=2)
    stacked = stacked + reshape(params["slot_emb"], (1, 1, 6, d))
    slots = concat([stacked, reshape(status, (b, n, 1, d))], axis=2)  # (B, N, 7, d)

    flat = reshape(slots, (b * n, N_SLOTS, d))
    fused = multi_head_attention(flat, flat, flat, config.heads, params.tensors)
    pooled = tensor_mean(fused, axis=1)  # (B*N, d)
    out = linear(pooled, params["fuse.w"], params["fuse.b"])
    return reshape(out, (b, n, d))


def encode_event(event: Event, masks: Optional[Sequence[bool]],
                 table: AttributeEmbeddingTable, params: ParamGroup,
                 config: ModelConfig) -> Tensor:
    """h_e for a single event (the batched path with B = N = 1)."""
    feats = featurize_events([event], table, config)
    window_masks = np.zeros((1, 1, N_SLOTS))
    if masks is not None:
        window_masks[0, 0] = np.asarray(masks, dtype=np.float64)
    batch = EventBatch(
        text={slot: feats.text[slot][None] for slot in TEXT_SLOTS},
        null_mask={slot: feats.null_mask[slot][None] for slot in TEXT_SLOTS},
        dow_feats=feats.dow_feats[None],
        hour_feats=feats.hour_feats[None],
        sec_ids=feats.sec_ids[None],
        status_ids=feats.status_ids[None].copy(),
        slot_mask=window_masks,
    )
    if window_masks[0, 0, 6] > 0.5:
        batch.status_ids[0, 0] = STATUS_INDEX["MASK"]
    return reshape(encode_batch(batch, params, config), (config.d,))
