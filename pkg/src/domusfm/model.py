"""Model bundle: configuration, parameter groups, forward passes, checkpoints."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .autodiff import Tensor, no_grad
from .checkpoint import load_into_groups, save_checkpoint
from .context_encoder import (
    WindowRepresentation,
    contextualize,
    init_context_encoder,
    pool_sequence,
)
from .embeddings import AttributeEmbeddingTable, fallback_table
from .event_encoder import (
    EventBatch,
    ModelConfig,
    StreamFeatures,
    build_batch,
    encode_batch,
    featurize_events,
    init_event_encoder,
)
from .nn import ParamGroup
from .segmentation import Window

EVENT_GROUP = "event_encoder"
CONTEXT_GROUP = "context_encoder"


class Model:
    """Both encoder stages plus any attached task heads, as named groups."""

    def __init__(self, config: ModelConfig, table: AttributeEmbeddingTable,
                 groups: dict[str, ParamGroup]):
        self.config = config
        self.table = table
        self.groups = groups
        self.features: dict[str, StreamFeatures] = {}

    @staticmethod
    def init(config: ModelConfig, table: Optional[AttributeEmbeddingTable] = None,
             seed: int = 0) -> "Model":
        if table is None:
            table = fallback_table(config.text_dim())
        config = config.with_table(table)
        if table.provenance == "fallback" and table.d_text != config.text_dim():
            raise ValueError(f"fallback table dimension {table.d_text} != model "
                             f"text dimension {config.text_dim()}")
        rng = np.random.default_rng([seed, 0xD0])
        groups = {
            EVENT_GROUP: init_event_encoder(config, rng),
            CONTEXT_GROUP: init_context_encoder(config, rng),
        }
        return Model(config, table, groups)

    # -- bookkeeping -----------------------------------------------------

    @property
    def event_params(self) -> ParamGroup:
        return self.groups[EVENT_GROUP]

    @property
    def context_params(self) -> ParamGroup:
        return self.groups[CONTEXT_GROUP]

    def copy(self) -> "Model":
        clone = Model(self.config, self.table,
                      {name: g.copy() for name, g in self.groups.items()})
        clone.features = self.features
        return clone

    def add_stream_features(self, name: str, events) -> StreamFeatures:
        feats = featurize_events(events, self.table, self.config)
        self.features[name] = feats
        return feats

    def set_frozen(self, group: str, frozen: bool):
        self.groups[group].frozen = frozen

    def trainable_groups(self) -> list[ParamGroup]:
        return [g for g in self.groups.values() if not g.frozen]

    # -- forward ---------------------------------------------------------

    def batch(self, windows: Sequence[Window],
              masks: Optional[np.ndarray] = None) -> EventBatch:
        return build_batch(windows, self.features, masks,
                           table=self.table, config=self.config)

    def encode_events(self, batch: EventBatch, detach: bool = False) -> Tensor:
        """h_e for a batch: (B, N, d). ``detach`` skips the tape (frozen stage)."""
        if detach:
            with no_grad():
                return encode_batch(batch, self.event_params, self.config)
        return encode_batch(batch, self.event_params, self.config)

    def contextualize(self, event_embeddings: Tensor,
                      context_enabled: Optional[bool] = None) -> Tensor:
        """h_cxt rows; with context disabled this is the identity (ablation)."""
        enabled = self.config.context_enabled if context_enabled is None else context_enabled
        if not enabled:
            return event_embeddings
        return contextualize(event_embeddings, self.context_params, self.config)

    def window_tensors(self, windows: Sequence[Window],
                       masks: Optional[np.ndarray] = None,
                       detach_events: bool = False,
                       context_enabled: Optional[bool] = None) -> tuple[Tensor, Tensor]:
        """(contextualized (B, N, d), pooled (B, d)) for a batch of windows."""
        batch = self.batch(windows, masks)
        embeddings = self.encode_events(batch, detach=detach_events)
        if detach_events:
            embeddings = Tensor(embeddings.data)
        ctx = self.contextualize(embeddings, context_enabled)
        return ctx, pool_sequence(ctx)

    # -- persistence -----------------------------------------------------

    def meta(self) -> dict:
        cfg = self.config
        return {"config": {
            "d": cfg.d, "heads": cfg.heads, "layers": cfg.layers,
            "harmonics": cfg.harmonics, "seconds_buckets": cfg.seconds_buckets,
            "n_window": cfg.n_window, "context_enabled": cfg.context_enabled,
            "d_text": cfg.text_dim(),
        }}

    def save(self, path: str):
        save_checkpoint(path, list(self.groups.values()), meta=self.meta())

    def load(self, path: str) -> dict:
        return load_into_groups(path, self.groups)

    def state_bytes(self) -> bytes:
        return b"".join(g.state_bytes() for g in self.groups.values())


def window_representation(window: Window, table: AttributeEmbeddingTable,
                          event_params: ParamGroup, ctx_params: ParamGroup,
                          config: ModelConfig) -> WindowRepresentation:
    """Inference-mode representation of one window.

    With ``config.context_enabled`` false the contextualized rows are the raw
    event embeddings (the ablation path).
    """
    batch = build_batch([window], {}, table=table, config=config)
    with no_grad():
        embeddings = encode_batch(batch, event_params, config)
        ctx = contextualize(embeddings, ctx_params, config) if config.context_enabled \
            else embeddings
        pooled = pool_sequence(ctx)
    n = len(window)
    return WindowRepresentation(
        contextualized=ctx.data.reshape(n, config.d).copy(),
        pooled=pooled.data.reshape(config.d).copy(),
    )
