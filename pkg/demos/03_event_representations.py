#!/usr/bin/env python3
"""Inside the encoders: attribute embeddings, masking, and contextualization.

Encodes single events, shows how masking swaps in learned MASK vectors, and
demonstrates that the context encoder lets neighboring events reshape each
event's representation.
"""

import numpy as np

from domusfm import Event, ModelConfig, Sensor, Window, window_representation
from domusfm.embeddings import fallback_embedding
from domusfm.event_encoder import N_SLOTS, cyclical_features, encode_event
from domusfm.model import Model

config = ModelConfig(d=32, heads=4, layers=2, seconds_buckets=60)
model = Model.init(config, seed=7)

# deterministic hash embeddings stand in for a sentence-embedding table
for token in ("stove", "oven", "bed"):
    vec = fallback_embedding(token, 6)
    print(f"fallback_embedding({token!r}, 6) -> {np.round(vec, 3)}")

# cyclical time features: hour 23 and hour 0 are neighbors on the circle
h23, h0, h12 = (cyclical_features(h, 24.0, config.harmonics) for h in (23, 0, 12))
print(f"\n|features(23h) - features(0h)|  = {np.linalg.norm(h23 - h0):.3f}  (close)")
print(f"|features(12h) - features(0h)|  = {np.linalg.norm(h12 - h0):.3f}  (far)")

stove = Sensor("p_stove", "power", house_item="stove", room="kitchen")
event = Event(1736154000, stove, "ON")  # 2025-01-06 09:00 UTC

plain = encode_event(event, None, model.table, model.event_params, config)
masks = [False] * N_SLOTS
masks[1] = True  # hide the room
room_masked = encode_event(event, masks, model.table, model.event_params, config)
print(f"\nevent embedding h_e is {plain.shape[0]}-dimensional")
print(f"masking the room slot moves h_e by "
      f"{np.linalg.norm(plain.data - room_masked.data):.3f}")

# a window: the same stove event surrounded by different neighbors
bed = Sensor("b_bed", "pressure", house_item="bed", room="bedroom")
fridge = Sensor("c_fridge", "contact", house_item="fridge", room="kitchen")


def around(neighbor: Sensor) -> Window:
    events = (Event(event.timestamp - 120, neighbor, "ON"),
              event,
              Event(event.timestamp + 90, neighbor, "OFF"))
    return Window(events, (None,) * 3)


rep_kitchen = window_representation(around(fridge), model.table, model.event_params,
                                    model.context_params, config)
rep_bedroom = window_representation(around(bed), model.table, model.event_params,
                                    model.context_params, config)
shift = np.linalg.norm(rep_kitchen.contextualized[1] - rep_bedroom.contextualized[1])
print(f"\nsame event, different window context: h_cxt differs by {shift:.3f}")

ablated = ModelConfig(**{**config.__dict__, "context_enabled": False})
rep_ablated = window_representation(around(fridge), model.table, model.event_params,
                                    model.context_params, ablated)
assert np.array_equal(rep_ablated.contextualized[1], plain.data)
print("with context disabled, rows fall back to the raw event embeddings (bitwise)")
