#!/usr/bin/env python3
"""From raw signals to a clean global event stream.

Walks the data model end to end: binarize a continuous temperature trace into
semantic states, clean alternation violations from a flaky motion sensor, and
merge everything into one totally ordered stream.
"""

from domusfm import (
    Event,
    EventStream,
    SemanticState,
    Sensor,
    binarize_continuous,
    clean_alternation,
    extract_time_features,
    merge_streams,
)

# -- 1. a continuous sensor becomes binary state streams ------------------------

thermometer = Sensor("T1", "temperature", room="kitchen")
samples = [(1000, 21.5), (1060, 24.0), (1120, 31.2), (1180, 33.0),
           (1240, 28.4), (1300, 19.0)]
states = [SemanticState("HIGH", 30.0), SemanticState("LOW", -100.0, 20.0)]

print("temperature samples:", samples)
for state, stream in zip(states, binarize_continuous(samples, states, thermometer)):
    print(f"  state {state.name:<4} [{state.lo}, {state.hi}):",
          [(e.timestamp, e.status) for e in stream.events])

# -- 2. a glitchy binary sensor violates the alternation property ----------------

motion = Sensor("M1", "motion", room="hall")
glitchy = EventStream(tuple(
    Event(t, motion, status) for t, status in
    [(2000, "ON"), (2030, "ON"), (2060, "OFF"), (2090, "OFF"), (2120, "ON")]
))
cleaned, report = clean_alternation(glitchy)
print("\nglitchy motion stream:", [(e.timestamp, e.status) for e in glitchy.events])
print(f"cleaned ({report.removed_count} removed at indices {report.removed_indices}):",
      [(e.timestamp, e.status) for e in cleaned.events])

# -- 3. merge per-sensor streams into the global stream ---------------------------

high_stream = binarize_continuous(samples, states[:1], thermometer)[0]
merged = merge_streams([cleaned, high_stream])
print("\nglobal stream (strictly increasing timestamps):")
for event in merged.events:
    dow, hour, sec = extract_time_features(event.timestamp)
    print(f"  t={event.timestamp}  {event.sensor.id:<8} {event.status:<3} "
          f"(weekday={dow}, hour={hour:02d}, sec_in_hour={sec})")
