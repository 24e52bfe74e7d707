#!/usr/bin/env python3
"""Bag-of-events forecasting: targets, decoding, and multiset scoring.

The next-k task ignores ordering inside the horizon: given a window, predict
how many times each (sensor, status) event type occurs among the next k
events. Decoding turns fractional expected counts into an integer multiset of
exactly k items.
"""

import numpy as np

from domusfm import multiset_prf, nextk_predict, nextk_target, segment_events
from domusfm.benchmark import home_spec
from domusfm.downstream import init_nextk_head, largest_remainder
from domusfm.ingest import generate_synthetic_corpus

dataset = generate_synthetic_corpus(home_spec("home1", days=3, seed=5))
windows = segment_events(dataset.stream, n=30, overlap=29, dataset=dataset.name)

# ground-truth targets: count the k events after the window
window = windows[100]
target = nextk_target(dataset.stream, window.end, k=10)
print("window ends at event", window.end, f"(activity {window.label!r})")
print("next-10 ground truth multiset:")
for (sensor_id, status), count in target.counts:
    print(f"  {sensor_id:<16} {status:<3} x{count}")

# largest-remainder apportionment: fractional scores -> exact-total integers
scores = np.array([1.6, 0.9, 0.5])
print("\nlargest_remainder([1.6, 0.9, 0.5], k=3) ->", largest_remainder(scores, 3))
print("scale invariance:", largest_remainder(scores * 100, 3))

# an untrained head still emits a valid multiset of total k
head = init_nextk_head(dataset.event_vocabulary(), d=32, seed=0)
rng = np.random.default_rng(0)
prediction = nextk_predict(rng.normal(size=32).astype(np.float32), head, k=10)
print(f"\nuntrained head prediction (total {prediction.total}):")
for (sensor_id, status), count in prediction.counts[:5]:
    print(f"  {sensor_id:<16} {status:<3} x{count}")

precision, recall, f1 = multiset_prf(target, prediction)
print(f"\nmultiset metrics vs ground truth: P={precision:.2f} R={recall:.2f} "
      f"F1={f1:.2f}")
print("(with |prediction| = |truth| = k, precision and recall coincide)")
