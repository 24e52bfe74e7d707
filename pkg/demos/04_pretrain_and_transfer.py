#!/usr/bin/env python3
"""The full study, scaled down: dual contrastive pretraining, then transfer.

Pretrains on two synthetic homes, holds out a third, fine-tunes on small
labeled fractions, and compares against a random-init control for both
downstream tasks. Takes a minute or two on a laptop CPU.
"""

import time

from domusfm import EvalProtocol, FinetuneSettings, FinetuneStrategy, LodoConfig, ModelConfig, PretrainConfig, lodo_run
from domusfm.benchmark import three_home_corpus

corpus = three_home_corpus(days=7, seed=0)
for ds in corpus:
    print(f"{ds.name}: {len(ds.stream)} events, {len(ds.sensors)} sensors, "
          f"{len(ds.activity_set)} activities")

config = LodoConfig(
    model=ModelConfig(d=32, heads=4, layers=2, n_window=30),
    protocol=EvalProtocol(held_out="home3", train_pcts=(5, 30), folds=2,
                          k_values=(30,), seeds=(0,)),
    pretrain=PretrainConfig(batch_size=64, epochs_phase1=2, epochs_phase2=2,
                            windows_per_dataset=192),
    finetune=FinetuneSettings(strategy=FinetuneStrategy.FULL, epochs=10,
                              batch_size=64),
    overlap=29,
)

t0 = time.time()
report = lodo_run(corpus, config, progress=lambda msg: print("  " + msg))
print(f"\nfinished in {time.time() - t0:.0f}s\n")

print(f"{'labels':>7}  {'task':<8} {'pretrained':>10} {'random init':>11}")
for pct in (5, 30):
    adl = report.mean("adl", "weighted_f1", pct)
    adl_ctl = report.mean("adl", "weighted_f1_control", pct)
    nxt = report.mean("next30", "f1", pct)
    nxt_ctl = report.mean("next30", "f1_control", pct)
    print(f"{pct:>6}%  {'adl':<8} {adl:>10.3f} {adl_ctl:>11.3f}")
    print(f"{'':>7}  {'next-30':<8} {nxt:>10.3f} {nxt_ctl:>11.3f}")

print("\n(pretraining on other homes should help most at 5% labels)")
