#!/usr/bin/env python3
"""Statistical randomness of concatenated response keys.

Builds a small key corpus with the randomness-grade (quantile + whitening)
calibration, runs the nine native SP 800-22 tests with multi-sequence
aggregation, and exports the bitstream for the external reference suite's
remaining tests.  Budget-reduced: ~600 calibration pairs and 150 corpus
keys (about two minutes); the acceptance suite runs the full-size version
with 2400 calibration pairs and a 1000-key corpus.
"""

import time
from pathlib import Path

import numpy as np

import rosspuf as rp
from rosspuf import randtests
from rosspuf._util import derive_seed
from rosspuf.keygen import calibrate_empirical, harvest_weights, key_from_weights
from rosspuf.photonics import observed_adc_ranges

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

device = rp.fabricate(rp.NominalConfig(), fab_seed=1)
ridge = rp.RidgeConfig()
det = rp.DetectionConfig(adc_bits=3)

t0 = time.time()
print("harvesting 600 calibration pairs (one-time)...")
cal_seeds = [derive_seed(0, "demo-cal", i) for i in range(600)]
first = rp.make_challenge(cal_seeds[0], 2000)
ranges = observed_adc_ranges(rp.analog_front_end(device, first.modulator_input(), det))
w_cal = harvest_weights(device, det, ridge, cal_seeds,
                        [derive_seed(0, "demo-cal-noise", i) for i in range(600)],
                        ranges)
profile = calibrate_empirical(w_cal, n_bit=4)

print("generating 400 fresh response keys...")
w_keys = harvest_weights(device, det, ridge,
                         [derive_seed(0, "demo-key", i) for i in range(400)],
                         [derive_seed(0, "demo-key-noise", i) for i in range(400)],
                         ranges)
corpus = np.concatenate([key_from_weights(w, profile).bits for w in w_keys])
print(f"corpus: {corpus.size} bits in {time.time() - t0:.0f} s")

sequences = np.array_split(corpus, 10)
report = randtests.run_battery(sequences, alpha=0.01)
print()
print(report.table())
print("\nall passed" if report.all_passed else "\nsome tests rejected")

path = randtests.export_bits(corpus, OUT / "key_corpus.bits", fmt="ascii01")
print(f"\nwrote {path} for the external reference suite (templates, universal,")
print("excursions, linear complexity); extend it with permute_extend if a test")
print("needs more data than the corpus holds.")
extended = randtests.permute_extend(corpus, seed=1, block_len=1060)
randtests.export_bits(extended, OUT / "key_corpus_extended.bits", fmt="ascii01")
print(f"wrote {OUT / 'key_corpus_extended.bits'} ({extended.size} bits)")
