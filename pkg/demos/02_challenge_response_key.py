#!/usr/bin/env python3
"""One full challenge -> response -> key walk-through.

Generates a NARMA-10 pair, interrogates the device, trains the readout,
reports the task error, and derives the 1060-bit key at the operating point
(m_bit = 3 states, n_bit = 4 bits per weight).
"""

import numpy as np

import rosspuf as rp

device = rp.fabricate(rp.NominalConfig(), fab_seed=1)
ridge = rp.RidgeConfig()

challenge = rp.make_challenge(seed=42, n=2000)
print(f"challenge 42: {challenge.length} symbols, input uniform on "
      f"[{challenge.input_range[0]}, {challenge.input_range[1]}], "
      f"target range [{challenge.y_out.min():.3f}, {challenge.y_out.max():.3f}]")

det16 = rp.DetectionConfig(adc_bits=16, noise_seed=7)
resp16 = rp.respond(device, challenge, det16, ridge)
print(f"\nreadout at m_bit=16: NMSE = {resp16.nmse:.4f} over "
      f"{resp16.weights.size} weights")

det3 = rp.DetectionConfig(adc_bits=3, noise_seed=7)
print("\ncalibrating the key pipeline at m_bit=3 (one-time, 64 pairs)...")
profile = rp.calibrate_device(device, det3, ridge, mode="indexed",
                              ensemble_size=64, calibration_seed=0)
resp = rp.respond(device, challenge, det3, ridge, profile)
key = resp.key
print(f"key: {key.weight_count} weights x {key.bits_per_weight} bits "
      f"= {key.n_bits} bits")
print(f"key (hex): {key.to_hex()[:64]}...")

again = rp.respond(device, challenge, det3, ridge, profile)
other = rp.respond(device, rp.make_challenge(seed=43, n=2000), det3, ridge, profile)
print(f"\nsame challenge, same noise seed : Hamming "
      f"{rp.hamming_frac(key, again.key):.4f} (deterministic replay)")
print(f"different challenge             : Hamming "
      f"{rp.hamming_frac(key, other.key):.4f} (near the ideal 0.5)")

noisy = rp.respond(device, challenge, det3, ridge, profile, noise_seed=12345)
print(f"same challenge, fresh noise seed: Hamming "
      f"{rp.hamming_frac(key, noisy.key):.4f} (the default receiver is quiet "
      f"enough to reproduce the key bit-exactly; raise thermal_noise_density "
      f"to study noise)")
