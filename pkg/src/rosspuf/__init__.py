"""Photonic spectrum-slicing PUF simulator and deterministic key generator."""

from .challenge import (Challenge, ChallengeError, NarmaDivergence, NarmaParams,
                        gen_input, make_challenge, narma_target)
from .fuzzy import (BchCode, BchParameterError, HelperData, bch_build, bch_decode,
                    bch_encode, ecc_sweep, enroll, reconstruct)
from .keygen import (BinaryKey, CalibrationError, CalibrationProfile, calibrate,
                     calibrate_device, calibrate_empirical, calibrate_indexed,
                     key_from_weights, quantize_bits, respond, to_uniform)
from .metrics import (EerReport, HammingStats, SweepBudget, collect_inter,
                      collect_intra, eer_fit, hamming_frac, pairwise_fractions,
                      sweep_bit_grid, sweep_mrr_count)
from .photonics import (AnalogTrace, ConfigError, DetectionConfig, DeviceProfile,
                        ModelError, MrrParams, NominalConfig, RossNode, StateMatrix,
                        analog_front_end, digitize, fabricate, field_to_electrical,
                        modulate, mrr_response, node_transfer, simulate_states)
from .randtests import (BatteryReport, NotApplicable, export_bits, import_bits,
                        nist_test, permute_extend, run_battery)
from .readout import (FeatureMatrix, Response, RidgeConfig, build_features,
                      fit_readout, nmse, ridge_fit)

__version__ = "0.1.0"
