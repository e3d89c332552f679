"""Behavioral simulator, attack suite and design explorer for current-mirror-array PUFs."""

from .device import (CalibrationError, ComparatorMode, DeviceInstance, Environment, MismatchParams,
                     calibrate_noise, column_current, compare, sample_device)
from .core import (Challenge, CrpRecord, Dataset, FixedFinalPair, MeasuredResponse, RandomizedFinalPair,
                   RnnConfig, crp_space, eval_nn, eval_rnn, generate_dataset, intermediate_pairs,
                   xor_feedback)
from .reliability import (ReliabilityReport, empirical_reliability, r_cascade, r_lower_bound, r_model,
                          r_xor, secure_space, uniformity_metrics)

__version__ = "0.1.0"
