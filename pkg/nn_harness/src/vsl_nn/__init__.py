"""Frozen-backbone AlexNet harness for the visual-search pipeline."""

from .harness import (HarnessConfig, HarnessError, ManifestError,
                      PretrainedWeightsError, TrainingLog, build_model,
                      backbone_fingerprint, evaluate_to_responses,
                      read_manifest, train_eval, train_head,
                      trainable_parameter_count, write_responses)

__version__ = "0.1.0"
