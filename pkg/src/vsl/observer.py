"""Capacity-limited max-rule observers with known ground-truth parameters.

Used to validate the analysis and fitting pipeline end to end: simulate an
observer whose capacity exponent you chose, run the fit, and check it
comes back. Each trial gets its own RNG stream derived from the observer
seed and the trial id, so results do not depend on trial order or on any
parallel schedule.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import capacity
from .errors import ValidationError
from .records import ManifestRow, ResponseRecord


@dataclass(frozen=True)
class ObserverParams:
    """d1 is the single-item sensitivity; alpha the capacity exponent.

    criterion None means the optimal criterion for each set size; a float
    fixes the standardized criterion across set sizes.
    """

    d1: float
    alpha: float
    criterion: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not (self.d1 >= 0.0):
            raise ValidationError(f"d1 must be >= 0, got {self.d1!r}")
        if not (capacity.ALPHA_MIN <= self.alpha <= capacity.ALPHA_MAX):
            raise ValidationError(
                f"alpha must lie in [{capacity.ALPHA_MIN}, {capacity.ALPHA_MAX}], "
                f"got {self.alpha!r}")
        if self.criterion is not None and not np.isfinite(self.criterion):
            raise ValidationError(f"fixed criterion must be finite, got {self.criterion!r}")


def criterion_for(params: ObserverParams, set_size: int) -> float:
    if params.criterion is not None:
        return params.criterion
    return capacity.optimal_criterion(params.d1, params.alpha, set_size)


def sample_trial(params: ObserverParams, set_size: int, target_present: bool,
                 rng: np.random.Generator) -> bool:
    """One yes/no decision: max of n unit-variance samples against the criterion.

    Distractors are N(0, 1); the target (if present) is N(d_n, 1) with
    d_n = d1 * n**(-alpha/2). Returns True for a "present" response.
    """
    if set_size < 1:
        raise ValidationError(f"set size must be >= 1, got {set_size!r}")
    samples = rng.standard_normal(set_size)
    if target_present:
        samples[0] += capacity.item_dprime(params.d1, params.alpha, set_size)
    return bool(samples.max() > criterion_for(params, set_size))


def sample_trials(params: ObserverParams, set_size: int, target_present: bool,
                  count: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized batch of sample_trial decisions (bool array of length count)."""
    if set_size < 1:
        raise ValidationError(f"set size must be >= 1, got {set_size!r}")
    samples = rng.standard_normal((count, set_size))
    if target_present:
        samples[:, 0] += capacity.item_dprime(params.d1, params.alpha, set_size)
    return samples.max(axis=1) > criterion_for(params, set_size)


def _trial_stream(seed: int, trial_id: str) -> np.random.Generator:
    digest = hashlib.blake2b(trial_id.encode("utf-8"), digest_size=8).digest()
    ss = np.random.SeedSequence([seed, int.from_bytes(digest, "big")])
    return np.random.Generator(np.random.Philox(ss))


def simulate_observer(params: ObserverParams,
                      manifest: Sequence[ManifestRow]) -> list[ResponseRecord]:
    """One response per test row of the manifest; train rows are ignored.

    Deterministic in (params.seed, trial_id): shuffling the manifest only
    reorders the output rows, it never changes any response.
    """
    criteria = {n: criterion_for(params, n)
                for n in sorted({r.set_size for r in manifest if r.split == "test"})}
    records: list[ResponseRecord] = []
    for row in manifest:
        if row.split != "test":
            continue
        rng = _trial_stream(params.seed, row.trial_id)
        samples = rng.standard_normal(row.set_size)
        if row.target_present:
            samples[0] += capacity.item_dprime(params.d1, params.alpha, row.set_size)
        said_present = bool(samples.max() > criteria[row.set_size])
        records.append(ResponseRecord(row.trial_id,
                                      "present" if said_present else "absent"))
    return records
