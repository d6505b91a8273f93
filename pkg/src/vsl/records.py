"""Wire-format record types shared by the generator, observers and analysis.

A ManifestRow is one line of the dataset manifest (JSON Lines); a
ResponseRecord is one row of an observer's response CSV. Any external
observer (including the network harness) talks to the analysis pipeline
exclusively through these two shapes.
"""

from __future__ import annotations

from dataclasses import dataclass

SPLITS = ("train", "test")
RESPONSES = ("present", "absent")


@dataclass(frozen=True)
class ManifestRow:
    trial_id: str
    split: str  # "train" | "test"
    task: str
    difficulty: int
    set_size: int
    target_present: bool
    image_path: str
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "split": self.split,
            "task": self.task,
            "difficulty": self.difficulty,
            "set_size": self.set_size,
            "target_present": self.target_present,
            "image_path": self.image_path,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ResponseRecord:
    trial_id: str
    response: str  # "present" | "absent"
    score: float | None = None  # optional; ignored by downstream fitting

    @property
    def said_present(self) -> bool:
        return self.response == "present"
