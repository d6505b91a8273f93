"""Search-display planning, hard-edged rendering, and dataset emission.

Displays are 227x227 RGB images of 1, 2, 4 or 8 items on a black
background. Item centers are drawn by rejection sampling so that every
pair sits at least 48 px apart (center to center) and no item footprint
enters the 30 px border exclusion zone. Rendering is pure and
anti-aliasing free, so a display spec maps to one exact pixel buffer.

Five tasks are supported. In four of them the target differs from the
distractors along a single feature (luminance, color, bar length, bar
orientation); in the fifth the target is an upright T among Ts rotated by
90/180/270 degrees. Each task has three difficulty levels, level 1 the
easiest; the level tables below are data, not code.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import PlacementError, ValidationError
from .records import ManifestRow

IMAGE_SIZE = 227
CHANNELS = 3
MARGIN = 30
MIN_SPACING = 48
SET_SIZES = (1, 2, 4, 8)
DIFFICULTY_LEVELS = (1, 2, 3)
BACKGROUND_RGB = (0, 0, 0)
MAX_PLACEMENT_ATTEMPTS = 10_000
MAX_DISPLAY_REPLANS = 100

TRIALS_PER_DATASET = 9600
TRIALS_PER_CELL = 1200  # per (set size, present/absent) block
TEST_PER_CELL = 400  # rest of the block goes to the train split

SQUARE_EDGE = 20
BAR_WIDTH = 5
BAR_LENGTH = 31
T_BAR_WIDTH = 5
T_BAR_LENGTH = 25
SHAPE_GRAY = (192, 192, 192)  # item color for the shape-defined tasks

_SEED_MAX = 2**64


class TaskKind(enum.Enum):
    LUMINANCE = "luminance"
    COLOR = "color"
    LENGTH = "length"
    ORIENTATION = "orientation"
    ROTATED_T = "rotated_t"  # the one configuration-defined ("complex") task


# Difficulty tables, level 1 -> 3 = easy -> hard.
LUMINANCE_DISTRACTOR_GRAY = 64
LUMINANCE_TARGET_GRAY = {1: 192, 2: 128, 3: 96}
COLOR_DISTRACTOR_RGB = (160, 160, 0)
COLOR_TARGET_RGB = {1: (160, 0, 0), 2: (160, 64, 0), 3: (160, 112, 0)}
LENGTH_TARGET_PX = {1: 55, 2: 45, 3: 37}
ORIENTATION_TARGET_DEG = {1: 40.0, 2: 20.0, 3: 10.0}
ROTATED_T_SCALE = {1: 1.0, 2: 0.75, 3: 0.6}
ROTATED_T_DISTRACTOR_DEG = (90, 180, 270)


@dataclass(frozen=True)
class ItemSpec:
    """One display item: a shape kind, an integer pixel center, and the
    shape-specific appearance parameters."""

    kind: str  # "square" | "bar" | "t_figure"
    center: tuple[int, int]  # (x, y)
    appearance: dict


@dataclass(frozen=True)
class DisplaySpec:
    task: TaskKind
    difficulty: int
    set_size: int
    target_present: bool
    items: tuple[ItemSpec, ...]
    seed: int


def target_appearance(task: TaskKind, difficulty: int) -> tuple[str, dict]:
    """(kind, appearance) of the target item for a task and level."""
    if difficulty not in DIFFICULTY_LEVELS:
        raise ValidationError(f"difficulty must be in {DIFFICULTY_LEVELS}, got {difficulty!r}")
    if task is TaskKind.LUMINANCE:
        g = LUMINANCE_TARGET_GRAY[difficulty]
        return "square", {"edge": SQUARE_EDGE, "color": (g, g, g)}
    if task is TaskKind.COLOR:
        return "square", {"edge": SQUARE_EDGE, "color": COLOR_TARGET_RGB[difficulty]}
    if task is TaskKind.LENGTH:
        return "bar", {"length": LENGTH_TARGET_PX[difficulty], "width": BAR_WIDTH,
                       "angle_deg": 0.0, "color": SHAPE_GRAY}
    if task is TaskKind.ORIENTATION:
        return "bar", {"length": BAR_LENGTH, "width": BAR_WIDTH,
                       "angle_deg": ORIENTATION_TARGET_DEG[difficulty], "color": SHAPE_GRAY}
    if task is TaskKind.ROTATED_T:
        return "t_figure", dict(_t_dims(difficulty), rotation_deg=0, color=SHAPE_GRAY)
    raise ValidationError(f"unknown task {task!r}")


def distractor_appearance(task: TaskKind, difficulty: int,
                          rotation_deg: int | None = None) -> tuple[str, dict]:
    """(kind, appearance) of a distractor item.

    rotation_deg only applies to the rotated-T task, whose distractors vary
    in rotation; all other tasks have a single fixed distractor.
    """
    if difficulty not in DIFFICULTY_LEVELS:
        raise ValidationError(f"difficulty must be in {DIFFICULTY_LEVELS}, got {difficulty!r}")
    if task is TaskKind.LUMINANCE:
        g = LUMINANCE_DISTRACTOR_GRAY
        return "square", {"edge": SQUARE_EDGE, "color": (g, g, g)}
    if task is TaskKind.COLOR:
        return "square", {"edge": SQUARE_EDGE, "color": COLOR_DISTRACTOR_RGB}
    if task in (TaskKind.LENGTH, TaskKind.ORIENTATION):
        return "bar", {"length": BAR_LENGTH, "width": BAR_WIDTH,
                       "angle_deg": 0.0, "color": SHAPE_GRAY}
    if task is TaskKind.ROTATED_T:
        if rotation_deg not in ROTATED_T_DISTRACTOR_DEG:
            raise ValidationError(
                f"rotated-T distractor rotation must be one of {ROTATED_T_DISTRACTOR_DEG}")
        return "t_figure", dict(_t_dims(difficulty), rotation_deg=rotation_deg,
                                color=SHAPE_GRAY)
    raise ValidationError(f"unknown task {task!r}")


def _t_dims(difficulty: int) -> dict:
    s = ROTATED_T_SCALE[difficulty]
    return {"bar_width": max(1, round(T_BAR_WIDTH * s)),
            "bar_length": max(3, round(T_BAR_LENGTH * s))}


def is_target_item(task: TaskKind, difficulty: int, item: ItemSpec) -> bool:
    kind, appearance = target_appearance(task, difficulty)
    return item.kind == kind and item.appearance == appearance


@lru_cache(maxsize=256)
def _offsets_cached(key: tuple) -> np.ndarray:
    kind = key[0]
    params = dict(key[1:])
    if kind == "square":
        e = params["edge"]
        lo = -(e // 2)
        rng = np.arange(lo, lo + e)
        dx, dy = np.meshgrid(rng, rng)
        return np.stack([dx.ravel(), dy.ravel()], axis=1)
    if kind == "bar":
        length, width = params["length"], params["width"]
        theta = math.radians(params["angle_deg"])
        r = int(math.ceil(0.5 * math.hypot(length, width))) + 1
        span = np.arange(-r, r + 1)
        dx, dy = np.meshgrid(span, span)
        # rotate pixel offsets back into the bar frame; hard-edged membership
        u = dx * math.cos(theta) + dy * math.sin(theta)
        v = -dx * math.sin(theta) + dy * math.cos(theta)
        mask = (np.abs(u) <= width / 2.0) & (np.abs(v) <= length / 2.0)
        return np.stack([dx[mask], dy[mask]], axis=1)
    if kind == "t_figure":
        bw, bl = params["bar_width"], params["bar_length"]
        height = bw + bl
        top = -(height // 2)
        cols = np.arange(-(bl // 2), -(bl // 2) + bl)
        cross = [(int(x), int(top + r)) for r in range(bw) for x in cols]
        stem_cols = np.arange(-(bw // 2), -(bw // 2) + bw)
        stem = [(int(x), int(top + bw + r)) for r in range(bl) for x in stem_cols]
        offs = np.array(cross + stem, dtype=np.int64)
        quarter_turns = (params["rotation_deg"] // 90) % 4
        for _ in range(quarter_turns):
            offs = np.stack([-offs[:, 1], offs[:, 0]], axis=1)
        return offs
    raise ValidationError(f"unknown item kind {kind!r}")


def item_offsets(item: ItemSpec) -> np.ndarray:
    """Pixel offsets (dx, dy) of the item footprint relative to its center."""
    key = tuple((k, v) for k, v in sorted(item.appearance.items()) if k != "color")
    return _offsets_cached((item.kind,) + key)


def _center_bounds(offsets: np.ndarray) -> tuple[int, int, int, int]:
    # inclusive (x_lo, x_hi, y_lo, y_hi) keeping the footprint inside the
    # margin-safe region [MARGIN, IMAGE_SIZE - MARGIN - 1]
    min_dx, min_dy = offsets.min(axis=0)
    max_dx, max_dy = offsets.max(axis=0)
    hi = IMAGE_SIZE - MARGIN - 1
    return (MARGIN - int(min_dx), hi - int(max_dx),
            MARGIN - int(min_dy), hi - int(max_dy))


def plan_display(task: TaskKind, difficulty: int, set_size: int,
                 target_present: bool, seed: int) -> DisplaySpec:
    """Plan one display: choose item identities and rejection-sample centers.

    Deterministic in its arguments. A candidate center violating spacing or
    margins is discarded and redrawn, up to MAX_PLACEMENT_ATTEMPTS per item.
    Sequential placement can rarely paint itself into a corner at set size 8
    (the already-placed items cover the whole admissible region, about 0.3%
    of seeds), in which case all positions are discarded and the display is
    replanned from the same seeded stream.

    Raises:
        ValidationError: bad set size, difficulty or seed.
        PlacementError: every replan exhausted its attempt budget, which
            signals genuinely infeasible constraints.
    """
    if set_size not in SET_SIZES:
        raise ValidationError(f"set size must be in {SET_SIZES}, got {set_size!r}")
    if difficulty not in DIFFICULTY_LEVELS:
        raise ValidationError(f"difficulty must be in {DIFFICULTY_LEVELS}, got {difficulty!r}")
    if not (0 <= seed < _SEED_MAX):
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    rng = np.random.Generator(np.random.Philox(seed))
    target_index = int(rng.integers(set_size)) if target_present else -1

    shapes: list[tuple[str, dict]] = []
    for i in range(set_size):
        if i == target_index:
            shapes.append(target_appearance(task, difficulty))
        elif task is TaskKind.ROTATED_T:
            rot = int(rng.choice(ROTATED_T_DISTRACTOR_DEG))
            shapes.append(distractor_appearance(task, difficulty, rot))
        else:
            shapes.append(distractor_appearance(task, difficulty))
    bounds = [_center_bounds(item_offsets(ItemSpec(kind, (0, 0), appearance)))
              for kind, appearance in shapes]

    last_stuck = 0
    for _ in range(MAX_DISPLAY_REPLANS):
        centers: list[tuple[int, int]] = []
        for i, (x_lo, x_hi, y_lo, y_hi) in enumerate(bounds):
            for _ in range(MAX_PLACEMENT_ATTEMPTS):
                cx = int(rng.integers(x_lo, x_hi + 1))
                cy = int(rng.integers(y_lo, y_hi + 1))
                if all((cx - px) ** 2 + (cy - py) ** 2 >= MIN_SPACING**2
                       for px, py in centers):
                    centers.append((cx, cy))
                    break
            else:
                last_stuck = i
                break
        if len(centers) == set_size:
            items = tuple(ItemSpec(kind, center, appearance)
                          for (kind, appearance), center in zip(shapes, centers))
            return DisplaySpec(task, difficulty, set_size, target_present,
                               items, seed)
    raise PlacementError(
        f"could not place item {last_stuck} of {set_size} after "
        f"{MAX_PLACEMENT_ATTEMPTS} attempts in each of {MAX_DISPLAY_REPLANS} "
        f"replans (seed={seed})")


def validate_display(spec: DisplaySpec) -> None:
    """Check every DisplaySpec invariant; raise ValidationError on violation."""
    if spec.set_size not in SET_SIZES or len(spec.items) != spec.set_size:
        raise ValidationError(
            f"set size {spec.set_size!r} with {len(spec.items)} items is invalid")
    if spec.difficulty not in DIFFICULTY_LEVELS:
        raise ValidationError(f"invalid difficulty {spec.difficulty!r}")
    for item in spec.items:
        offs = item_offsets(item)
        x_lo, x_hi, y_lo, y_hi = _center_bounds(offs)
        cx, cy = item.center
        if not (x_lo <= cx <= x_hi and y_lo <= cy <= y_hi):
            raise ValidationError(
                f"item at {item.center} leaves the {MARGIN} px margin zone")
        color = item.appearance["color"]
        if len(color) != 3 or any(not (0 <= v <= 255) for v in color):
            raise ValidationError(f"color {color!r} outside 8-bit range")
    for i in range(len(spec.items)):
        for j in range(i + 1, len(spec.items)):
            xi, yi = spec.items[i].center
            xj, yj = spec.items[j].center
            if (xi - xj) ** 2 + (yi - yj) ** 2 < MIN_SPACING**2:
                raise ValidationError(
                    f"items {i} and {j} are closer than {MIN_SPACING} px")
    n_targets = sum(is_target_item(spec.task, spec.difficulty, it)
                    for it in spec.items)
    expected = 1 if spec.target_present else 0
    if n_targets != expected:
        raise ValidationError(
            f"display has {n_targets} target items, expected {expected}")


def render_display(spec: DisplaySpec) -> np.ndarray:
    """Render a display to a (227, 227, 3) uint8 array.

    Pure function of its display spec: hard-edged pixels, no anti-aliasing,
    black background everywhere outside item footprints.
    """
    validate_display(spec)
    img = np.zeros((IMAGE_SIZE, IMAGE_SIZE, CHANNELS), dtype=np.uint8)
    img[:, :] = BACKGROUND_RGB
    for item in spec.items:
        offs = item_offsets(item)
        cx, cy = item.center
        img[offs[:, 1] + cy, offs[:, 0] + cx] = item.appearance["color"]
    return img


def derive_seed(*parts: int) -> int:
    """Stable 64-bit stream seed hashed from integer parts."""
    ss = np.random.SeedSequence(list(parts))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_plan(task: TaskKind, difficulty: int, index: int) -> tuple[str, int, bool]:
    """(trial_id, set_size, target_present) for a dataset trial index.

    Trials are laid out in 8 blocks of 1200: set sizes 1, 2, 4, 8, each
    with a target-present block followed by a target-absent block.
    """
    block, _ = divmod(index, TRIALS_PER_CELL)
    set_size = SET_SIZES[block // 2]
    target_present = block % 2 == 0
    trial_id = f"{task.value}-d{difficulty}-{index:05d}"
    return trial_id, set_size, target_present


def split_assignment(seed: int) -> list[str]:
    """Seed-deterministic train/test split over the 9600 trial indices.

    Stratified within each (set size, presence) block of 1200 so that every
    set size gets exactly 400 + 400 test trials.
    """
    split = ["train"] * TRIALS_PER_DATASET
    for block in range(TRIALS_PER_DATASET // TRIALS_PER_CELL):
        block_rng = np.random.Generator(np.random.Philox(derive_seed(seed, 1, block)))
        order = block_rng.permutation(TRIALS_PER_CELL)
        base = block * TRIALS_PER_CELL
        for offset in order[:TEST_PER_CELL]:
            split[base + int(offset)] = "test"
    return split


def generate_dataset(task: TaskKind, difficulty: int, seed: int, out_dir: Path,
                     write_manifest_file: bool = True) -> list[ManifestRow]:
    """Emit the 9600-image dataset for one (task, difficulty) and its manifest.

    Per set size: 1200 target-present and 1200 target-absent trials, of
    which 400 + 400 go to the test split (so 800 test images per set size
    and a 6400/3200 train/test split overall). Trial plans and the split
    assignment both derive from the dataset seed, so regeneration is
    byte-identical. PNGs land directly under out_dir as <trial_id>.png.

    Raises:
        OSError: surfaces I/O failures with the offending path.
    """
    from .io import write_manifest  # local import; io depends on analysis types

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    split_by_index = split_assignment(seed)
    rows: list[ManifestRow] = []
    for index in range(TRIALS_PER_DATASET):
        trial_id, set_size, target_present = trial_plan(task, difficulty, index)
        trial_seed = derive_seed(seed, 0, index)
        spec = plan_display(task, difficulty, set_size, target_present, trial_seed)
        image = render_display(spec)
        image_name = f"{trial_id}.png"
        Image.fromarray(image, mode="RGB").save(out_dir / image_name, format="PNG")
        rows.append(ManifestRow(
            trial_id=trial_id,
            split=split_by_index[index],
            task=task.value,
            difficulty=difficulty,
            set_size=set_size,
            target_present=target_present,
            image_path=image_name,
            seed=trial_seed,
        ))

    if write_manifest_file:
        write_manifest(rows, out_dir / "manifest.jsonl")
    return rows
