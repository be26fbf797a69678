"""Episode data model, on-disk format, and dataset normalization statistics.

Everything downstream (encodings, policy training, grid evaluation) consumes
the types defined here. Episodes are stored as line-delimited JSON so files
can be inspected and diffed with standard tools.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

STATE_DIM = 5
OBS_DIM = 7
FORMAT_VERSION = 1

# Joint layout. The two rails come first and are the only components the
# relative encodings ever touch; all remaining joints stay absolute.
JOINT_NAMES = ("rail_x", "rail_z", "arm_reach", "wrist_pitch", "gripper")
RAIL_DIMS = (0, 1)

ENV_LABELS = ("A", "B")

# Constant dimensions would otherwise divide by ~0 during normalization.
STD_FLOOR = 1e-6


class EpisodeFormatError(ValueError):
    """An episode file or record violates the on-disk format contract."""


class EpisodeInvariantError(ValueError):
    """An episode violates a structural invariant (shape, ordering, finiteness)."""


def as_joint_vector(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Coerce to a float64 joint vector of length STATE_DIM."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (STATE_DIM,):
        raise EpisodeInvariantError(
            f"joint vector must have shape ({STATE_DIM},), got {v.shape}"
        )
    return v


@dataclass(eq=False)
class TaskObservation:
    """Egocentric task observation, the desk-scale stand-in for camera views.

    All geometric entries are offsets from the gripper, never absolute rail
    coordinates, so the observation is invariant to translating the robot
    and the scene together.

    Attributes:
        gripper_to_bottle: offset from gripper to the bottle grasp point, (2,) meters.
        bottle_tilt: bottle lean from vertical, radians (0 upright, pi/2 lying).
        gripper_to_shelf_edge: offset from gripper to the active shelf's front-edge
            reference point, (2,) meters.
        bottle_grasped: whether the bottle is currently held.
        gripper_aperture_seen: gripper opening as seen from outside, 0..1.
    """

    gripper_to_bottle: np.ndarray
    bottle_tilt: float
    gripper_to_shelf_edge: np.ndarray
    bottle_grasped: bool
    gripper_aperture_seen: float

    def to_vector(self) -> np.ndarray:
        """Flatten to the canonical OBS_DIM-vector used for policy input and storage."""
        return np.array(
            [
                self.gripper_to_bottle[0],
                self.gripper_to_bottle[1],
                self.bottle_tilt,
                self.gripper_to_shelf_edge[0],
                self.gripper_to_shelf_edge[1],
                1.0 if self.bottle_grasped else 0.0,
                self.gripper_aperture_seen,
            ],
            dtype=np.float64,
        )

    @classmethod
    def from_vector(cls, vec: Sequence[float] | np.ndarray) -> "TaskObservation":
        v = np.asarray(vec, dtype=np.float64)
        if v.shape != (OBS_DIM,):
            raise EpisodeInvariantError(
                f"observation vector must have shape ({OBS_DIM},), got {v.shape}"
            )
        return cls(
            gripper_to_bottle=v[0:2].copy(),
            bottle_tilt=float(v[2]),
            gripper_to_shelf_edge=v[3:5].copy(),
            bottle_grasped=bool(v[5] != 0.0),
            gripper_aperture_seen=float(v[6]),
        )


@dataclass(eq=False)
class Step:
    """One timestep of a demonstration or rollout.

    ``action`` is a target joint command in the same units as ``state``:
    the controller servos each joint toward it.
    """

    t: int
    state: np.ndarray
    action: np.ndarray
    obs: TaskObservation


@dataclass(eq=False)
class Episode:
    """A complete demonstration: ordered steps plus start-state metadata."""

    id: int
    env_label: str
    steps: list[Step]
    start_state: np.ndarray

    @classmethod
    def from_steps(cls, id: int, env_label: str, steps: list[Step]) -> "Episode":
        if not steps:
            raise EpisodeInvariantError(f"episode {id}: no steps")
        ep = cls(id=id, env_label=env_label, steps=steps,
                 start_state=steps[0].state.copy())
        ep.validate()
        return ep

    def __len__(self) -> int:
        return len(self.steps)

    def states(self) -> np.ndarray:
        return np.stack([s.state for s in self.steps])

    def actions(self) -> np.ndarray:
        return np.stack([s.action for s in self.steps])

    def validate(self) -> None:
        """Check all structural invariants; raise EpisodeInvariantError on violation."""
        if self.env_label not in ENV_LABELS:
            raise EpisodeInvariantError(
                f"episode {self.id}: env_label {self.env_label!r} not in {ENV_LABELS}"
            )
        if not self.steps:
            raise EpisodeInvariantError(f"episode {self.id}: no steps")
        for k, step in enumerate(self.steps):
            if step.t != k:
                raise EpisodeInvariantError(
                    f"episode {self.id}: step {k} has t={step.t}, expected {k}"
                )
            for name, arr in (("state", step.state), ("action", step.action)):
                arr = as_joint_vector(arr)
                if not np.all(np.isfinite(arr)):
                    raise EpisodeInvariantError(
                        f"episode {self.id}: non-finite {name} at step {k}"
                    )
            obs_vec = step.obs.to_vector()
            if not np.all(np.isfinite(obs_vec)):
                raise EpisodeInvariantError(
                    f"episode {self.id}: non-finite observation at step {k}"
                )
        if not np.array_equal(self.start_state, self.steps[0].state):
            raise EpisodeInvariantError(
                f"episode {self.id}: start_state differs from steps[0].state"
            )


@dataclass(eq=False)
class NormStats:
    """Per-dimension location/scale statistics from a designated training split.

    ``std`` is the population standard deviation, floored at STD_FLOOR so
    near-constant dimensions cannot blow up the normalized values.
    """

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError(
                f"mean/std must be 1-d and same length, got {self.mean.shape} vs {self.std.shape}"
            )
        if np.any(self.std < STD_FLOOR):
            raise ValueError(f"std entries must be >= {STD_FLOOR}")

    def __len__(self) -> int:
        return len(self.mean)

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "NormStats":
        """Population mean/std over axis 0 of a (n, dims) matrix, std floored."""
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValueError(f"need a non-empty (n, dims) matrix, got shape {rows.shape}")
        mean = rows.mean(axis=0)
        std = np.maximum(rows.std(axis=0), STD_FLOOR)
        return cls(mean=mean, std=std)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(mean=np.array(d["mean"], dtype=np.float64),
                   std=np.array(d["std"], dtype=np.float64))


def compute_stats(episodes: Iterable[Episode]) -> NormStats:
    """Mean/std per dimension of [state, obs] over every step of every episode.

    Statistics are population statistics (divide by n), deterministic and
    permutation-invariant up to floating-point addition order.
    """
    rows = []
    for ep in episodes:
        for step in ep.steps:
            rows.append(np.concatenate([step.state, step.obs.to_vector()]))
    if not rows:
        raise ValueError("cannot compute statistics from an empty dataset")
    return NormStats.from_rows(np.stack(rows))


def normalize(v: np.ndarray, stats: NormStats) -> np.ndarray:
    """(v - mean) / std elementwise along the last axis."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != len(stats):
        raise ValueError(f"length mismatch: vector has {v.shape[-1]} dims, stats {len(stats)}")
    return (v - stats.mean) / stats.std


def denormalize(v: np.ndarray, stats: NormStats) -> np.ndarray:
    """Exact inverse of :func:`normalize`."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != len(stats):
        raise ValueError(f"length mismatch: vector has {v.shape[-1]} dims, stats {len(stats)}")
    return v * stats.std + stats.mean


def _episode_to_record(ep: Episode) -> dict:
    return {
        "id": ep.id,
        "env_label": ep.env_label,
        "steps": [
            {
                "t": s.t,
                "state": s.state.tolist(),
                "action": s.action.tolist(),
                "obs": s.obs.to_vector().tolist(),
            }
            for s in ep.steps
        ],
    }


def _episode_from_record(rec: dict) -> Episode:
    steps = [
        Step(
            t=int(s["t"]),
            state=as_joint_vector(s["state"]),
            action=as_joint_vector(s["action"]),
            obs=TaskObservation.from_vector(s["obs"]),
        )
        for s in rec["steps"]
    ]
    ep = Episode(
        id=int(rec["id"]),
        env_label=str(rec["env_label"]),
        steps=steps,
        start_state=steps[0].state.copy() if steps else np.zeros(STATE_DIM),
    )
    ep.validate()
    return ep


def save_episodes(episodes: Sequence[Episode], path: str | Path) -> None:
    """Write episodes as line-delimited JSON: one header line, one line per episode.

    Floats are serialized with repr (shortest round-trip), so
    ``load_episodes(save_episodes(x)) == x`` bit-exactly for finite values.
    Non-finite values are rejected before anything is written.
    """
    for ep in episodes:
        ep.validate()
    header = {"format_version": FORMAT_VERSION, "state_dim": STATE_DIM, "obs_dim": OBS_DIM}
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps(header, separators=(",", ":")) + "\n")
        for ep in episodes:
            f.write(json.dumps(_episode_to_record(ep), separators=(",", ":")) + "\n")


def load_episodes(path: str | Path) -> list[Episode]:
    """Read a file written by :func:`save_episodes`, re-validating every invariant."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise EpisodeFormatError(f"{path}: empty file, missing header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise EpisodeFormatError(f"{path}: line 1: malformed header: {e}") from e
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise EpisodeFormatError(
            f"{path}: unsupported format_version {version!r}, expected {FORMAT_VERSION}"
        )
    if header.get("state_dim") != STATE_DIM or header.get("obs_dim") != OBS_DIM:
        raise EpisodeFormatError(
            f"{path}: dimension mismatch in header: {header}"
        )
    episodes = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise EpisodeFormatError(f"{path}: line {lineno}: malformed record: {e}") from e
        try:
            episodes.append(_episode_from_record(rec))
        except (KeyError, TypeError, EpisodeInvariantError) as e:
            raise EpisodeFormatError(f"{path}: line {lineno}: invalid episode: {e}") from e
    return episodes
