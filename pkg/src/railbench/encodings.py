"""The three state/action encodings, their inference-time decoders, and chunk assembly.

The encodings differ only in how they treat the rail components of the state
and of the target-state actions:

* ``abs-abs``    — states and actions pass through unchanged.
* ``eps-eps``    — the state captured at each episode's first timestep is the
                   origin; rail components of every state and action in the
                   episode are expressed relative to it.
* ``zero-chunk`` — the rail state is replaced by zeros; rail components of the
                   actions in a chunk are expressed relative to the state at
                   the timestep the chunk was issued.

Non-rail joints are left absolute by every encoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .episodes import Episode, RAIL_DIMS, STATE_DIM, as_joint_vector


class StrategyKind(str, Enum):
    ABS_ABS = "abs-abs"
    EPS_EPS = "eps-eps"
    ZERO_CHUNK = "zero-chunk"


STRATEGY_TOKENS = tuple(k.value for k in StrategyKind)


@dataclass(frozen=True)
class RepresentationStrategy:
    """A choice of encoding plus the joint subset it transforms.

    ``zero_full_state`` is an ablation switch for ``zero-chunk``: zero every
    state dimension instead of only the rails.
    """

    kind: StrategyKind
    rail_dims: tuple[int, ...] = RAIL_DIMS
    zero_full_state: bool = False

    def __post_init__(self) -> None:
        if not all(0 <= d < STATE_DIM for d in self.rail_dims):
            raise ValueError(f"rail_dims {self.rail_dims} not within [0, {STATE_DIM})")
        if len(set(self.rail_dims)) != len(self.rail_dims):
            raise ValueError(f"rail_dims {self.rail_dims} contains duplicates")

    @property
    def token(self) -> str:
        return self.kind.value

    @classmethod
    def from_token(cls, token: str, **kwargs) -> "RepresentationStrategy":
        try:
            kind = StrategyKind(token)
        except ValueError:
            raise ValueError(
                f"unknown strategy {token!r}, expected one of {STRATEGY_TOKENS}"
            ) from None
        return cls(kind=kind, **kwargs)


@dataclass(frozen=True)
class EpisodeOrigin:
    """The state captured once at episode start; immutable for the episode."""

    start_state: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "start_state", as_joint_vector(self.start_state))


@dataclass(eq=False)
class ChunkSample:
    """One training example: encoded inputs plus an encoded action chunk.

    ``mask`` is a prefix of trues followed by falses; the false tail marks
    padding past the end of the source episode. ``origin`` records the
    subtraction reference that produced the encoded values, for audit.
    """

    episode_id: int
    t: int
    obs: np.ndarray          # (OBS_DIM,) flattened task observation
    state_enc: np.ndarray    # (STATE_DIM,) encoded, pre-normalization
    action_chunk: np.ndarray  # (horizon, STATE_DIM) encoded
    mask: np.ndarray         # (horizon,) bool, True = real step
    origin: np.ndarray       # (STATE_DIM,) subtraction reference used

    @property
    def horizon(self) -> int:
        return self.action_chunk.shape[0]


def encode_state(
    strategy: RepresentationStrategy,
    state: np.ndarray,
    origin: EpisodeOrigin,
) -> np.ndarray:
    """Encode one proprioceptive state. Non-rail dims are returned untouched."""
    state = as_joint_vector(state)
    out = state.copy()
    dims = list(strategy.rail_dims)
    if strategy.kind is StrategyKind.EPS_EPS:
        out[dims] = out[dims] - origin.start_state[dims]
    elif strategy.kind is StrategyKind.ZERO_CHUNK:
        if strategy.zero_full_state:
            out[:] = 0.0
        else:
            out[dims] = 0.0
    return out


def encode_action_chunk(
    strategy: RepresentationStrategy,
    actions: Sequence[np.ndarray] | np.ndarray,
    state: np.ndarray,
    origin: EpisodeOrigin,
    horizon: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Encode up to ``horizon`` consecutive actions issued from ``state``.

    Short chunks are padded by repeating the final encoded action; the returned
    mask is False on padded entries. Returns ``(chunk, mask)`` with shapes
    ``(horizon, STATE_DIM)`` and ``(horizon,)``.
    """
    acts = np.asarray(actions, dtype=np.float64)
    if acts.ndim != 2 or acts.shape[1] != STATE_DIM:
        raise ValueError(f"actions must have shape (n, {STATE_DIM}), got {acts.shape}")
    n = acts.shape[0]
    if n == 0:
        raise ValueError("empty action chunk")
    if n > horizon:
        raise ValueError(f"chunk of length {n} exceeds horizon {horizon}")
    state = as_joint_vector(state)
    enc = acts.copy()
    dims = list(strategy.rail_dims)
    if strategy.kind is StrategyKind.EPS_EPS:
        enc[:, dims] = enc[:, dims] - origin.start_state[dims]
    elif strategy.kind is StrategyKind.ZERO_CHUNK:
        enc[:, dims] = enc[:, dims] - state[dims]
    if n < horizon:
        pad = np.repeat(enc[-1:, :], horizon - n, axis=0)
        enc = np.vstack([enc, pad])
    mask = np.zeros(horizon, dtype=bool)
    mask[:n] = True
    return enc, mask


def decode_action(
    strategy: RepresentationStrategy,
    action_enc: np.ndarray,
    state: np.ndarray,
    origin: EpisodeOrigin,
) -> np.ndarray:
    """Invert the action encoding back to an absolute target joint command.

    ``state`` must be the state at chunk issuance for ``zero-chunk``; it is
    ignored by the other strategies.
    """
    out = as_joint_vector(action_enc).copy()
    dims = list(strategy.rail_dims)
    if strategy.kind is StrategyKind.EPS_EPS:
        out[dims] = out[dims] + origin.start_state[dims]
    elif strategy.kind is StrategyKind.ZERO_CHUNK:
        state = as_joint_vector(state)
        out[dims] = out[dims] + state[dims]
    return out


def make_chunks(
    episode: Episode,
    strategy: RepresentationStrategy,
    horizon: int,
) -> list[ChunkSample]:
    """Build one ChunkSample per timestep (stride 1), padding past the episode end."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if not episode.steps:
        raise ValueError(f"episode {episode.id} is empty")
    states = episode.states()
    actions = episode.actions()
    origin = EpisodeOrigin(episode.start_state)
    n = len(episode.steps)
    samples = []
    for t in range(n):
        window = actions[t:t + horizon]
        chunk, mask = encode_action_chunk(strategy, window, states[t], origin, horizon)
        if strategy.kind is StrategyKind.EPS_EPS:
            origin_rec = origin.start_state.copy()
        elif strategy.kind is StrategyKind.ZERO_CHUNK:
            origin_rec = states[t].copy()
        else:
            origin_rec = np.zeros(STATE_DIM)
        samples.append(
            ChunkSample(
                episode_id=episode.id,
                t=t,
                obs=episode.steps[t].obs.to_vector(),
                state_enc=encode_state(strategy, states[t], origin),
                action_chunk=chunk,
                mask=mask,
                origin=origin_rec,
            )
        )
    return samples
