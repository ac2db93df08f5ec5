"""MDP vocabulary for cell-pair traffic steering.

States observe a serving/target cell pair, actions are the six normalized
control knobs, and transitions are serialized as line-delimited JSON for
offline training. All value types are immutable after construction.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DatasetFormatError

STATE_FEATURES = (
    "serving_freq_mhz",
    "target_freq_mhz",
    "time_of_day",
    "day_of_week",
    "serving_prb_util",
    "target_prb_util",
    "serving_throughput_mbps",
    "target_throughput_mbps",
)
ACTION_FIELDS = (
    "offload_allowed",
    "max_rc",
    "rc_headroom",
    "delta_rc",
    "rsrp_cmlb_filter",
    "cio",
)
STATE_DIM = len(STATE_FEATURES)
ACTION_DIM = len(ACTION_FIELDS)

DATASET_SCHEMA = "carl-transitions-v1"

# day_of_week is an integer 0..6; its normalization bounds are pinned so the
# normalized component is always dow/6 regardless of which days the training
# data happens to contain.
DAY_OF_WEEK_INDEX = STATE_FEATURES.index("day_of_week")
DAY_OF_WEEK_BOUNDS = (0.0, 6.0)


@dataclass(frozen=True)
class TsState:
    """Observation for one ordered (serving, target) cell pair."""

    serving_freq_mhz: float
    target_freq_mhz: float
    time_of_day: float
    day_of_week: int
    serving_prb_util: float
    target_prb_util: float
    serving_throughput_mbps: float
    target_throughput_mbps: float

    def __post_init__(self):
        if not 0.0 <= self.time_of_day < 1.0:
            raise ValueError(f"time_of_day must be in [0,1), got {self.time_of_day}")
        if self.day_of_week not in range(7):
            raise ValueError(f"day_of_week must be in 0..6, got {self.day_of_week}")
        for name in ("serving_prb_util", "target_prb_util"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        for name in ("serving_throughput_mbps", "target_throughput_mbps",
                     "serving_freq_mhz", "target_freq_mhz"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in STATE_FEATURES], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "TsState":
        if len(values) != STATE_DIM:
            raise ValueError(f"state needs {STATE_DIM} values, got {len(values)}")
        kwargs = dict(zip(STATE_FEATURES, (float(v) for v in values)))
        kwargs["day_of_week"] = int(round(kwargs["day_of_week"]))
        return cls(**kwargs)


@dataclass(frozen=True)
class TsAction:
    """Six control-knob values, each strictly positive and <= 1.

    Strict positivity keeps the logarithm in the policy training loss finite;
    offload_allowed is read as a boolean at threshold 0.5, the remaining knobs
    map affinely onto their domain-unit ranges.
    """

    offload_allowed: float
    max_rc: float
    rc_headroom: float
    delta_rc: float
    rsrp_cmlb_filter: float
    cio: float

    def __post_init__(self):
        for name in ACTION_FIELDS:
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 < v <= 1.0):
                raise ValueError(f"{name} must be in (0,1], got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in ACTION_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "TsAction":
        if len(values) != ACTION_DIM:
            raise ValueError(f"action needs {ACTION_DIM} values, got {len(values)}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class Transition:
    """One offline-RL tuple plus cell-pair metadata."""

    state: TsState
    action: TsAction
    reward: float
    next_state: TsState
    epoch_index: int
    serving_cell_id: int
    target_cell_id: int

    def __post_init__(self):
        if not (math.isfinite(self.reward) and self.reward >= 0.0):
            raise ValueError(f"reward must be finite and >= 0, got {self.reward}")


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature min/max used to map raw state vectors into [0,1]."""

    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self):
        if len(self.mins) != STATE_DIM or len(self.maxs) != STATE_DIM:
            raise ConfigError("normalization stats must cover all 8 state features")
        for lo, hi in zip(self.mins, self.maxs):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ConfigError(f"invalid normalization bounds ({lo}, {hi})")

    @classmethod
    def from_states(cls, states: np.ndarray) -> "NormalizationStats":
        """Compute bounds from an (N, 8) array of raw state vectors."""
        if states.ndim != 2 or states.shape[1] != STATE_DIM:
            raise ConfigError(f"expected (N, {STATE_DIM}) state array")
        mins = states.min(axis=0).astype(float)
        maxs = states.max(axis=0).astype(float)
        mins[DAY_OF_WEEK_INDEX], maxs[DAY_OF_WEEK_INDEX] = DAY_OF_WEEK_BOUNDS
        return cls(tuple(mins), tuple(maxs))

    @classmethod
    def unit(cls) -> "NormalizationStats":
        """Identity scaling: every feature already lives in [0,1]."""
        return cls((0.0,) * STATE_DIM, (1.0,) * STATE_DIM)

    def to_json_dict(self) -> dict:
        return {"mins": list(self.mins), "maxs": list(self.maxs)}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "NormalizationStats":
        try:
            return cls(tuple(float(v) for v in obj["mins"]),
                       tuple(float(v) for v in obj["maxs"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed normalization stats: {exc}") from exc


def normalize_state(raw: TsState | np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """Map a raw state onto [0,1]^8 using per-feature min/max.

    Features with min == max are degenerate and map to 0.5; everything else is
    (raw - min) / (max - min) clamped into [0,1].
    """
    if stats is None:
        raise ConfigError("normalization stats are required")
    vec = raw.as_array() if isinstance(raw, TsState) else np.asarray(raw, dtype=float)
    return normalize_state_batch(vec.reshape(1, -1), stats)[0]


def normalize_state_batch(raw: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    if stats is None:
        raise ConfigError("normalization stats are required")
    raw = np.asarray(raw, dtype=float)
    mins = np.asarray(stats.mins)
    maxs = np.asarray(stats.maxs)
    span = maxs - mins
    degenerate = span == 0.0
    safe_span = np.where(degenerate, 1.0, span)
    out = (raw - mins) / safe_span
    out = np.clip(out, 0.0, 1.0)
    out[:, degenerate] = 0.5
    return out


def compute_reward(downlink_volume_mbits: float, transmission_time_s: float) -> float:
    """Throughput in Mbps: downlink volume (Mbits) over transmission time (s)."""
    if transmission_time_s <= 0.0:
        raise ValueError(f"transmission time must be > 0, got {transmission_time_s}")
    if downlink_volume_mbits < 0.0:
        raise ValueError(f"downlink volume must be >= 0, got {downlink_volume_mbits}")
    return downlink_volume_mbits / transmission_time_s


@dataclass(frozen=True)
class OfflineDataset:
    """An ordered collection of transitions plus the scaling used to train on it.

    ``terminals`` is derived, not stored on disk: a transition is terminal when
    the file contains no record for the same cell pair at the next epoch index,
    which marks the final control interval of each logged run.
    """

    transitions: tuple[Transition, ...]
    normalization: NormalizationStats
    warnings: tuple[str, ...] = ()

    @classmethod
    def from_transitions(cls, transitions: Iterable[Transition],
                         normalization: NormalizationStats | None = None,
                         warnings: Iterable[str] = ()) -> "OfflineDataset":
        transitions = tuple(transitions)
        if normalization is None:
            if not transitions:
                raise ConfigError("cannot infer normalization from an empty dataset")
            states = np.array([t.state.as_array() for t in transitions]
                              + [t.next_state.as_array() for t in transitions])
            normalization = NormalizationStats.from_states(states)
        return cls(transitions, normalization, tuple(warnings))

    def __len__(self) -> int:
        return len(self.transitions)

    def state_matrix(self) -> np.ndarray:
        return np.array([t.state.as_array() for t in self.transitions], dtype=float)

    def next_state_matrix(self) -> np.ndarray:
        return np.array([t.next_state.as_array() for t in self.transitions], dtype=float)

    def action_matrix(self) -> np.ndarray:
        return np.array([t.action.as_array() for t in self.transitions], dtype=float)

    def reward_vector(self) -> np.ndarray:
        return np.array([t.reward for t in self.transitions], dtype=float)

    def terminal_vector(self) -> np.ndarray:
        """True where no same-pair transition exists at epoch_index + 1."""
        keys = {(t.serving_cell_id, t.target_cell_id, t.epoch_index) for t in self.transitions}
        return np.array(
            [(t.serving_cell_id, t.target_cell_id, t.epoch_index + 1) not in keys
             for t in self.transitions],
            dtype=bool,
        )


def _validate_record(obj: dict, line: int) -> Transition:
    required = ("serving_cell", "target_cell", "epoch", "state", "action", "reward", "next_state")
    for key in required:
        if key not in obj:
            raise DatasetFormatError("missing key", line=line, field=key)
    for key, n in (("state", STATE_DIM), ("action", ACTION_DIM), ("next_state", STATE_DIM)):
        if not isinstance(obj[key], list) or len(obj[key]) != n:
            raise DatasetFormatError(f"expected array of {n} numbers", line=line, field=key)
    try:
        state = TsState.from_array(obj["state"])
    except ValueError as exc:
        raise DatasetFormatError(str(exc), line=line, field="state") from exc
    try:
        next_state = TsState.from_array(obj["next_state"])
    except ValueError as exc:
        raise DatasetFormatError(str(exc), line=line, field="next_state") from exc
    try:
        action = TsAction.from_array(obj["action"])
    except ValueError as exc:
        raise DatasetFormatError(str(exc), line=line, field="action") from exc
    try:
        return Transition(
            state=state,
            action=action,
            reward=float(obj["reward"]),
            next_state=next_state,
            epoch_index=int(obj["epoch"]),
            serving_cell_id=int(obj["serving_cell"]),
            target_cell_id=int(obj["target_cell"]),
        )
    except (ValueError, TypeError) as exc:
        raise DatasetFormatError(str(exc), line=line, field="reward") from exc


def write_dataset(dataset: OfflineDataset, path: str | Path) -> None:
    """Write the line-delimited transition file (header line first)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        header = {"schema": DATASET_SCHEMA,
                  "normalization": dataset.normalization.to_json_dict()}
        fh.write(json.dumps(header) + "\n")
        for t in dataset.transitions:
            record = {
                "serving_cell": t.serving_cell_id,
                "target_cell": t.target_cell_id,
                "epoch": t.epoch_index,
                "state": list(t.state.as_array()),
                "action": list(t.action.as_array()),
                "reward": t.reward,
                "next_state": list(t.next_state.as_array()),
            }
            fh.write(json.dumps(record) + "\n")
    os.replace(tmp, path)


def read_dataset(path: str | Path) -> OfflineDataset:
    """Read a transition file; empty files yield an empty dataset with a warning."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    warnings: list[str] = []
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        warnings.append(f"{path}: empty dataset file")
        return OfflineDataset((), NormalizationStats.unit(), tuple(warnings))
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"header is not valid JSON: {exc}", line=1) from exc
    if not isinstance(header, dict) or header.get("schema") != DATASET_SCHEMA:
        raise DatasetFormatError(f"expected schema '{DATASET_SCHEMA}'", line=1, field="schema")
    if "normalization" not in header:
        raise DatasetFormatError("missing normalization", line=1, field="normalization")
    stats = NormalizationStats.from_json_dict(header["normalization"])

    transitions = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"not valid JSON: {exc}", line=i) from exc
        transitions.append(_validate_record(obj, line=i))
    if not transitions:
        warnings.append(f"{path}: dataset contains no transitions")
    return OfflineDataset(tuple(transitions), stats, tuple(warnings))
