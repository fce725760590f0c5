"""Time series of bucket force and pose."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def _check_time(t, what):
    if t.ndim != 1 or len(t) < 2:
        raise ValidationError(f"{what} needs at least two samples")
    if not np.all(np.isfinite(t)):
        raise ValidationError(f"{what} times must be finite")
    if np.any(np.diff(t) <= 0):
        raise ValidationError(f"{what} times must be strictly increasing")


@dataclass(frozen=True, eq=False)
class ForceTrace:
    """Bucket force magnitude (N) against time (s)."""

    t: np.ndarray
    f: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        f = np.array(self.f, dtype=float)
        _check_time(t, "force trace")
        if f.shape != t.shape:
            raise ValidationError("force trace needs one force per time")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise ValidationError("force magnitudes must be finite and non-negative")
        t.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "f", f)

    def __eq__(self, other):
        if not isinstance(other, ForceTrace):
            return NotImplemented
        return (self.label == other.label and np.array_equal(self.t, other.t)
                and np.array_equal(self.f, other.f))

    def __len__(self):
        return len(self.t)

    @property
    def samples(self):
        return list(zip(self.t.tolist(), self.f.tolist()))

    def scaled(self, factor: float, label=None) -> "ForceTrace":
        return ForceTrace(self.t, self.f * factor, self.label if label is None else label)


@dataclass(frozen=True, eq=False)
class PoseTrace:
    """Blade height ``y_p8`` (mm) and bucket angle ``theta4`` (rad) against time."""

    t: np.ndarray
    y_p8: np.ndarray
    theta4: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        y = np.array(self.y_p8, dtype=float)
        a = np.array(self.theta4, dtype=float)
        _check_time(t, "pose trace")
        if y.shape != t.shape or a.shape != t.shape:
            raise ValidationError("pose trace channels must match the time base")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(a))):
            raise ValidationError("pose samples must be finite")
        for name, arr in (("t", t), ("y_p8", y), ("theta4", a)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, PoseTrace):
            return NotImplemented
        return (self.label == other.label and np.array_equal(self.t, other.t)
                and np.array_equal(self.y_p8, other.y_p8)
                and np.array_equal(self.theta4, other.theta4))

    def __len__(self):
        return len(self.t)

    @property
    def samples(self):
        return list(zip(self.t.tolist(), self.y_p8.tolist(), self.theta4.tolist()))
