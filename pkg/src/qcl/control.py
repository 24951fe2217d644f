"""Piecewise-constant control fields and their discrete Fourier description.

A protocol is a vector of M real amplitudes held constant over consecutive
intervals of length dt = T/M.  The DFT here is the plain unnormalized
transform, evaluated by direct summation (M stays at desk scale, <= 64).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = ["ControlField", "FrequencySpec", "Spectrum", "dft", "power"]


@dataclass(frozen=True, eq=False)
class ControlField:
    """M real amplitudes over a total duration T; dt is always derived."""

    values: np.ndarray
    total_time: float

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("a control field needs at least one amplitude")
        if not np.all(np.isfinite(vals)):
            raise ValueError("control amplitudes must be finite")
        t = float(self.total_time)
        if not (np.isfinite(t) and t > 0):
            raise ValueError("total_time must be positive and finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "total_time", t)

    @property
    def n_pulses(self) -> int:
        return self.values.size

    @property
    def dt(self) -> float:
        return self.total_time / self.n_pulses

    def with_values(self, values) -> "ControlField":
        return ControlField(values=values, total_time=self.total_time)

    def to_json(self) -> str:
        return json.dumps({"T": self.total_time, "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ControlField":
        doc = json.loads(text)
        return cls(values=np.asarray(doc["values"], dtype=float), total_time=float(doc["T"]))


@dataclass(frozen=True)
class FrequencySpec:
    """Kept DFT indices, closed under k -> (M-k) % M and always containing 0.

    A real signal cannot zero |X_k| without zeroing its mirror |X_{M-k}|,
    and a nonzero mean requires X_0 != 0, so the user-facing set is closed
    automatically.  The raw requested indices are preserved for reporting.
    """

    m: int
    kept: frozenset
    requested: tuple

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        for k in self.kept:
            if not (0 <= k < self.m):
                raise ValueError(f"kept index {k} outside [0, {self.m - 1}]")
        if 0 not in self.kept:
            raise ValueError("kept set must contain index 0")
        mirrored = {(self.m - k) % self.m for k in self.kept}
        if mirrored != set(self.kept):
            raise ValueError("kept set must be closed under k -> (M - k) % M")

    @classmethod
    def closure(cls, indices, m: int) -> "FrequencySpec":
        """Build a spec from raw indices, closing under the mirror map and adding 0."""
        requested = tuple(sorted(set(int(k) for k in indices)))
        for k in requested:
            if not (0 <= k < m):
                raise ValueError(f"index {k} outside [0, {m - 1}]")
        kept = {0}
        for k in requested:
            kept.add(k)
            kept.add((m - k) % m)
        return cls(m=m, kept=frozenset(kept), requested=requested)

    @property
    def excluded(self) -> tuple:
        return tuple(k for k in range(self.m) if k not in self.kept)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex DFT components X_0 .. X_{M-1}."""

    components: np.ndarray

    def __post_init__(self):
        comps = np.atleast_1d(np.asarray(self.components, dtype=complex))
        object.__setattr__(self, "components", comps)

    @property
    def size(self) -> int:
        return self.components.size


def dft(field: ControlField) -> Spectrum:
    """X_k = sum_n omega_{n+1} exp(-i 2 pi k n / M), by direct summation."""
    m = field.n_pulses
    k = np.arange(m)
    phases = np.exp(-2j * np.pi * np.outer(k, k) / m)
    return Spectrum(components=phases @ field.values)


def power(spectrum: Spectrum, k: int) -> float:
    """|X_k|^2 for a single index."""
    if not (0 <= k < spectrum.size):
        raise IndexError(f"index {k} outside [0, {spectrum.size - 1}]")
    return float(abs(spectrum.components[k]) ** 2)
