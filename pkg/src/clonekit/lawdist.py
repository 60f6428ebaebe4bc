"""Exact and empirical L1 distances over lattice-supported laws.

All distances are reported in the L1 convention (twice the total-variation
distance); ``as_tv`` divides by two for display.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class EmpiricalLaw:
    """A pmf on sorted integer support points."""

    support: np.ndarray
    mass: np.ndarray
    sample_count: int | None = None

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=np.int64)
        mass = np.asarray(self.mass, dtype=float)
        if support.shape != mass.shape or support.ndim != 1:
            raise ValueError("support and mass must be parallel 1-d arrays")
        if support.size == 0:
            raise ValueError("empty support")
        if np.any(np.diff(support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(mass < -1e-15):
            raise ValueError("negative mass")
        total = float(mass.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mass sums to {total}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", np.maximum(mass, 0.0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("point,mass\n")
        for k, w in zip(self.support, self.mass):
            buf.write(f"{int(k)},{w:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, sample_count: int | None = None) -> "EmpiricalLaw":
        lines = [ln for ln in text.strip().splitlines() if ln and not ln.startswith("#")]
        if lines and lines[0].startswith("point"):
            lines = lines[1:]
        pts, ws = [], []
        for ln in lines:
            k, w = ln.split(",")
            pts.append(int(k))
            ws.append(float(w))
        return cls(np.array(pts), np.array(ws), sample_count)


def pmf_l1(p: EmpiricalLaw, q: EmpiricalLaw) -> float:
    """Sum of |p(k) - q(k)| over the union support; in [0, 2]."""
    keys = np.union1d(p.support, q.support)
    pw = np.zeros(keys.size)
    qw = np.zeros(keys.size)
    pw[np.searchsorted(keys, p.support)] = p.mass
    qw[np.searchsorted(keys, q.support)] = q.mass
    return float(np.abs(pw - qw).sum())


def as_tv(l1: float) -> float:
    """Total-variation convention (half the L1 value)."""
    return 0.5 * l1


def empirical_pmf(samples: Sequence[int] | np.ndarray) -> EmpiricalLaw:
    """Normalized counts of an integer sample."""
    arr = np.asarray(samples, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("empty sample")
    support, counts = np.unique(arr, return_counts=True)
    return EmpiricalLaw(support, counts / arr.size, sample_count=int(arr.size))


def mixture_pmf(atom_pmfs: Iterable[tuple[EmpiricalLaw, float]]) -> EmpiricalLaw:
    """Weighted superposition of pmfs; weights must sum to 1."""
    pairs = list(atom_pmfs)
    if not pairs:
        raise ValueError("empty mixture")
    weights = np.array([w for _, w in pairs], dtype=float)
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"mixture weights sum to {weights.sum()}, not 1")
    keys = np.concatenate([law.support for law, _ in pairs])
    vals = np.concatenate([law.mass * w for (law, _), w in zip(pairs, weights)])
    support, inverse = np.unique(keys, return_inverse=True)
    mass = np.zeros(support.size)
    np.add.at(mass, inverse, vals)
    mass /= mass.sum()
    counts = [law.sample_count for law, _ in pairs]
    total = sum(c for c in counts if c) or None
    return EmpiricalLaw(support, mass, sample_count=total)
