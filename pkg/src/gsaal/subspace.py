"""Feature-subspace masks and the averaged-marginal statistic.

A mask is a boolean vector over the ``d`` features; projecting a point keeps
the selected coordinates in ascending index order. Masks with no feature or
with every feature selected are rejected.

:class:`DiscreteDistribution` is a small exact pmf used to check the
averaged-marginal statistic by enumeration; it is not used in training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CapacityError, ShapeError

MAX_ORACLE_DIM = 4


@dataclass(frozen=True, eq=False)
class SubspaceMask:
    selected: np.ndarray

    def __post_init__(self):
        sel = np.asarray(self.selected, dtype=bool).ravel().copy()
        sel.flags.writeable = False
        object.__setattr__(self, "selected", sel)
        count = int(sel.sum())
        if count == 0:
            raise ValueError("mask selects no feature")
        if count == sel.size:
            raise ValueError("mask selects every feature; the full space is not a subspace")

    @classmethod
    def from_string(cls, bits: str) -> SubspaceMask:
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"mask string must be 0/1 characters, got {bits!r}")
        return cls(np.array([c == "1" for c in bits]))

    def to_string(self) -> str:
        return "".join("1" if s else "0" for s in self.selected)

    @property
    def dimension(self) -> int:
        return self.selected.size

    @property
    def popcount(self) -> int:
        return int(self.selected.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.selected)

    def __eq__(self, other):
        if not isinstance(other, SubspaceMask):
            return NotImplemented
        return np.array_equal(self.selected, other.selected)

    def __hash__(self):
        return hash(self.selected.tobytes())

    def __repr__(self):
        return f"SubspaceMask({self.to_string()!r})"


@dataclass(frozen=True)
class MaskSet:
    masks: tuple[SubspaceMask, ...]
    dimension: int

    def __post_init__(self):
        masks = tuple(self.masks)
        object.__setattr__(self, "masks", masks)
        if not masks:
            raise ValueError("a MaskSet needs at least one mask")
        for m in masks:
            if m.dimension != self.dimension:
                raise ShapeError(f"mask {m} has length {m.dimension}, expected {self.dimension}")
        if len(set(masks)) != len(masks):
            raise ValueError("masks must be distinct")

    @classmethod
    def from_strings(cls, bits: Iterable[str]) -> MaskSet:
        masks = tuple(SubspaceMask.from_string(b) for b in bits)
        if not masks:
            raise ValueError("a MaskSet needs at least one mask")
        return cls(masks, masks[0].dimension)

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self) -> Iterator[SubspaceMask]:
        return iter(self.masks)

    def __getitem__(self, i: int) -> SubspaceMask:
        return self.masks[i]


def project(mask: SubspaceMask, point: np.ndarray) -> np.ndarray:
    """Selected coordinates of ``point``; works on a vector or a row batch."""
    x = np.asarray(point)
    if x.shape[-1] != mask.dimension:
        raise ShapeError(f"point has {x.shape[-1]} features, mask has {mask.dimension}")
    return x[..., mask.indices]


def default_k(d: int) -> int:
    """ceil(2 * sqrt(d)), computed in integers so perfect squares are exact."""
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    k = math.isqrt(4 * d)
    return k if k * k == 4 * d else k + 1


def capacity(d: int) -> int:
    """Number of legal masks: every binary vector except all-zero and all-one."""
    return 2**d - 2


def draw_masks(d: int, k: int, seed: int | np.random.Generator) -> MaskSet:
    """Draw ``k`` distinct masks uniformly from the legal masks of length ``d``.

    Each candidate is i.i.d. Bernoulli(1/2) per feature; empty, full and
    already drawn candidates are rejected, which leaves the uniform law on
    the remaining legal masks.
    """
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > capacity(d):
        raise CapacityError(f"cannot draw {k} distinct masks for d={d}; at most {capacity(d)} exist")
    rng = np.random.default_rng(seed)
    seen: set[bytes] = set()
    masks = []
    while len(masks) < k:
        sel = rng.random(d) < 0.5
        count = int(sel.sum())
        if count == 0 or count == d:
            continue
        key = sel.tobytes()
        if key in seen:
            continue
        seen.add(key)
        masks.append(SubspaceMask(sel))
    return MaskSet(tuple(masks), d)


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported pmf on Z^d, d <= 4."""

    support: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        support = np.atleast_2d(np.asarray(self.support, dtype=np.int64))
        probs = np.asarray(self.probabilities, dtype=np.float64).ravel()
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probabilities", probs)
        if support.shape[1] > MAX_ORACLE_DIM:
            raise ValueError(f"oracle distributions are limited to d <= {MAX_ORACLE_DIM}")
        if support.shape[0] != probs.size:
            raise ShapeError("support and probabilities differ in length")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        if len({tuple(r) for r in support}) != support.shape[0]:
            raise ValueError("support points must be distinct")

    @property
    def dimension(self) -> int:
        return self.support.shape[1]


def marginal_pdf(dist: DiscreteDistribution, mask: SubspaceMask, projected_point) -> float:
    """Probability that the projection of the random vector equals ``projected_point``."""
    target = np.asarray(projected_point).ravel()
    if target.size != mask.popcount:
        raise ShapeError(f"projected point has {target.size} entries, mask selects {mask.popcount}")
    hits = np.all(project(mask, dist.support) == target, axis=1)
    return float(dist.probabilities[hits].sum())


def averaged_marginal_statistic(
    dist: DiscreteDistribution, masks: Sequence[SubspaceMask] | MaskSet, point
) -> float:
    """Mean over masks of the marginal pmf at the projection of ``point``.

    Duplicate masks are allowed here; they are just repeated terms of the mean.
    """
    masks = list(masks)
    if not masks:
        raise ValueError("need at least one mask")
    point = np.asarray(point).ravel()
    return float(np.mean([marginal_pdf(dist, m, project(m, point)) for m in masks]))
