"""Finite sample spaces and events.

Atoms are fine-grained histories; an event is a subset of atoms stored as a
bitmask, so set algebra is bit arithmetic.  Spaces are small by design: every
exhaustive-enumeration routine in this package states its own size cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import SpaceMismatch

# Exhaustive weak-positivity scans refuse spaces larger than this.
SUBSET_SCAN_MAX_ATOMS = 24


@dataclass(frozen=True)
class SampleSpace:
    """A finite sample space with one human-readable label per atom."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 1:
            raise ValueError("a sample space needs at least one atom")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("atom labels must be distinct")

    @property
    def n_atoms(self) -> int:
        return len(self.labels)

    @property
    def full_mask(self) -> int:
        return (1 << self.n_atoms) - 1

    def atom(self, index: int) -> "Event":
        return Event(self, 1 << index)

    def event(self, atoms: Iterable[int]) -> "Event":
        mask = 0
        for a in atoms:
            mask |= 1 << a
        return Event(self, mask)

    def event_from_labels(self, labels: Iterable[str]) -> "Event":
        return self.event(self.labels.index(lab) for lab in labels)

    def empty(self) -> "Event":
        return Event(self, 0)

    def full(self) -> "Event":
        return Event(self, self.full_mask)

    def index(self, label: str) -> int:
        return self.labels.index(label)


def uniform_labels(n: int, prefix: str = "w") -> tuple[str, ...]:
    return tuple(f"{prefix}{i}" for i in range(n))


@dataclass(frozen=True)
class Event:
    """A subset of a sample space, held as a bitmask over atoms."""

    space: SampleSpace
    mask: int = field(default=0)

    def __post_init__(self):
        if self.mask < 0 or self.mask > self.space.full_mask:
            raise ValueError("event mask has bits outside the sample space")

    def __iter__(self) -> Iterator[int]:
        """Iterate atom indices in increasing order."""
        m = self.mask
        while m:
            low = m & -m
            yield low.bit_length() - 1
            m ^= low

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __or__(self, other: "Event") -> "Event":
        self._check(other)
        return Event(self.space, self.mask | other.mask)

    def __and__(self, other: "Event") -> "Event":
        self._check(other)
        return Event(self.space, self.mask & other.mask)

    def __invert__(self) -> "Event":
        return Event(self.space, self.mask ^ self.space.full_mask)

    def is_empty(self) -> bool:
        return self.mask == 0

    def disjoint_from(self, other: "Event") -> bool:
        self._check(other)
        return self.mask & other.mask == 0

    def labels(self) -> tuple[str, ...]:
        return tuple(self.space.labels[i] for i in self)

    def _check(self, other: "Event") -> None:
        if other.space is not self.space and other.space != self.space:
            raise SpaceMismatch("events live on different sample spaces")


def require_same_space(space: SampleSpace, event: Event) -> None:
    if event.space is not space and event.space != space:
        raise SpaceMismatch("event does not belong to this space")
