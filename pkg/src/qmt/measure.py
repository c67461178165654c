"""Classical and quantal measures on a finite sample space.

A classical measure assigns a non-negative weight to every atom.  A quantal
measure is the diagonal of a decoherence functional: a Hermitian matrix
D(x;y) over atoms, extended to events by biadditivity,

    D(X;Y) = sum_{x in X} sum_{y in Y} D(x;y),        mu(X) = D(X;X).

Construction enforces the atom-level axioms (Hermiticity, real non-negative
diagonal); additivity holds by construction because events are always
evaluated through the biadditive extension.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ConditionUndefined, InvalidMeasure
from .space import Event, SampleSpace, require_same_space, uniform_labels

HERMITICITY_TOL = 1e-10
NORMALIZATION_TOL = 1e-10
DIAGONAL_TOL = 1e-10

# Exhaustive sum-rule scans over disjoint event tuples refuse larger spaces.
LEVEL_SCAN_MAX_ATOMS = 12


class ClassicalMeasure:
    """Non-negative atom weights, additive on disjoint events."""

    def __init__(self, space: SampleSpace, weights):
        w = np.asarray(weights, dtype=float)
        if w.shape != (space.n_atoms,):
            raise InvalidMeasure("need one weight per atom")
        if (w < 0).any():
            raise InvalidMeasure("classical weights must be non-negative")
        self.space = space
        self.weights = w
        self.weights.setflags(write=False)

    @classmethod
    def uniform(cls, n_atoms: int) -> "ClassicalMeasure":
        space = SampleSpace(uniform_labels(n_atoms))
        return cls(space, np.full(n_atoms, 1.0 / n_atoms))

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def is_normalized(self, tol: float = NORMALIZATION_TOL) -> bool:
        return abs(self.total - 1.0) <= tol

    def normalized(self) -> "ClassicalMeasure":
        t = self.total
        if t <= 0:
            raise InvalidMeasure("cannot normalize a zero measure")
        return ClassicalMeasure(self.space, self.weights / t)

    def mu(self, X: Event) -> float:
        require_same_space(self.space, X)
        return float(sum(self.weights[i] for i in X))

    def as_decoherence_functional(self) -> "DecoherenceFunctional":
        """Diagonal embedding: D(x;y) = mu(x) delta_xy."""
        return DecoherenceFunctional(self.space, np.diag(self.weights).astype(complex))


class DecoherenceFunctional:
    """Hermitian atom matrix D(x;y); events evaluated by biadditive extension."""

    def __init__(self, space: SampleSpace, matrix, validate: bool = True):
        m = np.asarray(matrix, dtype=complex)
        n = space.n_atoms
        if m.shape != (n, n):
            raise InvalidMeasure(f"matrix must be {n}x{n}")
        if validate:
            herm = np.abs(m - m.conj().T).max()
            if herm > HERMITICITY_TOL:
                raise InvalidMeasure(f"matrix is not Hermitian (residual {herm:.3e})")
            d = np.diag(m)
            if np.abs(d.imag).max(initial=0.0) > DIAGONAL_TOL:
                raise InvalidMeasure("diagonal entries must be real")
            if d.real.min(initial=0.0) < -DIAGONAL_TOL:
                raise InvalidMeasure("diagonal entries must be non-negative")
        self.space = space
        self.matrix = m
        self.matrix.setflags(write=False)

    @property
    def total(self) -> complex:
        return complex(self.matrix.sum())

    def is_normalized(self, tol: float = NORMALIZATION_TOL) -> bool:
        return abs(self.total - 1.0) <= tol

    def normalized(self) -> "DecoherenceFunctional":
        t = self.total.real
        if t <= 0:
            raise InvalidMeasure("cannot normalize: total is not positive")
        return DecoherenceFunctional(self.space, self.matrix / t)

    def pair(self, X: Event, Y: Event) -> complex:
        """Biadditive extension D(X;Y).  Satisfies pair(X,Y) = conj(pair(Y,X))."""
        require_same_space(self.space, X)
        require_same_space(self.space, Y)
        if X.is_empty() or Y.is_empty():
            return 0j
        rows = list(X)
        cols = list(Y)
        return complex(self.matrix[np.ix_(rows, cols)].sum())

    def mu(self, X: Event) -> float:
        """Quantal measure mu(X) = D(X;X); the imaginary part cancels."""
        return self.pair(X, X).real

    def real_part(self) -> np.ndarray:
        """Real part of the atom matrix; mu depends on nothing else."""
        return np.ascontiguousarray(self.matrix.real)


MeasureLike = Union[ClassicalMeasure, DecoherenceFunctional]


def conditional_mu(m: ClassicalMeasure, x: Event, y: Event, tol: float = 1e-12) -> float:
    """mu(x|y) = mu(x & y) / mu(y).

    Undefined (raises ConditionUndefined) when mu(y) vanishes; the convention
    here is to refuse rather than return zero.
    """
    my = m.mu(y)
    if my <= tol:
        raise ConditionUndefined(f"mu(condition) = {my:.3e} is not positive")
    return m.mu(x & y) / my


def interference(m: MeasureLike, events: Sequence[Event]) -> float:
    """Interference functional I_k on k pairwise disjoint events.

    I_k(X_1..X_k) = sum over nonempty S of {1..k} of
    (-1)^(k-|S|) mu(union of X_i, i in S); I_1 = mu, I_2 and I_3 reproduce
    the usual two- and three-slit sum-rule expressions.
    """
    k = len(events)
    if k < 1:
        raise ValueError("need at least one event")
    space = events[0].space
    for e in events:
        require_same_space(space, e)
    union = 0
    for e in events:
        if e.mask & union:
            raise ValueError("events must be pairwise disjoint")
        union |= e.mask
    total = 0.0
    for r in range(1, k + 1):
        sign = (-1) ** (k - r)
        for combo in itertools.combinations(events, r):
            mask = 0
            for e in combo:
                mask |= e.mask
            total += sign * m.mu(Event(space, mask))
    return total


def all_subset_measures(m: MeasureLike) -> np.ndarray:
    """mu of every subset, indexed by bitmask.  Used by the sum-rule scans."""
    n = m.space.n_atoms
    if isinstance(m, ClassicalMeasure):
        table = np.zeros(1)
        for x in range(n):
            table = np.concatenate([table, table + m.weights[x]])
        return table
    R = m.real_part()
    table = np.zeros(1)
    for x in range(n):
        # cross[s] = sum_{y in s} R[y, x] over subsets s of atoms 0..x-1
        cross = np.zeros(1)
        for y in range(x):
            cross = np.concatenate([cross, cross + R[y, x]])
        table = np.concatenate([table, table + R[x, x] + 2.0 * cross])
    return table


def max_interference(m: MeasureLike, k: int, chunk: int = 1 << 15) -> float:
    """Max |I_k| over all tuples of k pairwise disjoint nonempty events.

    Exhaustive: every assignment of atoms to one of the k slots or to none.
    Only defined for spaces with at most LEVEL_SCAN_MAX_ATOMS atoms.
    """
    n = m.space.n_atoms
    if n > LEVEL_SCAN_MAX_ATOMS:
        raise ValueError(f"space too large for exhaustive sum-rule scan (n={n})")
    if k < 1:
        raise ValueError("k must be positive")
    if k > n:
        return 0.0  # no k disjoint nonempty events exist
    table = all_subset_measures(m)
    base = k + 1
    n_assign = base**n
    # precompute the inclusion-exclusion pattern over slot subsets
    slot_subsets = [
        (combo, (-1) ** (k - len(combo)))
        for r in range(1, k + 1)
        for combo in itertools.combinations(range(k), r)
    ]
    worst = 0.0
    for start in range(0, n_assign, chunk):
        codes = np.arange(start, min(start + chunk, n_assign), dtype=np.int64)
        digits = np.empty((len(codes), n), dtype=np.int64)
        c = codes.copy()
        for t in range(n):
            digits[:, t] = c % base
            c //= base
        # bitmask of each slot (slot s is digit value s+1)
        powers = 1 << np.arange(n, dtype=np.int64)
        slot_masks = np.stack(
            [((digits == s + 1) * powers).sum(axis=1) for s in range(k)], axis=1
        )
        keep = (slot_masks != 0).all(axis=1)
        if not keep.any():
            continue
        slot_masks = slot_masks[keep]
        values = np.zeros(slot_masks.shape[0])
        for combo, sign in slot_subsets:
            union = np.zeros(slot_masks.shape[0], dtype=np.int64)
            for s in combo:
                union |= slot_masks[:, s]
            values += sign * table[union]
        worst = max(worst, float(np.abs(values).max()))
    return worst


def measure_level(m: MeasureLike, kmax: int, tol: float = 1e-12):
    """Smallest k <= kmax with I_(k+1) identically zero, or None if none is.

    Exhaustive over all disjoint tuples.  When a level k is found, the next
    sum rule I_(k+2) is checked as well, confirming that higher sum rules
    follow automatically.
    """
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    for k in range(1, kmax + 1):
        if max_interference(m, k + 1) <= tol:
            follow_up = max_interference(m, k + 2)
            if follow_up > tol:
                raise AssertionError(
                    f"hierarchy violated: I_{k + 1} vanishes but I_{k + 2} = {follow_up:.3e}"
                )
            return k
    return None
