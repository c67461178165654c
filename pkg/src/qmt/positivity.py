"""Weak and strong positivity of decoherence functionals.

Weak positivity (mu(X) >= 0 for every event X) is decided by enumerating all
2^n - 1 nonempty subsets with a Gray-code scan: consecutive subsets differ by
one atom, so the running sum is adjusted by one row/column in O(n).  The scan
may be partitioned across contiguous Gray ranges; results are reduced so the
reported witnesses do not depend on the partitioning (ties broken by least
bitmask).

Strong positivity (the matrix D(X_i;X_j) over any finite collection of events
is positive semidefinite) is decided on the atom matrix alone: for any
collection of events with 0/1 incidence matrix A, the collection matrix is
A D A^dagger, a congruence that preserves positive semidefiniteness, so
atom-matrix PSD is equivalent to the general condition.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import QmtError
from .linalg import eigen_zero_tol, hermitian_eigen, signature_counts
from .measure import DecoherenceFunctional
from .space import SUBSET_SCAN_MAX_ATOMS, Event

WEAK_POSITIVITY_TOL = 1e-10
ZERO_MASK_CAP = 32
_LOW_BITS = 10


def _thread_count() -> int:
    raw = os.environ.get("QMT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class SubsetScan:
    """Summary of mu over every nonempty subset of the atoms."""

    n_atoms: int
    tol: float
    min_mu: float
    min_mask: int
    violation_count: int
    least_violator: Optional[int]
    zero_count: int
    zero_masks: tuple[int, ...]
    worst: tuple[tuple[float, int], ...] = ()  # most-violated (mu, mask) pairs

    @property
    def subsets_scanned(self) -> int:
        return (1 << self.n_atoms) - 1


def naive_subset_measures(R: np.ndarray) -> np.ndarray:
    """mu for every subset by direct double sums; reference for small n."""
    n = R.shape[0]
    if n > 16:
        raise ValueError("naive enumeration limited to 16 atoms")
    out = np.zeros(1 << n)
    for mask in range(1 << n):
        atoms = [i for i in range(n) if mask >> i & 1]
        out[mask] = R[np.ix_(atoms, atoms)].sum()
    return out


def _subset_sums(w: np.ndarray) -> np.ndarray:
    """table[mask] = sum of w over the set bits of mask."""
    table = np.zeros(1)
    for x in range(len(w)):
        table = np.concatenate([table, table + w[x]])
    return table


def _low_subset_measures(R: np.ndarray, k: int) -> np.ndarray:
    """mu over subsets of the first k atoms only."""
    table = np.zeros(1)
    for x in range(k):
        cross = _subset_sums(R[:x, x])
        table = np.concatenate([table, table + R[x, x] + 2.0 * cross])
    return table


class _Partial:
    __slots__ = ("min_mu", "candidates", "violations", "least_violator", "zeros",
                 "zero_masks", "worst")

    def __init__(self):
        self.min_mu = np.inf
        self.candidates: list[tuple[float, int]] = []
        self.violations = 0
        self.least_violator: Optional[int] = None
        self.zeros = 0
        self.zero_masks: list[int] = []
        self.worst: list[tuple[float, int]] = []


def _scan_range(R: np.ndarray, k: int, qlow: np.ndarray, start: int, stop: int,
                tol: float, zero_cap: int, worst_cap: int = 1) -> _Partial:
    """Scan high-part Gray positions [start, stop); low part is vectorized.

    The high-atom subset follows the reflected Gray sequence, so each step
    toggles exactly one atom and updates the running measure in O(n).
    """
    n = R.shape[0]
    part = _Partial()
    h = start ^ (start >> 1)
    # initialize the running state for the high subset at position `start`
    high_atoms = [k + b for b in range(n - k) if h >> b & 1]
    r = R[high_atoms, :].sum(axis=0) if high_atoms else np.zeros(n)
    s_high = float(R[np.ix_(high_atoms, high_atoms)].sum()) if high_atoms else 0.0
    tie = tol * 1e-2 + 1e-300

    for pos in range(start, stop):
        if pos != start:
            g = pos ^ (pos >> 1)
            bit = (g ^ h).bit_length() - 1
            u = k + bit
            if g >> bit & 1:
                s_high += R[u, u] + 2.0 * r[u]
                r = r + R[u]
            else:
                r = r - R[u]
                s_high -= R[u, u] + 2.0 * r[u]
            h = g
        high_mask = h << k
        vals = qlow + 2.0 * _subset_sums(r[:k]) + s_high
        lo0 = 0
        if h == 0:
            lo0 = 1  # skip the empty subset
        block = vals[lo0:]
        bmin = float(block.min())
        if bmin < part.min_mu + tie:
            part.min_mu = min(part.min_mu, bmin)
            bargs = int(block.argmin()) + lo0
            part.candidates.append((bmin, high_mask | bargs))
        viol = np.nonzero(block < -tol)[0]
        if viol.size:
            part.violations += int(viol.size)
            cand = high_mask | (int(viol[0]) + lo0)
            if part.least_violator is None or cand < part.least_violator:
                part.least_violator = cand
            if worst_cap > 1:
                take = viol
                if viol.size > worst_cap:
                    take = viol[np.argpartition(block[viol], worst_cap)[:worst_cap]]
                part.worst.extend(
                    (float(block[i]), high_mask | (int(i) + lo0)) for i in take)
                if len(part.worst) > 4 * worst_cap:
                    part.worst.sort()
                    del part.worst[worst_cap:]
        zer = np.nonzero(np.abs(block) <= tol)[0]
        if zer.size:
            part.zeros += int(zer.size)
            if len(part.zero_masks) < zero_cap:
                for z in zer[: zero_cap - len(part.zero_masks)]:
                    part.zero_masks.append(high_mask | (int(z) + lo0))
    return part


def scan_subset_measures(R: np.ndarray, tol: float = WEAK_POSITIVITY_TOL,
                         zero_cap: int = ZERO_MASK_CAP,
                         threads: Optional[int] = None,
                         worst_cap: int = 1) -> SubsetScan:
    """Gray-code scan of mu over all nonempty subsets of a real symmetric matrix."""
    R = np.ascontiguousarray(R, dtype=float)
    n = R.shape[0]
    if n > SUBSET_SCAN_MAX_ATOMS:
        raise QmtError(f"subset scan limited to {SUBSET_SCAN_MAX_ATOMS} atoms, got {n}")
    k = min(n, _LOW_BITS)
    qlow = _low_subset_measures(R, k)
    n_high = 1 << (n - k)
    threads = _thread_count() if threads is None else max(1, threads)
    threads = min(threads, n_high)
    bounds = np.linspace(0, n_high, threads + 1, dtype=int)
    jobs = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
    if len(jobs) == 1:
        parts = [_scan_range(R, k, qlow, jobs[0][0], jobs[0][1], tol, zero_cap, worst_cap)]
    else:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            parts = list(pool.map(
                lambda ab: _scan_range(R, k, qlow, ab[0], ab[1], tol, zero_cap, worst_cap),
                jobs))

    min_mu = min(p.min_mu for p in parts)
    tie = tol * 1e-2 + 1e-300
    candidates = [m for p in parts for (v, m) in p.candidates if v <= min_mu + tie]
    # settle ties (and cross-partition roundoff) by exact re-evaluation
    best_mask = None
    best_val = np.inf
    for m in sorted(candidates):
        atoms = [i for i in range(n) if m >> i & 1]
        v = float(R[np.ix_(atoms, atoms)].sum())
        if v < best_val - tie:
            best_val, best_mask = v, m
    zero_masks = sorted({m for p in parts for m in p.zero_masks})[:zero_cap]
    violators = [p.least_violator for p in parts if p.least_violator is not None]
    worst = sorted({(v, m) for p in parts for (v, m) in p.worst})[:worst_cap] \
        if worst_cap > 1 else ()
    return SubsetScan(
        n_atoms=n,
        tol=tol,
        min_mu=min_mu,
        min_mask=int(best_mask),
        violation_count=sum(p.violations for p in parts),
        least_violator=min(violators) if violators else None,
        zero_count=sum(p.zeros for p in parts),
        zero_masks=tuple(zero_masks),
        worst=tuple(worst),
    )


@dataclass
class PositivityReport:
    """Outcome of a weak or strong positivity check.

    holds implies witness is None; boundary (some subset measure or
    eigenvalue exactly zero within tolerance) can only be set when the
    check holds.
    """

    kind: str  # "weak" | "strong"
    holds: bool
    boundary: bool
    tol: float
    witness_event: Optional[Event] = None
    witness_value: Optional[float] = None
    min_mu: Optional[float] = None
    min_event: Optional[Event] = None
    violation_count: int = 0
    zero_count: int = 0
    zero_masks: tuple[int, ...] = ()
    spectrum: Optional[np.ndarray] = None
    signature: Optional[tuple[int, int, int]] = None
    scan: Optional[SubsetScan] = field(default=None, repr=False)


def check_weak_positivity(df: DecoherenceFunctional,
                          tol: float = WEAK_POSITIVITY_TOL,
                          threads: Optional[int] = None) -> PositivityReport:
    """Scan every nonempty subset; violation means mu(X) < -tol."""
    scan = scan_subset_measures(df.real_part(), tol=tol, threads=threads)
    holds = scan.violation_count == 0
    witness_event = None
    witness_value = None
    if not holds:
        witness_event = Event(df.space, scan.least_violator)
        witness_value = df.mu(witness_event)
    return PositivityReport(
        kind="weak",
        holds=holds,
        boundary=holds and scan.zero_count > 0,
        tol=tol,
        witness_event=witness_event,
        witness_value=witness_value,
        min_mu=scan.min_mu,
        min_event=Event(df.space, scan.min_mask),
        violation_count=scan.violation_count,
        zero_count=scan.zero_count,
        zero_masks=scan.zero_masks,
        scan=scan,
    )


def check_strong_positivity(df: DecoherenceFunctional,
                            zero_tol: Optional[float] = None) -> PositivityReport:
    """Positive semidefiniteness of the atom matrix (see module docstring)."""
    if zero_tol is None:
        zero_tol = eigen_zero_tol(df.matrix)
    w, _ = hermitian_eigen(df.matrix)
    sig = signature_counts(w, zero_tol)
    holds = sig[0] == 0
    return PositivityReport(
        kind="strong",
        holds=holds,
        boundary=holds and sig[1] > 0,
        tol=zero_tol,
        witness_value=None if holds else float(w[0]),
        zero_count=sig[1],
        spectrum=w,
        signature=sig,
    )


def eigensignature(df: DecoherenceFunctional,
                   tol: Optional[float] = None) -> tuple[int, int, int]:
    """(n_negative, n_zero, n_positive) of the atom matrix spectrum."""
    if tol is None:
        tol = eigen_zero_tol(df.matrix)
    w, _ = hermitian_eigen(df.matrix)
    return signature_counts(w, tol)
