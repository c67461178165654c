"""Linear-programming search for the maximal CHSH quantity.

The search space is the set of Hermitian, normalized 16x16 matrices whose
four setting-pair marginals are diagonal and whose every subset measure is
non-negative (weak positivity).  The objective is the CHSH combination Q
under a chosen sign pattern, a linear functional of the marginal diagonals.
The optimum is 4, attained by weakly positive matrices that are far from
strong positivity.

Weak positivity is an exponential constraint family (2^16 - 1 subset rows),
handled by constraint generation: solve a relaxation with a small working
set, run the exact separation oracle (the Gray-code subset scanner) on the
candidate matrix, add the most-violated subset, and repeat until no subset
is violated beyond tolerance.  The reported solution is re-verified against
the full family.

In real-symmetric mode the matrix is parameterized by 136 real variables
(16 diagonal + 120 upper-triangle); imaginary parts are constrained only by
the marginal equalities, which a zero imaginary part satisfies, and they
enter neither the objective nor the weak-positivity rows, so restricting to
the symmetric slice loses no objective value.  Complex mode (256 variables)
is retained for auditing arbitrary inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import epr
from .errors import LpError
from .linalg import hermitian_eigen
from .measure import DecoherenceFunctional
from .positivity import (SubsetScan, check_strong_positivity,
                         check_weak_positivity, scan_subset_measures)

N_ATOMS = 16
VIOLATION_TOL = 1e-9

_UPPER_PAIRS = [(x, y) for x in range(N_ATOMS) for y in range(x + 1, N_ATOMS)]
_UIDX = {(x, y): 16 + k for k, (x, y) in enumerate(_UPPER_PAIRS)}
N_REAL_VARS = 16 + len(_UPPER_PAIRS)   # 136
N_COMPLEX_VARS = N_REAL_VARS + len(_UPPER_PAIRS)  # 256


def _block_atoms(alpha: str, beta: str) -> list[list[int]]:
    """Atoms grouped by the (i, j) outcome pair of the given settings."""
    pa = epr.SETTING_POSITION[alpha]
    pb = epr.SETTING_POSITION[beta]
    groups = [[], [], [], []]
    for x in range(N_ATOMS):
        q = epr.SCENARIO.quad(x)
        groups[2 * (0 if q[pa] == 1 else 1) + (0 if q[pb] == 1 else 1)].append(x)
    return groups


@dataclass
class LpProblem:
    """Explicit rows of the relaxation plus the lazy weak-positivity family."""

    mode: str
    pattern: epr.SignPattern
    n_vars: int
    objective: np.ndarray              # what the simplex maximizes
    chsh_row: np.ndarray               # the CHSH functional of the pattern
    eq_rows: np.ndarray
    eq_rhs: np.ndarray
    ineq_rows: np.ndarray              # rows . v >= ineq_rhs
    ineq_rhs: np.ndarray
    ineq_masks: list[Optional[int]]    # subset mask per row, None for other cuts
    lazy_weak_family: bool = True
    slack_index: Optional[int] = None  # centering slack t, once pinned
    lift: Optional[np.ndarray] = None  # orbit-indicator basis, when reduced

    @property
    def full_inequality_count(self) -> int:
        return (1 << N_ATOMS) - 1

    @property
    def base_n_vars(self) -> int:
        return N_REAL_VARS if self.mode == "real" else N_COMPLEX_VARS

    def subset_row(self, mask: int) -> np.ndarray:
        row = _subset_row(self.base_n_vars, mask)
        if self.lift is not None:
            row = row @ self.lift
        if self.slack_index is not None:
            full = np.zeros(self.n_vars)
            full[:row.shape[0]] = row
            full[self.slack_index] = -1.0
            return full
        return row

    def add_inequality(self, row: np.ndarray, mask: Optional[int],
                       rhs: float = 0.0) -> None:
        self.ineq_rows = np.vstack([self.ineq_rows, row])
        self.ineq_rhs = np.append(self.ineq_rhs, rhs)
        self.ineq_masks.append(mask)

    def pin_objective(self, q_target: float) -> None:
        """Switch to worst-slack maximization on the face Q >= q_target.

        Adds a slack variable t, turns every subset row mu(X) >= 0 into
        mu(X) - t >= 0, adds the row Q >= q_target, and makes t the
        objective.
        """
        if self.slack_index is not None:
            raise LpError("objective already pinned")
        t = self.n_vars
        self.n_vars += 1
        self.slack_index = t
        self.eq_rows = np.hstack([self.eq_rows, np.zeros((self.eq_rows.shape[0], 1))])
        ineq = np.hstack([self.ineq_rows, np.zeros((self.ineq_rows.shape[0], 1))])
        for i, mask in enumerate(self.ineq_masks):
            if mask is not None:
                ineq[i, t] = -1.0
        self.ineq_rows = ineq
        self.chsh_row = np.append(self.chsh_row, 0.0)
        self.add_inequality(self.chsh_row.copy(), None, rhs=q_target)
        self.objective = np.zeros(self.n_vars)
        self.objective[t] = 1.0

    def matrix_from_vars(self, v: np.ndarray) -> np.ndarray:
        if self.lift is not None:
            v = self.lift @ v[:self.lift.shape[1]]
        S = np.zeros((N_ATOMS, N_ATOMS), dtype=complex)
        for x in range(N_ATOMS):
            S[x, x] = v[x]
        for (x, y), k in _UIDX.items():
            S[x, y] += v[k]
            S[y, x] += v[k]
        if self.mode == "complex":
            for j, (x, y) in enumerate(_UPPER_PAIRS):
                S[x, y] += 1j * v[N_REAL_VARS + j]
                S[y, x] -= 1j * v[N_REAL_VARS + j]
        return S


def _subset_row(n_vars: int, mask: int) -> np.ndarray:
    row = np.zeros(n_vars)
    atoms = [x for x in range(N_ATOMS) if mask >> x & 1]
    for x in atoms:
        row[x] = 1.0
    for ai, x in enumerate(atoms):
        for y in atoms[ai + 1:]:
            row[_UIDX[(x, y)]] = 2.0
    return row


def build_max_q_lp(pattern: epr.SignPattern, mode: str = "real") -> LpProblem:
    """Assemble the relaxation: normalization, diagonal marginals, objective.

    The initial inequality working set holds the 16 atom singletons and the
    16 outcome-pair events (their non-negativity already bounds every
    correlator, so the relaxation starts bounded); the rest of the subset
    family is generated on demand.
    """
    if mode not in ("real", "complex"):
        raise ValueError("mode must be 'real' or 'complex'")
    n_vars = N_REAL_VARS if mode == "real" else N_COMPLEX_VARS

    norm = np.zeros(n_vars)
    norm[:16] = 1.0
    for k in range(len(_UPPER_PAIRS)):
        norm[16 + k] = 2.0
    eq_rows = [norm]
    eq_rhs = [1.0]

    for alpha, beta in epr.PAIRS:
        groups = _block_atoms(alpha, beta)
        for r in range(4):
            for c in range(r + 1, 4):
                row = np.zeros(n_vars)
                for x in groups[r]:
                    for y in groups[c]:
                        row[_UIDX[(min(x, y), max(x, y))]] += 1.0
                eq_rows.append(row)
                eq_rhs.append(0.0)
                if mode == "complex":
                    irow = np.zeros(n_vars)
                    for x in groups[r]:
                        for y in groups[c]:
                            j = _UIDX[(min(x, y), max(x, y))] - 16
                            irow[N_REAL_VARS + j] += 1.0 if x < y else -1.0
                    eq_rows.append(irow)
                    eq_rhs.append(0.0)

    objective = np.zeros(n_vars)
    for pair_idx, (alpha, beta) in enumerate(epr.PAIRS):
        s = pattern.signs()[pair_idx]
        groups = _block_atoms(alpha, beta)
        for bi, atoms in enumerate(groups):
            ij_sign = 1 if bi in (0, 3) else -1
            for x in atoms:
                objective[x] += s * ij_sign
                for y in atoms:
                    if x < y:
                        objective[_UIDX[(x, y)]] += 2.0 * s * ij_sign

    ineq_rows = []
    ineq_masks: list[Optional[int]] = []
    for x in range(N_ATOMS):
        ineq_rows.append(_subset_row(n_vars, 1 << x))
        ineq_masks.append(1 << x)
    for x, y in _UPPER_PAIRS:
        mask = (1 << x) | (1 << y)
        ineq_rows.append(_subset_row(n_vars, mask))
        ineq_masks.append(mask)
    # outcome-pair events: their non-negativity bounds every correlator,
    # so the very first relaxation is already bounded
    for alpha, beta in epr.PAIRS:
        for atoms in _block_atoms(alpha, beta):
            mask = 0
            for x in atoms:
                mask |= 1 << x
            ineq_rows.append(_subset_row(n_vars, mask))
            ineq_masks.append(mask)

    return LpProblem(
        mode=mode, pattern=pattern, n_vars=n_vars,
        objective=objective.copy(), chsh_row=objective,
        eq_rows=np.array(eq_rows), eq_rhs=np.array(eq_rhs),
        ineq_rows=np.array(ineq_rows), ineq_rhs=np.zeros(len(ineq_rows)),
        ineq_masks=ineq_masks,
    )


# ---------------------------------------------------------------------------
# symmetry reduction: the objective's stabilizer inside the relabeling group


def _relabeling_atom_permutation(swap_a: bool, swap_b: bool,
                                 flips: tuple[int, int, int, int]) -> np.ndarray:
    """Atom permutation for a setting swap per side plus outcome flips."""
    perm = np.empty(N_ATOMS, dtype=int)
    fa, fa1, fb, fb1 = flips
    for x in range(N_ATOMS):
        i, ip, j, jp = epr.SCENARIO.quad(x)
        if swap_a:
            i, ip = ip, i
        if swap_b:
            j, jp = jp, j
        perm[x] = epr.SCENARIO.atom_index(fa * i, fa1 * ip, fb * j, fb1 * jp)
    return perm


def _variable_map(atom_perm: np.ndarray) -> np.ndarray:
    """Index map old-variable -> new-variable induced on (d, u) coordinates."""
    vmap = np.empty(N_REAL_VARS, dtype=int)
    for x in range(N_ATOMS):
        vmap[x] = atom_perm[x]
    for (x, y), k in _UIDX.items():
        px, py = atom_perm[x], atom_perm[y]
        vmap[k] = _UIDX[(min(px, py), max(px, py))]
    return vmap


def _objective_stabilizer(chsh_row: np.ndarray) -> list[np.ndarray]:
    """Variable maps of all relabelings that leave the CHSH functional fixed.

    Candidate relabelings swap the two settings of either side and flip any
    of the four outcome signs; each is an atom permutation, and the induced
    variable permutation is kept when it fixes the objective vector (hence
    maps the whole feasible family onto itself).
    """
    import itertools as _it
    kept = []
    for swap_a in (False, True):
        for swap_b in (False, True):
            for flips in _it.product((1, -1), repeat=4):
                vmap = _variable_map(_relabeling_atom_permutation(swap_a, swap_b, flips))
                if np.array_equal(chsh_row[vmap], chsh_row[:N_REAL_VARS]):
                    kept.append(vmap)
    return kept


def _orbit_basis(maps: list[np.ndarray]) -> np.ndarray:
    """0/1 indicator basis of the variable orbits under the given maps."""
    parent = list(range(N_REAL_VARS))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for vmap in maps:
        for i in range(N_REAL_VARS):
            a, b = find(i), find(int(vmap[i]))
            if a != b:
                parent[a] = b
    roots = {}
    orbit = np.empty(N_REAL_VARS, dtype=int)
    for i in range(N_REAL_VARS):
        r = find(i)
        orbit[i] = roots.setdefault(r, len(roots))
    B = np.zeros((N_REAL_VARS, len(roots)))
    B[np.arange(N_REAL_VARS), orbit] = 1.0
    return B


_BOX_BOUND = 2.0


def _boxed_copy(problem: LpProblem) -> LpProblem:
    """Copy of the relaxation with |d_x| and |u_xy| bounded by _BOX_BOUND."""
    boxed = LpProblem(
        mode=problem.mode, pattern=problem.pattern, n_vars=problem.n_vars,
        objective=problem.objective.copy(), chsh_row=problem.chsh_row.copy(),
        eq_rows=problem.eq_rows.copy(), eq_rhs=problem.eq_rhs.copy(),
        ineq_rows=problem.ineq_rows.copy(), ineq_rhs=problem.ineq_rhs.copy(),
        ineq_masks=list(problem.ineq_masks),
        lazy_weak_family=problem.lazy_weak_family, lift=problem.lift,
    )
    for x in range(N_ATOMS):
        row = np.zeros(boxed.n_vars)
        row[x] = -1.0
        boxed.add_inequality(row, None, rhs=-_BOX_BOUND)
    for k in _UIDX.values():
        row = np.zeros(boxed.n_vars)
        row[k] = 1.0
        boxed.add_inequality(row, None, rhs=-_BOX_BOUND)
        row2 = np.zeros(boxed.n_vars)
        row2[k] = -1.0
        boxed.add_inequality(row2, None, rhs=-_BOX_BOUND)
    return boxed


def _reduced_problem(problem: LpProblem) -> LpProblem:
    """Restrict the relaxation to the objective-stabilizer fixed subspace.

    The subset family, the marginal equalities and the normalization are all
    closed under the stabilizer, so averaging any feasible point over the
    group stays feasible without changing the objective: the optimum is
    attained on the symmetric slice.  Each reduced cut then enforces a whole
    orbit of subsets at once.  Real mode only (the imaginary coordinates
    would transform with signs).
    """
    if problem.mode != "real" or problem.lift is not None:
        return problem
    maps = _objective_stabilizer(problem.chsh_row)
    if len(maps) <= 1:
        return problem
    B = _orbit_basis(maps)
    return LpProblem(
        mode=problem.mode, pattern=problem.pattern, n_vars=B.shape[1],
        objective=problem.objective @ B, chsh_row=problem.chsh_row @ B,
        eq_rows=problem.eq_rows @ B, eq_rhs=problem.eq_rhs.copy(),
        ineq_rows=problem.ineq_rows @ B, ineq_rhs=problem.ineq_rhs.copy(),
        ineq_masks=list(problem.ineq_masks),
        lazy_weak_family=problem.lazy_weak_family,
        lift=B,
    )


# ---------------------------------------------------------------------------
# dense two-phase primal simplex with Bland's anti-cycling rule


@dataclass
class SimplexResult:
    status: str                    # optimal | infeasible | unbounded
    x: Optional[np.ndarray]
    objective: Optional[float]     # of the minimization
    pivots: int
    basis: Optional[np.ndarray] = None
    rows_kept: Optional[list[int]] = None  # original row indices backing the basis


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    piv = T[row] / T[row, col]
    colvals = T[:, col].copy()
    T -= np.outer(colvals, piv)
    T[row] = piv
    basis[row] = col


_STALL_LIMIT = 60       # degenerate pivots before Bland's rule engages
_REFACTOR_EVERY = 150   # pivots between tableau refactorizations


def _iterate(T: np.ndarray, basis: np.ndarray, n_cols: int,
             max_pivots: int, entering_tol: float = 1e-9,
             pivot_tol: float = 1e-7,
             banned: Optional[np.ndarray] = None) -> tuple[int, str]:
    """Primal simplex sweep: Dantzig selection with Bland's anti-cycling rule.

    Most-negative reduced cost enters while the objective is moving; after a
    run of degenerate pivots Bland's least-index rule takes over (and is
    dropped again on progress), so cycling terminates.  The leaving row
    breaks ratio ties by least basic index throughout.

    Returns (pivots, status), status one of "optimal", "cap", "unbounded".
    The caller refactorizes on "cap" and re-checks "unbounded" on a fresh
    tableau before believing it.
    """
    m = T.shape[0] - 1
    pivots = 0
    stall = 0
    bland = False
    while True:
        if pivots >= max_pivots:
            return pivots, "cap"
        candidate = T[m, :n_cols] < -entering_tol
        candidate[basis] = False  # basic reduced costs are zero up to drift
        if banned is not None:
            candidate &= ~banned
        if not candidate.any():
            return pivots, "optimal"
        pivotable = (T[:m, :n_cols] > pivot_tol).any(axis=0)
        good = np.nonzero(candidate & pivotable)[0]
        if good.size == 0:
            if float(T[m, :n_cols][candidate].min()) < -1e-7:
                return pivots, "unbounded"
            return pivots, "optimal"
        if bland:
            col = int(good[0])
        else:
            col = int(good[np.argmin(T[m, good])])
        a = T[:m, col]
        ok = a > max(pivot_tol, 1e-9 * float(a.max()))
        ratios = np.full(m, np.inf)
        ratios[ok] = T[:m, -1][ok] / a[ok]
        rmin = max(ratios.min(), 0.0)
        ties = np.nonzero(ratios <= rmin + 1e-9 * (1.0 + rmin))[0]
        if bland:
            row = int(ties[np.argmin(basis[ties])])
        else:
            row = int(ties[np.argmax(a[ties])])  # stability: largest pivot element
        before = T[m, -1]
        _pivot(T, basis, row, col)
        pivots += 1
        if abs(T[m, -1] - before) <= 1e-12 * (1.0 + abs(before)):
            stall += 1
            if stall >= _STALL_LIMIT:
                bland = True
        else:
            stall = 0
            bland = False


def _refactored_tableau(A: np.ndarray, b: np.ndarray, cost: np.ndarray,
                        basis: np.ndarray) -> np.ndarray:
    """Fresh tableau for the given basis, straight from the original data."""
    m, n = A.shape
    B = A[:, basis]
    try:
        binv_a = np.linalg.solve(B, A)
        xb = np.linalg.solve(B, b)
    except np.linalg.LinAlgError as exc:
        raise LpError(f"singular basis during refactorization: {exc}") from exc
    if xb.min() < -1e-7:
        raise LpError(f"infeasible basis after refactorization (min {xb.min():.3e})")
    np.clip(xb, 0.0, None, out=xb)
    T = np.zeros((m + 1, n + 1))
    T[:m, :n] = binv_a
    T[:m, -1] = xb
    cb = cost[basis]
    T[m, :n] = cost - cb @ binv_a
    T[m, -1] = -cb @ xb
    return T


def _run_phase(T: np.ndarray, basis: np.ndarray, n_cols: int,
               A: np.ndarray, b: np.ndarray, cost: np.ndarray,
               max_pivots: int,
               banned: Optional[np.ndarray] = None) -> tuple[np.ndarray, int, str]:
    """Drive one simplex phase to optimality with periodic refactorization."""
    pivots = 0
    fresh = True
    while True:
        done, status = _iterate(T, basis, n_cols, min(_REFACTOR_EVERY, max_pivots - pivots),
                                banned=banned)
        pivots += done
        fresh = fresh and done == 0
        if status == "optimal":
            return T, pivots, "optimal"
        if status == "unbounded" and fresh:
            return T, pivots, "unbounded"
        if status == "cap" and pivots >= max_pivots:
            raise LpError(f"pivot cap {max_pivots} exceeded (cycling guard)")
        # "cap" chunk boundary, or an unbounded verdict on a drifted tableau:
        # rebuild from the basis and continue
        T = _refactored_tableau(A, b, cost, basis)
        fresh = True


def _solve_standard(c: np.ndarray, A: np.ndarray, b: np.ndarray,
                    slack_basis: Optional[list[Optional[int]]] = None,
                    max_pivots: int = 200_000,
                    _retry: bool = True) -> SimplexResult:
    """min c.x subject to A x = b, x >= 0 (two-phase, dense tableau).

    slack_basis[i], when given, names a column with A[i, col] = 1 that can
    start basic at value b[i] >= 0; remaining rows get phase-1 artificials.
    A solve whose basis degenerates numerically is retried once from a clean
    all-artificial start.
    """
    if _retry and slack_basis is not None:
        try:
            return _solve_standard(c, A, b, slack_basis=slack_basis,
                                   max_pivots=max_pivots, _retry=False)
        except LpError as exc:
            msg = str(exc)
            if "refactorization" not in msg and "singular" not in msg:
                raise
            return _solve_standard(c, A, b, slack_basis=None,
                                   max_pivots=max_pivots, _retry=False)
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    if slack_basis is None:
        slack_basis = [None] * m

    art_rows = [i for i in range(m) if flip[i] or slack_basis[i] is None]
    art_set = set(art_rows)
    n_art = len(art_rows)
    A1 = np.zeros((m, n + n_art))
    A1[:, :n] = A
    basis = np.empty(m, dtype=int)
    for k, i in enumerate(art_rows):
        A1[i, n + k] = 1.0
        basis[i] = n + k
    for i in range(m):
        if i not in art_set:
            basis[i] = slack_basis[i]
    pivots = 0
    if n_art:
        cost1 = np.zeros(n + n_art)
        cost1[n:] = 1.0
        # artificials may never re-enter once they leave the basis
        banned = np.zeros(n + n_art, dtype=bool)
        banned[n:] = True
        T = _refactored_tableau(A1, b, cost1, basis)
        T, done, status = _run_phase(T, basis, n + n_art, A1, b, cost1, max_pivots,
                                     banned=banned)
        pivots += done
        if status == "unbounded" or T[m, -1] < -1e-7:
            if T[m, -1] < -1e-7:
                return SimplexResult(status="infeasible", x=None, objective=None,
                                     pivots=pivots)
            raise LpError("phase 1 reported an unbounded ray")
        # pivot artificials out of the basis on a freshly refactored tableau,
        # always on the largest entry; rows with no real pivot are redundant
        T = _refactored_tableau(A1, b, cost1, basis)
        drop = set()
        for i in range(m):
            if basis[i] >= n:
                j = int(np.argmax(np.abs(T[i, :n])))
                if abs(T[i, j]) > 1e-7:
                    _pivot(T, basis, i, j)
                    pivots += 1
                else:
                    drop.add(i)
        if drop:
            keep = [i for i in range(m) if i not in drop]
            A = A[keep]
            b = b[keep]
            basis = basis[keep]
            m = len(keep)
        else:
            keep = list(range(m))
    else:
        keep = list(range(m))

    T2 = _refactored_tableau(A, b, c, basis)
    T2, done, status = _run_phase(T2, basis, n, A, b, c, max_pivots - pivots)
    pivots += done
    if status == "unbounded":
        return SimplexResult(status="unbounded", x=None, objective=None, pivots=pivots)
    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = T2[i, -1]
    return SimplexResult(status="optimal", x=x, objective=float(c @ x),
                         pivots=pivots, basis=basis, rows_kept=keep)


def _solve_relaxation(problem: LpProblem, max_pivots: int) -> tuple[SimplexResult, dict]:
    """Standard-form assembly: v = vp - vm free split, surplus on inequalities.

    Inequality rows a.v >= 0 enter as -a.v + s = 0 so every surplus variable
    can start basic (at zero); only the equality rows need artificials.
    """
    n = problem.n_vars
    n_ineq = problem.ineq_rows.shape[0]
    n_eq = problem.eq_rows.shape[0]
    m = n_eq + n_ineq
    N = 2 * n + n_ineq
    A = np.zeros((m, N))
    b = np.zeros(m)
    A[:n_eq, :n] = problem.eq_rows
    A[:n_eq, n:2 * n] = -problem.eq_rows
    b[:n_eq] = problem.eq_rhs
    A[n_eq:, :n] = -problem.ineq_rows
    A[n_eq:, n:2 * n] = problem.ineq_rows
    A[n_eq:, 2 * n:] = np.eye(n_ineq)
    b[n_eq:] = -problem.ineq_rhs
    c = np.zeros(N)
    c[:n] = -problem.objective
    c[n:2 * n] = problem.objective
    slack_basis: list[Optional[int]] = [None] * n_eq + [2 * n + k for k in range(n_ineq)]
    res = _solve_standard(c, A, b, slack_basis=slack_basis, max_pivots=max_pivots)
    ctx = {"A": A, "b": b, "c": c, "n": n}
    return res, ctx


@dataclass
class LpSolution:
    """Outcome of the constraint-generated search."""

    status: str
    objective: Optional[float]
    matrix: Optional[np.ndarray]
    pattern: epr.SignPattern
    mode: str
    rounds: int
    pivots: int
    added_subsets: tuple[int, ...]
    eigencuts: int
    objective_history: tuple[float, ...]
    final_scan: Optional[SubsetScan] = None
    rational_certificate: Optional[dict] = field(default=None, repr=False)

    def as_decoherence_functional(self) -> DecoherenceFunctional:
        if self.matrix is None:
            raise LpError(f"no solution available (status {self.status})")
        sym = 0.5 * (self.matrix + self.matrix.conj().T)
        return DecoherenceFunctional(epr.SCENARIO.space, sym)


def solve_lp(problem: LpProblem, violation_tol: float = VIOLATION_TOL,
             max_rounds: int = 400, max_pivots: int = 400_000,
             cuts_per_round: int = 24,
             strong_cuts: bool = False, eig_tol: float = 1e-7,
             face_centering: bool = True,
             symmetry_reduction: bool = True,
             rational: bool = False) -> LpSolution:
    """Constraint-generation driver around the simplex core.

    Each round solves a relaxation, runs the exact separation oracle (full
    Gray-code subset scan of the candidate matrix) and adds the most-violated
    subset constraints, ties broken by least bitmask, until no subset is
    violated beyond tolerance; the final candidate is re-verified against the
    whole family.

    With face_centering (the default), the first solve fixes the optimum
    value q*, after which the objective becomes the worst working-set slack:
    maximize t subject to mu(X) >= t and Q >= q* - 1e-9.  The Q-optimal face
    here is large and plain argmax vertices wander across it; centering picks
    balanced candidates and the oracle converges at desk scale.  The reported
    objective is always the CHSH value of the final candidate.

    With strong_cuts (a diagnostic mode), the most negative eigenvectors v of
    each candidate add cuts v.D v >= 0, driving the relaxation toward the
    strongly positive set, where the optimum is the 2 sqrt(2) bound.  Every
    subset constraint is implied in that limit, so the expensive subset
    oracle is skipped while iterating; box rows |entry| <= 2 are added
    instead, which keeps candidates away from the norm-unbounded rays of the
    cone (rays along which the objective is flat) without touching the
    optimum, whose witness has entries below 0.2.
    """
    if strong_cuts:
        face_centering = False
        problem = _boxed_copy(problem)
        problem.lazy_weak_family = False
    work = _reduced_problem(problem) if symmetry_reduction else problem
    added: list[int] = []
    history: list[float] = []
    pivots = 0
    eigencuts = 0
    rounds = 0
    known_masks = {m for m in work.ineq_masks if m is not None}
    q_pinned = False
    res = None
    ctx = None
    while True:
        rounds += 1
        if rounds > max_rounds:
            raise LpError(f"constraint generation did not converge in {max_rounds} rounds")
        res, ctx = _solve_relaxation(work, max_pivots)
        if res.status != "optimal":
            return LpSolution(status=res.status, objective=None, matrix=None,
                              pattern=work.pattern, mode=work.mode,
                              rounds=rounds, pivots=pivots + res.pivots,
                              added_subsets=tuple(added), eigencuts=eigencuts,
                              objective_history=tuple(history))
        pivots += res.pivots
        v = res.x[:work.n_vars] - res.x[work.n_vars:2 * work.n_vars]
        relax_value = float(work.objective @ v)
        if history and relax_value > history[-1] + 1e-7:
            raise LpError(
                f"relaxation optimum increased after a cut: {history[-1]} -> {relax_value}")
        history.append(relax_value)
        S = work.matrix_from_vars(v)

        if face_centering and not q_pinned:
            work.pin_objective(relax_value - 1e-9)
            q_pinned = True
            history = []
            continue

        if work.lazy_weak_family:
            scan = scan_subset_measures(np.real(S), tol=violation_tol,
                                        worst_cap=max(1, cuts_per_round))
            if scan.violation_count > 0:
                batch = [mask for _, mask in scan.worst] or [scan.min_mask]
                if scan.min_mask not in batch:
                    batch.insert(0, scan.min_mask)
                fresh = [mask for mask in batch if mask not in known_masks]
                if not fresh:
                    raise LpError(
                        f"separation returned only already-added subsets; "
                        f"violation {scan.min_mu:.3e} persists (numerical failure)")
                for mask in fresh:
                    work.add_inequality(work.subset_row(mask), mask)
                    known_masks.add(mask)
                    added.append(mask)
                continue
        if strong_cuts:
            w, U = hermitian_eigen(S)
            if w[0] < -eig_tol:
                for col in np.nonzero(w < -eig_tol)[0][:4]:
                    vec = U[:, col]
                    row = np.zeros(work.base_n_vars)
                    for x in range(N_ATOMS):
                        row[x] = abs(vec[x]) ** 2
                    for (x, y), k in _UIDX.items():
                        row[k] = 2.0 * np.real(np.conj(vec[x]) * vec[y])
                        if work.mode == "complex":
                            row[N_REAL_VARS + (k - 16)] = -2.0 * np.imag(np.conj(vec[x]) * vec[y])
                    if work.lift is not None:
                        # the cut v.Dv >= 0 holds on the whole strongly positive
                        # set; its projection evaluates it exactly on the slice
                        row = row @ work.lift
                    work.add_inequality(row, None)
                    eigencuts += 1
                continue
        break

    final_scan = scan_subset_measures(np.real(S), tol=violation_tol)
    q_final = float(work.chsh_row @ v)
    certificate = None
    if rational:
        certificate = _rational_basis_certificate(res, ctx, work)
    return LpSolution(status="optimal", objective=q_final, matrix=S,
                      pattern=work.pattern, mode=work.mode,
                      rounds=rounds, pivots=pivots,
                      added_subsets=tuple(added), eigencuts=eigencuts,
                      objective_history=tuple(history),
                      final_scan=final_scan, rational_certificate=certificate)


def _rational_basis_certificate(res: SimplexResult, ctx: dict,
                                problem: LpProblem) -> dict:
    """Re-solve the final basis exactly over the rationals.

    Every constraint coefficient is rational with a small dyadic
    denominator, so the basis system has an exact solution; the certificate
    reports exact feasibility of the basis values, the exact value of the
    optimized functional, and the exact CHSH value of the candidate.
    """
    A = ctx["A"]
    b = ctx["b"]
    c = ctx["c"]
    n = ctx["n"]
    basis = list(res.basis)
    rows = res.rows_kept
    # A and b hold exactly representable rationals, so Fraction(float) is exact.
    B = [[Fraction(A[i, j]) for j in basis] for i in rows]
    rhs = [Fraction(b[i]) for i in rows]
    xb = _fraction_solve(B, rhs)
    feasible = all(val >= 0 for val in xb)
    obj = -sum(Fraction(c[j]) * xb[i] for i, j in enumerate(basis))
    x_exact = {j: xb[i] for i, j in enumerate(basis)}
    chsh = Fraction(0)
    for j, coef in enumerate(problem.chsh_row):
        if coef:
            chsh += Fraction(coef) * (x_exact.get(j, Fraction(0))
                                      - x_exact.get(n + j, Fraction(0)))
    x_float = np.zeros(A.shape[1])
    for i, j in enumerate(basis):
        x_float[j] = float(xb[i])
    agreement = float(np.abs(x_float - res.x).max())
    return {
        "feasible_basis": feasible,
        "objective": obj,
        "objective_float": float(obj),
        "chsh_value": chsh,
        "chsh_value_float": float(chsh),
        "float_agreement": agreement,
    }


def _fraction_solve(B: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Exact solve of a basis system, peeling singleton columns first.

    Most basis columns are slack unit vectors, so structural elimination
    reduces the system to a small dense core before Gaussian elimination
    over the rationals.
    """
    m = len(B)
    row_entries = [{j for j in range(m) if B[i][j] != 0} for i in range(m)]
    col_rows = [{i for i in range(m) if B[i][j] != 0} for j in range(m)]
    active_rows = set(range(m))
    active_cols = set(range(m))
    peel: list[tuple[int, int]] = []
    changed = True
    while changed:
        changed = False
        for j in list(active_cols):
            live = col_rows[j] & active_rows
            if len(live) == 1:
                i = next(iter(live))
                peel.append((i, j))
                active_rows.remove(i)
                active_cols.remove(j)
                changed = True

    x = [Fraction(0)] * m
    if active_cols:
        rows_core = sorted(active_rows)
        cols_core = sorted(active_cols)
        M = [[B[i][j] for j in cols_core] + [rhs[i]] for i in rows_core]
        k = len(rows_core)
        if len(cols_core) != k:
            raise LpError("singular basis in rational refinement")
        for col in range(k):
            piv = next((r for r in range(col, k) if M[r][col] != 0), None)
            if piv is None:
                raise LpError("singular basis in rational refinement")
            M[col], M[piv] = M[piv], M[col]
            inv = M[col][col]
            M[col] = [v / inv for v in M[col]]
            for r in range(k):
                if r != col and M[r][col] != 0:
                    f = M[r][col]
                    M[r] = [a - f * bb for a, bb in zip(M[r], M[col])]
        for idx, j in enumerate(cols_core):
            x[j] = M[idx][k]

    for i, j in reversed(peel):
        acc = rhs[i]
        for j2 in row_entries[i]:
            if j2 != j:
                acc -= B[i][j2] * x[j2]
        x[j] = acc / B[i][j]
    return x


def solve_max_q(pattern: epr.SignPattern, mode: str = "real",
                **kwargs) -> LpSolution:
    """Build and solve the max-Q relaxation for one sign pattern."""
    return solve_lp(build_max_q_lp(pattern, mode), **kwargs)


# ---------------------------------------------------------------------------
# the hand-checked maximal example and the candidate audit


def _label_index(label: str) -> int:
    return epr.SCENARIO.space.index(label)


def section5_example() -> DecoherenceFunctional:
    """A weakly positive joint functional attaining the logical maximum Q = 4.

    Four diagonal entries of 1/2, ten off-diagonal entries of +-1/4 plus
    their transposes, everything else zero.  Its marginals are diagonal, all
    one-sided marginals are 1/2 (no signaling), weak positivity holds with
    many subsets exactly at zero, and strong positivity fails with signature
    (4, 8, 4).
    """
    idx = _label_index
    D = np.zeros((16, 16))
    for lab in ("----", "+-+-", "+--+", "-+-+"):
        D[idx(lab), idx(lab)] = 0.5
    entries = [
        ("---+", "----", -0.25),
        ("+-+-", "+---", -0.25),
        ("-+-+", "-+--", +0.25),
        ("---+", "++--", +0.25),
        ("+--+", "++--", -0.25),
        ("-+-+", "++--", -0.25),
        ("+--+", "+-+-", +0.25),
        ("+--+", "---+", -0.25),
        ("-+-+", "---+", -0.25),
        ("-+-+", "+--+", +0.25),
    ]
    for bra, ket, val in entries:
        D[idx(bra), idx(ket)] = val
        D[idx(ket), idx(bra)] = val
    return DecoherenceFunctional(epr.SCENARIO.space, D.astype(complex))


@dataclass
class CandidateAudit:
    """Full audit of a 16x16 candidate joint decoherence functional."""

    hermiticity_residual: float
    normalization_residual: float
    marginal_offdiagonal: float
    marginals_diagonal: bool
    weak: object
    strong: object
    q_by_pattern: Optional[dict]
    q_for_pattern: Optional[float]
    q_max: Optional[float]
    best_pattern: Optional[str]
    chshb_satisfied: Optional[bool]
    tsirelson_satisfied: Optional[bool]
    nonsignaling_residual: Optional[float]
    one_sided_marginals: dict

    @property
    def axioms_ok(self) -> bool:
        return (self.hermiticity_residual <= 1e-9
                and self.normalization_residual <= 1e-8
                and self.weak.holds)


def verify_candidate(df_hat: DecoherenceFunctional,
                     pattern: Optional[epr.SignPattern] = None,
                     marginal_tol: float = epr.MARGINAL_DIAGONAL_TOL) -> CandidateAudit:
    """Audit hermiticity, normalization, marginals, both positivities, Q,
    non-signaling and the one-sided marginals of a candidate."""
    M = df_hat.matrix
    herm = float(np.abs(M - M.conj().T).max())
    norm_res = abs(complex(M.sum()) - 1.0)
    offdiag = max(epr.marginal(df_hat, pair).max_offdiagonal() for pair in epr.PAIRS)
    weak = check_weak_positivity(df_hat)
    strong = check_strong_positivity(df_hat)
    q_by_pattern = None
    q_for = None
    q_max = None
    best = None
    chshb = None
    tsirelson = None
    nonsig = None
    diagonal = offdiag <= marginal_tol
    if diagonal:
        probs = epr.experimental_probabilities(df_hat, marginal_tol)
        q_by_pattern = {str(p): epr.chsh_q(probs, p) for p in epr.ADMISSIBLE_PATTERNS}
        if pattern is not None:
            q_for = epr.chsh_q(probs, pattern)
        bounds = epr.check_bounds(probs)
        q_max = bounds.q_max
        best = str(bounds.best_pattern)
        chshb = bounds.chshb_satisfied
        tsirelson = bounds.tsirelson_satisfied
        nonsig = epr.nonsignaling_residual(probs)
    return CandidateAudit(
        hermiticity_residual=herm,
        normalization_residual=norm_res,
        marginal_offdiagonal=offdiag,
        marginals_diagonal=diagonal,
        weak=weak,
        strong=strong,
        q_by_pattern=q_by_pattern,
        q_for_pattern=q_for,
        q_max=q_max,
        best_pattern=best,
        chshb_satisfied=chshb,
        tsirelson_satisfied=tsirelson,
        nonsignaling_residual=nonsig,
        one_sided_marginals=epr.one_sided_marginals(df_hat),
    )
