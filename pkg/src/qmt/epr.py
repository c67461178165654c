"""The two-analyzer spin-pair scenario on the joint sample space.

The joint space has 16 atoms labelled by outcome quadruples (i, i', j, j')
for the four settings a, a', b, b', each outcome +1 or -1.  Atom index is
8 b(i) + 4 b(i') + 2 b(j) + b(j') with b(+1) = 0 and b(-1) = 1, so the label
"++++" is atom 0 and "----" is atom 15.

A joint decoherence functional on this space induces one 4x4 marginal block
per setting pair by summing out the two unselected outcome bits on both
arguments.  When all four blocks are diagonal, their diagonals are the
sixteen experimental probabilities, from which correlators, the CHSH
quantity Q and the two bounds (2 classically, 2*sqrt(2) for strongly
positive quantal measures) are computed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidMeasure, MarginalsNotDiagonal, SpaceMismatch
from .measure import ClassicalMeasure, DecoherenceFunctional
from .space import Event, SampleSpace

SETTINGS = ("a", "a'", "b", "b'")
A_SETTINGS = ("a", "a'")
B_SETTINGS = ("b", "b'")
SETTING_POSITION = {"a": 0, "a'": 1, "b": 2, "b'": 3}
PAIRS = (("a", "b"), ("a'", "b"), ("a", "b'"), ("a'", "b'"))

OUTCOMES = (1, -1)

TSIRELSON_BOUND = 2.0 * np.sqrt(2.0)
MARGINAL_DIAGONAL_TOL = 1e-9


def _bit(sign: int) -> int:
    return 0 if sign == 1 else 1


def _sign(bit: int) -> int:
    return 1 if bit == 0 else -1


class EprScenario:
    """Fixed labelling of the 16-atom joint space and its setting pairs."""

    def __init__(self):
        labels = []
        for quad in itertools.product("+-", repeat=4):
            labels.append("".join(quad))
        self.space = SampleSpace(tuple(labels))
        self.quads = tuple(itertools.product(OUTCOMES, repeat=4))

    def atom_index(self, i: int, ip: int, j: int, jp: int) -> int:
        return 8 * _bit(i) + 4 * _bit(ip) + 2 * _bit(j) + _bit(jp)

    def quad(self, atom: int) -> tuple[int, int, int, int]:
        return (_sign(atom >> 3 & 1), _sign(atom >> 2 & 1),
                _sign(atom >> 1 & 1), _sign(atom & 1))

    def outcome(self, atom: int, setting: str) -> int:
        return self.quad(atom)[SETTING_POSITION[setting]]

    def outcome_event(self, setting: str, outcome: int) -> Event:
        """All atoms whose given setting shows the given outcome."""
        atoms = [x for x in range(16) if self.outcome(x, setting) == outcome]
        return self.space.event(atoms)

    def sign_vector(self, setting: str) -> np.ndarray:
        return np.array([self.outcome(x, setting) for x in range(16)], dtype=float)


SCENARIO = EprScenario()


def _require_canonical(space: SampleSpace) -> None:
    if space != SCENARIO.space:
        raise SpaceMismatch("expected the canonical 16-atom joint sample space")


@dataclass(frozen=True)
class SignPattern:
    """Signs on the four correlator terms; the product must be -1."""

    s_ab: int
    s_a1b: int
    s_ab1: int
    s_a1b1: int

    def __post_init__(self):
        signs = self.signs()
        if any(s not in (-1, 1) for s in signs):
            raise ValueError("pattern entries must be +1 or -1")
        if signs[0] * signs[1] * signs[2] * signs[3] != -1:
            raise ValueError("pattern must have an odd number of minus signs")

    def signs(self) -> tuple[int, int, int, int]:
        return (self.s_ab, self.s_a1b, self.s_ab1, self.s_a1b1)

    def __str__(self) -> str:
        return "".join("+" if s == 1 else "-" for s in self.signs())

    @classmethod
    def from_string(cls, text: str) -> "SignPattern":
        """Accepts "+-++" style, or "ab-" shorthand for a minus on that term."""
        text = text.strip()
        shorthand = {"ab-": "-+++", "a'b-": "+-++", "ab'-": "++-+", "a'b'-": "+++-"}
        if text in shorthand:
            text = shorthand[text]
        if len(text) != 4 or any(c not in "+-" for c in text):
            raise ValueError(f"cannot parse sign pattern {text!r}")
        return cls(*(1 if c == "+" else -1 for c in text))


def admissible_patterns() -> tuple[SignPattern, ...]:
    """The 8 valid patterns: one minus in each position, then their negations."""
    singles = []
    for pos in range(4):
        signs = [1, 1, 1, 1]
        signs[pos] = -1
        singles.append(SignPattern(*signs))
    negated = [SignPattern(*(-s for s in p.signs())) for p in singles]
    return tuple(singles + negated)


ADMISSIBLE_PATTERNS = admissible_patterns()


@dataclass
class MarginalBlock:
    """4x4 marginal of a joint decoherence functional for one setting pair.

    Rows and columns are indexed by outcome pairs (i, j) -> 2 b(i) + b(j).
    """

    pair: tuple[str, str]
    block: np.ndarray

    def max_offdiagonal(self) -> float:
        off = self.block - np.diag(np.diag(self.block))
        return float(np.abs(off).max())

    def is_diagonal(self, tol: float = MARGINAL_DIAGONAL_TOL) -> bool:
        return self.max_offdiagonal() <= tol

    def diagonal_probabilities(self) -> np.ndarray:
        """2x2 array p[(i, j)] with index 0 for outcome +1, 1 for -1."""
        return np.real(np.diag(self.block)).reshape(2, 2)


def marginal(df_hat: DecoherenceFunctional, pair: tuple[str, str]) -> MarginalBlock:
    """Sum out the two unselected outcome bits on both arguments."""
    _require_canonical(df_hat.space)
    alpha, beta = pair
    pa, pb = SETTING_POSITION[alpha], SETTING_POSITION[beta]
    idx = np.empty(16, dtype=int)
    for x in range(16):
        q = SCENARIO.quad(x)
        idx[x] = 2 * _bit(q[pa]) + _bit(q[pb])
    block = np.zeros((4, 4), dtype=complex)
    for r in range(4):
        rows = np.nonzero(idx == r)[0]
        for c in range(4):
            cols = np.nonzero(idx == c)[0]
            block[r, c] = df_hat.matrix[np.ix_(rows, cols)].sum()
    return MarginalBlock((alpha, beta), block)


class ExperimentalProbabilities:
    """The sixteen numbers p(alpha_i, beta_j), one 2x2 block per setting pair."""

    def __init__(self, table, tol: float = 1e-8):
        t = np.asarray(table, dtype=float)
        if t.shape != (2, 2, 2, 2):
            raise InvalidMeasure("need shape (2, 2, 2, 2): [alpha][beta][i][j]")
        if t.min() < -1e-9:
            raise InvalidMeasure("probabilities must be non-negative")
        sums = t.sum(axis=(2, 3))
        if np.abs(sums - 1.0).max() > tol:
            raise InvalidMeasure("each setting-pair block must sum to 1")
        self.table = t
        self.table.setflags(write=False)

    def p(self, alpha: str, beta: str, i: int, j: int) -> float:
        return float(self.table[A_SETTINGS.index(alpha), B_SETTINGS.index(beta),
                                _bit(i), _bit(j)])

    def block(self, alpha: str, beta: str) -> np.ndarray:
        return self.table[A_SETTINGS.index(alpha), B_SETTINGS.index(beta)]


def experimental_probabilities(df_hat: DecoherenceFunctional,
                               tol: float = MARGINAL_DIAGONAL_TOL) -> ExperimentalProbabilities:
    """Diagonals of the four marginal blocks.

    Raises MarginalsNotDiagonal if any block has an off-diagonal entry above
    tol; decoherence of the setting-pair alternatives is a precondition for
    reading the diagonals as probabilities.
    """
    table = np.zeros((2, 2, 2, 2))
    for alpha, beta in PAIRS:
        blk = marginal(df_hat, (alpha, beta))
        if not blk.is_diagonal(tol):
            raise MarginalsNotDiagonal((alpha, beta), blk.max_offdiagonal())
        table[A_SETTINGS.index(alpha), B_SETTINGS.index(beta)] = blk.diagonal_probabilities()
    return ExperimentalProbabilities(table)


def classical_joint_marginals(mu_hat: ClassicalMeasure,
                              tol: float = 1e-9) -> ExperimentalProbabilities:
    """Marginals of a classical joint distribution on the 16-atom space."""
    _require_canonical(mu_hat.space)
    if abs(mu_hat.total - 1.0) > tol:
        raise InvalidMeasure("joint classical measure must be normalized")
    table = np.zeros((2, 2, 2, 2))
    for ai, alpha in enumerate(A_SETTINGS):
        for bi, beta in enumerate(B_SETTINGS):
            pa, pb = SETTING_POSITION[alpha], SETTING_POSITION[beta]
            for x in range(16):
                q = SCENARIO.quad(x)
                table[ai, bi, _bit(q[pa]), _bit(q[pb])] += mu_hat.weights[x]
    return ExperimentalProbabilities(table)


def correlator(p: ExperimentalProbabilities, alpha: str, beta: str) -> float:
    """X(alpha, beta) = sum_ij i j p(alpha_i, beta_j); always in [-1, 1]."""
    blk = p.block(alpha, beta)
    return float(blk[0, 0] - blk[0, 1] - blk[1, 0] + blk[1, 1])


def chsh_q(p: ExperimentalProbabilities, pattern: SignPattern) -> float:
    """Signed CHSH combination under the given pattern; |Q| <= 4 always."""
    s = pattern.signs()
    return (s[0] * correlator(p, "a", "b")
            + s[1] * correlator(p, "a'", "b")
            + s[2] * correlator(p, "a", "b'")
            + s[3] * correlator(p, "a'", "b'"))


def max_chsh_q(p: ExperimentalProbabilities) -> tuple[SignPattern, float]:
    """Pattern maximizing |Q| over the 8 admissible patterns.

    Ties go to the earlier pattern in the fixed enumeration order (the four
    single-minus patterns in term order, then their negations).
    """
    best = ADMISSIBLE_PATTERNS[0]
    best_q = abs(chsh_q(p, best))
    for pattern in ADMISSIBLE_PATTERNS[1:]:
        q = abs(chsh_q(p, pattern))
        if q > best_q:
            best, best_q = pattern, q
    return best, best_q


@dataclass
class BoundsReport:
    q_max: float
    best_pattern: SignPattern
    chshb_satisfied: bool
    tsirelson_satisfied: bool


def check_bounds(p: ExperimentalProbabilities, tol: float = 1e-9) -> BoundsReport:
    pattern, q = max_chsh_q(p)
    return BoundsReport(
        q_max=q,
        best_pattern=pattern,
        chshb_satisfied=q <= 2.0 + tol,
        tsirelson_satisfied=q <= TSIRELSON_BOUND + tol,
    )


def nonsignaling_residual(p: ExperimentalProbabilities) -> float:
    """Largest violation of the one-sided marginal consistency equalities."""
    worst = 0.0
    for ai in range(2):
        for ib in range(2):
            lhs = p.table[ai, 0, ib, :].sum()
            rhs = p.table[ai, 1, ib, :].sum()
            worst = max(worst, abs(lhs - rhs))
    for bi in range(2):
        for jb in range(2):
            lhs = p.table[0, bi, :, jb].sum()
            rhs = p.table[1, bi, :, jb].sum()
            worst = max(worst, abs(lhs - rhs))
    return worst


def check_nonsignaling(p: ExperimentalProbabilities, tol: float = 1e-9) -> bool:
    """True when the remote setting cannot shift either side's marginals."""
    return nonsignaling_residual(p) <= tol


def one_sided_marginals(df_hat: DecoherenceFunctional) -> dict[str, float]:
    """mu(alpha_i) for every setting and outcome, keyed like "a+", "b'-"."""
    _require_canonical(df_hat.space)
    out = {}
    for setting in SETTINGS:
        for outcome in OUTCOMES:
            ev = SCENARIO.outcome_event(setting, outcome)
            out[f"{setting}{'+' if outcome == 1 else '-'}"] = df_hat.mu(ev)
    return out
