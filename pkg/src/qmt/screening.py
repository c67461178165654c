"""Screening-off models: outcomes, settings, and a finite common past.

A structured model lives on atoms (alpha, i, beta, j, c): an A-side setting
and outcome, a B-side setting and outcome, and a fully specified past cell c.
Classical screening off requires outcomes (and settings) on the two sides to
become independent once c is conditioned on; setting independence requires
the settings to carry no information about the past.  The quantal analog
replaces products of conditional probabilities with the multiplicative
condition

    D(a_i & b_j & c ; A_k & B_l & cbar) D(c ; cbar)
        = D(a_i & c ; A_k & cbar) D(b_j & c ; B_l & cbar),

together with a product-form variant expressed through vanishing 2x2 cross
products, and quantal setting independence
D(alpha & beta & c ; alpha & beta & cbar) = mu(alpha) mu(beta) D(c ; cbar).

Both implication directions proved constructively are provided: a joint
distribution is built from any screening model (maximal independence
ansatz), and a screening model is built from any joint distribution or any
joint decoherence functional with diagonal marginals (fabricated past labels
that simply record the joint outcome quadruple).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .epr import (A_SETTINGS, B_SETTINGS, OUTCOMES, PAIRS, SCENARIO,
                  ExperimentalProbabilities, experimental_probabilities)
from .errors import ConditionUndefined, InvalidMeasure, NotStronglyPositive
from .linalg import hermitian_eigen
from .measure import ClassicalMeasure, DecoherenceFunctional
from .positivity import check_strong_positivity
from .space import Event, SampleSpace

SCREENING_TOL = 1e-10
PAST_CELL_TOL = 1e-12


@dataclass(frozen=True)
class SettingWeights:
    """The four pair weights mu(alpha & beta); positive and summing to one."""

    ab: float
    a1b: float
    ab1: float
    a1b1: float

    def __post_init__(self):
        vals = self.values()
        if min(vals) <= 0:
            raise InvalidMeasure("setting weights must be positive")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise InvalidMeasure("setting weights must sum to 1")

    def values(self) -> tuple[float, float, float, float]:
        return (self.ab, self.a1b, self.ab1, self.a1b1)

    def weight(self, alpha: str, beta: str) -> float:
        return {("a", "b"): self.ab, ("a'", "b"): self.a1b,
                ("a", "b'"): self.ab1, ("a'", "b'"): self.a1b1}[(alpha, beta)]

    def side_weight(self, setting: str) -> float:
        if setting in A_SETTINGS:
            return sum(self.weight(setting, b) for b in B_SETTINGS)
        return sum(self.weight(a, setting) for a in A_SETTINGS)

    def product_residual(self) -> float:
        return abs(self.ab * self.a1b1 - self.a1b * self.ab1)

    def is_product(self, tol: float = 1e-12) -> bool:
        """True when the settings are independent of one another."""
        return self.product_residual() <= tol

    @classmethod
    def uniform(cls) -> "SettingWeights":
        return cls(0.25, 0.25, 0.25, 0.25)

    @classmethod
    def product(cls, w_a: float, w_b: float) -> "SettingWeights":
        """Independent settings with mu(a) = w_a and mu(b) = w_b."""
        return cls(w_a * w_b, (1 - w_a) * w_b, w_a * (1 - w_b), (1 - w_a) * (1 - w_b))


class StructuredModel:
    """A classical or quantal measure over (alpha, i, beta, j, c) atoms."""

    def __init__(self, past_labels, measure: Union[ClassicalMeasure, DecoherenceFunctional]):
        self.past_labels = tuple(past_labels)
        if not self.past_labels:
            raise InvalidMeasure("need at least one past cell")
        if len(set(self.past_labels)) != len(self.past_labels):
            raise InvalidMeasure("past cell labels must be distinct")
        expected = space_for_past(self.past_labels)
        if measure.space != expected:
            raise InvalidMeasure("measure space does not match the structured atom layout")
        self.measure = measure
        self.space = measure.space

    @property
    def n_cells(self) -> int:
        return len(self.past_labels)

    @property
    def is_classical(self) -> bool:
        return isinstance(self.measure, ClassicalMeasure)

    def atom_index(self, alpha: str, i: int, beta: str, j: int, c) -> int:
        ci = self.past_labels.index(c) if isinstance(c, str) else int(c)
        return _atom_index(self.n_cells, alpha, i, beta, j, ci)

    def event(self, alpha: Optional[str] = None, i: Optional[int] = None,
              beta: Optional[str] = None, j: Optional[int] = None,
              c=None) -> Event:
        """Atoms matching every given constraint (None = unconstrained)."""
        ci = None
        if c is not None:
            ci = self.past_labels.index(c) if isinstance(c, str) else int(c)
        atoms = []
        for idx, (al, ii, be, jj, cc) in enumerate(_atom_tuples(self.n_cells)):
            if alpha is not None and al != alpha:
                continue
            if i is not None and ii != i:
                continue
            if beta is not None and be != beta:
                continue
            if j is not None and jj != j:
                continue
            if ci is not None and cc != ci:
                continue
            atoms.append(idx)
        return self.space.event(atoms)

    def mu(self, **constraints) -> float:
        return self.measure.mu(self.event(**constraints))

    def pair(self, bra_constraints: dict, ket_constraints: dict) -> complex:
        if self.is_classical:
            raise InvalidMeasure("pair evaluation needs a decoherence functional")
        return self.measure.pair(self.event(**bra_constraints),
                                 self.event(**ket_constraints))

    def setting_weights(self) -> SettingWeights:
        return SettingWeights(*(self.mu(alpha=a, beta=b) for a, b in PAIRS))


def _atom_tuples(n_cells: int):
    for al, ii, be, jj in itertools.product(A_SETTINGS, OUTCOMES, B_SETTINGS, OUTCOMES):
        for ci in range(n_cells):
            yield (al, ii, be, jj, ci)


def _atom_index(n_cells: int, alpha: str, i: int, beta: str, j: int, ci: int) -> int:
    ai = A_SETTINGS.index(alpha)
    bi = B_SETTINGS.index(beta)
    ib = 0 if i == 1 else 1
    jb = 0 if j == 1 else 1
    return (((ai * 2 + ib) * 2 + bi) * 2 + jb) * n_cells + ci


def space_for_past(past_labels) -> SampleSpace:
    labels = []
    for al, ii, be, jj in itertools.product(A_SETTINGS, OUTCOMES, B_SETTINGS, OUTCOMES):
        for c in past_labels:
            labels.append(f"{al}{'+' if ii == 1 else '-'}"
                          f"{be}{'+' if jj == 1 else '-'}|{c}")
    return SampleSpace(tuple(labels))


def classical_model(past_labels, weights) -> StructuredModel:
    return StructuredModel(past_labels, ClassicalMeasure(space_for_past(past_labels), weights))


def quantal_model(past_labels, matrix) -> StructuredModel:
    return StructuredModel(past_labels,
                           DecoherenceFunctional(space_for_past(past_labels), matrix))


# ---------------------------------------------------------------------------
# classical screening off


@dataclass
class ClassicalScreeningReport:
    """Worst residuals of the classical screening and independence conditions."""

    holds: bool
    tol: float
    outcome_screening: float      # mu(a_i & b_j | c) = mu(a_i | c) mu(b_j | c)
    setting_screening: float      # mu(a & b | c) = mu(a | c) mu(b | c)
    staged_conditioning: float    # mu(a_i & b_j | a & b & c) = mu(a_i | a & c) mu(b_j | b & c)
    setting_independence: float   # mu(alpha | c) = mu(alpha)
    setting_past_product: float   # mu(alpha & beta & c) = mu(alpha & beta) mu(c)


def check_classical_screening(m: StructuredModel, tol: float = SCREENING_TOL,
                              cell_tol: float = PAST_CELL_TOL) -> ClassicalScreeningReport:
    """Verify every screening and setting-independence identity of the model.

    Requires a classical model with mu(c) > cell_tol for all cells, and
    positive setting-and-cell intersections so the conditionals exist.
    """
    if not m.is_classical:
        raise InvalidMeasure("classical screening check needs a classical measure")
    mu_c = {}
    for c in m.past_labels:
        v = m.mu(c=c)
        if v <= cell_tol:
            raise ConditionUndefined(f"past cell {c!r} has measure {v:.3e}")
        mu_c[c] = v

    r18 = r19 = r20 = r22 = r21 = 0.0
    for c in m.past_labels:
        for alpha in A_SETTINGS:
            r22 = max(r22, abs(m.mu(alpha=alpha, c=c) / mu_c[c] - m.mu(alpha=alpha)))
        for beta in B_SETTINGS:
            r22 = max(r22, abs(m.mu(beta=beta, c=c) / mu_c[c] - m.mu(beta=beta)))
        for alpha, beta in PAIRS:
            mu_ab_c = m.mu(alpha=alpha, beta=beta, c=c)
            mu_a_c = m.mu(alpha=alpha, c=c)
            mu_b_c = m.mu(beta=beta, c=c)
            r19 = max(r19, abs(mu_ab_c / mu_c[c] - (mu_a_c / mu_c[c]) * (mu_b_c / mu_c[c])))
            r21 = max(r21, abs(mu_ab_c - m.mu(alpha=alpha, beta=beta) * mu_c[c]))
            for i in OUTCOMES:
                for j in OUTCOMES:
                    mu_ij_c = m.mu(alpha=alpha, i=i, beta=beta, j=j, c=c)
                    mu_i_c = m.mu(alpha=alpha, i=i, c=c)
                    mu_j_c = m.mu(beta=beta, j=j, c=c)
                    r18 = max(r18, abs(mu_ij_c / mu_c[c]
                                       - (mu_i_c / mu_c[c]) * (mu_j_c / mu_c[c])))
                    if mu_ab_c > cell_tol and mu_a_c > cell_tol and mu_b_c > cell_tol:
                        r20 = max(r20, abs(mu_ij_c / mu_ab_c
                                           - (mu_i_c / mu_a_c) * (mu_j_c / mu_b_c)))
    worst = max(r18, r19, r20, r22, r21)
    return ClassicalScreeningReport(
        holds=worst <= tol, tol=tol,
        outcome_screening=r18, setting_screening=r19, staged_conditioning=r20,
        setting_independence=r22, setting_past_product=r21,
    )


def joint_from_screening(m: StructuredModel, tol: float = SCREENING_TOL,
                         check: bool = True) -> ClassicalMeasure:
    """Joint distribution on the 16-atom space via the maximal independence ansatz.

    mu_hat(i i' j j') = sum_c mu(a_i | a & c) mu(a'_i' | a' & c)
                              mu(b_j | b & c) mu(b'_j' | b' & c) mu(c).

    The marginals of the result reproduce the model's conditional
    experimental probabilities whenever the model screens off.
    """
    if check:
        report = check_classical_screening(m, tol=tol)
        if not report.holds:
            raise InvalidMeasure(f"model does not screen off (worst residual "
                                 f"{max(report.outcome_screening, report.setting_independence):.3e})")
    cond = {}
    for setting in A_SETTINGS + B_SETTINGS:
        side = "A" if setting in A_SETTINGS else "B"
        for c in m.past_labels:
            denom = (m.mu(alpha=setting, c=c) if side == "A" else m.mu(beta=setting, c=c))
            if denom <= PAST_CELL_TOL:
                raise ConditionUndefined(f"mu({setting} & {c}) vanishes")
            for outcome in OUTCOMES:
                num = (m.mu(alpha=setting, i=outcome, c=c) if side == "A"
                       else m.mu(beta=setting, j=outcome, c=c))
                cond[(setting, outcome, c)] = num / denom

    weights = np.zeros(16)
    for x in range(16):
        i, ip, j, jp = SCENARIO.quad(x)
        total = 0.0
        for c in m.past_labels:
            total += (cond[("a", i, c)] * cond[("a'", ip, c)]
                      * cond[("b", j, c)] * cond[("b'", jp, c)] * m.mu(c=c))
        weights[x] = total
    return ClassicalMeasure(SCENARIO.space, weights)


def conditional_experimental_probabilities(m: StructuredModel,
                                           tol: float = PAST_CELL_TOL) -> ExperimentalProbabilities:
    """p(alpha_i, beta_j) = mu(alpha_i & beta_j) / mu(alpha & beta)."""
    table = np.zeros((2, 2, 2, 2))
    for ai, alpha in enumerate(A_SETTINGS):
        for bi, beta in enumerate(B_SETTINGS):
            denom = m.mu(alpha=alpha, beta=beta)
            if denom <= tol:
                raise ConditionUndefined(f"mu({alpha} & {beta}) = {denom:.3e}")
            for i in OUTCOMES:
                for j in OUTCOMES:
                    ib = 0 if i == 1 else 1
                    jb = 0 if j == 1 else 1
                    table[ai, bi, ib, jb] = m.mu(alpha=alpha, i=i, beta=beta, j=j) / denom
    return ExperimentalProbabilities(table)


def _require_product(w: SettingWeights) -> None:
    if not w.is_product(1e-10):
        raise InvalidMeasure(
            "setting weights must factorize (independent settings); "
            f"cross-product residual {w.product_residual():.3e}"
        )


def augment_classical(mu_hat: ClassicalMeasure, w: SettingWeights,
                      drop_tol: float = PAST_CELL_TOL) -> StructuredModel:
    """Screening model with fabricated past labels recording the quadruple.

    The atom weight is mu(alpha & beta) mu_hat(h) [i = h_alpha] [j = h_beta]:
    the past determines both outcomes, so conditioning on it screens A from
    B.  Past cells of measure below drop_tol are omitted.  Setting weights
    must factorize, otherwise setting screening cannot hold.
    """
    if mu_hat.space != SCENARIO.space:
        raise InvalidMeasure("mu_hat must live on the canonical 16-atom space")
    if not mu_hat.is_normalized(1e-9):
        raise InvalidMeasure("mu_hat must be normalized")
    _require_product(w)
    cells = [x for x in range(16) if mu_hat.weights[x] > drop_tol]
    if not cells:
        raise InvalidMeasure("mu_hat has no cell of positive measure")
    past = [SCENARIO.space.labels[x] for x in cells]
    n_cells = len(cells)
    weights = np.zeros(16 * n_cells)
    for ci, x in enumerate(cells):
        quad = SCENARIO.quad(x)
        for alpha, beta in PAIRS:
            i = quad[A_SETTINGS.index(alpha)]
            j = quad[2 + B_SETTINGS.index(beta)]
            idx = _atom_index(n_cells, alpha, i, beta, j, ci)
            weights[idx] = w.weight(alpha, beta) * mu_hat.weights[x]
    return classical_model(past, weights)


# ---------------------------------------------------------------------------
# quantal screening off


@dataclass
class QuantalScreeningReport:
    """Residuals of the quantal screening conditions over all setting pairs,
    outcomes, and past-cell pairs."""

    holds: bool
    tol: float
    screening: float              # the multiplicative condition, off-diagonal settings included
    setting_independence: float
    cross_products: Optional[float]   # 2x2 cross-product (product-form) variant
    rank_one_defect: Optional[float]  # worst sigma_2 on blocks with D(c;cbar) = 0


def _quantal_tensors(m: StructuredModel):
    n = m.n_cells
    M = m.measure.matrix.reshape(2, 2, 2, 2, n, 2, 2, 2, 2, n)
    d_cc = M.sum(axis=(0, 1, 2, 3, 5, 6, 7, 8))              # (c, cbar)
    d_a = M.sum(axis=(2, 3, 7, 8))                            # (alpha, i, c, alphabar, k, cbar)
    d_b = M.sum(axis=(0, 1, 5, 6))                            # (beta, j, c, betabar, l, cbar)
    return M, d_cc, d_a, d_b


def check_quantal_screening(m: StructuredModel, tol: float = SCREENING_TOL,
                            product_form: bool = True,
                            rank1_tol: float = 1e-8) -> QuantalScreeningReport:
    """Residuals of quantal screening off for a structured decoherence functional."""
    if m.is_classical:
        raise InvalidMeasure("quantal screening check needs a decoherence functional")
    M, d_cc, d_a, d_b = _quantal_tensors(m)

    lhs = M * d_cc[None, None, None, None, :, None, None, None, None, :]
    rhs = (d_a[:, :, None, None, :, :, :, None, None, :]
           * d_b[None, None, :, :, :, None, None, :, :, :])
    r27 = float(np.abs(lhs - rhs).max())

    n = m.n_cells
    r_si = 0.0
    for ai in range(2):
        mu_alpha = M[ai, :, :, :, :, ai].sum().real
        for bi in range(2):
            mu_beta = M[:, :, bi, :, :, :, :, bi].sum().real
            block = M[ai, :, bi, :, :, ai, :, bi, :, :].sum(axis=(0, 1, 3, 4))
            r_si = max(r_si, float(np.abs(block - mu_alpha * mu_beta * d_cc).max()))

    r28 = None
    r_rank1 = None
    if product_form:
        r28 = 0.0
        r_rank1 = 0.0
        # rows: (A-event bra, A-event ket); cols: (B-event bra, B-event ket)
        P = M.transpose(4, 9, 0, 1, 5, 6, 2, 3, 7, 8).reshape(n, n, 16, 16)
        for ci in range(n):
            for cj in range(n):
                blk = P[ci, cj]
                prod = np.einsum("ij,kl->ikjl", blk, blk)
                r28 = max(r28, float(np.abs(prod - prod.transpose(1, 0, 2, 3)).max()))
                if abs(d_cc[ci, cj]) <= tol:
                    sig2 = _second_singular_value(blk)
                    r_rank1 = max(r_rank1, sig2)
    worst = max(r27, r_si)
    return QuantalScreeningReport(
        holds=worst <= tol, tol=tol,
        screening=r27, setting_independence=r_si,
        cross_products=r28, rank_one_defect=r_rank1,
    )


def _second_singular_value(block: np.ndarray) -> float:
    w, _ = hermitian_eigen(block.conj().T @ block)
    if len(w) < 2:
        return 0.0
    return float(np.sqrt(max(w[-2], 0.0)))


def augment_quantal(df_hat: DecoherenceFunctional, w: SettingWeights,
                    check_input: bool = True) -> StructuredModel:
    """Quantal screening model from a joint decoherence functional.

    Past labels record the outcome quadruple; within each setting pair the
    entries are w(alpha & beta) D_hat(h ; p) pinned to the outcomes the past
    dictates, and blocks that are off-diagonal in the settings vanish.  The
    result agrees with the setting-conditioned experimental data, keeps the
    past independent of the settings, and inherits strong positivity.
    """
    if df_hat.space != SCENARIO.space:
        raise InvalidMeasure("df_hat must live on the canonical 16-atom space")
    _require_product(w)
    if check_input:
        if not df_hat.is_normalized(1e-8):
            raise InvalidMeasure("df_hat must be normalized")
        strong = check_strong_positivity(df_hat)
        if not strong.holds:
            raise NotStronglyPositive(
                f"df_hat has eigenvalue {strong.witness_value:.3e}")
        experimental_probabilities(df_hat)  # raises MarginalsNotDiagonal
    n_cells = 16
    past = list(SCENARIO.space.labels)
    matrix = np.zeros((16 * n_cells, 16 * n_cells), dtype=complex)
    for alpha, beta in PAIRS:
        pa = A_SETTINGS.index(alpha)
        pb = 2 + B_SETTINGS.index(beta)
        for h in range(16):
            hq = SCENARIO.quad(h)
            row = _atom_index(n_cells, alpha, hq[pa], beta, hq[pb], h)
            for p in range(16):
                pq = SCENARIO.quad(p)
                col = _atom_index(n_cells, alpha, pq[pa], beta, pq[pb], p)
                matrix[row, col] = w.weight(alpha, beta) * df_hat.matrix[h, p]
    return quantal_model(past, matrix)


# ---------------------------------------------------------------------------
# random instances for property sweeps


def random_screening_model(rng: np.random.Generator, n_cells: int = 3) -> StructuredModel:
    """Random classical model that screens off by construction.

    Outcomes on each side depend only on (setting, past cell); settings are
    independent of everything.
    """
    labels = [f"c{k}" for k in range(n_cells)]
    w_a = rng.uniform(0.2, 0.8)
    w_b = rng.uniform(0.2, 0.8)
    side_w = {"a": w_a, "a'": 1 - w_a, "b": w_b, "b'": 1 - w_b}
    mu_c = rng.dirichlet(np.ones(n_cells)) * 0.9 + 0.1 / n_cells
    mu_c /= mu_c.sum()
    p_plus = {(s, k): rng.uniform(0.05, 0.95)
              for s in ("a", "a'", "b", "b'") for k in range(n_cells)}
    weights = np.zeros(16 * n_cells)
    for idx, (al, ii, be, jj, ci) in enumerate(_atom_tuples(n_cells)):
        pa = p_plus[(al, ci)] if ii == 1 else 1 - p_plus[(al, ci)]
        pb = p_plus[(be, ci)] if jj == 1 else 1 - p_plus[(be, ci)]
        weights[idx] = side_w[al] * side_w[be] * pa * pb * mu_c[ci]
    return classical_model(labels, weights)
