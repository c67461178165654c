"""Inner-product space of a strongly positive decoherence functional.

The atom matrix of a strongly positive decoherence functional is a Gram
matrix, so the atoms embed as vectors whose inner products reproduce D
entrywise.  Null directions are removed spectrally: eigenvalues above the
zero tolerance are kept, tiny negatives inside the tolerance are clamped to
zero, and the embedding is E = sqrt(Lambda_r) U_r^dagger, giving an
r-dimensional space with E^dagger E ~ D.

Correlators of a joint functional with diagonal marginals become inner
products of the four signed setting vectors, which is what turns the CHSH
combination into a geometric quantity bounded by 2 sqrt(2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import epr
from .errors import NotStronglyPositive
from .linalg import eigen_zero_tol, hermitian_eigen
from .measure import DecoherenceFunctional

GnsVector = np.ndarray  # coordinates in the constructed space


@dataclass
class GnsSpace:
    """Rank-r embedding of atoms; columns of `embedding` are the atom vectors."""

    df: DecoherenceFunctional
    rank: int
    embedding: np.ndarray   # shape (rank, n_atoms)
    eigenvalues: np.ndarray  # the kept (positive) eigenvalues
    zero_tol: float

    def atom_vector(self, atom: int) -> GnsVector:
        return self.embedding[:, atom]

    def reconstruction_error(self) -> float:
        gram = self.embedding.conj().T @ self.embedding
        return float(np.abs(gram - self.df.matrix).max())


def gns_construct(df: DecoherenceFunctional, zero_tol: float | None = None) -> GnsSpace:
    """Build the inner-product space; raises NotStronglyPositive below -zero_tol.

    Eigenvalues in [-zero_tol, 0) are treated as zero: boundary cases sit
    exactly on the edge of strong positivity and floating error produces
    tiny negatives there.
    """
    if zero_tol is None:
        zero_tol = eigen_zero_tol(df.matrix)
    w, U = hermitian_eigen(df.matrix)
    if w[0] < -zero_tol:
        raise NotStronglyPositive(
            f"most negative eigenvalue {w[0]:.3e} is below -{zero_tol:.3e}"
        )
    keep = w > zero_tol
    kept = w[keep]
    E = np.sqrt(kept)[:, None] * U[:, keep].conj().T
    return GnsSpace(df=df, rank=int(keep.sum()), embedding=E,
                    eigenvalues=kept, zero_tol=zero_tol)


def inner(space: GnsSpace, u: GnsVector, v: GnsVector) -> complex:
    """Hermitian inner product <u|v>, conjugate-linear in the first slot."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != (space.rank,) or v.shape != (space.rank,):
        raise ValueError(f"vectors must have dimension {space.rank}")
    return complex(np.vdot(u, v))


def setting_vector(space: GnsSpace, setting: str,
                   tol: float = epr.MARGINAL_DIAGONAL_TOL) -> GnsVector:
    """Signed sum of atom vectors, sign = the outcome bit of the setting.

    Requires a joint functional on the canonical 16-atom space whose
    marginals are diagonal; only then is the result guaranteed to be a unit
    vector whose pairwise inner products reproduce the correlators.
    """
    epr.experimental_probabilities(space.df, tol)  # raises if not diagonal
    signs = epr.SCENARIO.sign_vector(setting)
    return space.embedding @ signs


@dataclass
class TsirelsonCertificate:
    """Inner-product route to the CHSH quantity and its geometric bound."""

    q_by_pattern: dict[str, float]
    q_max: float
    best_pattern: str
    setting_norms: dict[str, float]
    pair_bound: float          # ||a + a'|| + ||a - a'||
    bound_margin: float        # 2 sqrt(2) - max |Q|
    correlator_agreement: float  # max |<alpha|beta> - X(alpha, beta)|


def tsirelson_certificate(space: GnsSpace, tol: float = 1e-9) -> TsirelsonCertificate:
    """CHSH audit using inner products of the setting vectors.

    Checks that the inner products reproduce the probability-route
    correlators, that each setting vector has unit norm, that
    ||a + a'|| + ||a - a'|| <= 2 sqrt(2), and that every admissible Q is
    below that pair bound.
    """
    vec = {s: setting_vector(space, s) for s in epr.SETTINGS}
    probs = epr.experimental_probabilities(space.df)

    agreement = 0.0
    x_inner = {}
    for alpha, beta in epr.PAIRS:
        ip = inner(space, vec[alpha], vec[beta])
        x_inner[(alpha, beta)] = ip.real
        agreement = max(agreement, abs(ip - epr.correlator(probs, alpha, beta)))
    if agreement > tol:
        raise ValueError(
            f"inner products disagree with correlators by {agreement:.3e}"
        )

    norms = {s: float(np.linalg.norm(vec[s])) for s in epr.SETTINGS}
    for s, nrm in norms.items():
        if abs(nrm - 1.0) > tol:
            raise ValueError(f"setting vector {s} has norm {nrm}, expected 1")

    q_by_pattern = {}
    q_max = 0.0
    best = str(epr.ADMISSIBLE_PATTERNS[0])
    for pattern in epr.ADMISSIBLE_PATTERNS:
        s = pattern.signs()
        q = (s[0] * x_inner[("a", "b")] + s[1] * x_inner[("a'", "b")]
             + s[2] * x_inner[("a", "b'")] + s[3] * x_inner[("a'", "b'")])
        q_by_pattern[str(pattern)] = q
        if abs(q) > q_max:
            q_max = abs(q)
            best = str(pattern)

    plus = vec["a"] + vec["a'"]
    minus = vec["a"] - vec["a'"]
    pair_bound = float(np.linalg.norm(plus) + np.linalg.norm(minus))
    if pair_bound > epr.TSIRELSON_BOUND + tol:
        raise ValueError(f"||a+a'|| + ||a-a'|| = {pair_bound} exceeds 2 sqrt(2)")
    if q_max > pair_bound + tol:
        raise ValueError(f"|Q| = {q_max} exceeds the pair bound {pair_bound}")

    return TsirelsonCertificate(
        q_by_pattern=q_by_pattern,
        q_max=q_max,
        best_pattern=best,
        setting_norms=norms,
        pair_bound=pair_bound,
        bound_margin=epr.TSIRELSON_BOUND - q_max,
        correlator_agreement=float(agreement),
    )
