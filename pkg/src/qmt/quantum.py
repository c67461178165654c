"""Joint decoherence functionals from two-qubit quantum mechanics.

Histories assign outcomes to all four spin measurements at once; the joint
decoherence functional is the matrix element of the corresponding projector
chains in the initial state.  The two-qubit basis is ordered
|uu>, |ud>, |du>, |dd> with the A factor on the left, so the singlet state
is (0, 1, -1, 0)/sqrt(2).

Builders:

* build_df_ordered   - projector chains in a fixed measurement order
                       (a then a' on side A, b then b' on side B).
* build_df_sym       - the order-symmetrized variant (anticommutator
                       products with a 1/16 prefactor).
* df_sym_closed_form - polynomial closed form of build_df_sym at the
                       standard direction geometry, the independent oracle
                       the matrix construction is checked against.
* build_df_commuting - trace form for an arbitrary initial density matrix
                       and arbitrary commuting A/B projector families.
* build_df_convex    - convex mixture of the two orderings on each side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .epr import SCENARIO
from .linalg import eigen_zero_tol, hermitian_eigen
from .measure import DecoherenceFunctional

SQRT2 = np.sqrt(2.0)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (PAULI_X, PAULI_Y, PAULI_Z)
I2 = np.eye(2, dtype=complex)

PROJECTOR_TOL = 1e-10


def pauli_dot(n) -> np.ndarray:
    """n . sigma for a 3-vector n."""
    n = np.asarray(n, dtype=float)
    return n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z


@dataclass(frozen=True)
class SpinDirections:
    """Unit measurement directions for the four settings."""

    a: np.ndarray
    a1: np.ndarray
    b: np.ndarray
    b1: np.ndarray

    def __post_init__(self):
        for v in (self.a, self.a1, self.b, self.b1):
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError("directions must be unit vectors")

    def by_setting(self, setting: str) -> np.ndarray:
        return {"a": self.a, "a'": self.a1, "b": self.b, "b'": self.b1}[setting]


def standard_directions() -> SpinDirections:
    """The saturating geometry: a.b = a.b' = a'.b = -a'.b' = 1/sqrt(2).

    Only the dot products matter; this fixes the concrete planar choice
    a = x, a' = y, b = (x+y)/sqrt(2), b' = (x-y)/sqrt(2).
    """
    return SpinDirections(
        a=np.array([1.0, 0.0, 0.0]),
        a1=np.array([0.0, 1.0, 0.0]),
        b=np.array([1.0, 1.0, 0.0]) / SQRT2,
        b1=np.array([1.0, -1.0, 0.0]) / SQRT2,
    )


def singlet_state() -> np.ndarray:
    """The total-spin-zero two-qubit state."""
    return np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / SQRT2


def spin_projector(n, outcome: int, side: str) -> np.ndarray:
    """4x4 projector onto spin outcome +-1 along n for one side.

    (I + outcome * n.sigma)/2 on the chosen factor, identity on the other,
    so A-side and B-side projectors commute exactly.
    """
    if outcome not in (1, -1):
        raise ValueError("outcome must be +1 or -1")
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    p2 = 0.5 * (I2 + outcome * pauli_dot(n))
    if side == "A":
        return np.kron(p2, I2)
    if side == "B":
        return np.kron(I2, p2)
    raise ValueError("side must be 'A' or 'B'")


class ProjectorFamily:
    """Two projectors per setting, A-side families commuting with B-side ones.

    projectors[setting][outcome] is a d x d matrix; validation checks
    idempotence, Hermiticity, completeness per setting, and numerical
    commutation of every A-side projector with every B-side one.
    """

    def __init__(self, projectors: dict, tol: float = PROJECTOR_TOL):
        self.projectors = {s: {o: np.asarray(m, dtype=complex) for o, m in v.items()}
                           for s, v in projectors.items()}
        for setting in ("a", "a'", "b", "b'"):
            if setting not in self.projectors:
                raise ValueError(f"missing projector family for setting {setting}")
        dims = {m.shape for v in self.projectors.values() for m in v.values()}
        if len(dims) != 1 or any(s[0] != s[1] for s in dims):
            raise ValueError("all projectors must be square with one common dimension")
        self.dim = next(iter(dims))[0]
        eye = np.eye(self.dim)
        for setting, fam in self.projectors.items():
            for outcome in (1, -1):
                P = fam[outcome]
                if np.abs(P @ P - P).max() > tol or np.abs(P - P.conj().T).max() > tol:
                    raise ValueError(f"{setting} outcome {outcome}: not a Hermitian projector")
            if np.abs(fam[1] + fam[-1] - eye).max() > tol:
                raise ValueError(f"{setting}: projectors do not sum to the identity")
        for sa in ("a", "a'"):
            for sb in ("b", "b'"):
                for oa in (1, -1):
                    for ob in (1, -1):
                        A = self.projectors[sa][oa]
                        B = self.projectors[sb][ob]
                        if np.abs(A @ B - B @ A).max() > tol:
                            raise ValueError(f"[{sa}, {sb}] projectors do not commute")

    @classmethod
    def from_directions(cls, dirs: SpinDirections) -> "ProjectorFamily":
        proj = {}
        for setting, side in (("a", "A"), ("a'", "A"), ("b", "B"), ("b'", "B")):
            n = dirs.by_setting(setting)
            proj[setting] = {o: spin_projector(n, o, side) for o in (1, -1)}
        return cls(proj)

    def get(self, setting: str, outcome: int) -> np.ndarray:
        return self.projectors[setting][outcome]


def _chain_ops(fam: ProjectorFamily, lam_a: float, lam_b: float) -> np.ndarray:
    """Per-atom history operators L_x, stacked (16, d, d).

    L_x applies the A-side pair then the B-side pair; each side's two
    orderings are mixed with weight lam (1 = the fixed order of
    build_df_ordered, 1/2 = the symmetrized form).
    """
    d = fam.dim
    L = np.empty((16, d, d), dtype=complex)
    for x in range(16):
        i, ip, j, jp = SCENARIO.quad(x)
        Pa, Pap = fam.get("a", i), fam.get("a'", ip)
        Pb, Pbp = fam.get("b", j), fam.get("b'", jp)
        opA = lam_a * (Pap @ Pa) + (1.0 - lam_a) * (Pa @ Pap)
        opB = lam_b * (Pbp @ Pb) + (1.0 - lam_b) * (Pb @ Pbp)
        L[x] = opB @ opA
    return L


def _df_from_chains(L: np.ndarray, rho0: np.ndarray) -> DecoherenceFunctional:
    """D(x;y) = Tr(L_x rho0 L_y^dagger), Hermitian and PSD by construction."""
    D = np.einsum("xab,bc,yac->xy", L, rho0, L.conj(), optimize=True)
    D = 0.5 * (D + D.conj().T)
    return DecoherenceFunctional(SCENARIO.space, D)


def build_df_ordered(state=None, dirs=None) -> DecoherenceFunctional:
    """Joint decoherence functional from ordered projector chains.

    Measurement order a then a' on side A, b then b' on side B; defaults to
    the singlet state and the standard directions.
    """
    state = singlet_state() if state is None else np.asarray(state, dtype=complex)
    if abs(np.linalg.norm(state) - 1.0) > 1e-10:
        raise ValueError("state must be normalized")
    dirs = standard_directions() if dirs is None else dirs
    fam = ProjectorFamily.from_directions(dirs)
    L = _chain_ops(fam, 1.0, 1.0)
    return _df_from_chains(L, np.outer(state, state.conj()))


def build_df_sym(state=None, dirs=None) -> DecoherenceFunctional:
    """Order-symmetrized joint decoherence functional.

    Both measurement orders on each side are averaged (anticommutator
    products, overall prefactor 1/16 relative to the plain products).
    """
    state = singlet_state() if state is None else np.asarray(state, dtype=complex)
    if abs(np.linalg.norm(state) - 1.0) > 1e-10:
        raise ValueError("state must be normalized")
    dirs = standard_directions() if dirs is None else dirs
    fam = ProjectorFamily.from_directions(dirs)
    # lam = 1/2 is the half-anticommutator per side; the two halves supply
    # the conventional 1/16 prefactor of the symmetrized matrix element.
    L = _chain_ops(fam, 0.5, 0.5)
    return _df_from_chains(L, np.outer(state, state.conj()))


def build_df_convex(state, dirs, lam_a: float, lam_b: float) -> DecoherenceFunctional:
    """Convex mixture of the two per-side measurement orders.

    lam_a = lam_b = 1 reproduces build_df_ordered; lam_a = lam_b = 1/2
    reproduces build_df_sym.  Any mixture stays strongly positive with
    diagonal marginals.
    """
    for lam in (lam_a, lam_b):
        if not 0.0 <= lam <= 1.0:
            raise ValueError("ordering weights must lie in [0, 1]")
    state = np.asarray(state, dtype=complex)
    if abs(np.linalg.norm(state) - 1.0) > 1e-10:
        raise ValueError("state must be normalized")
    fam = ProjectorFamily.from_directions(dirs)
    L = _chain_ops(fam, lam_a, lam_b)
    return _df_from_chains(L, np.outer(state, state.conj()))


def build_df_commuting(rho0, families: ProjectorFamily) -> DecoherenceFunctional:
    """Joint decoherence functional from a density matrix and projector families.

    D(x;y) = Tr(L_x rho0 L_y^dagger) with the ordered chains; strong
    positivity holds by the Gram structure and every setting-pair marginal
    is diagonal because A-side and B-side projectors commute.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (families.dim, families.dim):
        raise ValueError("density matrix dimension does not match the projectors")
    if abs(np.trace(rho0) - 1.0) > 1e-9:
        raise ValueError("density matrix must have unit trace")
    w, _ = hermitian_eigen(rho0)
    if w.min() < -eigen_zero_tol(rho0):
        raise ValueError("density matrix must be positive semidefinite")
    L = _chain_ops(families, 1.0, 1.0)
    return _df_from_chains(L, rho0)


def df_sym_closed_form(i: int, ip: int, j: int, jp: int,
                       k: int, kp: int, l: int, lp: int) -> float:
    """Closed form of build_df_sym at the standard geometry and singlet state.

    Derived by reducing each side's anticommutator to (1 + i a.sigma
    + i' a'.sigma)/2 and taking singlet expectations; the four terms are
    the scalar, the a x a' bivector, and the two direction projections.
    """
    t = (1 + i * k + ip * kp) * (1 + j * l + jp * lp)
    t -= (i * kp - ip * k) * (j * lp - jp * l)
    t -= (1 / SQRT2) * (i + k) * (j + l + jp + lp)
    t -= (1 / SQRT2) * (ip + kp) * (j + l - jp - lp)
    return t / 256.0


def df_sym_closed_form_matrix() -> np.ndarray:
    """The full 16x16 matrix of df_sym_closed_form values."""
    M = np.empty((16, 16))
    for x in range(16):
        for y in range(16):
            M[x, y] = df_sym_closed_form(*SCENARIO.quad(x), *SCENARIO.quad(y))
    return M


def random_density_matrix(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    """Unit-trace PSD matrix from a complex Ginibre sample."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_directions(rng: np.random.Generator) -> SpinDirections:
    return SpinDirections(
        a=random_unit_vector(rng),
        a1=random_unit_vector(rng),
        b=random_unit_vector(rng),
        b1=random_unit_vector(rng),
    )


def random_commuting_model(rng: np.random.Generator) -> DecoherenceFunctional:
    """Random trace-form joint decoherence functional (random state and directions)."""
    rho0 = random_density_matrix(rng)
    fam = ProjectorFamily.from_directions(random_directions(rng))
    return build_df_commuting(rho0, fam)
