"""Exception types shared across the toolkit."""


class QmtError(Exception):
    """Base class for all toolkit errors."""


class SpaceMismatch(QmtError):
    """An event or measure was used with a sample space it does not belong to."""


class InvalidMeasure(QmtError):
    """A measure or decoherence functional violates a construction axiom."""


class ConditionUndefined(QmtError):
    """Conditional probability requested on a condition of zero measure."""


class NotStronglyPositive(QmtError):
    """The atom matrix has an eigenvalue below the allowed tolerance."""


class MarginalsNotDiagonal(QmtError):
    """A setting-pair marginal block has a non-vanishing off-diagonal entry."""

    def __init__(self, pair, max_offdiag):
        self.pair = pair
        self.max_offdiag = max_offdiag
        super().__init__(
            f"marginal block for pair {pair} is not diagonal "
            f"(max off-diagonal magnitude {max_offdiag:.3e})"
        )


class ConvergenceError(QmtError):
    """An iterative routine exceeded its iteration cap."""


class LpError(QmtError):
    """Linear-programming failure (cycling cap, numerical trouble)."""
