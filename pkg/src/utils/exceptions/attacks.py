"""Attack-related exceptions."""

from src.utils.exceptions.base import PeasError


class AttackError(PeasError):
    """Base class for all attack errors."""
    pass


class AttackConfigError(AttackError):
    """Invalid attack specification (budget, steps, unknown algorithm, etc.)."""
    pass


class ExternalAttackError(AttackError):
    """The external attack command failed or produced unreadable output."""
    pass


class BudgetViolationError(AttackError):
    """An adversarial image left the epsilon-ball around its start or the [0, 1] range."""
    pass
