"""Exception types raised across the toolkit."""


class CpBalanceError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(CpBalanceError, ValueError):
    """An input violates a documented precondition."""


class UnstableGainsError(CpBalanceError):
    """The closed loop A+BK is not asymptotically stable, so an infinite sum diverges."""


class UnsupportedGainStructureError(CpBalanceError, ValueError):
    """A closed form was requested for gains outside the structure it was derived for."""


class DegenerateRegionError(CpBalanceError, ValueError):
    """The stability region collapses (tau = 0)."""


class SingularSystemError(CpBalanceError, ArithmeticError):
    """A linear system that must be solved is singular."""


class ConfigError(CpBalanceError):
    """Invalid experiment configuration."""
