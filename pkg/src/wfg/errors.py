"""Exception and warning types shared across the package."""


class WFGError(Exception):
    """Base class for all package errors."""


class InvalidSignal(WFGError):
    pass


class GridError(WFGError):
    pass


class OutOfBox(GridError):
    pass


class RegionTooLarge(GridError):
    def __init__(self, h, message=""):
        self.h = h
        super().__init__(message or f"dilated region for h={h} exceeds the computable grid")


class EmptyShell(WFGError):
    def __init__(self, index, radius):
        self.index = index
        self.radius = radius
        super().__init__(f"shell {index} starting at radius {radius:g} has too few grid points")


class KindError(WFGError):
    pass


class ConfigError(WFGError):
    pass


class UnsupportedSymbol(WFGError):
    pass


class OrderTooHigh(WFGError):
    pass


class EstimatorError(WFGError):
    pass


class AliasWarning(UserWarning):
    """Signal mass at the box boundary exceeds the aliasing guard."""
