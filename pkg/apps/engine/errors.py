#!/usr/bin/env python3
"""Exception hierarchy shared by the engine modules and the CLI."""

from __future__ import annotations


class AfpError(Exception):
    """Base class. `exit_code` is what the CLI returns for this class."""

    exit_code = 1


class ConfigError(AfpError):
    exit_code = 2


class DomainEscape(AfpError):
    exit_code = 3


class DepthExhausted(AfpError):
    exit_code = 4

    def __init__(self, max_order: int, message: str | None = None) -> None:
        self.max_order = max_order
        super().__init__(
            message
            or f"no unlabelable vertex up to subdivision order {max_order} "
            "(epsilon too small for the cap, or the map is effectively discontinuous at this scale)"
        )


class UnboundedBasis(AfpError):
    pass


class AnchorOutsideC(AfpError):
    pass


class ImproperLabeling(AfpError):
    pass


class HypothesisViolation(AfpError):
    pass


class NotARetraction(AfpError):
    pass
