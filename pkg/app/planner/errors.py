"""Exceptions raised by the route planner."""


class PlannerError(Exception):
    """Base class for every planner failure."""


class InvalidParam(PlannerError, ValueError):
    pass


class Infeasible(PlannerError, ValueError):
    pass


class NonAdjacent(PlannerError, ValueError):
    pass


class UnknownVertex(PlannerError, LookupError):
    pass


class UnknownCell(PlannerError, LookupError):
    pass


class DanglingRef(PlannerError, LookupError):
    pass


class MismatchedIndex(PlannerError):
    pass


class FormatError(PlannerError, ValueError):
    """Malformed input file; ``offset`` is the byte offset of the bad line."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset
