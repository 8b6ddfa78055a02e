class PlotsError(Exception):
    """Anything wrong with the artifacts handed to the renderer."""


class MissingColumn(PlotsError):
    """A CSV lacks a column a figure needs."""


class EmptyTrace(PlotsError):
    """There is nothing to draw: no artifacts, no rows, no feasible cells."""
