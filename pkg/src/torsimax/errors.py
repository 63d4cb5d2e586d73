"""Exception hierarchy shared by all torsimax modules."""


class TorsimaxError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(TorsimaxError, ValueError):
    pass


class DegenerateTriangle(InvalidInput):
    pass


class ObtuseTriangle(InvalidInput):
    """The closed form needs the circumcenter inside the closed triangle."""


class NotObtuse(InvalidInput):
    pass


class NotInscribable(InvalidInput):
    pass


class CollinearInput(InvalidInput):
    pass


class DuplicateSites(InvalidInput):
    pass


class InvalidDomain(InvalidInput):
    pass


class DomainError(InvalidInput):
    """Argument outside the open interval where a profile is defined."""


class EmptyDomain(InvalidInput):
    pass


class DegenerateBoundary(InvalidInput):
    pass


class ZeroField(InvalidInput):
    pass


class InvalidP(InvalidInput):
    pass


class OutsideBall(InvalidInput):
    pass


class ClassificationConflict(TorsimaxError):
    """A mesh triangle straddles the lattice boundary; indicates a geometry bug."""


class ToleranceNotReached(TorsimaxError):
    pass


class NotConverged(TorsimaxError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ResolutionTooCoarse(TorsimaxError, ValueError):
    pass


class InvalidParameters(InvalidInput):
    pass


class EmptyList(InvalidInput):
    pass


class EmptyResult(InvalidInput):
    """The requested approximation contains no cells."""
