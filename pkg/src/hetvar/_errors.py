"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument: wrong shape, out-of-range parameter, bad config."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (singular system, non-finite objective...).

    ``last_iterate`` carries the solver state at the time of failure when
    one exists, so callers can inspect how far it got.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
