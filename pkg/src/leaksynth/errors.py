"""Exception hierarchy shared by all stages."""


class LeakSynthError(Exception):
    """Base class; ``reason`` is the machine-readable tag used in manifests."""

    @property
    def reason(self):
        return type(self).__name__


class GeometryMismatch(LeakSynthError, ValueError):
    pass


class MapFormatError(LeakSynthError, ValueError):
    pass


class EmptyLeakage(LeakSynthError):
    pass


class SingleRowLeakage(LeakSynthError):
    pass


class OutOfGrid(LeakSynthError):
    pass


class NoMassAboveThreshold(LeakSynthError, ValueError):
    pass


class BelowThreshold(LeakSynthError, ValueError):
    pass


class CflViolation(LeakSynthError, ValueError):
    def __init__(self, message, max_dt):
        super().__init__(message)
        self.max_dt = max_dt


class DivergenceDetected(LeakSynthError, FloatingPointError):
    def __init__(self, message, step_index):
        super().__init__(message)
        self.step_index = step_index
