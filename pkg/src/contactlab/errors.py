class SamplingAborted(RuntimeError):
    """A sampler gave up; ``diagnostics`` says why."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class AcceptanceError(SamplingAborted):
    pass


class TruncationError(SamplingAborted):
    pass
