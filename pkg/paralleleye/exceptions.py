class ParallelEyeError(Exception):
    """Base class of every error raised by the pipeline apps."""


class ConfigError(ParallelEyeError):
    pass


class IoFailure(ParallelEyeError):
    pass
