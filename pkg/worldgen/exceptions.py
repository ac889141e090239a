from paralleleye.exceptions import ConfigError, ParallelEyeError


class TriangulationFailure(ParallelEyeError):
    pass


class NoRoadSpace(ParallelEyeError):
    pass


class ScenarioError(ConfigError):
    pass
