from paralleleye.exceptions import ConfigError, ParallelEyeError


class BehindCamera(ParallelEyeError):
    def __init__(self, z, near):
        super().__init__(f"point at z={z:g} is closer than the near plane ({near:g} m); clip it first")
        self.z = z
        self.near = near


class InvalidRenderSettings(ConfigError):
    pass
