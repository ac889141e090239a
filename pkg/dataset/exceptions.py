from mapio.exceptions import MalformedXml  # noqa: F401
from paralleleye.exceptions import ConfigError, IoFailure, ParallelEyeError  # noqa: F401


class BoxOutOfBounds(ParallelEyeError):
    def __init__(self, box, width, height):
        super().__init__(f"box {tuple(box)} does not fit a {width}x{height} image")
        self.box = tuple(box)
        self.width = width
        self.height = height


class MissingOcclusionData(ParallelEyeError):
    def __init__(self, image_id):
        super().__init__(f"image {image_id} has objects without occ_rate")
        self.image_id = image_id


class DuplicateNamespace(ConfigError):
    pass


class SampleTooLarge(ConfigError):
    def __init__(self, n, available):
        super().__init__(f"cannot sample {n} images from {available}")
        self.n = n
        self.available = available
