from paralleleye.exceptions import ConfigError


class UnknownClass(ConfigError):
    def __init__(self, name, known):
        super().__init__(f"detections name class {name!r}, which the dataset does not have ({', '.join(sorted(known))})")
        self.name = name


class ZeroReference(ConfigError):
    def __init__(self, key=None):
        where = f" for {key}" if key is not None else ""
        super().__init__(f"reference AP{where} is zero; rate of descent is undefined")
        self.key = key
