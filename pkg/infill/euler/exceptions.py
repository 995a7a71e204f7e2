class Error(Exception):
    pass


class DegenerateGeometry(Error, ValueError):
    pass


class InvalidComplex(Error, ValueError):
    pass


class NotEulerReady(InvalidComplex):
    pass


class OffsetChangesGeometry(Error, ValueError):
    pass


class NotEulerian(Error, ValueError):
    pass


class InvalidLayers(Error, ValueError):
    pass


class ConfigError(Error, ValueError):
    pass


class InternalInvariantViolation(Error, RuntimeError):
    pass
