"""Exception types shared across the package."""


class XRouterError(Exception):
    """Base class for all errors raised by xrouter."""


# clusterkit
class EmptyCorpus(XRouterError, ValueError):
    pass


class TooFewPoints(XRouterError, ValueError):
    pass


class VersionMismatch(XRouterError, ValueError):
    pass


class CorruptFile(XRouterError, ValueError):
    pass


# routecore
class UnknownCluster(XRouterError, LookupError):
    pass


class NoUpstreams(XRouterError, ValueError):
    pass


class MalformedFrame(XRouterError, ValueError):
    pass


# simbackend
class DuplicateId(XRouterError, ValueError):
    pass


class EmptyEngine(XRouterError, RuntimeError):
    pass


# loadgen
class EmptyCategory(XRouterError, ValueError):
    pass


class LoadAborted(XRouterError, RuntimeError):
    pass


# metricspipe
class NoTokens(XRouterError, ValueError):
    pass


class TooFewTokens(XRouterError, ValueError):
    pass


class ZeroDuration(XRouterError, ValueError):
    pass


class EmptyInput(XRouterError, ValueError):
    pass


class EmptyLog(XRouterError, ValueError):
    pass


# benchctl
class MissingCategory(XRouterError, ValueError):
    def __init__(self, category: int):
        super().__init__(f"corpus has no documents in category {category}")
        self.category = category


class ParseError(XRouterError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class LaunchFailure(XRouterError, RuntimeError):
    pass
