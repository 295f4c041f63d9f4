"""Exception hierarchy shared across the package.

The CLI maps any OdalError to exit code 1; usage errors exit 2.
"""


class OdalError(Exception):
    """Base class for all domain errors raised by this package."""


class OntologyInvalid(OdalError):
    pass


class UnknownPosition(OdalError):
    pass


class UnknownClass(OdalError):
    pass


class MissingLabel(OdalError):
    pass


class MalformedLabel(OdalError):
    pass


class EmptyDataset(OdalError):
    pass


class EmptyRun(OdalError):
    pass


class ConfigInvalid(OdalError):
    pass


class WireError(OdalError):
    """Base class for envelope decode failures."""


class BadMagic(WireError):
    pass


class UnsupportedVersion(WireError):
    pass


class LengthMismatch(WireError):
    pass


class ChecksumMismatch(WireError):
    pass


class BackendUnreachable(OdalError):
    pass


class BackendMalformedOutput(OdalError):
    pass


class JudgeUnreachable(OdalError):
    pass
