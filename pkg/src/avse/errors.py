"""Exception types shared across the package."""


class AvseError(Exception):
    """Base class for package-specific failures."""


class FormatError(AvseError):
    """A file or wire payload does not conform to its documented format."""


class CoverageError(AvseError):
    """An embedding sequence is too short for the audio it must cover."""


class ProtocolError(AvseError):
    """A caller violated an ordering or framing contract."""
