"""Exception hierarchy shared across the toolkit."""


class AvaddonRescueError(Exception):
    """Base class for all errors raised by this package."""


class TrailerError(AvaddonRescueError):
    """A byte buffer could not be parsed or built as an infection trailer."""


class CipherError(AvaddonRescueError):
    """Invalid key material or malformed cipher input."""


class StringCodecError(AvaddonRescueError):
    """Input is not valid Base64 and cannot be decoded."""


class DumpFormatError(AvaddonRescueError):
    """The dump file does not match the requested container format."""


class UnusableDumpError(AvaddonRescueError):
    """The dump parsed but carries no memory ranges to scan."""


class EvidenceError(AvaddonRescueError):
    """Verification evidence is missing, too short, or not an infected file."""


class SandboxViolation(AvaddonRescueError):
    """A write operation targeted a path outside the sandbox allow-list."""


class WrapError(AvaddonRescueError):
    """Session-key wrapping or unwrapping failed (tamper or key-size issue)."""


class LayoutSpecError(AvaddonRescueError):
    """A synthetic dump layout is self-contradictory (collisions, stray VAs)."""
