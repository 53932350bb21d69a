"""Error taxonomy shared across the package.

CLI exit codes: ParameterError -> 2, ProtocolError -> 3, IntegrityError -> 4.
"""


class PrivcnnError(Exception):
    """Base class for all package errors."""


class ParameterError(PrivcnnError):
    """Invalid parameters, malformed inputs, failed validation."""


class ProtocolError(PrivcnnError):
    """A protocol phase failed; message carries role/layer context."""


class IntegrityError(PrivcnnError):
    """Cryptographic integrity violation (tampered table, bad tag, decrypt mismatch)."""


class MissingKeyError(ProtocolError):
    """A rotation was requested for which no evaluation key is available."""

    def __init__(self, galois_elt: int):
        self.galois_elt = galois_elt
        super().__init__(f"no evaluation key for galois element {galois_elt}")
