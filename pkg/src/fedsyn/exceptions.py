"""Exception hierarchy shared by every fedsyn module."""


class FedSynError(Exception):
    """Base class for all errors raised by fedsyn."""


class AlignmentError(FedSynError, ValueError):
    """Parameter sets, architectures or arrays do not line up."""


class NumericDomainError(FedSynError, ValueError):
    """A non-finite value reached a computation that requires finite input."""


class DomainError(FedSynError, ValueError):
    """An argument lies outside the domain of the operation."""


class CapacityError(FedSynError, ValueError):
    """A request asks for more samples than are available."""


class ProtocolError(FedSynError, RuntimeError):
    """The federated protocol could not complete a round."""

    def __init__(self, message, client_id=None):
        super().__init__(message)
        self.client_id = client_id


class FormatError(FedSynError, ValueError):
    """A binary payload is malformed.

    ``offset`` is the byte position at which decoding failed.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class PreconditionError(FedSynError, RuntimeError):
    """A command was invoked before its inputs exist."""


class ConfigError(FedSynError, ValueError):
    """An experiment configuration is malformed or refers to missing files."""
