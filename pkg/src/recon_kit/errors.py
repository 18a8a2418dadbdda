"""Exception hierarchy shared by all recon-kit modules."""

from __future__ import annotations


class ReconError(Exception):
    """Base class for every error raised by this package."""


class InvalidUrl(ReconError):
    """Raised when a target URL cannot be canonicalized."""


class NetworkError(ReconError):
    """Connection, timeout, reset or TLS failure while talking to a target.

    Carries the URL (or server address) at which the failure occurred.
    """

    def __init__(self, message: str, url: str = ""):
        super().__init__(message)
        self.url = url


class TooManyRedirects(NetworkError):
    """Redirect hop limit reached; the chain walked so far is attached."""

    def __init__(self, message: str, url: str = "", chain: list | None = None):
        super().__init__(message, url=url)
        self.chain = chain or []


class ResolutionError(ReconError):
    """DNS resolution failed for the queried name."""

    def __init__(self, message: str, name: str = ""):
        super().__init__(message)
        self.name = name


class SignatureError(ReconError):
    """A signature file record is malformed (bad regex, duplicate id, ...)."""

    def __init__(self, sig_id: str, reason: str):
        super().__init__(f"signature {sig_id!r}: {reason}")
        self.sig_id = sig_id
        self.reason = reason


class DataFileError(ReconError):
    """An auxiliary data file (error signatures, payloads, config) is invalid."""


class ReferralLoop(ReconError):
    """A WHOIS server referred the query back to itself."""

    def __init__(self, server: str):
        super().__init__(f"whois referral loop at {server}")
        self.server = server


class ActiveModeRequired(ReconError):
    """An active probe was invoked without active mode being enabled."""


class BindError(ReconError):
    """A fixture server could not bind its listening socket."""
