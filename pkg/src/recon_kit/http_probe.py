"""Target URL canonicalization and HTTP snapshot capture.

Everything downstream (fingerprinting, probing, reporting) consumes the two
records defined here: :class:`CanonicalUrl`, a strict normalized form of the
target URL, and :class:`HttpSnapshot`, one fetched page with its status,
wire-ordered headers, capped body and the redirect chain that led to it.

The fetcher issues plain GET requests over HTTP/1.1 and follows redirects
itself, one hop at a time, so every hop is recorded and the hop limit is
enforced exactly. No cookies are kept and no JavaScript is executed.
"""

from __future__ import annotations

import dataclasses
import http.client
import ssl
import time
from dataclasses import dataclass, field
from urllib.parse import parse_qsl, urlencode, urljoin, urlsplit

from .errors import InvalidUrl, NetworkError, TooManyRedirects
from .version import VERSION

REDIRECT_STATUSES = frozenset({301, 302, 303, 307, 308})

DEFAULT_TIMEOUT_MILLIS = 10_000
DEFAULT_MAX_REDIRECTS = 5
DEFAULT_BODY_CAP = 2 * 1024 * 1024  # 2 MiB
DEFAULT_USER_AGENT = f"recon-kit/{VERSION}"

_DEFAULT_PORTS = {"http": 80, "https": 443}


class Headers:
    """Ordered multimap of HTTP headers with case-insensitive name lookup.

    Wire order is preserved exactly as received; duplicate names are kept.
    """

    __slots__ = ("_pairs",)

    def __init__(self, pairs: tuple[tuple[str, str], ...] = ()):
        self._pairs = tuple((str(n), str(v)) for n, v in pairs)

    def get(self, name: str, default: str | None = None) -> str | None:
        """First value for *name*, compared case-insensitively."""
        folded = name.lower()
        for n, v in self._pairs:
            if n.lower() == folded:
                return v
        return default

    def get_all(self, name: str) -> list[str]:
        """All values for *name* in wire order."""
        folded = name.lower()
        return [v for n, v in self._pairs if n.lower() == folded]

    def items(self) -> tuple[tuple[str, str], ...]:
        return self._pairs

    def __contains__(self, name: str) -> bool:
        return self.get(name) is not None

    def __iter__(self):
        return iter(self._pairs)

    def __len__(self) -> int:
        return len(self._pairs)

    def __eq__(self, other) -> bool:
        if isinstance(other, Headers):
            return self._pairs == other._pairs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._pairs)

    def __repr__(self) -> str:
        return f"Headers({self._pairs!r})"


@dataclass(frozen=True)
class CanonicalUrl:
    """Normalized http(s) URL: lowercase host, resolved port, ordered query.

    Fragments are always dropped. ``canonicalize_url(u.render()) == u`` holds
    for every instance produced by :func:`canonicalize_url`.
    """

    scheme: str
    host: str
    port: int
    port_was_explicit: bool
    path: str
    query: tuple[tuple[str, str], ...] = ()

    def render(self) -> str:
        """Serialize back to a URL string (inverse of canonicalization)."""
        host = f"[{self.host}]" if ":" in self.host else self.host
        port = f":{self.port}" if self.port_was_explicit else ""
        query = f"?{urlencode(self.query)}" if self.query else ""
        return f"{self.scheme}://{host}{port}{self.path}{query}"

    def with_query(self, query: tuple[tuple[str, str], ...]) -> "CanonicalUrl":
        return dataclasses.replace(self, query=tuple(query))

    def with_path(self, path: str) -> "CanonicalUrl":
        return dataclasses.replace(self, path=path, query=())

    def __str__(self) -> str:
        return self.render()


def canonicalize_url(raw: str) -> CanonicalUrl:
    """Parse and normalize *raw* into a :class:`CanonicalUrl`.

    The scheme is never guessed: a URL without ``http://`` or ``https://``
    is rejected. Query pair order is preserved exactly as given; values are
    stored percent-decoded.

    Raises:
        InvalidUrl: missing/unsupported scheme, empty host, or a bad port.
    """
    if not raw or not raw.strip():
        raise InvalidUrl("empty URL")
    try:
        split = urlsplit(raw.strip())
    except ValueError as exc:
        raise InvalidUrl(f"unparseable URL: {exc}") from exc

    scheme = split.scheme.lower()
    if not scheme:
        raise InvalidUrl(f"missing scheme in {raw!r}")
    if scheme not in _DEFAULT_PORTS:
        raise InvalidUrl(f"unsupported scheme {scheme!r}")

    try:
        host = split.hostname
        port = split.port
    except ValueError as exc:
        raise InvalidUrl(f"bad host/port in {raw!r}: {exc}") from exc
    if not host:
        raise InvalidUrl(f"empty host in {raw!r}")
    port_was_explicit = port is not None
    if port is None:
        port = _DEFAULT_PORTS[scheme]
    if not 1 <= port <= 65535:
        raise InvalidUrl(f"port out of range in {raw!r}")

    path = split.path or "/"
    query = tuple(parse_qsl(split.query, keep_blank_values=True))
    return CanonicalUrl(
        scheme=scheme,
        host=host.lower(),
        port=port,
        port_was_explicit=port_was_explicit,
        path=path,
        query=query,
    )


@dataclass(frozen=True)
class FetchPolicy:
    """Limits applied to every fetch.

    ``insecure_tls`` disables certificate verification; it exists for
    fixture and self-signed targets and is off by default.
    """

    timeout_millis: int = DEFAULT_TIMEOUT_MILLIS
    max_redirects: int = DEFAULT_MAX_REDIRECTS
    body_cap: int = DEFAULT_BODY_CAP
    user_agent: str = DEFAULT_USER_AGENT
    insecure_tls: bool = False


@dataclass(frozen=True)
class HttpSnapshot:
    """One fetched page after redirect resolution.

    ``redirect_chain`` holds every non-final hop as ``(url, status)``;
    ``headers`` and ``body`` belong to the final response. The body is
    truncated at the policy's ``body_cap``.
    """

    requested_url: CanonicalUrl
    final_url: CanonicalUrl
    status: int
    headers: Headers
    body: bytes
    redirect_chain: tuple[tuple[CanonicalUrl, int], ...] = ()
    fetch_millis: int = 0


class HttpFetcher:
    """Blocking GET fetcher, safely shareable across threads.

    Holds no mutable state: every call opens a fresh connection, so a single
    instance may serve concurrent callers scanning different targets.
    """

    def __init__(self, policy: FetchPolicy | None = None):
        self.policy = policy or FetchPolicy()

    def fetch(self, url: CanonicalUrl) -> HttpSnapshot:
        """Fetch *url*, following up to ``policy.max_redirects`` hops.

        Raises:
            NetworkError: connect/timeout/reset/TLS failure, tagged with the
                URL at which it happened.
            TooManyRedirects: the hop limit was reached while the server kept
                redirecting; the chain walked so far rides on the exception.
        """
        policy = self.policy
        chain: list[tuple[CanonicalUrl, int]] = []
        current = url
        started = time.monotonic()
        while True:
            status, headers, body = self._request(current)
            location = headers.get("Location")
            if status in REDIRECT_STATUSES and location is not None:
                if len(chain) >= policy.max_redirects:
                    raise TooManyRedirects(
                        f"redirect limit of {policy.max_redirects} reached",
                        url=current.render(),
                        chain=list(chain),
                    )
                chain.append((current, status))
                try:
                    current = canonicalize_url(urljoin(current.render(), location))
                except InvalidUrl as exc:
                    raise NetworkError(
                        f"unfollowable redirect target {location!r}: {exc}",
                        url=current.render(),
                    ) from exc
                continue
            millis = int((time.monotonic() - started) * 1000)
            return HttpSnapshot(
                requested_url=url,
                final_url=current,
                status=status,
                headers=headers,
                body=body,
                redirect_chain=tuple(chain),
                fetch_millis=millis,
            )

    def _request(self, url: CanonicalUrl) -> tuple[int, Headers, bytes]:
        """Issue one GET and return (status, wire-ordered headers, capped body)."""
        policy = self.policy
        timeout = policy.timeout_millis / 1000.0
        if url.scheme == "https":
            if policy.insecure_tls:
                context = ssl._create_unverified_context()
            else:
                context = ssl.create_default_context()
            conn: http.client.HTTPConnection = http.client.HTTPSConnection(
                url.host, url.port, timeout=timeout, context=context
            )
        else:
            conn = http.client.HTTPConnection(url.host, url.port, timeout=timeout)
        target = url.path
        if url.query:
            target += "?" + urlencode(url.query)
        try:
            conn.request(
                "GET",
                target,
                headers={
                    "User-Agent": policy.user_agent,
                    "Accept": "*/*",
                    "Connection": "close",
                },
            )
            response = conn.getresponse()
            status = response.status
            headers = Headers(tuple(response.getheaders()))
            body = response.read(policy.body_cap)
        except (OSError, http.client.HTTPException) as exc:
            raise NetworkError(
                f"{type(exc).__name__}: {exc}", url=url.render()
            ) from exc
        finally:
            conn.close()
        return status, headers, body


def fetch_snapshot(url: CanonicalUrl, policy: FetchPolicy | None = None) -> HttpSnapshot:
    """One-shot convenience wrapper around :meth:`HttpFetcher.fetch`."""
    return HttpFetcher(policy).fetch(url)


def grab_source(url: CanonicalUrl, policy: FetchPolicy | None = None) -> str:
    """Return the page source as text, like a browser's "view source".

    The body bytes are decoded as UTF-8 with invalid sequences replaced by
    U+FFFD; no entity decoding or rendering is applied.
    """
    snapshot = fetch_snapshot(url, policy)
    return snapshot.body.decode("utf-8", errors="replace")
