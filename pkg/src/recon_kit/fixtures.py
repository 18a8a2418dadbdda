"""Hermetic HTTP and WHOIS fixture servers for offline verification.

A :class:`SiteSpec` declares routes and per-route behaviors (static pages,
redirects, quote-triggered SQL errors, traversal-vulnerable file echo) and
responds as a pure function of the request line, so the same spec can back
a real listening server or be driven in-process with no sockets at all.
Every received request line is appended to the spec's ``request_log``,
which is what scanner tests use to assert request counts, one-mutation
behavior and the passive-mode guarantee.
"""

from __future__ import annotations

import json
import socketserver
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qsl, urlencode, urljoin

from .errors import BindError, DataFileError, NetworkError, TooManyRedirects
from .http_probe import (
    REDIRECT_STATUSES,
    CanonicalUrl,
    FetchPolicy,
    Headers,
    HttpSnapshot,
    canonicalize_url,
)

FIXTURE_SERVER_BANNER = "FixtureHTTPd/1.0"
_DEFAULT_CONTENT_TYPE = ("Content-Type", "text/html; charset=utf-8")
_NOT_FOUND_BODY = b"<html><body><h1>404 not found</h1></body></html>"

# Error bodies emitted by the sqli_error_on_quote behavior. These carry the
# exact strings the bundled error signatures look for.
DBMS_ERROR_TEXT = {
    "MySQL": (
        "You have an error in your SQL syntax; check the manual that "
        "corresponds to your MySQL server version for the right syntax to "
        "use near '{value}' at line 1"
    ),
    "SQL Server": (
        "Unclosed quotation mark after the character string '{value}'."
    ),
    "Oracle": "ORA-01756: quoted string not properly terminated",
    "PostgreSQL": "ERROR: unterminated quoted string at or near \"{value}\"",
}


@dataclass(frozen=True)
class Redirect:
    target: str
    status: int = 302


@dataclass(frozen=True)
class SqliErrorOnQuote:
    dbms: str = "MySQL"


@dataclass(frozen=True)
class LfiEcho:
    files: dict[str, bytes]
    default_body: bytes = b"<html><body>file not found</body></html>"


@dataclass(frozen=True)
class EchoParams:
    pass


Behavior = Redirect | SqliErrorOnQuote | LfiEcho | EchoParams


@dataclass(frozen=True)
class RouteSpec:
    status: int = 200
    headers: tuple[tuple[str, str], ...] = ()
    body: bytes = b""
    behavior: Behavior | None = None


@dataclass
class SiteSpec:
    """Declarative mock site: routes, behaviors and the received-request log."""

    routes: dict[str, RouteSpec]
    name: str = ""
    probe_path: str = "/"
    request_log: list[str] = field(default_factory=list)
    _log_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def log_request(self, request_line: str) -> None:
        with self._log_lock:
            self.request_log.append(request_line)

    def respond(self, target: str) -> tuple[int, tuple[tuple[str, str], ...], bytes]:
        """Deterministic response for one request target ("/path?query")."""
        path, _, query = target.partition("?")
        route = self.routes.get(path)
        if route is None:
            return 404, (_DEFAULT_CONTENT_TYPE,), _NOT_FOUND_BODY
        headers = route.headers
        if not any(n.lower() == "content-type" for n, _ in headers):
            headers = headers + (_DEFAULT_CONTENT_TYPE,)
        params = parse_qsl(query, keep_blank_values=True)
        behavior = route.behavior

        if isinstance(behavior, Redirect):
            return behavior.status, headers + (("Location", behavior.target),), b""
        if isinstance(behavior, SqliErrorOnQuote):
            bad = [v for _, v in params if "'" in v]
            if bad:
                text = DBMS_ERROR_TEXT[behavior.dbms].format(value=bad[0])
                body = (
                    "<html><body><h1>Database error</h1><p>"
                    + text
                    + "</p></body></html>"
                ).encode("utf-8")
                return 500, headers, body
            return route.status, headers, route.body
        if isinstance(behavior, LfiEcho):
            for _, value in params:
                if value in behavior.files:
                    return 200, headers, behavior.files[value]
            return route.status, headers, route.body or behavior.default_body
        if isinstance(behavior, EchoParams):
            echoed = " ".join(f"{n}={v}" for n, v in params)
            body = (
                "<html><body>" + route.body.decode("utf-8", errors="replace")
                + f"<p>params: {echoed}</p></body></html>"
            ).encode("utf-8")
            return route.status, headers, body
        return route.status, headers, route.body


def _route_from_json(entry: dict, base_dir: Path) -> RouteSpec:
    def read_body(spec: dict, body_key: str = "body", file_key: str = "body_file") -> bytes:
        if file_key in spec:
            return (base_dir / spec[file_key]).read_bytes()
        value = spec.get(body_key, "")
        return value.encode("utf-8") if isinstance(value, str) else bytes(value)

    behavior: Behavior | None = None
    raw = entry.get("behavior")
    if raw is not None:
        kind = raw.get("kind")
        if kind == "redirect":
            behavior = Redirect(target=raw["target"], status=int(raw.get("status", 302)))
        elif kind == "sqli_error_on_quote":
            dbms = raw.get("dbms", "MySQL")
            if dbms not in DBMS_ERROR_TEXT:
                raise DataFileError(f"no fixture error text for dbms {dbms!r}")
            behavior = SqliErrorOnQuote(dbms=dbms)
        elif kind == "lfi_echo":
            files: dict[str, bytes] = {}
            for key, value in raw.get("files", {}).items():
                if isinstance(value, dict):
                    files[key] = (base_dir / value["file"]).read_bytes()
                else:
                    files[key] = str(value).encode("utf-8")
            behavior = LfiEcho(files=files)
        elif kind == "echo_params":
            behavior = EchoParams()
        else:
            raise DataFileError(f"unknown fixture behavior kind {kind!r}")
    return RouteSpec(
        status=int(entry.get("status", 200)),
        headers=tuple((str(n), str(v)) for n, v in entry.get("headers", [])),
        body=read_body(entry),
        behavior=behavior,
    )


def load_site_spec(path: str | Path) -> SiteSpec:
    """Load a site spec from JSON; body_file/file paths resolve relative to it."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFileError(f"cannot load site spec {path}: {exc}") from None
    routes = {
        route_path: _route_from_json(entry, path.parent)
        for route_path, entry in doc.get("routes", {}).items()
    }
    if not routes:
        raise DataFileError(f"site spec {path} declares no routes")
    return SiteSpec(
        routes=routes,
        name=doc.get("name", path.stem),
        probe_path=doc.get("probe_path", "/"),
    )


class _FixtureHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        site: SiteSpec = self.server.site  # type: ignore[attr-defined]
        site.log_request(self.requestline)
        status, headers, body = site.respond(self.path)
        self.send_response_only(status)
        names = {n.lower() for n, _ in headers}
        if "server" not in names:
            self.send_header("Server", FIXTURE_SERVER_BANNER)
        for name, value in headers:
            self.send_header(name, value)
        if "content-length" not in names:
            self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        pass


class FixtureServer:
    """A live threaded HTTP server bound to an ephemeral local port."""

    def __init__(self, spec: SiteSpec, host: str = "127.0.0.1", port: int = 0):
        if not spec.routes:
            raise BindError("site spec has no routes")
        try:
            self._httpd = ThreadingHTTPServer((host, port), _FixtureHandler)
        except OSError as exc:
            raise BindError(f"cannot bind fixture server: {exc}") from exc
        self._httpd.site = spec  # type: ignore[attr-defined]
        self._httpd.daemon_threads = True
        self.spec = spec
        self.host, self.port = self._httpd.server_address[:2]
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    @property
    def request_log(self) -> list[str]:
        return list(self.spec.request_log)

    def url(self, path_and_query: str) -> CanonicalUrl:
        return canonicalize_url(self.base_url + path_and_query)

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "FixtureServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def start_fixture(spec: SiteSpec, host: str = "127.0.0.1", port: int = 0) -> FixtureServer:
    """Serve *spec* on an ephemeral port; close() releases it."""
    return FixtureServer(spec, host=host, port=port)


class _WhoisHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        line = self.rfile.readline(1024).decode("utf-8", errors="replace").strip()
        server: "_WhoisServer" = self.server  # type: ignore[assignment]
        if server.refer:
            response = f"refer: {server.refer}\r\n"
        else:
            response = server.records.get(line, f'No match for "{line}"\r\n')
        self.wfile.write(response.encode("utf-8"))


class _WhoisServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, records: dict[str, str], refer: str | None, address):
        self.records = records
        self.refer = refer
        super().__init__(address, _WhoisHandler)


class WhoisFixture:
    """A canned WHOIS server speaking the port-43 wire contract."""

    def __init__(
        self,
        records: dict[str, str],
        refer: str | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        if not records and refer is None:
            raise BindError("whois fixture needs records or a referral target")
        try:
            self._server = _WhoisServer(records, refer, (host, port))
        except OSError as exc:
            raise BindError(f"cannot bind whois fixture: {exc}") from exc
        self.host, self.port = self._server.server_address[:2]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "WhoisFixture":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def start_whois_fixture(
    records: dict[str, str],
    refer: str | None = None,
    host: str = "127.0.0.1",
    port: int = 0,
) -> WhoisFixture:
    """Serve canned WHOIS records on an ephemeral port."""
    return WhoisFixture(records, refer=refer, host=host, port=port)


class InProcessFetcher:
    """Fetcher that drives SiteSpecs directly, with no sockets.

    Useful for fully deterministic scans (pinned hosts and ports) such as
    golden-file tests. Redirects are followed with the same hop rules as
    the live fetcher, and every request is appended to the owning spec's
    request_log.
    """

    def __init__(self, sites: dict[str, SiteSpec], policy: FetchPolicy | None = None):
        self._sites = sites
        self.policy = policy or FetchPolicy()

    def _respond(self, url: CanonicalUrl) -> tuple[int, Headers, bytes]:
        spec = self._sites.get(url.host)
        if spec is None:
            raise NetworkError(f"no fixture site for host {url.host!r}", url=url.render())
        target = url.path + (f"?{urlencode(url.query)}" if url.query else "")
        spec.log_request(f"GET {target} HTTP/1.1")
        status, headers, body = spec.respond(target)
        if not any(n.lower() == "server" for n, _ in headers):
            headers = (("Server", FIXTURE_SERVER_BANNER),) + headers
        return status, Headers(headers), body[: self.policy.body_cap]

    def fetch(self, url: CanonicalUrl) -> HttpSnapshot:
        chain: list[tuple[CanonicalUrl, int]] = []
        current = url
        while True:
            status, headers, body = self._respond(current)
            location = headers.get("Location")
            if status in REDIRECT_STATUSES and location is not None:
                if len(chain) >= self.policy.max_redirects:
                    raise TooManyRedirects(
                        f"redirect limit of {self.policy.max_redirects} reached",
                        url=current.render(),
                        chain=list(chain),
                    )
                chain.append((current, status))
                current = canonicalize_url(urljoin(current.render(), location))
                continue
            return HttpSnapshot(
                requested_url=url,
                final_url=current,
                status=status,
                headers=headers,
                body=body,
                redirect_chain=tuple(chain),
                fetch_millis=0,
            )
