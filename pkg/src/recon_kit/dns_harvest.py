"""Hostname to IP address resolution."""

from __future__ import annotations

import ipaddress
import socket
from dataclasses import dataclass

from .errors import ResolutionError


@dataclass(frozen=True)
class HostEntry:
    """Address records for one queried host name."""

    query: str
    canonical_name: str
    aliases: tuple[str, ...] = ()
    addresses: tuple[str, ...] = ()


def _is_ip_literal(name: str) -> bool:
    try:
        ipaddress.ip_address(name)
    except ValueError:
        return False
    return True


def resolve_host(name: str, overrides: dict[str, list[str]] | None = None) -> HostEntry:
    """Resolve *name* to its addresses, preserving resolver answer order.

    IP literals pass through without touching the network. An *overrides*
    map (name -> address list) short-circuits the system resolver and makes
    resolution hermetic for tests.

    Raises:
        ResolutionError: NXDOMAIN, timeout, or an empty answer.
    """
    if not name:
        raise ResolutionError("empty host name", name=name)
    if _is_ip_literal(name):
        return HostEntry(query=name, canonical_name=name, addresses=(name,))
    if overrides is not None and name in overrides:
        addresses = tuple(overrides[name])
        if not addresses:
            raise ResolutionError(f"override for {name!r} has no addresses", name=name)
        return HostEntry(query=name, canonical_name=name, addresses=addresses)
    try:
        canonical, aliases, addresses = socket.gethostbyname_ex(name)
    except OSError:
        # gethostbyname_ex is IPv4-only; retry for v6-only hosts.
        try:
            infos = socket.getaddrinfo(name, None, proto=socket.IPPROTO_TCP)
        except OSError as exc:
            raise ResolutionError(f"cannot resolve {name!r}: {exc}", name=name) from exc
        seen: list[str] = []
        for _family, _type, _proto, _cname, sockaddr in infos:
            addr = sockaddr[0]
            if addr not in seen:
                seen.append(addr)
        if not seen:
            raise ResolutionError(f"no addresses for {name!r}", name=name)
        return HostEntry(query=name, canonical_name=name, addresses=tuple(seen))
    if not addresses:
        raise ResolutionError(f"no addresses for {name!r}", name=name)
    return HostEntry(
        query=name,
        canonical_name=canonical,
        aliases=tuple(aliases),
        addresses=tuple(addresses),
    )
