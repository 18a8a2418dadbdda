"""Lexical and registration-age phishing heuristics for URLs.

Scoring is a capped weighted sum: each triggered feature contributes its
weight, the total is clamped to [0, 1] and compared against a threshold.
The at-sign and length features extend the classic IP-host / dotted-host /
domain-age trio.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from datetime import date

from .http_probe import CanonicalUrl
from .whois_client import WhoisRecord

F_IP_HOST = "is_ip_host"
F_DOT_COUNT = "host_dot_count"
F_AT_SIGN = "has_at_sign"
F_URL_LENGTH = "url_length"
F_DOMAIN_AGE = "domain_age_days"

DEFAULT_WEIGHTS: dict[str, float] = {
    F_IP_HOST: 0.4,
    F_DOT_COUNT: 0.2,
    F_AT_SIGN: 0.2,
    F_URL_LENGTH: 0.1,
    F_DOMAIN_AGE: 0.3,
}

DOT_LIMIT = 3  # host_dot_count above this triggers
LENGTH_LIMIT = 75  # rendered URL length above this triggers
AGE_LIMIT_DAYS = 30  # domain age below this triggers
PHISH_THRESHOLD = 0.5

LABEL_BENIGN = "benign"
LABEL_SUSPECTED = "suspected_phishing"


@dataclass(frozen=True)
class PhishFeatures:
    is_ip_host: bool
    host_dot_count: int
    has_at_sign: bool
    url_length: int
    domain_age_days: int | None = None


@dataclass(frozen=True)
class PhishVerdict:
    score: float
    label: str
    triggered: tuple[tuple[str, float], ...] = ()


def extract_features(
    url: CanonicalUrl, whois: WhoisRecord | None, now: date
) -> PhishFeatures:
    """Compute lexical features from the rendered URL plus the domain age.

    ``domain_age_days`` is ``now - creation_date`` when a WHOIS record with
    a creation date is supplied, else absent. No clock is read: *now* is an
    explicit argument so results are reproducible.
    """
    rendered = url.render()
    try:
        ipaddress.ip_address(url.host)
        is_ip = True
    except ValueError:
        is_ip = False
    age: int | None = None
    if whois is not None and whois.creation_date is not None:
        age = max(0, (now - whois.creation_date).days)
    return PhishFeatures(
        is_ip_host=is_ip,
        host_dot_count=url.host.count("."),
        has_at_sign="@" in rendered,
        url_length=len(rendered),
        domain_age_days=age,
    )


def score_features(
    features: PhishFeatures,
    weights: dict[str, float] | None = None,
    dot_limit: int = DOT_LIMIT,
    length_limit: int = LENGTH_LIMIT,
    age_limit_days: int = AGE_LIMIT_DAYS,
) -> tuple[float, tuple[tuple[str, float], ...]]:
    """Return (score, triggered) where score = min(1, sum of triggered weights).

    An absent domain age never triggers the age feature.
    """
    weights = DEFAULT_WEIGHTS if weights is None else weights
    checks = (
        (F_IP_HOST, features.is_ip_host),
        (F_DOT_COUNT, features.host_dot_count > dot_limit),
        (F_AT_SIGN, features.has_at_sign),
        (F_URL_LENGTH, features.url_length > length_limit),
        (
            F_DOMAIN_AGE,
            features.domain_age_days is not None
            and features.domain_age_days < age_limit_days,
        ),
    )
    triggered = tuple(
        (name, float(weights.get(name, 0.0))) for name, hit in checks if hit
    )
    score = min(1.0, sum(weight for _, weight in triggered))
    return score, triggered


def classify(score: float, threshold: float = PHISH_THRESHOLD) -> str:
    """Label a score; the threshold boundary itself counts as suspected."""
    return LABEL_SUSPECTED if score >= threshold else LABEL_BENIGN


def evaluate(
    url: CanonicalUrl,
    whois: WhoisRecord | None,
    now: date,
    weights: dict[str, float] | None = None,
    threshold: float = PHISH_THRESHOLD,
) -> PhishVerdict:
    """Extract, score and classify in one step."""
    features = extract_features(url, whois, now)
    score, triggered = score_features(features, weights)
    return PhishVerdict(score=score, label=classify(score, threshold), triggered=triggered)
