"""Expiring signed URLs for stored results.

The MAC covers (path, expiry) under the service secret, so neither can be
altered without invalidating the signature. Verification is constant-time
and clock-injectable.
"""

from __future__ import annotations

import hashlib
import hmac
import time
import urllib.parse
from dataclasses import dataclass

from ..errors import UnknownKey


@dataclass(frozen=True)
class SignedResultUrl:
    path: str
    expiry: int
    mac: str

    def to_url(self) -> str:
        quoted = urllib.parse.quote(self.path)
        return f"/files/{quoted}?exp={self.expiry}&sig={self.mac}"


def sign_url(storage_key: str, ttl_seconds: int, secret: str,
             exists=None, now: float | None = None) -> SignedResultUrl:
    """Sign a storage key for ttl_seconds.

    ``exists``, when provided, is a predicate over keys; a missing key
    raises UnknownKey rather than minting a dead link.
    """
    if ttl_seconds <= 0:
        raise ValueError("ttl_seconds must be positive")
    if exists is not None and not exists(storage_key):
        raise UnknownKey(f"no stored object under {storage_key!r}")
    now = time.time() if now is None else now
    expiry = int(now) + ttl_seconds
    return SignedResultUrl(path=storage_key, expiry=expiry,
                           mac=_mac(storage_key, expiry, secret))


def verify_url(path: str, expiry: int, mac: str, secret: str,
               now: float | None = None) -> bool:
    """True iff the MAC matches (path, expiry) and the expiry is ahead."""
    now = time.time() if now is None else now
    valid = hmac.compare_digest(mac, _mac(path, int(expiry), secret))
    return valid and now < int(expiry)


def _mac(path: str, expiry: int, secret: str) -> str:
    message = f"{path}\n{expiry}".encode()
    return hmac.new(secret.encode(), message, hashlib.sha256).hexdigest()
