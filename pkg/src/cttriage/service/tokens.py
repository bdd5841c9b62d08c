"""Compact signed auth tokens (JWT-shaped, HMAC-SHA256).

header.payload.signature, each part base64url without padding. The claims
carry subject, role, and hospital scope; verification is constant-time on
the signature and clock-injectable for expiry tests.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
import json
import time
from dataclasses import dataclass

from ..errors import ExpiredToken, InvalidToken

_HEADER = {"alg": "HS256", "typ": "JWT"}


@dataclass(frozen=True)
class TokenClaims:
    subject: str
    role: str
    hospital_id: str
    issued_at: int
    expires_at: int

    def __post_init__(self):
        if self.expires_at <= self.issued_at:
            raise ValueError("expires_at must be after issued_at")


def issue_token(subject: str, role: str, hospital_id: str, secret: str,
                ttl_seconds: int = 3600, now: float | None = None) -> str:
    now = time.time() if now is None else now
    claims = TokenClaims(subject=subject, role=role, hospital_id=hospital_id,
                         issued_at=int(now), expires_at=int(now) + ttl_seconds)
    header = _b64url(json.dumps(_HEADER, sort_keys=True,
                                separators=(",", ":")).encode())
    payload = _b64url(json.dumps({
        "sub": claims.subject, "role": claims.role,
        "hospital_id": claims.hospital_id,
        "iat": claims.issued_at, "exp": claims.expires_at,
    }, sort_keys=True, separators=(",", ":")).encode())
    signature = _sign(f"{header}.{payload}", secret)
    return f"{header}.{payload}.{signature}"


def verify_token(token: str, secret: str,
                 now: float | None = None) -> TokenClaims:
    """Validate structure, signature, and expiry; return the claims.

    Signature comparison is constant-time. Expiry uses the supplied clock
    so tests can cross the boundary without sleeping.
    """
    now = time.time() if now is None else now
    parts = token.split(".")
    if len(parts) != 3:
        raise InvalidToken("token must have three parts")
    header_b64, payload_b64, signature = parts
    expected = _sign(f"{header_b64}.{payload_b64}", secret)
    if not hmac.compare_digest(signature, expected):
        raise InvalidToken("token signature mismatch")
    try:
        header = json.loads(_unb64url(header_b64))
        payload = json.loads(_unb64url(payload_b64))
    except (ValueError, binascii.Error) as exc:
        raise InvalidToken("token parts are not valid JSON") from exc
    if header.get("alg") != "HS256":
        raise InvalidToken("unexpected token algorithm")
    try:
        claims = TokenClaims(subject=payload["sub"], role=payload["role"],
                             hospital_id=payload["hospital_id"],
                             issued_at=int(payload["iat"]),
                             expires_at=int(payload["exp"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidToken("token claims incomplete") from exc
    if now >= claims.expires_at:
        raise ExpiredToken("token expired")
    return claims


def _sign(signing_input: str, secret: str) -> str:
    mac = hmac.new(secret.encode(), signing_input.encode(),
                   hashlib.sha256).digest()
    return _b64url(mac)


def _b64url(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode()


def _unb64url(text: str) -> bytes:
    padding = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + padding)
