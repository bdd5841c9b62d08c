"""At-rest encryption for stored result images.

Authenticated symmetric encryption (Fernet) with a key derived from the
service secret and a context label, so rotating the secret invalidates
old ciphertexts and different storage contexts cannot share keys.
"""

from __future__ import annotations

import base64
import hashlib

from cryptography.fernet import Fernet, InvalidToken as _FernetInvalid

from ..errors import TriageError


class DecryptionFailed(TriageError):
    """Ciphertext that does not authenticate under the derived key."""


def derive_key(secret: str, context: str) -> bytes:
    digest = hashlib.sha256(f"{context}\x00{secret}".encode()).digest()
    return base64.urlsafe_b64encode(digest)


def encrypt_blob(data: bytes, secret: str, context: str = "overlay") -> bytes:
    return Fernet(derive_key(secret, context)).encrypt(data)


def decrypt_blob(data: bytes, secret: str, context: str = "overlay") -> bytes:
    try:
        return Fernet(derive_key(secret, context)).decrypt(data)
    except _FernetInvalid as exc:
        raise DecryptionFailed("stored blob failed authentication") from exc
