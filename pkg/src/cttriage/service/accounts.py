"""User accounts: salted PBKDF2 password hashing, lockout, uniform errors.

Authentication deliberately gives the same error and does the same hash
work whether the email is unknown or the password is wrong, so response
content and timing do not reveal which accounts exist. Failure counts are
tracked per submitted email (known or not) and lock further attempts
after the configured threshold.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import threading
from dataclasses import dataclass

from ..errors import AccountLocked, InvalidCredentials

_SCHEME = "pbkdf2-sha256"


@dataclass
class UserAccount:
    email: str
    password_hash: str
    role: str
    hospital_id: str

    def __post_init__(self):
        if self.role not in ("clinician", "admin"):
            raise ValueError("role must be 'clinician' or 'admin'")


def hash_password(password: str, iterations: int = 60_000,
                  salt: bytes | None = None) -> str:
    salt = os.urandom(16) if salt is None else salt
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt, iterations)
    return f"{_SCHEME}${iterations}${salt.hex()}${digest.hex()}"


def check_password(password: str, password_hash: str) -> bool:
    scheme, iterations, salt_hex, digest_hex = password_hash.split("$")
    if scheme != _SCHEME:
        return False
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(),
                                 bytes.fromhex(salt_hex), int(iterations))
    return hmac.compare_digest(digest.hex(), digest_hex)


class AccountRegistry:
    """In-memory account set with lockout; thread-safe."""

    def __init__(self, lockout_threshold: int = 5,
                 pbkdf2_iterations: int = 60_000):
        if lockout_threshold < 1:
            raise ValueError("lockout_threshold must be >= 1")
        self.lockout_threshold = lockout_threshold
        self.pbkdf2_iterations = pbkdf2_iterations
        self._accounts: dict[str, UserAccount] = {}
        self._failures: dict[str, int] = {}
        self._lock = threading.Lock()
        # same-cost comparison target for unknown emails
        self._decoy_hash = hash_password("decoy", pbkdf2_iterations)

    def add(self, email: str, password: str, role: str,
            hospital_id: str) -> UserAccount:
        if not email:
            raise ValueError("email must be nonempty")
        account = UserAccount(
            email=email,
            password_hash=hash_password(password, self.pbkdf2_iterations),
            role=role, hospital_id=hospital_id)
        with self._lock:
            if email in self._accounts:
                raise ValueError(f"account {email!r} already exists")
            self._accounts[email] = account
        return account

    def authenticate(self, email: str, password: str) -> UserAccount:
        with self._lock:
            if self._failures.get(email, 0) >= self.lockout_threshold:
                raise AccountLocked("account locked")
            account = self._accounts.get(email)
        target = account.password_hash if account else self._decoy_hash
        ok = check_password(password, target) and account is not None
        with self._lock:
            if not ok:
                self._failures[email] = self._failures.get(email, 0) + 1
                raise InvalidCredentials("invalid credentials")
            self._failures.pop(email, None)
        return account

    def get(self, email: str) -> UserAccount | None:
        with self._lock:
            return self._accounts.get(email)

    def failures(self, email: str) -> int:
        with self._lock:
            return self._failures.get(email, 0)


DEFAULT_SEED = [
    {"email": "clinician-a@example.org", "password": "clinic-a-secret",
     "role": "clinician", "hospital_id": "hospital-a"},
    {"email": "clinician-b@example.org", "password": "clinic-b-secret",
     "role": "clinician", "hospital_id": "hospital-b"},
    {"email": "admin-a@example.org", "password": "admin-a-secret",
     "role": "admin", "hospital_id": "hospital-a"},
]


def seed_accounts(registry: AccountRegistry, entries: list | None = None
                  ) -> None:
    """Create the provided accounts (or the documented dev trio)."""
    for entry in entries or DEFAULT_SEED:
        registry.add(entry["email"], entry["password"], entry["role"],
                     entry["hospital_id"])
