"""Service configuration, environment-driven with safe defaults.

Every knob reads from a CTTRIAGE_* variable so a deployment is configured
without code changes; explicit constructor arguments win over the
environment.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

_ENV_PREFIX = "CTTRIAGE_"


@dataclass
class ServiceConfig:
    secret: str = "dev-secret-change-me"
    listen_port: int = 8000
    storage_backend: str = "file"            # "file" | "sqlite"
    storage_root: str = "./cttriage-data"
    token_ttl_seconds: int = 3600
    signed_url_ttl_seconds: int = 900
    max_upload_bytes: int = 32 * 1024 * 1024
    lockout_threshold: int = 5
    pbkdf2_iterations: int = 60_000
    detector_kind: str = "reference_blob"
    blob_intensity_threshold: int = 160
    score_floor: float = 0.5
    min_blob_area: int = 25
    max_proposals: int = 1000
    triage_threshold: float = 0.15
    sidecar_dir: str | None = None
    seed_accounts: list = field(default_factory=list)

    def __post_init__(self):
        if self.storage_backend not in ("file", "sqlite"):
            raise ValueError("storage_backend must be 'file' or 'sqlite'")
        if not self.secret:
            raise ValueError("secret must be nonempty")
        if self.token_ttl_seconds <= 0 or self.signed_url_ttl_seconds <= 0:
            raise ValueError("TTLs must be positive")

    @classmethod
    def from_env(cls, env: dict | None = None, **overrides) -> "ServiceConfig":
        env = os.environ if env is None else env

        def get(name, cast, default):
            raw = env.get(_ENV_PREFIX + name)
            return default if raw is None else cast(raw)

        params = dict(
            secret=get("SECRET", str, cls.secret),
            listen_port=get("PORT", int, cls.listen_port),
            storage_backend=get("STORAGE_BACKEND", str, cls.storage_backend),
            storage_root=get("STORAGE_ROOT", str, cls.storage_root),
            token_ttl_seconds=get("TOKEN_TTL", int, cls.token_ttl_seconds),
            signed_url_ttl_seconds=get("SIGNED_URL_TTL", int,
                                       cls.signed_url_ttl_seconds),
            max_upload_bytes=get("MAX_UPLOAD", int, cls.max_upload_bytes),
            lockout_threshold=get("LOCKOUT_THRESHOLD", int,
                                  cls.lockout_threshold),
            pbkdf2_iterations=get("PBKDF2_ITERATIONS", int,
                                  cls.pbkdf2_iterations),
            detector_kind=get("DETECTOR", str, cls.detector_kind),
            blob_intensity_threshold=get("BLOB_THRESHOLD", int,
                                         cls.blob_intensity_threshold),
            score_floor=get("SCORE_FLOOR", float, cls.score_floor),
            min_blob_area=get("MIN_BLOB_AREA", int, cls.min_blob_area),
            max_proposals=get("MAX_PROPOSALS", int, cls.max_proposals),
            triage_threshold=get("THRESHOLD", float, cls.triage_threshold),
            sidecar_dir=env.get(_ENV_PREFIX + "SIDECAR_DIR"),
            seed_accounts=json.loads(get("SEED_ACCOUNTS", str, "[]")),
        )
        params.update(overrides)
        return cls(**params)
