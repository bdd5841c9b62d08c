"""Persistence: one interface, two backends.

FileStore keeps every entity as its own JSON file and every blob as a
file, writing through a temp file + fsync + atomic rename so a crash at
any instant leaves each entity either absent or complete, never torn.
SqliteStore keeps the same entities in a single SQLite database and
inherits its transactional atomicity. Both are safe for concurrent use
from multiple threads.
"""

from __future__ import annotations

import abc
import json
import os
import re
import sqlite3
import threading
import uuid
from pathlib import Path

from ..errors import UnknownKey

_KEY_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9/_.-]*$")


def check_key(key: str) -> str:
    """Reject keys that could escape the blob root."""
    if not _KEY_RE.match(key) or ".." in key.split("/"):
        raise ValueError(f"illegal storage key {key!r}")
    return key


class Storage(abc.ABC):
    """Entity + blob persistence used by the service."""

    @abc.abstractmethod
    def put_patient(self, patient: dict) -> None: ...

    @abc.abstractmethod
    def get_patient(self, patient_id: str) -> dict | None: ...

    @abc.abstractmethod
    def list_patients(self, hospital_id: str) -> list[dict]: ...

    @abc.abstractmethod
    def put_scan(self, scan: dict) -> None: ...

    @abc.abstractmethod
    def get_scan(self, scan_id: str) -> dict | None: ...

    @abc.abstractmethod
    def put_record(self, record: dict) -> None: ...

    @abc.abstractmethod
    def get_record(self, record_id: str) -> dict | None: ...

    @abc.abstractmethod
    def list_records(self, patient_id: str) -> list[dict]: ...

    @abc.abstractmethod
    def put_blob(self, key: str, data: bytes) -> None: ...

    @abc.abstractmethod
    def get_blob(self, key: str) -> bytes: ...

    @abc.abstractmethod
    def has_blob(self, key: str) -> bool: ...


def _sorted_records(records: list[dict]) -> list[dict]:
    return sorted(records,
                  key=lambda r: (r.get("created_at", ""), r["record_id"]))


class FileStore(Storage):
    """Directory-backed store with atomic per-entity writes."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        for sub in ("patients", "scans", "records", "blobs", "tmp"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # -- entities ---------------------------------------------------------

    def put_patient(self, patient: dict) -> None:
        self._write_json("patients", patient["patient_id"], patient)

    def get_patient(self, patient_id: str) -> dict | None:
        return self._read_json("patients", patient_id)

    def list_patients(self, hospital_id: str) -> list[dict]:
        out = []
        for path in sorted((self.root / "patients").glob("*.json")):
            entity = self._load(path)
            if entity is not None and entity.get("hospital_id") == hospital_id:
                out.append(entity)
        return out

    def put_scan(self, scan: dict) -> None:
        self._write_json("scans", scan["scan_id"], scan)

    def get_scan(self, scan_id: str) -> dict | None:
        return self._read_json("scans", scan_id)

    def put_record(self, record: dict) -> None:
        self._write_json("records", record["record_id"], record)

    def get_record(self, record_id: str) -> dict | None:
        return self._read_json("records", record_id)

    def list_records(self, patient_id: str) -> list[dict]:
        out = []
        for path in (self.root / "records").glob("*.json"):
            entity = self._load(path)
            if entity is not None and entity.get("patient_id") == patient_id:
                out.append(entity)
        return _sorted_records(out)

    # -- blobs ------------------------------------------------------------

    def put_blob(self, key: str, data: bytes) -> None:
        path = self.root / "blobs" / check_key(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        self._atomic_write(path, data)

    def get_blob(self, key: str) -> bytes:
        path = self.root / "blobs" / check_key(key)
        if not path.is_file():
            raise UnknownKey(f"no stored object under {key!r}")
        return path.read_bytes()

    def has_blob(self, key: str) -> bool:
        return (self.root / "blobs" / check_key(key)).is_file()

    # -- mechanics --------------------------------------------------------

    def _write_json(self, kind: str, entity_id: str, entity: dict) -> None:
        safe = entity_id.replace("/", "_")
        payload = json.dumps(entity, sort_keys=True).encode()
        self._atomic_write(self.root / kind / f"{safe}.json", payload)

    def _read_json(self, kind: str, entity_id: str) -> dict | None:
        safe = entity_id.replace("/", "_")
        return self._load(self.root / kind / f"{safe}.json")

    @staticmethod
    def _load(path: Path) -> dict | None:
        try:
            return json.loads(path.read_bytes())
        except FileNotFoundError:
            return None

    def _atomic_write(self, dst: Path, data: bytes) -> None:
        tmp = self.root / "tmp" / f"{uuid.uuid4().hex}.part"
        fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o600)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, dst)
        finally:
            if tmp.exists():
                try:
                    os.unlink(tmp)
                except OSError:
                    pass


class SqliteStore(Storage):
    """Single-file relational/blob store behind the same interface."""

    def __init__(self, path: str | os.PathLike):
        self.path = str(path)
        self._init_lock = threading.Lock()
        with self._connect() as conn:
            conn.executescript("""
                CREATE TABLE IF NOT EXISTS patients(
                    patient_id TEXT PRIMARY KEY,
                    hospital_id TEXT NOT NULL,
                    body TEXT NOT NULL);
                CREATE TABLE IF NOT EXISTS scans(
                    scan_id TEXT PRIMARY KEY,
                    body TEXT NOT NULL);
                CREATE TABLE IF NOT EXISTS records(
                    record_id TEXT PRIMARY KEY,
                    patient_id TEXT NOT NULL,
                    created_at TEXT NOT NULL,
                    body TEXT NOT NULL);
                CREATE INDEX IF NOT EXISTS idx_records_patient
                    ON records(patient_id, created_at);
                CREATE TABLE IF NOT EXISTS blobs(
                    key TEXT PRIMARY KEY,
                    data BLOB NOT NULL);
            """)

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.path, timeout=30)

    def put_patient(self, patient: dict) -> None:
        with self._connect() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO patients VALUES (?, ?, ?)",
                (patient["patient_id"], patient["hospital_id"],
                 json.dumps(patient, sort_keys=True)))

    def get_patient(self, patient_id: str) -> dict | None:
        return self._one("SELECT body FROM patients WHERE patient_id = ?",
                         (patient_id,))

    def list_patients(self, hospital_id: str) -> list[dict]:
        with self._connect() as conn:
            rows = conn.execute(
                "SELECT body FROM patients WHERE hospital_id = ? "
                "ORDER BY patient_id", (hospital_id,)).fetchall()
        return [json.loads(r[0]) for r in rows]

    def put_scan(self, scan: dict) -> None:
        with self._connect() as conn:
            conn.execute("INSERT OR REPLACE INTO scans VALUES (?, ?)",
                         (scan["scan_id"], json.dumps(scan, sort_keys=True)))

    def get_scan(self, scan_id: str) -> dict | None:
        return self._one("SELECT body FROM scans WHERE scan_id = ?",
                         (scan_id,))

    def put_record(self, record: dict) -> None:
        with self._connect() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO records VALUES (?, ?, ?, ?)",
                (record["record_id"], record["patient_id"],
                 record.get("created_at", ""),
                 json.dumps(record, sort_keys=True)))

    def get_record(self, record_id: str) -> dict | None:
        return self._one("SELECT body FROM records WHERE record_id = ?",
                         (record_id,))

    def list_records(self, patient_id: str) -> list[dict]:
        with self._connect() as conn:
            rows = conn.execute(
                "SELECT body FROM records WHERE patient_id = ?",
                (patient_id,)).fetchall()
        return _sorted_records([json.loads(r[0]) for r in rows])

    def put_blob(self, key: str, data: bytes) -> None:
        with self._connect() as conn:
            conn.execute("INSERT OR REPLACE INTO blobs VALUES (?, ?)",
                         (check_key(key), sqlite3.Binary(data)))

    def get_blob(self, key: str) -> bytes:
        with self._connect() as conn:
            row = conn.execute("SELECT data FROM blobs WHERE key = ?",
                               (check_key(key),)).fetchone()
        if row is None:
            raise UnknownKey(f"no stored object under {key!r}")
        return bytes(row[0])

    def has_blob(self, key: str) -> bool:
        with self._connect() as conn:
            row = conn.execute("SELECT 1 FROM blobs WHERE key = ?",
                               (check_key(key),)).fetchone()
        return row is not None

    def _one(self, query: str, params: tuple) -> dict | None:
        with self._connect() as conn:
            row = conn.execute(query, params).fetchone()
        return None if row is None else json.loads(row[0])


def open_storage(backend: str, root: str) -> Storage:
    """Build the configured backend under ``root``."""
    if backend == "file":
        return FileStore(root)
    if backend == "sqlite":
        Path(root).mkdir(parents=True, exist_ok=True)
        return SqliteStore(Path(root) / "cttriage.db")
    raise ValueError(f"unknown storage backend {backend!r}")
