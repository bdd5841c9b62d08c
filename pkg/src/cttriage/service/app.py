"""REST API over the inference pipeline.

Every route except login, /healthz, and /files requires a bearer token;
/files requires a valid signed URL instead. Cross-hospital access is
hidden, not forbidden: a patient or scan outside the caller's hospital
produces the same 404 as one that does not exist. Responses never carry
raw storage keys, only expiring signed URLs.
"""

from __future__ import annotations

import email.parser
import email.policy
import json
import time
import uuid
from datetime import date, datetime, timezone

from fastapi import Depends, FastAPI, HTTPException, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .. import pipeline as pipeline_mod
from ..detect import DetectorConfig
from ..errors import (AccountLocked, CorruptImage, DetectorUnavailable,
                      EmptyLungMask, ExpiredToken, InvalidCredentials,
                      InvalidToken, NoLungFound, PatientNotFound,
                      PayloadTooLarge, ScanNotFound, SchemaViolation,
                      TriageError, UnknownKey, UnsupportedFormat,
                      ValidationFailed)
from ..image import load_scan
from ..pipeline import latency_summary
from .accounts import AccountRegistry, seed_accounts
from .config import ServiceConfig
from .crypto import decrypt_blob, encrypt_blob
from .signing import sign_url, verify_url
from .singleflight import SingleFlight
from .storage import Storage, open_storage
from .tokens import TokenClaims, issue_token, verify_token

ERROR_STATUS = {
    ValidationFailed: 400,
    UnsupportedFormat: 400,
    CorruptImage: 400,
    SchemaViolation: 400,
    InvalidToken: 401,
    ExpiredToken: 401,
    InvalidCredentials: 401,
    AccountLocked: 401,
    PatientNotFound: 404,
    ScanNotFound: 404,
    UnknownKey: 404,
    PayloadTooLarge: 413,
    NoLungFound: 422,
    EmptyLungMask: 422,
    DetectorUnavailable: 422,
}

DETECTOR_KINDS = ("reference_blob", "external_sidecar")


class LoginBody(BaseModel):
    email: str
    password: str


class PatientBody(BaseModel):
    name: str
    date_of_birth: str


class _EncryptingSink:
    """Blob sink handed to the pipeline; encrypts overlays at rest."""

    def __init__(self, store: Storage, secret: str):
        self._store = store
        self._secret = secret

    def put(self, key: str, data: bytes) -> None:
        self._store.put_blob(key, encrypt_blob(data, self._secret))


def create_app(config: ServiceConfig | None = None, *,
               store: Storage | None = None,
               registry: AccountRegistry | None = None,
               clock=None, inference_fn=None) -> FastAPI:
    """Build the application with injectable persistence and clock.

    ``clock`` replaces wall time for token and signed-URL expiry checks;
    ``inference_fn`` replaces the pipeline entry point (same signature as
    run_inference) for fault and concurrency tests.
    """
    config = config or ServiceConfig.from_env()
    store = store or open_storage(config.storage_backend, config.storage_root)
    clock = clock or time.time
    inference_fn = inference_fn or pipeline_mod.run_inference
    if registry is None:
        registry = AccountRegistry(
            lockout_threshold=config.lockout_threshold,
            pbkdf2_iterations=config.pbkdf2_iterations)
        seed_accounts(registry, config.seed_accounts or None)
    flight = SingleFlight()

    app = FastAPI(title="cttriage service", docs_url=None, redoc_url=None)
    app.state.config = config
    app.state.store = store
    app.state.registry = registry
    app.state.clock = clock

    def now_iso() -> str:
        return datetime.fromtimestamp(clock(), tz=timezone.utc).isoformat()

    def require_claims(request: Request) -> TokenClaims:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise InvalidToken("missing bearer token")
        return verify_token(header[7:].strip(), config.secret, now=clock())

    def visible_patient(patient_id: str, claims: TokenClaims) -> dict:
        patient = store.get_patient(patient_id)
        if patient is None or patient["hospital_id"] != claims.hospital_id:
            raise PatientNotFound(f"no patient {patient_id!r}")
        return patient

    def sign_overlay(record: dict) -> str | None:
        key = record.get("overlay_ref")
        if record.get("status") != "succeeded" or not key:
            return None
        if not store.has_blob(key):
            return None
        return sign_url(key, config.signed_url_ttl_seconds, config.secret,
                        now=clock()).to_url()

    def api_record(record: dict) -> dict:
        out = {k: v for k, v in record.items() if k != "overlay_ref"}
        out["overlay_url"] = sign_overlay(record)
        return out

    # -- error mapping ----------------------------------------------------

    @app.exception_handler(TriageError)
    async def on_domain_error(request: Request, exc: TriageError):
        status = ERROR_STATUS.get(type(exc), 500)
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(request: Request,
                                    exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"detail": "invalid request body"})

    # -- unauthenticated --------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/api/auth/login")
    def login(body: LoginBody):
        account = registry.authenticate(body.email, body.password)
        token = issue_token(account.email, account.role, account.hospital_id,
                            config.secret, config.token_ttl_seconds,
                            now=clock())
        return {"token": token, "token_type": "bearer",
                "expires_at": int(clock()) + config.token_ttl_seconds,
                "role": account.role, "hospital_id": account.hospital_id}

    # -- patients ---------------------------------------------------------

    @app.get("/api/patients")
    def list_patients(claims: TokenClaims = Depends(require_claims)):
        return {"patients": store.list_patients(claims.hospital_id)}

    @app.post("/api/patients", status_code=201)
    def create_patient(body: PatientBody,
                       claims: TokenClaims = Depends(require_claims)):
        name = body.name.strip()
        if not name:
            raise ValidationFailed("name must be nonempty")
        try:
            dob = date.fromisoformat(body.date_of_birth)
        except ValueError as exc:
            raise ValidationFailed("date_of_birth must be YYYY-MM-DD") from exc
        patient = {"patient_id": f"pat-{uuid.uuid4().hex[:12]}",
                   "name": name, "date_of_birth": dob.isoformat(),
                   "hospital_id": claims.hospital_id,
                   "created_at": now_iso()}
        store.put_patient(patient)
        return patient

    @app.get("/api/patients/{patient_id}")
    def get_patient(patient_id: str,
                    claims: TokenClaims = Depends(require_claims)):
        return visible_patient(patient_id, claims)

    # -- scans ------------------------------------------------------------

    @app.post("/api/patients/{patient_id}/scans", status_code=201)
    async def upload_scan(patient_id: str, request: Request,
                          claims: TokenClaims = Depends(require_claims)):
        patient = visible_patient(patient_id, claims)
        body = await _read_capped(request, config.max_upload_bytes)
        filename, data = _extract_upload(
            request.headers.get("content-type", ""), body)
        img = load_scan(data)          # validates format before storing
        scan_id = f"scan-{uuid.uuid4().hex[:12]}"
        ext = "png" if data[:8] == b"\x89PNG\r\n\x1a\n" else "jpg"
        blob_key = f"scans/{scan_id}.{ext}"
        store.put_blob(blob_key, data)
        store.put_scan({"scan_id": scan_id,
                        "patient_id": patient["patient_id"],
                        "hospital_id": patient["hospital_id"],
                        "blob_key": blob_key,
                        "filename": filename or "",
                        "width": img.width, "height": img.height,
                        "created_at": now_iso()})
        return {"scan_id": scan_id}

    # -- inference --------------------------------------------------------

    @app.post("/api/scans/{scan_id}/inferences")
    async def trigger_inference(scan_id: str, request: Request,
                                claims: TokenClaims = Depends(require_claims)):
        scan = store.get_scan(scan_id)
        if scan is None or scan["hospital_id"] != claims.hospital_id:
            raise ScanNotFound(f"no scan {scan_id!r}")
        raw = await request.body()
        options = _parse_inference_options(raw, config)
        cfg = options["cfg"]

        def run() -> dict:
            data = store.get_blob(scan["blob_key"])
            record = inference_fn(
                data, scan["patient_id"], cfg, options["threshold"],
                scan_id=scan_id, sidecar_source=config.sidecar_dir,
                store=_EncryptingSink(store, config.secret))
            payload = record.to_json_dict()
            store.put_record(payload)
            return payload

        payload, led = flight.do(scan_id, run)
        body = api_record(payload)
        body["coalesced"] = not led
        if payload["status"] == "failed":
            return JSONResponse(status_code=422, content=body)
        return JSONResponse(status_code=201, content=body)

    @app.get("/api/patients/{patient_id}/inferences")
    def list_inferences(patient_id: str,
                        claims: TokenClaims = Depends(require_claims)):
        patient = visible_patient(patient_id, claims)
        records = store.list_records(patient["patient_id"])
        records.reverse()              # newest first
        return {"records": [api_record(r) for r in records]}

    @app.get("/api/patients/{patient_id}/report")
    def progression_report(patient_id: str,
                           claims: TokenClaims = Depends(require_claims)):
        patient = visible_patient(patient_id, claims)
        records = store.list_records(patient["patient_id"])
        series = [{"created_at": r["created_at"],
                   "intensity": r["verdict"]["intensity"],
                   "severity": r["verdict"]["severity"],
                   "covid_class": r["verdict"]["covid_class"],
                   "record_id": r["record_id"]}
                  for r in records if r.get("status") == "succeeded"]
        latency = (latency_summary([r["elapsed_total"] for r in records])
                   if records else None)
        return {"patient_id": patient["patient_id"],
                "threshold": config.triage_threshold,
                "series": series, "latency": latency}

    # -- signed file delivery ---------------------------------------------

    @app.get("/files/{path:path}")
    def serve_file(path: str, exp: int, sig: str):
        if not verify_url(path, exp, sig, config.secret, now=clock()):
            raise HTTPException(status_code=403,
                                detail="signature invalid or expired")
        data = store.get_blob(path)
        if path.startswith("overlays/"):
            data = decrypt_blob(data, config.secret)
        media = "image/png" if path.endswith(".png") else \
            "application/octet-stream"
        return Response(content=data, media_type=media)

    return app


def _parse_inference_options(raw: bytes, config: ServiceConfig) -> dict:
    """Decode the optional trigger body; unknown detectors and bad
    thresholds fail validation before any work starts."""
    if raw:
        try:
            body = json.loads(raw)
        except ValueError as exc:
            raise ValidationFailed("body must be JSON") from exc
        if not isinstance(body, dict):
            raise ValidationFailed("body must be a JSON object")
    else:
        body = {}
    kind = body.get("detector", config.detector_kind)
    if kind not in DETECTOR_KINDS:
        raise ValidationFailed(f"detector must be one of {DETECTOR_KINDS}")
    threshold = body.get("threshold", config.triage_threshold)
    if not isinstance(threshold, (int, float)) or not 0 < threshold < 1:
        raise ValidationFailed("threshold must lie strictly between 0 and 1")
    try:
        cfg = DetectorConfig(
            kind=kind,
            score_floor=float(body.get("score_floor", config.score_floor)),
            blob_intensity_threshold=int(body.get(
                "blob_intensity_threshold", config.blob_intensity_threshold)),
            min_blob_area=int(body.get("min_blob_area",
                                       config.min_blob_area)),
            max_proposals=int(body.get("max_proposals",
                                       config.max_proposals)))
    except (TypeError, ValueError) as exc:
        raise ValidationFailed(f"bad detector options: {exc}") from exc
    return {"cfg": cfg, "threshold": float(threshold)}


async def _read_capped(request: Request, cap: int) -> bytes:
    declared = request.headers.get("content-length")
    if declared is not None:
        try:
            if int(declared) > cap:
                raise PayloadTooLarge(f"payload exceeds {cap} bytes")
        except ValueError:
            pass
    chunks, total = [], 0
    async for chunk in request.stream():
        total += len(chunk)
        if total > cap:
            raise PayloadTooLarge(f"payload exceeds {cap} bytes")
        chunks.append(chunk)
    return b"".join(chunks)


def _extract_upload(content_type: str, body: bytes) -> tuple[str | None, bytes]:
    """Pull the uploaded file out of a multipart/form-data body.

    Parsed with the stdlib MIME machinery: the body is framed as a MIME
    document and the first file part (preferring a part named ``file``)
    supplies the payload.
    """
    if "multipart/form-data" not in content_type.lower():
        # raw body upload: accept image bytes posted directly
        if body:
            return None, body
        raise ValidationFailed("multipart/form-data with a file part required")
    head = (f"MIME-Version: 1.0\r\nContent-Type: {content_type}\r\n\r\n"
            ).encode("ascii", "replace")
    msg = email.parser.BytesParser(policy=email.policy.HTTP).parsebytes(
        head + body)
    if not msg.is_multipart():
        raise ValidationFailed("unparseable multipart body")
    chosen: tuple[str | None, bytes] | None = None
    for part in msg.iter_parts():
        name = part.get_param("name", header="content-disposition")
        filename = part.get_filename()
        payload = part.get_payload(decode=True)
        if payload is None:
            continue
        if name == "file":
            return filename, payload
        if filename is not None and chosen is None:
            chosen = (filename, payload)
    if chosen is None:
        raise ValidationFailed("no file part in upload")
    return chosen
