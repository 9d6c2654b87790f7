"""HTTP facade over the engine, ledger and auditor.

JSON routes mirror the portal flows one to one; errors carry a stable
``error`` code and map onto 404 (missing), 401 (key or OTP failures),
409 (state conflicts) and 400 (schema violations). Responses never leak
master keys, raw UUIDs, phone numbers or other citizens' static keys.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import crypto
from .audit import Auditor
from .engine import Engine, EngineConfig, PAGE_IDENTITY
from .errors import AuthFailure, ConflictError, NotFoundError, SchemaError, VaxError
from .ledger import Ledger, block_to_dict, tx_to_dict
from .registry import CitizenProfile, Store, VaccinationRecord
from .runtime import make_rng


@dataclass
class ServiceConfig:
    directory_fixture: str
    region_fixture: str
    listen_address: str = "127.0.0.1:8000"
    difficulty: int = 8
    batch_size: int = 16
    max_doses: int = 2
    min_age: int = 18
    secret_code_mode: str = crypto.SECRET_CODE_UNIQUE
    page_ttl: int = 300
    otp_ttl: int = 300
    deterministic_seed: int | None = None

    def __post_init__(self):
        if self.page_ttl <= 0 or self.otp_ttl <= 0:
            raise ValueError("TTLs must be positive")
        if not 0 <= self.difficulty <= 24:
            raise ValueError("difficulty must stay within desk-scale bounds (<= 24)")


_STATUS_BY_ERROR = {
    NotFoundError: 404,
    AuthFailure: 401,
    ConflictError: 409,
    SchemaError: 400,
}


class StartRegistration(BaseModel):
    uuid: str
    phone: str


class VerifyOtp(BaseModel):
    sessionID: str
    otp: str


class CompleteRegistration(BaseModel):
    token: str
    pin: str
    gender: str


class RegisterCenter(BaseModel):
    name: str
    address: str
    pin: str


class CreateAgency(BaseModel):
    agencyID: str


class StockDelivery(BaseModel):
    doses: int


class CreatePage(BaseModel):
    secretCode: int
    pin: str
    centerID: str | None = None
    purpose: str = PAGE_IDENTITY


class SolvePage(BaseModel):
    staticKey: str
    secretCode: int


class VaccinationDetails(BaseModel):
    vaccineName: str
    vaccinator: str
    healthConditions: str
    centerStaticKey: str


class AuditRequest(BaseModel):
    scope: str = "all"
    agencyID: str | None = None


def _profile_view(profile: CitizenProfile, include_static_key: bool) -> dict:
    view = {
        "pseudoUUID": profile.pseudo_uuid,
        "gender": profile.gender,
        "age": profile.age,
        "dosesCompleted": profile.doses_completed,
        "secretCode": profile.secret_code,
        "pin": profile.pin_code,
        "district": profile.district,
        "state": profile.state,
        "agencyID": profile.agency_id,
    }
    if include_static_key:
        view["staticKey"] = profile.static_key
    return view


def _record_view(record: VaccinationRecord) -> dict:
    return {
        "vaccinationID": record.vaccination_id,
        "pseudoUUID": record.pseudo_uuid,
        "centerID": record.center_id,
        "doseNumber": record.dose_number,
        "vaccineName": record.vaccine_name,
        "vaccinator": record.vaccinator,
        "timestamp": record.timestamp,
        "healthConditions": record.health_conditions,
        "txID": record.tx_id,
    }


def create_app(config: ServiceConfig) -> FastAPI:
    store = Store()
    store.load_fixtures(config.directory_fixture, config.region_fixture)

    rng = make_rng(config.deterministic_seed)
    engine_config = EngineConfig(
        max_doses=config.max_doses,
        min_age=config.min_age,
        secret_code_mode=config.secret_code_mode,
        otp_ttl=config.otp_ttl,
        page_ttl=config.page_ttl,
    )
    ledger = Ledger(difficulty=config.difficulty, batch_size=config.batch_size)
    engine = Engine(store, ledger, engine_config, rng=rng)
    auditor = Auditor(store, ledger.chain)

    @contextlib.asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        ledger.flush()   # graceful shutdown commits the pending pool

    app = FastAPI(title="vaxledger", lifespan=lifespan)
    app.state.engine = engine
    app.state.store = store
    app.state.ledger = ledger

    @app.exception_handler(VaxError)
    async def vax_error(_: Request, exc: VaxError):
        status = next(
            (code for cls, code in _STATUS_BY_ERROR.items() if isinstance(exc, cls)), 500
        )
        return JSONResponse(status_code=status, content={"error": exc.code, "detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def schema_error(_: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "schema-violation",
                                                      "detail": str(exc.errors()[:1])})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/admin/agencies", status_code=201)
    def create_agency(body: CreateAgency):
        agency = engine.create_agency(body.agencyID)
        return {
            "agencyID": agency.agency_id,
            "region": agency.region,
            "ledgerAddress": agency.ledger_address,
        }

    @app.post("/admin/centers/{center_id}/stock")
    def deliver_stock(center_id: str, body: StockDelivery):
        center = engine.supply_stock(center_id, body.doses)
        return {
            "centerID": center.center_id,
            "dosesSupplied": center.doses_supplied,
            "dosesRemaining": center.doses_remaining,
        }

    @app.post("/centers/register", status_code=201)
    def register_center(body: RegisterCenter):
        center = engine.register_center(body.name, body.address, body.pin)
        # The static key is the center's operating credential, delivered once.
        return {
            "centerID": center.center_id,
            "centerName": center.center_name,
            "pin": center.pin_code,
            "district": center.district,
            "state": center.state,
            "agencyID": center.agency_id,
            "staticKey": center.static_key,
        }

    @app.post("/citizens/register/start")
    def start_registration(body: StartRegistration):
        session = engine.start_citizen_registration(body.uuid, body.phone)
        return {"sessionID": session.session_id, "expiresAt": crypto.rfc3339(session.expires_at)}

    @app.post("/citizens/register/verify")
    def verify_otp(body: VerifyOtp):
        draft = engine.verify_otp(body.sessionID, body.otp)
        return {"token": draft.token}

    @app.post("/citizens/register/complete", status_code=201)
    def complete_registration(body: CompleteRegistration):
        profile = engine.complete_citizen_registration(body.token, body.pin, body.gender)
        return _profile_view(profile, include_static_key=True)

    @app.post("/verify/pages", status_code=201)
    def create_page(body: CreatePage):
        page = engine.create_verification_page(
            body.secretCode, body.pin, body.centerID, body.purpose
        )
        return {"suffix": page.suffix, "expiresAt": crypto.rfc3339(page.expires_at)}

    @app.get("/verify/pages/{suffix}")
    def page_status(suffix: str):
        page = engine.get_page(suffix)
        expired = engine.clock.now() > page.expires_at
        return {
            "suffix": page.suffix,
            "purpose": page.purpose,
            "used": page.used,
            "expired": expired,
            "expiresAt": crypto.rfc3339(page.expires_at),
            "extraData": _extra_data_view(page.extra_data),
        }

    @app.post("/verify/pages/{suffix}/solve")
    def solve_page(suffix: str, body: SolvePage):
        outcome = engine.solve_verification_page(suffix, body.staticKey, body.secretCode)
        if outcome.outcome == "identity-verified":
            return {
                "outcome": outcome.outcome,
                "draftID": outcome.draft.draft_id,
                "doseNumber": outcome.draft.dose_number,
                "centerID": outcome.draft.center_id,
            }
        return {"outcome": outcome.outcome, "vaccination": _record_view(outcome.record)}

    @app.post("/vaccinations/drafts/{draft_id}/details", status_code=201)
    def record_details(draft_id: str, body: VaccinationDetails):
        page = engine.record_vaccination_details(
            draft_id, body.vaccineName, body.vaccinator, body.healthConditions,
            body.centerStaticKey,
        )
        return {"confirmationSuffix": page.suffix, "expiresAt": crypto.rfc3339(page.expires_at)}

    @app.get("/citizens/history")
    def history(secretCode: int, pin: str):
        records = engine.get_history(secretCode, pin)
        return {"records": [_record_view(r) for r in records]}

    @app.get("/certificates/{vaccination_id}")
    def certificate(vaccination_id: str):
        cert = engine.issue_certificate(vaccination_id)
        agency = store.get_agency(cert.agency_id)
        return {
            "vaccinationID": cert.vaccination_id,
            "pseudoUUID": cert.pseudo_uuid,
            "centerID": cert.center_id,
            "vaccineName": cert.vaccine_name,
            "doseNumber": cert.dose_number,
            "timestamp": cert.timestamp,
            "agencyID": cert.agency_id,
            "signature": cert.signature.hex(),
            "agencyPublicKey": agency.signing_keys.public_key.hex(),
        }

    @app.get("/ledger/blocks")
    def blocks(
        from_height: int = Query(0, alias="from", ge=0),
        to_height: int | None = Query(None, alias="to", ge=0),
    ):
        chain = ledger.chain
        hi = chain.height if to_height is None else min(to_height, chain.height)
        return {
            "height": chain.height,
            "pending": len(ledger.pending),
            "blocks": [block_to_dict(b) for b in chain.blocks[from_height:hi + 1]],
        }

    @app.get("/ledger/tx/{tx_id}")
    def transaction(tx_id: str):
        found = ledger.chain.get_transaction(tx_id)
        if found is None:
            raise NotFoundError("not-found", f"no transaction {tx_id}")
        height, tx = found
        return {"blockHeight": height, "transaction": tx_to_dict(tx)}

    @app.post("/audit/run")
    def run_audit(body: AuditRequest | None = None):
        body = body or AuditRequest()
        ledger.flush()
        report = auditor.full_audit(scope=body.scope, agency_id=body.agencyID)
        return report.to_dict()

    if config.deterministic_seed is not None:
        @app.get("/test/outbox")
        def outbox():
            return {
                "messages": [
                    {"phone": m.phone, "message": m.message, "timestamp": m.timestamp}
                    for m in engine.outbox.messages
                ]
            }

    return app


def _extra_data_view(extra_data: dict | None) -> dict | None:
    if extra_data is None:
        return None
    return {
        "vaccineName": extra_data["vaccine_name"],
        "vaccinator": extra_data["vaccinator"],
        "healthConditions": extra_data["health_conditions"],
        "doseNumber": extra_data["dose_number"],
        "centerID": extra_data["center_id"],
        "timestamp": extra_data["timestamp"],
    }


def serve(config: ServiceConfig) -> None:
    import uvicorn

    host, _, port = config.listen_address.partition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port or 8000),
                log_level="warning")
