"""Protocol orchestration: registration, identity verification, vaccination.

Drives the three stages of the portal flow and mirrors every state change
onto the ledger: completing a citizen registration emits exactly one
Registration transaction (signed by the agency) and confirming a
vaccination exactly one Vaccination transaction (signed by the center).
Raw UUIDs and phone numbers live only inside transient sessions and are
discarded when registration completes.
"""

from __future__ import annotations

import functools
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta

from . import crypto, ledger as ledger_mod
from .errors import AuthFailure, ConflictError, NotFoundError
from .ledger import EntityData, Ledger, TX_REGISTRATION, TX_VACCINATION
from .registry import (
    CitizenProfile,
    GovernmentAgency,
    Store,
    VaccinationCenter,
    VaccinationRecord,
)
from .runtime import SystemClock, make_rng

PAGE_IDENTITY = "identity"
PAGE_CONFIRMATION = "confirmation"

_SUFFIX_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"


def _locked(method):
    """Serialize a mutating engine method through the write lock."""
    @functools.wraps(method)
    def wrapper(self, *args, **kwargs):
        with self._write_lock:
            return method(self, *args, **kwargs)
    return wrapper


@dataclass
class EngineConfig:
    max_doses: int = 2
    min_age: int = 18
    secret_code_mode: str = crypto.SECRET_CODE_UNIQUE
    otp_ttl: int = 300
    page_ttl: int = 300
    otp_attempts: int = 3


@dataclass
class OutboxMessage:
    phone: str
    message: str
    timestamp: str


class Outbox:
    """Simulated SMS gateway: an append-only message log."""

    def __init__(self):
        self.messages: list[OutboxMessage] = []

    def send(self, phone: str, message: str, timestamp: str) -> None:
        self.messages.append(OutboxMessage(phone, message, timestamp))

    def last_for(self, phone: str) -> OutboxMessage | None:
        for msg in reversed(self.messages):
            if msg.phone == phone:
                return msg
        return None


@dataclass
class OtpSession:
    session_id: str
    uuid: str
    phone: str
    otp: str
    expires_at: datetime
    attempts_left: int


@dataclass
class RegistrationDraft:
    token: str
    uuid: str
    created_at: datetime


@dataclass
class VerificationPage:
    suffix: str
    challenge_ciphertext: str
    expected_number: int
    pseudo_uuid: str
    center_id: str | None
    purpose: str
    extra_data: dict | None
    expires_at: datetime
    used: bool = False


@dataclass
class VaccinationDraft:
    draft_id: str
    pseudo_uuid: str
    center_id: str
    dose_number: int
    created_at: datetime
    vaccine_name: str | None = None
    vaccinator: str | None = None
    health_conditions: str | None = None
    timestamp: str | None = None
    endorsement: str | None = None


@dataclass
class Certificate:
    vaccination_id: str
    pseudo_uuid: str
    center_id: str
    vaccine_name: str
    dose_number: int
    timestamp: str
    agency_id: str
    signature: bytes

    def canonical_fields(self) -> dict:
        return {
            "vaccination_id": self.vaccination_id,
            "pseudo_uuid": self.pseudo_uuid,
            "center_id": self.center_id,
            "vaccine_name": self.vaccine_name,
            "dose_number": self.dose_number,
            "timestamp": self.timestamp,
            "agency_id": self.agency_id,
        }


@dataclass
class SolveOutcome:
    outcome: str                                 # "identity-verified" | "confirmation-accepted"
    draft: VaccinationDraft | None = None
    record: VaccinationRecord | None = None


class Engine:
    def __init__(
        self,
        store: Store,
        ledger: Ledger,
        config: EngineConfig | None = None,
        clock=None,
        rng=None,
    ):
        self.store = store
        self.ledger = ledger
        self.config = config or EngineConfig()
        self.clock = clock or SystemClock()
        self.rng = rng if rng is not None else make_rng(None)
        self.outbox = Outbox()
        self._otp_sessions: dict[str, OtpSession] = {}
        self._registration_drafts: dict[str, RegistrationDraft] = {}
        self._pages: dict[str, VerificationPage] = {}
        self._vaccination_drafts: dict[str, VaccinationDraft] = {}
        self._registered_uuid_hashes: set[str] = set()
        # One writer: protocol mutations are serialized so page solves are
        # atomic with respect to the used flag and stock checks.
        self._write_lock = threading.RLock()

    # -- agencies and centers ---------------------------------------------------

    @_locked
    def create_agency(self, agency_id: str) -> GovernmentAgency:
        """Initialize an agency found in the region table: master key,
        signing keypair, ledger account."""
        pins = [p for p, r in self.store.regions.items() if r.agency_id == agency_id]
        if not pins:
            raise NotFoundError("not-found", f"agency {agency_id} is not in the region table")
        keys = crypto.keypair_generate(crypto.rng_bytes(self.rng, 32))
        agency = GovernmentAgency(
            agency_id=agency_id,
            region=sorted(pins),
            master_key=crypto.new_master_key(self.rng),
            signing_keys=keys,
            ledger_address=keys.address,
        )
        self.store.put_agency(agency)
        self.ledger.chain.register_account(
            ledger_mod.AccountData(address=keys.address, public_key=keys.public_key,
                                   account_type="agency")
        )
        return agency

    def _agency_for_pin(self, pin_code: str) -> GovernmentAgency:
        region = self.store.region_lookup(pin_code)
        if region is None:
            raise NotFoundError("unmapped-pin", f"pin {pin_code} has no supervising agency")
        agency = self.store.get_agency(region.agency_id)
        if agency is None:
            agency = self.create_agency(region.agency_id)
        return agency

    @_locked
    def register_center(self, name: str, address: str, pin_code: str) -> VaccinationCenter:
        region = self.store.region_lookup(pin_code)
        if region is None:
            raise NotFoundError("unmapped-pin", f"pin {pin_code} has no supervising agency")
        agency = self._agency_for_pin(pin_code)
        center_id = crypto.generate_center_id(
            region.state_code, agency.master_key, address, crypto.random_factor(self.rng)
        )
        static_key = crypto.generate_static_key(
            center_id, agency.master_key, crypto.random_factor(self.rng)
        )
        keys = crypto.keypair_generate(crypto.rng_bytes(self.rng, 32))
        center = VaccinationCenter(
            center_id=center_id,
            center_name=name,
            address=address,
            pin_code=pin_code,
            district=region.district,
            state=region.state,
            static_key=static_key,
            agency_id=agency.agency_id,
            signing_keys=keys,
        )
        self.store.put_center(center)
        self.ledger.chain.register_account(
            ledger_mod.AccountData(address=keys.address, public_key=keys.public_key,
                                   account_type="center", assets={"vaccine-doses": 0})
        )
        return center

    @_locked
    def supply_stock(self, center_id: str, doses: int) -> VaccinationCenter:
        if doses <= 0:
            raise ConflictError("insufficient-stock", "supply must be positive")
        center = self.store.adjust_stock(center_id, doses)
        self._sync_center_asset(center)
        return center

    def _sync_center_asset(self, center: VaccinationCenter) -> None:
        account = self.ledger.chain.accounts.get(center.signing_keys.address)
        if account is not None:
            account.assets["vaccine-doses"] = center.doses_remaining

    # -- citizen registration ------------------------------------------------------

    @_locked
    def start_citizen_registration(self, uuid: str, phone: str) -> OtpSession:
        entry = self.store.directory_lookup(uuid)
        if entry is None:
            raise NotFoundError("unknown-uuid", "that UUID is not on government records")
        if crypto.sha256_hex(uuid.encode("utf-8")) in self._registered_uuid_hashes:
            raise ConflictError("already-registered", "a profile derived from this UUID exists")
        now = self.clock.now()
        session = OtpSession(
            session_id=self._token(),
            uuid=uuid,
            phone=phone,
            otp=f"{self.rng.randrange(10**6):06d}",
            expires_at=now + _seconds(self.config.otp_ttl),
            attempts_left=self.config.otp_attempts,
        )
        self._otp_sessions[session.session_id] = session
        self.outbox.send(phone, f"Your vaccination portal OTP is {session.otp}", crypto.rfc3339(now))
        return session

    @_locked
    def verify_otp(self, session_id: str, otp: str) -> RegistrationDraft:
        session = self._otp_sessions.get(session_id)
        if session is None:
            raise NotFoundError("unknown-session", "no such OTP session")
        if self.clock.now() > session.expires_at:
            del self._otp_sessions[session_id]
            raise ConflictError("expired", "the OTP session has expired")
        if otp != session.otp:
            session.attempts_left -= 1
            if session.attempts_left <= 0:
                del self._otp_sessions[session_id]
                raise ConflictError("attempts-exhausted", "too many wrong OTP attempts")
            raise AuthFailure("wrong-otp", "the OTP does not match")
        del self._otp_sessions[session_id]
        draft = RegistrationDraft(token=self._token(), uuid=session.uuid, created_at=self.clock.now())
        self._registration_drafts[draft.token] = draft
        return draft

    @_locked
    def complete_citizen_registration(self, token: str, pin_code: str, gender: str) -> CitizenProfile:
        draft = self._registration_drafts.get(token)
        if draft is None:
            raise NotFoundError("invalid-token", "no registration draft for that token")
        region = self.store.region_lookup(pin_code)
        if region is None:
            raise NotFoundError("unmapped-pin", f"pin {pin_code} has no supervising agency")
        entry = self.store.directory_lookup(draft.uuid)
        if entry is None:
            raise NotFoundError("unknown-uuid", "the UUID vanished from government records")
        agency = self._agency_for_pin(pin_code)
        now = self.clock.now()

        pseudo_uuid = crypto.generate_pseudo_uuid(draft.uuid, crypto.random_factor(self.rng))
        static_key = crypto.generate_static_key(
            pseudo_uuid, agency.master_key, crypto.random_factor(self.rng)
        )
        secret_code = self._draw_secret_code(pseudo_uuid, pin_code)
        profile = CitizenProfile(
            pseudo_uuid=pseudo_uuid,
            gender=gender,
            age=_whole_years(entry.date_of_birth, now.date()),
            pin_code=pin_code,
            district=region.district,
            state=region.state,
            static_key=static_key,
            secret_code=secret_code,
            agency_id=agency.agency_id,
            registration_tx_id=pseudo_uuid,
        )
        entity = EntityData(
            sender_address=agency.ledger_address,
            amount=1,
            fees=0,
            additional_data=f"pseudoUUID: {pseudo_uuid}, PINCode: {pin_code}",
            memo_primary_key=pseudo_uuid,
            memo_hash=crypto.canonical_hash(profile.canonical_fields()),
        )
        tx = ledger_mod.new_transaction(
            TX_REGISTRATION,
            self.ledger.chain.accounts[agency.ledger_address],
            agency.signing_keys.private_seed,
            entity,
            tx_id=pseudo_uuid,
            timestamp=crypto.rfc3339(now),
            contract_ref="registration-v1",
        )
        self.store.put_citizen(profile)
        self.ledger.submit(tx)
        self._registered_uuid_hashes.add(crypto.sha256_hex(draft.uuid.encode("utf-8")))
        del self._registration_drafts[token]
        return profile

    def _draw_secret_code(self, pseudo_uuid: str, pin_code: str) -> int:
        if self.config.secret_code_mode == crypto.SECRET_CODE_FAITHFUL:
            return crypto.generate_secret_code(pseudo_uuid, pin_code, crypto.SECRET_CODE_FAITHFUL)
        retry = 0
        while True:
            code = crypto.generate_secret_code(
                pseudo_uuid, pin_code, crypto.SECRET_CODE_UNIQUE, retry
            )
            if not self.store.secret_code_taken(code, pin_code):
                return code
            retry += 1

    # -- verification pages ------------------------------------------------------------

    @_locked
    def create_verification_page(
        self,
        secret_code: int,
        pin_code: str,
        center_id: str | None,
        purpose: str,
        extra_data: dict | None = None,
    ) -> VerificationPage:
        citizen = self.store.lookup_citizen(secret_code, pin_code)
        if purpose == PAGE_IDENTITY:
            if center_id is None or self.store.get_center(center_id) is None:
                raise NotFoundError("center-not-registered", f"center {center_id} is not registered")
        elif purpose != PAGE_CONFIRMATION:
            raise NotFoundError("not-found", f"unknown page purpose {purpose!r}")
        number = crypto.random_challenge_number(self.rng)
        page = VerificationPage(
            suffix=self._fresh_suffix(),
            challenge_ciphertext=crypto.encrypt_challenge(number, citizen.static_key),
            expected_number=number,
            pseudo_uuid=citizen.pseudo_uuid,
            center_id=center_id,
            purpose=purpose,
            extra_data=extra_data,
            expires_at=self.clock.now() + _seconds(self.config.page_ttl),
        )
        self._pages[page.suffix] = page
        return page

    def get_page(self, suffix: str) -> VerificationPage:
        page = self._pages.get(suffix)
        if page is None:
            raise NotFoundError("not-found", "no verification page with that suffix")
        return page

    @_locked
    def solve_verification_page(self, suffix: str, static_key: str, secret_code: int) -> SolveOutcome:
        """One solve attempt; the page is consumed whatever the outcome."""
        page = self.get_page(suffix)
        if page.used:
            raise ConflictError("page-used", "the page has already been used")
        if self.clock.now() > page.expires_at:
            raise ConflictError("page-expired", "the page has expired")
        page.used = True

        citizen = self.store.get_citizen(page.pseudo_uuid)
        try:
            attempt = crypto.decrypt_challenge(page.challenge_ciphertext, static_key)
        except (crypto.ChallengeFormatError, ValueError):
            raise AuthFailure("verification-failed", "the static key does not solve the challenge")
        if attempt != page.expected_number or secret_code != citizen.secret_code:
            raise AuthFailure("verification-failed", "the static key does not solve the challenge")

        if page.purpose == PAGE_IDENTITY:
            return SolveOutcome("identity-verified", draft=self._open_draft(citizen, page.center_id))
        return SolveOutcome("confirmation-accepted", record=self._finalize_vaccination(page))

    def _open_draft(self, citizen: CitizenProfile, center_id: str) -> VaccinationDraft:
        doses = self.store.count_doses(citizen.pseudo_uuid)
        if doses >= self.config.max_doses:
            raise ConflictError("citizen-completely-vaccinated",
                                "the citizen has received every scheduled dose")
        if citizen.age < self.config.min_age:
            raise ConflictError("ineligible-age",
                                f"citizens below age {self.config.min_age} are not eligible")
        center = self.store.get_center(center_id)
        if center.doses_remaining <= 0:
            raise ConflictError("insufficient-stock", f"center {center_id} is out of doses")
        draft = VaccinationDraft(
            draft_id=self._token(),
            pseudo_uuid=citizen.pseudo_uuid,
            center_id=center_id,
            dose_number=doses + 1,
            created_at=self.clock.now(),
        )
        self._vaccination_drafts[draft.draft_id] = draft
        return draft

    # -- vaccination confirmation -------------------------------------------------------

    @_locked
    def record_vaccination_details(
        self,
        draft_id: str,
        vaccine_name: str,
        vaccinator: str,
        health_conditions: str,
        center_static_key: str,
    ) -> VerificationPage:
        """Attach dose details entered by the health official and open the
        confirmation page the citizen must solve."""
        draft = self._vaccination_drafts.get(draft_id)
        if draft is None:
            raise NotFoundError("unknown-draft", "no vaccination draft with that id")
        center = self.store.get_center(draft.center_id)
        if center_static_key != center.static_key:
            raise AuthFailure("center-key-mismatch", "the center static key does not match")
        draft.vaccine_name = vaccine_name
        draft.vaccinator = vaccinator
        draft.health_conditions = health_conditions
        draft.timestamp = crypto.rfc3339(self.clock.now())
        details = {
            "vaccine_name": vaccine_name,
            "vaccinator": vaccinator,
            "health_conditions": health_conditions,
            "dose_number": draft.dose_number,
            "center_id": draft.center_id,
            "timestamp": draft.timestamp,
        }
        # Keyed endorsement: the center's symmetric key cannot sign, so the
        # details are bound to it by hashing them together.
        draft.endorsement = crypto.sha256_hex(
            crypto.canonical_record_bytes(details) + center.static_key.encode("utf-8")
        )
        citizen = self.store.get_citizen(draft.pseudo_uuid)
        return self.create_verification_page(
            citizen.secret_code,
            citizen.pin_code,
            None,
            PAGE_CONFIRMATION,
            extra_data={"draft_id": draft_id, **details},
        )

    def _finalize_vaccination(self, page: VerificationPage) -> VaccinationRecord:
        draft = self._vaccination_drafts.get(page.extra_data["draft_id"])
        if draft is None:
            raise NotFoundError("unknown-draft", "the vaccination draft has gone away")
        center = self.store.get_center(draft.center_id)
        record = VaccinationRecord(
            vaccination_id=crypto.generate_vaccination_id(
                draft.pseudo_uuid, draft.dose_number, draft.center_id
            ),
            pseudo_uuid=draft.pseudo_uuid,
            center_id=draft.center_id,
            dose_number=draft.dose_number,
            vaccine_name=draft.vaccine_name,
            vaccinator=draft.vaccinator,
            timestamp=draft.timestamp,
            health_conditions=draft.health_conditions,
            tx_id="",
        )
        record.tx_id = record.vaccination_id
        entity = EntityData(
            sender_address=center.signing_keys.address,
            amount=1,
            fees=0,
            additional_data=(
                f"citizenPseudoUUID: {record.pseudo_uuid}, centerID: {record.center_id}"
            ),
            memo_primary_key=record.vaccination_id,
            memo_hash=crypto.canonical_hash(record.canonical_fields()),
        )
        tx = ledger_mod.new_transaction(
            TX_VACCINATION,
            self.ledger.chain.accounts[center.signing_keys.address],
            center.signing_keys.private_seed,
            entity,
            tx_id=record.vaccination_id,
            timestamp=crypto.rfc3339(self.clock.now()),
            contract_ref="vaccination-v1",
        )
        self.store.adjust_stock(draft.center_id, -1)
        self.store.put_vaccination(record)
        self.store.increment_doses_completed(draft.pseudo_uuid)
        self._sync_center_asset(center)
        self.ledger.submit(tx)
        del self._vaccination_drafts[draft.draft_id]
        return record

    # -- certification and history ----------------------------------------------------------

    def issue_certificate(self, vaccination_id: str) -> Certificate:
        record = self.store.get_vaccination(vaccination_id)
        if record is None:
            raise NotFoundError("not-found", f"no vaccination {vaccination_id}")
        center = self.store.get_center(record.center_id)
        agency = self.store.get_agency(center.agency_id)
        cert = Certificate(
            vaccination_id=record.vaccination_id,
            pseudo_uuid=record.pseudo_uuid,
            center_id=record.center_id,
            vaccine_name=record.vaccine_name,
            dose_number=record.dose_number,
            timestamp=record.timestamp,
            agency_id=agency.agency_id,
            signature=b"",
        )
        cert.signature = crypto.sign(
            crypto.canonical_record_bytes(cert.canonical_fields()),
            agency.signing_keys.private_seed,
        )
        return cert

    @staticmethod
    def verify_certificate(cert: Certificate, agency_public_key: bytes) -> bool:
        return crypto.verify(
            cert.signature,
            crypto.canonical_record_bytes(cert.canonical_fields()),
            agency_public_key,
        )

    def get_history(self, secret_code: int, pin_code: str) -> list[VaccinationRecord]:
        citizen = self.store.lookup_citizen(secret_code, pin_code)
        return self.store.doses_for(citizen.pseudo_uuid)

    # -- internals -------------------------------------------------------------------------

    def _token(self) -> str:
        return crypto.rng_bytes(self.rng, 16).hex()

    def _fresh_suffix(self) -> str:
        while True:
            suffix = "".join(self.rng.choice(_SUFFIX_ALPHABET) for _ in range(5))
            if suffix not in self._pages:
                return suffix


def _seconds(n: int) -> timedelta:
    return timedelta(seconds=n)


def _whole_years(born, today) -> int:
    years = today.year - born.year
    if (today.month, today.day) < (born.month, born.day):
        years -= 1
    return years
