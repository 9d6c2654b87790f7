"""Agency-side verification of the database against the ledger.

Recomputes every record's canonical hash and compares it with the memo
hash frozen in the corresponding transaction, reconciles dose sequences
and center stock against on-chain Vaccination counts, and flags ledger
entries that lost their database counterpart.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import crypto
from .errors import NotFoundError
from .ledger import Chain, TX_REGISTRATION, TX_VACCINATION, verify_chain
from .registry import Store
from .runtime import SystemClock

KIND_HASH_MISMATCH = "hash-mismatch"
KIND_MISSING_TX = "missing-transaction"
KIND_ORPHAN_TX = "orphan-transaction"
KIND_DOSE_SEQUENCE = "dose-sequence-error"
KIND_STOCK_MISMATCH = "stock-mismatch"
KIND_CHAIN_INVALID = "chain-invalid"


@dataclass
class AuditFinding:
    kind: str
    subject_key: str
    detail: str


@dataclass
class AuditReport:
    checked_citizens: int = 0
    checked_vaccinations: int = 0
    checked_centers: int = 0
    findings: list[AuditFinding] = field(default_factory=list)
    chain_ok: bool = True
    started_at: str = ""
    finished_at: str = ""

    @property
    def ok(self) -> bool:
        return not self.findings

    def to_dict(self) -> dict:
        return {
            "checkedCitizens": self.checked_citizens,
            "checkedVaccinations": self.checked_vaccinations,
            "checkedCenters": self.checked_centers,
            "chainOk": self.chain_ok,
            "findings": [
                {"kind": f.kind, "subjectKey": f.subject_key, "detail": f.detail}
                for f in self.findings
            ],
            "startedAt": self.started_at,
            "finishedAt": self.finished_at,
        }


class Auditor:
    def __init__(self, store: Store, chain: Chain, clock=None):
        self.store = store
        self.chain = chain
        self.clock = clock or SystemClock()

    def verify_entity_hash(self, record, tx_id: str) -> AuditFinding | None:
        """Compare the record's recomputed canonical hash with the memo hash
        stored in its transaction."""
        found = self.chain.get_transaction(tx_id)
        if found is None:
            return AuditFinding(KIND_MISSING_TX, tx_id, "no transaction on the chain")
        _, tx = found
        recomputed = crypto.canonical_hash(record.canonical_fields())
        if recomputed != tx.entity.memo_hash:
            return AuditFinding(
                KIND_HASH_MISMATCH,
                tx_id,
                f"database hash {recomputed} != ledger memo {tx.entity.memo_hash}",
            )
        return None

    def audit_citizen(self, pseudo_uuid: str) -> list[AuditFinding]:
        """Audit one citizen by store key; keys stay valid even when the
        record's own identifier fields have been tampered."""
        profile = self.store.get_citizen(pseudo_uuid)
        if profile is None:
            raise NotFoundError("not-found", f"no citizen {pseudo_uuid}")
        findings = []
        hash_finding = self.verify_entity_hash(profile, profile.registration_tx_id or pseudo_uuid)
        if hash_finding:
            hash_finding.subject_key = pseudo_uuid
            findings.append(hash_finding)

        keyed = [(vid, self.store.vaccinations[vid])
                 for vid in self.store.vaccination_ids_for(pseudo_uuid)]
        keyed.sort(key=lambda kv: kv[1].dose_number)
        dose_numbers = [record.dose_number for _, record in keyed]
        if dose_numbers != list(range(1, len(dose_numbers) + 1)):
            findings.append(AuditFinding(
                KIND_DOSE_SEQUENCE, pseudo_uuid,
                f"dose numbers {dose_numbers} are not contiguous from 1",
            ))
        elif profile.doses_completed != len(dose_numbers):
            findings.append(AuditFinding(
                KIND_DOSE_SEQUENCE, pseudo_uuid,
                f"profile counts {profile.doses_completed} doses, records show {len(dose_numbers)}",
            ))

        for vid, record in keyed:
            vax_finding = self.verify_entity_hash(record, record.tx_id or vid)
            if vax_finding:
                vax_finding.subject_key = vid
                findings.append(vax_finding)
                continue
            _, tx = self.chain.get_transaction(record.tx_id or vid)
            signer = self.chain.accounts.get(tx.signer_address)
            if signer is None or signer.account_type != "center":
                # Provenance break that no store tamper can produce; grouped
                # with orphan findings since the tx lost its valid anchor.
                findings.append(AuditFinding(
                    KIND_ORPHAN_TX, vid,
                    "transaction signer is not a registered center account",
                ))
        return findings

    def audit_center_stock(self, center_id: str) -> list[AuditFinding]:
        """dosesSupplied - dosesRemaining must equal both the database record
        count and the on-chain Vaccination count for the center."""
        center = self.store.get_center(center_id)
        if center is None:
            raise NotFoundError("not-found", f"no center {center_id}")
        on_chain = 0
        for _, tx in self.chain.transactions():
            if tx.tx_type == TX_VACCINATION and tx.signer_address == center.signing_keys.address:
                on_chain += 1
        in_db = len(self.store.vaccinations_at(center_id))
        administered = center.doses_supplied - center.doses_remaining
        if not (on_chain == administered == in_db):
            return [AuditFinding(
                KIND_STOCK_MISMATCH, center_id,
                f"ledger counts {on_chain} doses, stock delta says {administered}, "
                f"database holds {in_db} records",
            )]
        return []

    def full_audit(self, scope: str = "all", agency_id: str | None = None) -> AuditReport:
        """Chain verification, then every citizen, center and transaction in scope."""
        report = AuditReport(started_at=crypto.rfc3339(self.clock.now()))

        chain_report = verify_chain(self.chain)
        report.chain_ok = chain_report.ok
        if not chain_report.ok:
            report.findings.append(AuditFinding(
                KIND_CHAIN_INVALID,
                f"block:{chain_report.first_bad_height}",
                chain_report.reason,
            ))

        if scope == "agency":
            citizen_keys = [k for k, c in self.store.citizens.items() if c.agency_id == agency_id]
            center_keys = [k for k, c in self.store.centers.items() if c.agency_id == agency_id]
            agency = self.store.get_agency(agency_id)
            scope_addresses = {agency.ledger_address} if agency else set()
            scope_addresses |= {self.store.centers[k].signing_keys.address for k in center_keys}
        else:
            citizen_keys = list(self.store.citizens)
            center_keys = list(self.store.centers)
            scope_addresses = None

        for key in sorted(citizen_keys):
            report.findings.extend(self.audit_citizen(key))
            report.checked_citizens += 1
            report.checked_vaccinations += len(self.store.vaccination_ids_for(key))

        for key in sorted(center_keys):
            report.findings.extend(self.audit_center_stock(key))
            report.checked_centers += 1

        for _, tx in self.chain.transactions():
            if scope_addresses is not None and tx.signer_address not in scope_addresses:
                continue
            if tx.tx_type == TX_REGISTRATION and self.store.get_citizen(tx.tx_id) is None:
                report.findings.append(AuditFinding(
                    KIND_ORPHAN_TX, tx.tx_id, "registration transaction has no citizen profile"))
            elif tx.tx_type == TX_VACCINATION and self.store.get_vaccination(tx.tx_id) is None:
                report.findings.append(AuditFinding(
                    KIND_ORPHAN_TX, tx.tx_id, "vaccination transaction has no database record"))

        report.finished_at = crypto.rfc3339(self.clock.now())
        return report
