"""Scenario runner: fixture generation, end-to-end protocol drives,
tamper injection and report emission.

A seeded run is fully deterministic: fixtures, derived identities, mined
nonces, timestamps (via an auto-ticking manual clock) and the final report
JSON are identical across runs, wall-time metrics aside.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from . import crypto
from .api import _profile_view, _record_view
from .audit import Auditor
from .engine import Engine, EngineConfig, PAGE_IDENTITY
from .errors import VaxError
from .ledger import Ledger
from .registry import Store
from .runtime import ManualClock, make_rng

_STATES = [
    ("GJ", "Gujarat", "38", ["Ahmedabad", "Surat", "Vadodara"]),
    ("MH", "Maharashtra", "40", ["Mumbai", "Pune", "Nagpur"]),
    ("DL", "Delhi", "11", ["New Delhi", "North Delhi", "South Delhi"]),
    ("KA", "Karnataka", "56", ["Bengaluru", "Mysuru", "Hubballi"]),
    ("TN", "Tamil Nadu", "60", ["Chennai", "Coimbatore", "Madurai"]),
    ("RJ", "Rajasthan", "30", ["Jaipur", "Jodhpur", "Udaipur"]),
    ("WB", "West Bengal", "70", ["Kolkata", "Howrah", "Darjeeling"]),
    ("UP", "Uttar Pradesh", "20", ["Lucknow", "Kanpur", "Varanasi"]),
]

_FIRST_NAMES = [
    "Asha", "River", "Kiran", "Maya", "Arjun", "Lena", "Ravi", "Noor",
    "Tara", "Dev", "Isha", "Milan", "Priya", "Sam", "Anik", "Zara",
]
_LAST_NAMES = [
    "Sharma", "Patel", "Khan", "Iyer", "Das", "Mehta", "Reddy", "Kaur",
    "Bose", "Nair", "Joshi", "Rao", "Gupta", "Varma", "Sen", "Pillai",
]

_GENDERS = ["Female", "Male", "Other"]

_VACCINES = ["AlphaVaccine", "BetaVaccine", "GammaVaccine"]
# Token-disjoint from the citizen name pools so privacy scans stay exact.
_VACCINATORS = ["Dr. John Doe", "Dr. Ana Cruz", "Dr. Lee Wong", "Dr. Omar Haddad"]
_HEALTH_NOTES = [
    "Normal, no COVID symptoms reported",
    "Mild fever observed post dose",
    "No adverse reaction",
]

POPULATION_MIN_AGE = 12
POPULATION_MAX_AGE = 90


def generate_regions(num_agencies: int, seed: int, pins_per_agency: int = 4) -> list[dict]:
    """PIN-region rows; each agency owns a contiguous run of PINs in one state."""
    rng = make_rng(seed)
    rows = []
    for k in range(num_agencies):
        state_code, state, pin_prefix, districts = _STATES[k % len(_STATES)]
        agency_id = f"AG-{state_code}-{k:02d}"
        for j in range(pins_per_agency):
            serial = (k * pins_per_agency + j) % 10000
            rows.append({
                "pin": f"{pin_prefix}{serial:04d}",
                "district": districts[(j + rng.randrange(len(districts))) % len(districts)],
                "state": state,
                "stateCode": state_code,
                "agencyID": agency_id,
            })
    return rows


def generate_population(n: int, regions: list[dict], seed: int,
                        reference: str = "2021-06-01") -> list[dict]:
    """Identity-directory rows with unique UUIDs and DOBs spanning ages 12-90."""
    from datetime import date, timedelta

    if n < 1:
        raise ValueError("population size must be >= 1")
    rng = make_rng(seed)
    ref = date.fromisoformat(reference)
    pins = [r["pin"] for r in regions]
    rows = []
    seen_uuids: set[str] = set()
    for _ in range(n):
        while True:
            uuid = str(rng.randrange(10**11, 10**12))
            if uuid not in seen_uuids:
                seen_uuids.add(uuid)
                break
        age = rng.randrange(POPULATION_MIN_AGE, POPULATION_MAX_AGE + 1)
        # Shift by < 1 year so the whole-year age at the reference date is exact.
        dob = ref.replace(year=ref.year - age) - timedelta(days=rng.randrange(365))
        rows.append({
            "uuid": uuid,
            "name": f"{rng.choice(_FIRST_NAMES)} {rng.choice(_LAST_NAMES)}",
            "dob": dob.isoformat(),
            "phone": "+91" + str(rng.randrange(6, 10)) + str(rng.randrange(10**8, 10**9)),
            "gender": rng.choice(_GENDERS),
            "pin": rng.choice(pins),
        })
    return rows


def write_jsonl(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")


@dataclass
class ScenarioConfig:
    citizens: int = 100
    centers: int = 4
    agencies: int = 2
    doses_per_citizen: int = 2
    seed: int = 0
    tamper: str = "none"              # none | db:k | ledger:k
    out: str = "vaxledger-out"
    difficulty: int = 8
    batch_size: int = 16
    min_age: int = 0                  # population spans ages 12+, simulate them all
    secret_code_mode: str = crypto.SECRET_CODE_UNIQUE
    http_url: str | None = None

    def __post_init__(self):
        if min(self.citizens, self.centers, self.agencies) < 1:
            raise ValueError("citizens, centers and agencies must be >= 1")
        if self.tamper != "none":
            kind, _, k = self.tamper.partition(":")
            if kind not in ("db", "ledger") or not k.isdigit():
                raise ValueError("tamper must be none, db:k or ledger:k")


def parse_tamper(spec: str) -> tuple[str, int]:
    if spec == "none":
        return "none", 0
    kind, _, k = spec.partition(":")
    return kind, int(k)


def inject_tamper(store: Store, ledger: Ledger, kind: str, k: int, rng) -> list[dict]:
    """Apply k seeded mutations; returns the manifest for audit cross-checks."""
    manifest = []
    if kind == "none" or k == 0:
        return manifest
    if kind == "db":
        citizen_menu = ["age", "gender", "district", "doses_completed"]
        vax_menu = ["vaccine_name", "vaccinator", "health_conditions"]
        subjects = [("citizen", key) for key in sorted(store.citizens)]
        subjects += [("vaccination", key) for key in sorted(store.vaccinations)]
        if k > len(subjects):
            raise ValueError(f"cannot tamper {k} records, only {len(subjects)} exist")
        for entity_kind, key in rng.sample(subjects, k):
            if entity_kind == "citizen":
                field_name = rng.choice(citizen_menu)
                old = getattr(store.citizens[key], field_name)
                if field_name == "age":
                    new = old + rng.randrange(1, 5)
                elif field_name == "gender":
                    new = "tampered-" + old
                elif field_name == "district":
                    new = old + " East"
                else:
                    new = old + 1
            else:
                field_name = rng.choice(vax_menu)
                old = getattr(store.vaccinations[key], field_name)
                new = old + " (edited)"
            manifest.append(store.tamper(entity_kind, key, field_name, new))
        return manifest
    if kind == "ledger":
        mined = ledger.chain.blocks
        if k > sum(len(b.transactions) for b in mined):
            raise ValueError("not enough committed transactions to tamper")
        for _ in range(k):
            block = rng.choice([b for b in mined if b.transactions])
            tx = rng.choice(block.transactions)
            old = tx.entity.memo_hash
            pos = rng.randrange(len(old))
            replacement = rng.choice([c for c in "0123456789abcdef" if c != old[pos]])
            tx.entity.memo_hash = old[:pos] + replacement + old[pos + 1:]
            manifest.append({
                "kind": "ledger", "subject": f"block:{block.header.height}",
                "field": "memo_hash", "old": old, "new": tx.entity.memo_hash,
            })
        return manifest
    raise ValueError(f"unknown tamper kind {kind!r}")


class InProcessDriver:
    """Drives the engine directly; responses mirror the HTTP payload shapes."""

    def __init__(self, config: ScenarioConfig, directory_file: Path, region_file: Path):
        self.store = Store()
        self.store.load_fixtures(directory_file, region_file)
        self.clock = ManualClock(autotick=1)
        self.rng = make_rng(config.seed + 1)
        self.ledger = Ledger(difficulty=config.difficulty, batch_size=config.batch_size,
                             clock=self.clock)
        self.engine = Engine(
            self.store,
            self.ledger,
            EngineConfig(min_age=config.min_age, secret_code_mode=config.secret_code_mode),
            clock=self.clock,
            rng=self.rng,
        )

    def create_agency(self, agency_id: str) -> dict:
        agency = self.engine.create_agency(agency_id)
        return {"agencyID": agency.agency_id, "region": agency.region,
                "ledgerAddress": agency.ledger_address}

    def register_center(self, name: str, address: str, pin: str) -> dict:
        center = self.engine.register_center(name, address, pin)
        return {"centerID": center.center_id, "staticKey": center.static_key,
                "district": center.district, "state": center.state,
                "agencyID": center.agency_id}

    def add_stock(self, center_id: str, doses: int) -> dict:
        center = self.engine.supply_stock(center_id, doses)
        return {"centerID": center_id, "dosesSupplied": center.doses_supplied,
                "dosesRemaining": center.doses_remaining}

    def register_citizen(self, uuid: str, phone: str, pin: str, gender: str) -> dict:
        session = self.engine.start_citizen_registration(uuid, phone)
        otp = self.engine.outbox.last_for(phone).message.rsplit(" ", 1)[1]
        draft = self.engine.verify_otp(session.session_id, otp)
        profile = self.engine.complete_citizen_registration(draft.token, pin, gender)
        return _profile_view(profile, include_static_key=True)

    def vaccinate(self, secret_code: int, pin: str, static_key: str, center_id: str,
                  center_static_key: str, vaccine: str, vaccinator: str, notes: str) -> dict:
        page = self.engine.create_verification_page(secret_code, pin, center_id, PAGE_IDENTITY)
        outcome = self.engine.solve_verification_page(page.suffix, static_key, secret_code)
        confirmation = self.engine.record_vaccination_details(
            outcome.draft.draft_id, vaccine, vaccinator, notes, center_static_key
        )
        final = self.engine.solve_verification_page(confirmation.suffix, static_key, secret_code)
        return _record_view(final.record)

    def flush(self) -> None:
        self.ledger.flush()

    def audit(self) -> dict:
        auditor = Auditor(self.store, self.ledger.chain, clock=self.clock)
        return auditor.full_audit().to_dict()


class HttpDriver:
    """Drives a live service over HTTP; used by the --http integration mode."""

    def __init__(self, base_url: str):
        import httpx

        self.client = httpx.Client(base_url=base_url, timeout=30.0)

    def _post(self, path: str, payload: dict) -> dict:
        response = self.client.post(path, json=payload)
        if response.status_code >= 400:
            body = response.json()
            raise VaxError(body.get("error", "http-error"), body.get("detail", response.text))
        return response.json()

    def create_agency(self, agency_id: str) -> dict:
        return self._post("/admin/agencies", {"agencyID": agency_id})

    def register_center(self, name: str, address: str, pin: str) -> dict:
        return self._post("/centers/register", {"name": name, "address": address, "pin": pin})

    def add_stock(self, center_id: str, doses: int) -> dict:
        return self._post(f"/admin/centers/{center_id}/stock", {"doses": doses})

    def register_citizen(self, uuid: str, phone: str, pin: str, gender: str) -> dict:
        session = self._post("/citizens/register/start", {"uuid": uuid, "phone": phone})
        outbox = self.client.get("/test/outbox").json()["messages"]
        otp = next(m for m in reversed(outbox) if m["phone"] == phone)["message"].rsplit(" ", 1)[1]
        draft = self._post("/citizens/register/verify",
                           {"sessionID": session["sessionID"], "otp": otp})
        return self._post("/citizens/register/complete",
                          {"token": draft["token"], "pin": pin, "gender": gender})

    def vaccinate(self, secret_code: int, pin: str, static_key: str, center_id: str,
                  center_static_key: str, vaccine: str, vaccinator: str, notes: str) -> dict:
        page = self._post("/verify/pages", {"secretCode": secret_code, "pin": pin,
                                            "centerID": center_id, "purpose": "identity"})
        solved = self._post(f"/verify/pages/{page['suffix']}/solve",
                            {"staticKey": static_key, "secretCode": secret_code})
        details = self._post(
            f"/vaccinations/drafts/{solved['draftID']}/details",
            {"vaccineName": vaccine, "vaccinator": vaccinator,
             "healthConditions": notes, "centerStaticKey": center_static_key},
        )
        final = self._post(f"/verify/pages/{details['confirmationSuffix']}/solve",
                           {"staticKey": static_key, "secretCode": secret_code})
        return final["vaccination"]

    def flush(self) -> None:
        pass   # /audit/run flushes server-side

    def audit(self) -> dict:
        return self._post("/audit/run", {})


def run_scenario(config: ScenarioConfig) -> dict:
    """Run the whole protocol at population scale and emit the report.

    Writes fixtures, a store snapshot, the chain export, a response
    transcript and report.json under ``config.out``.
    """
    started = time.monotonic()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    regions = generate_regions(config.agencies, config.seed)
    population = generate_population(config.citizens, regions, config.seed)
    directory_file = out / "directory.jsonl"
    region_file = out / "regions.jsonl"
    write_jsonl(directory_file, population)
    write_jsonl(region_file, regions)

    tamper_kind, tamper_k = parse_tamper(config.tamper)
    if config.http_url:
        if tamper_kind != "none":
            raise ValueError("tamper injection needs in-process store access; drop --http")
        driver = HttpDriver(config.http_url)
    else:
        driver = InProcessDriver(config, directory_file, region_file)

    transcript: list[dict] = []

    def record(kind: str, payload: dict) -> dict:
        transcript.append({"kind": kind, "payload": payload})
        return payload

    for row in regions:
        if not any(t["kind"] == "agency" and t["payload"]["agencyID"] == row["agencyID"]
                   for t in transcript):
            record("agency", driver.create_agency(row["agencyID"]))

    pins = [r["pin"] for r in regions]
    centers = []
    for i in range(config.centers):
        pin = pins[i % len(pins)]
        centers.append(record("center", driver.register_center(
            f"Center {i}", f"{i} Health Lane", pin)))

    # Pre-compute the dose event plan so each center is supplied exactly
    # what it will administer.
    events = []
    for dose in range(1, config.doses_per_citizen + 1):
        for i in range(config.citizens):
            events.append((i, dose, centers[len(events) % len(centers)]))
    needed: dict[str, int] = {}
    for _, _, center in events:
        needed[center["centerID"]] = needed.get(center["centerID"], 0) + 1
    for center in centers:
        if needed.get(center["centerID"]):
            record("stock", driver.add_stock(center["centerID"], needed[center["centerID"]]))

    citizens = []
    for i, row in enumerate(population):
        citizens.append(record("citizen", driver.register_citizen(
            row["uuid"], row["phone"], row["pin"], row["gender"])))

    event_rng = make_rng(config.seed + 2)
    vaccination_count = 0
    for i, dose, center in events:
        citizen = citizens[i]
        record("vaccination", driver.vaccinate(
            citizen["secretCode"], citizen["pin"], citizen["staticKey"],
            center["centerID"], center["staticKey"],
            event_rng.choice(_VACCINES), event_rng.choice(_VACCINATORS),
            event_rng.choice(_HEALTH_NOTES),
        ))
        vaccination_count += 1

    driver.flush()

    manifest: list[dict] = []
    report: dict = {
        "config": {
            "citizens": config.citizens,
            "centers": config.centers,
            "agencies": config.agencies,
            "dosesPerCitizen": config.doses_per_citizen,
            "seed": config.seed,
            "tamper": config.tamper,
            "difficulty": config.difficulty,
            "batchSize": config.batch_size,
            "minAge": config.min_age,
            "secretCodeMode": config.secret_code_mode,
        },
    }

    if isinstance(driver, InProcessDriver):
        driver.store.snapshot(out / "snapshot")
        driver.ledger.chain.export_jsonl(out / "chain.jsonl")
        manifest = inject_tamper(driver.store, driver.ledger, tamper_kind, tamper_k,
                                 make_rng(config.seed + 3))
        chain = driver.ledger.chain
        registrations = sum(1 for _, tx in chain.transactions() if tx.tx_type == "Registration")
        vaccinations = sum(1 for _, tx in chain.transactions() if tx.tx_type == "Vaccination")
        nonces = driver.ledger.nonce_history
        report["counts"] = {
            "citizens": len(driver.store.citizens),
            "centers": len(driver.store.centers),
            "agencies": len(driver.store.agencies),
            "registrationTxs": registrations,
            "vaccinationTxs": vaccinations,
            "blocks": len(chain.blocks),
            "outboxMessages": len(driver.engine.outbox.messages),
        }
        report["nonceStats"] = {
            "blocksMined": len(nonces),
            "meanNonce": round(sum(nonces) / len(nonces), 3) if nonces else 0,
            "maxNonce": max(nonces) if nonces else 0,
        }
    else:
        report["counts"] = {
            "citizens": len(citizens),
            "centers": len(centers),
            "agencies": config.agencies,
            "vaccinationTxs": vaccination_count,
        }

    report["tamperManifest"] = [
        {k: v for k, v in entry.items()} for entry in manifest
    ]
    report["audit"] = driver.audit()
    report["artifacts"] = {
        "directoryFixture": directory_file.name,
        "regionFixture": region_file.name,
        "snapshotDir": "snapshot",
        "chainExport": "chain.jsonl",
        "transcript": "transcript.jsonl",
        "report": "report.json",
    }
    report["wallTimeSeconds"] = round(time.monotonic() - started, 3)

    write_jsonl(out / "transcript.jsonl", transcript)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
