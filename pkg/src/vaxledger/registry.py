"""Persistent store for agencies, centers, citizens and vaccinations,
plus the mock government identity directory and PIN-region table.

The store is in-memory with explicit JSON-lines snapshots. Mutations are
serialized through one lock (single-writer); reads are lock-free against a
consistent view. The identity directory is fixture data only and is never
copied into portal collections -- citizen profiles carry no raw UUID, name,
phone or date of birth.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, fields
from datetime import date
from pathlib import Path

from .crypto import SigningKeypair
from .errors import ConflictError, NotFoundError


@dataclass
class IdentityDirectoryEntry:
    uuid: str
    name: str
    date_of_birth: date
    phone: str
    gender: str
    pin_code: str


@dataclass
class PinRegion:
    pin_code: str
    district: str
    state: str
    state_code: str
    agency_id: str


@dataclass
class GovernmentAgency:
    agency_id: str
    region: list[str]
    master_key: str
    signing_keys: SigningKeypair
    ledger_address: str


@dataclass
class VaccinationCenter:
    center_id: str
    center_name: str
    address: str
    pin_code: str
    district: str
    state: str
    static_key: str
    agency_id: str
    signing_keys: SigningKeypair
    doses_supplied: int = 0
    doses_remaining: int = 0


@dataclass
class CitizenProfile:
    pseudo_uuid: str
    gender: str
    age: int
    pin_code: str
    district: str
    state: str
    static_key: str
    secret_code: int
    agency_id: str
    doses_completed: int = 0
    registration_tx_id: str = ""

    def canonical_fields(self) -> dict:
        """Registration-time fields covered by the ledger memo hash.

        ``doses_completed`` is mutable and reconciled against vaccination
        transactions instead; the tx id is the linkage field itself.
        """
        return {
            "pseudo_uuid": self.pseudo_uuid,
            "gender": self.gender,
            "age": self.age,
            "pin_code": self.pin_code,
            "district": self.district,
            "state": self.state,
            "static_key": self.static_key,
            "secret_code": self.secret_code,
            "agency_id": self.agency_id,
        }


@dataclass
class VaccinationRecord:
    vaccination_id: str
    pseudo_uuid: str
    center_id: str
    dose_number: int
    vaccine_name: str
    vaccinator: str
    timestamp: str
    health_conditions: str
    tx_id: str = ""

    def canonical_fields(self) -> dict:
        return {
            "vaccination_id": self.vaccination_id,
            "pseudo_uuid": self.pseudo_uuid,
            "center_id": self.center_id,
            "dose_number": self.dose_number,
            "vaccine_name": self.vaccine_name,
            "vaccinator": self.vaccinator,
            "timestamp": self.timestamp,
            "health_conditions": self.health_conditions,
        }


_SNAPSHOT_COLLECTIONS = ("agencies", "centers", "citizens", "vaccinations")


def _entity_to_jsonable(entity) -> dict:
    out = asdict(entity)
    keys = out.pop("signing_keys", None)
    if keys is not None:
        out["signing_keys"] = {
            "public_key": keys["public_key"].hex(),
            "private_seed": keys["private_seed"].hex(),
            "address": keys["address"],
        }
    return out


def _keypair_from_jsonable(data: dict) -> SigningKeypair:
    return SigningKeypair(
        public_key=bytes.fromhex(data["public_key"]),
        private_seed=bytes.fromhex(data["private_seed"]),
        address=data["address"],
    )


class Store:
    """Single-writer, multi-reader registry with secondary indexes."""

    def __init__(self):
        self._lock = threading.RLock()
        self.directory: dict[str, IdentityDirectoryEntry] = {}
        self.regions: dict[str, PinRegion] = {}
        self.agencies: dict[str, GovernmentAgency] = {}
        self.centers: dict[str, VaccinationCenter] = {}
        self.citizens: dict[str, CitizenProfile] = {}
        self.vaccinations: dict[str, VaccinationRecord] = {}
        self._by_secret: dict[tuple[int, str], list[str]] = {}
        self._by_district: dict[str, set[str]] = {}
        self._by_state: dict[str, set[str]] = {}
        self._by_age: dict[int, set[str]] = {}
        self._vax_by_citizen: dict[str, set[str]] = {}
        self._vax_by_center: dict[str, set[str]] = {}

    # -- fixtures ------------------------------------------------------------

    def load_fixtures(self, directory_file: str | Path, region_file: str | Path) -> None:
        """Load the identity directory and PIN-region table (JSON lines)."""
        with self._lock:
            for line in _read_jsonl(region_file):
                region = PinRegion(
                    pin_code=line["pin"],
                    district=line["district"],
                    state=line["state"],
                    state_code=line["stateCode"],
                    agency_id=line["agencyID"],
                )
                self.regions[region.pin_code] = region
            for line in _read_jsonl(directory_file):
                if line["uuid"] in self.directory:
                    raise ConflictError("duplicate-uuid", f"uuid {line['uuid']} appears twice")
                entry = IdentityDirectoryEntry(
                    uuid=line["uuid"],
                    name=line["name"],
                    date_of_birth=date.fromisoformat(line["dob"]),
                    phone=line["phone"],
                    gender=line["gender"],
                    pin_code=line["pin"],
                )
                if entry.pin_code not in self.regions:
                    raise ConflictError("unmapped-pin", f"pin {entry.pin_code} has no region")
                self.directory[entry.uuid] = entry

    def directory_lookup(self, uuid: str) -> IdentityDirectoryEntry | None:
        return self.directory.get(uuid)

    def region_lookup(self, pin_code: str) -> PinRegion | None:
        return self.regions.get(pin_code)

    # -- upsert / get ----------------------------------------------------------

    def put_agency(self, agency: GovernmentAgency) -> None:
        with self._lock:
            if agency.agency_id in self.agencies:
                raise ConflictError("duplicate-key", f"agency {agency.agency_id} exists")
            self.agencies[agency.agency_id] = agency

    def get_agency(self, agency_id: str) -> GovernmentAgency | None:
        return self.agencies.get(agency_id)

    def put_center(self, center: VaccinationCenter) -> None:
        with self._lock:
            if center.center_id in self.centers:
                raise ConflictError("duplicate-key", f"center {center.center_id} exists")
            self.centers[center.center_id] = center

    def get_center(self, center_id: str) -> VaccinationCenter | None:
        return self.centers.get(center_id)

    def put_citizen(self, profile: CitizenProfile) -> None:
        with self._lock:
            if profile.pseudo_uuid in self.citizens:
                raise ConflictError("duplicate-key", f"citizen {profile.pseudo_uuid} exists")
            self.citizens[profile.pseudo_uuid] = profile
            self._index_citizen(profile)

    def get_citizen(self, pseudo_uuid: str) -> CitizenProfile | None:
        return self.citizens.get(pseudo_uuid)

    def put_vaccination(self, record: VaccinationRecord) -> None:
        with self._lock:
            if record.vaccination_id in self.vaccinations:
                raise ConflictError("duplicate-key", f"vaccination {record.vaccination_id} exists")
            for vid in self._vax_by_citizen.get(record.pseudo_uuid, ()):
                if self.vaccinations[vid].dose_number == record.dose_number:
                    raise ConflictError(
                        "duplicate-key",
                        f"dose {record.dose_number} already recorded for {record.pseudo_uuid}",
                    )
            self.vaccinations[record.vaccination_id] = record
            self._vax_by_citizen.setdefault(record.pseudo_uuid, set()).add(record.vaccination_id)
            self._vax_by_center.setdefault(record.center_id, set()).add(record.vaccination_id)

    def get_vaccination(self, vaccination_id: str) -> VaccinationRecord | None:
        return self.vaccinations.get(vaccination_id)

    # -- citizen queries -------------------------------------------------------

    def lookup_citizen(self, secret_code: int, pin_code: str) -> CitizenProfile:
        """Resolve the unique citizen behind a (secret code, PIN) pair."""
        matches = self._by_secret.get((secret_code, pin_code), [])
        if not matches:
            raise NotFoundError("not-found", "no citizen matches that secret code and PIN")
        if len(matches) > 1:
            raise ConflictError("ambiguous", f"{len(matches)} citizens share that secret code and PIN")
        return self.citizens[matches[0]]

    def secret_code_taken(self, secret_code: int, pin_code: str) -> bool:
        return bool(self._by_secret.get((secret_code, pin_code)))

    def query_citizens(
        self,
        district: str | None = None,
        state: str | None = None,
        age_range: tuple[int, int] | None = None,
    ) -> list[CitizenProfile]:
        """Index-served filter; results ordered by pseudo-UUID."""
        candidate_sets = []
        if district is not None:
            candidate_sets.append(self._by_district.get(district, set()))
        if state is not None:
            candidate_sets.append(self._by_state.get(state, set()))
        if age_range is not None:
            low, high = age_range
            in_age: set[str] = set()
            for age in range(low, high + 1):
                in_age |= self._by_age.get(age, set())
            candidate_sets.append(in_age)
        if candidate_sets:
            keys = set.intersection(*candidate_sets) if len(candidate_sets) > 1 else candidate_sets[0]
        else:
            keys = self.citizens.keys()
        return [self.citizens[k] for k in sorted(keys)]

    # -- doses and stock ---------------------------------------------------------

    def vaccination_ids_for(self, pseudo_uuid: str) -> list[str]:
        """Store keys of the citizen's records, stable under field tampering."""
        return sorted(self._vax_by_citizen.get(pseudo_uuid, set()))

    def doses_for(self, pseudo_uuid: str) -> list[VaccinationRecord]:
        vids = self._vax_by_citizen.get(pseudo_uuid, set())
        return sorted((self.vaccinations[v] for v in vids), key=lambda r: r.dose_number)

    def count_doses(self, pseudo_uuid: str) -> int:
        """Highest dose number recorded for the citizen, 0 if none."""
        records = self.doses_for(pseudo_uuid)
        return records[-1].dose_number if records else 0

    def vaccinations_at(self, center_id: str) -> list[VaccinationRecord]:
        vids = self._vax_by_center.get(center_id, set())
        return sorted((self.vaccinations[v] for v in vids), key=lambda r: r.vaccination_id)

    def adjust_stock(self, center_id: str, delta: int) -> VaccinationCenter:
        """Atomic stock update; positive delta is a supply event."""
        with self._lock:
            center = self.centers.get(center_id)
            if center is None:
                raise NotFoundError("not-found", f"center {center_id} not registered")
            if center.doses_remaining + delta < 0:
                raise ConflictError("insufficient-stock", f"center {center_id} is out of doses")
            center.doses_remaining += delta
            if delta > 0:
                center.doses_supplied += delta
            return center

    def increment_doses_completed(self, pseudo_uuid: str) -> None:
        with self._lock:
            self.citizens[pseudo_uuid].doses_completed += 1

    # -- snapshot / restore / tamper -------------------------------------------

    def snapshot(self, path: str | Path) -> None:
        """Write one JSON-lines file per portal collection.

        The identity directory and region table are fixture inputs, not
        portal state, and are deliberately not part of snapshots.
        """
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        for name in _SNAPSHOT_COLLECTIONS:
            collection = getattr(self, name)
            with open(root / f"{name}.jsonl", "w", encoding="utf-8") as fh:
                for key in sorted(collection):
                    fh.write(json.dumps(_entity_to_jsonable(collection[key]), sort_keys=True))
                    fh.write("\n")

    def restore(self, path: str | Path) -> None:
        """Replace portal collections from a snapshot directory."""
        root = Path(path)
        loaders = {
            "agencies": _agency_from_jsonable,
            "centers": _center_from_jsonable,
            "citizens": _citizen_from_jsonable,
            "vaccinations": _vaccination_from_jsonable,
        }
        with self._lock:
            self.agencies = {}
            self.centers = {}
            self.citizens = {}
            self.vaccinations = {}
            self._by_secret = {}
            self._by_district = {}
            self._by_state = {}
            self._by_age = {}
            self._vax_by_citizen = {}
            self._vax_by_center = {}
            for name in _SNAPSHOT_COLLECTIONS:
                load = loaders[name]
                for line in _read_jsonl(root / f"{name}.jsonl"):
                    entity = load(line)
                    if name == "citizens":
                        self.citizens[entity.pseudo_uuid] = entity
                        self._index_citizen(entity)
                    elif name == "vaccinations":
                        self.vaccinations[entity.vaccination_id] = entity
                        self._vax_by_citizen.setdefault(entity.pseudo_uuid, set()).add(entity.vaccination_id)
                        self._vax_by_center.setdefault(entity.center_id, set()).add(entity.vaccination_id)
                    elif name == "centers":
                        self.centers[entity.center_id] = entity
                    else:
                        self.agencies[entity.agency_id] = entity

    def tamper(self, entity_kind: str, key: str, field_name: str, new_value) -> dict:
        """Mutate one stored field, bypassing all protocol rules.

        Touches only the database, never the ledger; exists so the audit
        trail can be exercised against simulated corruption. Returns a
        manifest entry describing the mutation.
        """
        with self._lock:
            collection = {
                "citizen": self.citizens,
                "vaccination": self.vaccinations,
                "center": self.centers,
                "agency": self.agencies,
            }.get(entity_kind)
            if collection is None:
                raise NotFoundError("not-found", f"unknown entity kind {entity_kind!r}")
            entity = collection.get(key)
            if entity is None:
                raise NotFoundError("not-found", f"{entity_kind} {key} not found")
            if field_name not in {f.name for f in fields(entity)}:
                raise NotFoundError("not-found", f"{entity_kind} has no field {field_name!r}")
            old = getattr(entity, field_name)
            if entity_kind == "citizen":
                self._unindex_citizen(entity)
                setattr(entity, field_name, new_value)
                self._index_citizen(entity)
            else:
                setattr(entity, field_name, new_value)
            return {"kind": entity_kind, "subject": key, "field": field_name,
                    "old": old, "new": new_value}

    # -- internals ---------------------------------------------------------------

    def _index_citizen(self, profile: CitizenProfile) -> None:
        self._by_secret.setdefault((profile.secret_code, profile.pin_code), []).append(profile.pseudo_uuid)
        self._by_district.setdefault(profile.district, set()).add(profile.pseudo_uuid)
        self._by_state.setdefault(profile.state, set()).add(profile.pseudo_uuid)
        self._by_age.setdefault(profile.age, set()).add(profile.pseudo_uuid)

    def _unindex_citizen(self, profile: CitizenProfile) -> None:
        bucket = self._by_secret.get((profile.secret_code, profile.pin_code), [])
        if profile.pseudo_uuid in bucket:
            bucket.remove(profile.pseudo_uuid)
        self._by_district.get(profile.district, set()).discard(profile.pseudo_uuid)
        self._by_state.get(profile.state, set()).discard(profile.pseudo_uuid)
        self._by_age.get(profile.age, set()).discard(profile.pseudo_uuid)


def _read_jsonl(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise NotFoundError("fixture-error", f"fixture file {path} does not exist")
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def _agency_from_jsonable(data: dict) -> GovernmentAgency:
    return GovernmentAgency(
        agency_id=data["agency_id"],
        region=list(data["region"]),
        master_key=data["master_key"],
        signing_keys=_keypair_from_jsonable(data["signing_keys"]),
        ledger_address=data["ledger_address"],
    )


def _center_from_jsonable(data: dict) -> VaccinationCenter:
    kwargs = dict(data)
    kwargs["signing_keys"] = _keypair_from_jsonable(data["signing_keys"])
    return VaccinationCenter(**kwargs)


def _citizen_from_jsonable(data: dict) -> CitizenProfile:
    return CitizenProfile(**data)


def _vaccination_from_jsonable(data: dict) -> VaccinationRecord:
    return VaccinationRecord(**data)
