import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vaxledger.engine import Engine, EngineConfig
from vaxledger.ledger import Ledger
from vaxledger.registry import Store
from vaxledger.runtime import ManualClock, make_rng
from vaxledger.sim import generate_population, generate_regions, write_jsonl


class World:
    """A small wired-up portal: fixtures, store, ledger, engine, clock."""

    def __init__(self, tmp_path, citizens=20, agencies=2, seed=5, min_age=0,
                 difficulty=0, batch_size=4, secret_code_mode="unique", max_doses=2):
        self.regions = generate_regions(agencies, seed=seed)
        self.population = generate_population(citizens, self.regions, seed=seed)
        self.directory_file = tmp_path / "directory.jsonl"
        self.region_file = tmp_path / "regions.jsonl"
        write_jsonl(self.directory_file, self.population)
        write_jsonl(self.region_file, self.regions)

        self.store = Store()
        self.store.load_fixtures(self.directory_file, self.region_file)
        self.clock = ManualClock()
        self.rng = make_rng(seed)
        self.ledger = Ledger(difficulty=difficulty, batch_size=batch_size, clock=self.clock)
        self.engine = Engine(
            self.store,
            self.ledger,
            EngineConfig(min_age=min_age, secret_code_mode=secret_code_mode,
                         max_doses=max_doses),
            clock=self.clock,
            rng=self.rng,
        )
        for row in self.regions:
            if self.store.get_agency(row["agencyID"]) is None:
                self.engine.create_agency(row["agencyID"])

    def register_citizen(self, row) -> "CitizenProfile":
        session = self.engine.start_citizen_registration(row["uuid"], row["phone"])
        draft = self.engine.verify_otp(session.session_id, session.otp)
        return self.engine.complete_citizen_registration(draft.token, row["pin"], row["gender"])

    def register_center(self, pin=None, stock=50):
        pin = pin or self.regions[0]["pin"]
        center = self.engine.register_center("Test Center", "1 Health Lane", pin)
        if stock:
            self.engine.supply_stock(center.center_id, stock)
        return center

    def vaccinate(self, citizen, center, vaccine="AlphaVaccine",
                  vaccinator="Dr. John Doe", notes="Normal, no COVID symptoms reported"):
        page = self.engine.create_verification_page(
            citizen.secret_code, citizen.pin_code, center.center_id, "identity")
        outcome = self.engine.solve_verification_page(
            page.suffix, citizen.static_key, citizen.secret_code)
        confirmation = self.engine.record_vaccination_details(
            outcome.draft.draft_id, vaccine, vaccinator, notes, center.static_key)
        final = self.engine.solve_verification_page(
            confirmation.suffix, citizen.static_key, citizen.secret_code)
        return final.record


@pytest.fixture
def world(tmp_path):
    return World(tmp_path)
