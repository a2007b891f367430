import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from unistore import Store
from unistore.packs import apply_all_shipped, seed_demo

PACKS_DIR = os.path.join(os.path.dirname(__file__), "..", "packs")


def make_hr_store(tower_cap: int = 3) -> Store:
    store = Store(tower_cap=tower_cap)
    apply_all_shipped(store, None, PACKS_DIR)
    return store


def make_demo_store(employees: int = 60) -> Store:
    store = make_hr_store()
    seed_demo(store, employees)
    return store


@pytest.fixture
def fresh_store() -> Store:
    return Store()


@pytest.fixture
def hr_store() -> Store:
    return make_hr_store()


@pytest.fixture(scope="session")
def demo_store_ro() -> Store:
    """Packs + 60-employee demo corp; session-scoped, read-only by convention."""
    return make_demo_store(60)


def records_of(store: Store) -> list[dict]:
    return [r.to_dict() for r in store.log.records]
