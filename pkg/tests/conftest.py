import json

import pytest

from madpl_lab.dialog_state import build_layout
from madpl_lab.ontology import Database, Entity, load_ontology
from madpl_lab.world import World

MINI_CONFIG = {
    "domains": [
        {
            "name": "rest",
            "informable": {
                "food": ["italian", "chinese"],
                "area": ["north", "south"],
            },
            "requestable": ["phone", "addr"],
            "book_slots": ["people", "time"],
            "bookable": True,
        }
    ]
}


@pytest.fixture(scope="session")
def mini_ontology():
    return load_ontology(json.dumps(MINI_CONFIG))


@pytest.fixture(scope="session")
def hand_db():
    rows = (
        Entity("rest-000", {"food": "italian", "area": "north",
                            "phone": "phone-000111", "addr": "addr-000111"}),
        Entity("rest-001", {"food": "chinese", "area": "north",
                            "phone": "phone-000222", "addr": "addr-000222"}),
        Entity("rest-002", {"food": "italian", "area": "south",
                            "phone": "phone-000333", "addr": "addr-000333"}),
    )
    return Database(
        entities={"rest": rows},
        informable_slots={"rest": frozenset({"food", "area"})},
    )


@pytest.fixture(scope="session")
def mini_world(mini_ontology, hand_db):
    return World(
        ontology=mini_ontology,
        db=hand_db,
        layout=build_layout(mini_ontology),
        config=dict(MINI_CONFIG),
    )
