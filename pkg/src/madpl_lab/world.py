"""World bundle: ontology + database + vector layout built from one config.

The default world has three domains (restaurant, hotel, train) sized so the
state vectors stay near a hundred dimensions and a desk CPU can train on it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .dialog_state import build_layout, layout_text
from .ontology import UserGoal, generate_database, load_ontology

DEFAULT_CONFIG = {
    "seed": 7,
    "entities_per_domain": 20,
    "domains": [
        {
            "name": "restaurant",
            "informable": {
                "food": ["italian", "chinese", "indian", "british", "french", "thai"],
                "area": ["north", "south", "centre", "east", "west"],
                "pricerange": ["cheap", "moderate", "expensive"],
            },
            "requestable": ["phone", "address", "postcode"],
            "book_slots": ["people", "time"],
            "bookable": True,
        },
        {
            "name": "hotel",
            "informable": {
                "area": ["north", "south", "centre", "east", "west"],
                "stars": ["2", "3", "4", "5"],
                "parking": ["yes", "no"],
            },
            "requestable": ["phone", "address", "postcode"],
            "book_slots": ["people", "nights"],
            "bookable": True,
        },
        {
            "name": "train",
            "informable": {
                "day": ["monday", "tuesday", "wednesday", "thursday", "friday"],
                "destination": ["airport", "castle", "museum", "stadium"],
                "leaveat": ["morning", "midday", "evening", "night"],
            },
            "requestable": ["duration", "price"],
            "book_slots": ["tickets"],
            "bookable": True,
        },
    ],
}


@dataclass
class World:
    ontology: object
    db: object
    layout: object
    config: dict

    @property
    def seed(self):
        return self.config.get("seed", 0)


def world_from_config(config):
    """Build a World from a config dict or JSON text."""
    if isinstance(config, str):
        text = config
        config = json.loads(config)
    else:
        text = json.dumps(config)
    ontology = load_ontology(text)
    db = generate_database(
        ontology,
        seed=config.get("seed", 0),
        entities_per_domain=config.get("entities_per_domain", 20),
    )
    return World(
        ontology=ontology, db=db, layout=build_layout(ontology), config=config
    )


def default_world():
    return world_from_config(DEFAULT_CONFIG)


def write_world_files(world, out_dir):
    """Emit the inspectable world artifacts into a directory."""
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "world-config.json").write_text(
        json.dumps(world.config, indent=2, sort_keys=True) + "\n"
    )
    with open(out_dir / "db.jsonl", "w", encoding="utf-8") as fh:
        for domain in world.ontology.domain_names():
            for ent in world.db.entities[domain]:
                fh.write(json.dumps(
                    {"domain": domain, "id": ent.id, "attributes": ent.attributes},
                    sort_keys=True,
                ) + "\n")
    (out_dir / "state-layout.txt").write_text(layout_text(world.layout))


def load_world(world_dir):
    """Rebuild a World from a directory written by write_world_files.

    The database is regenerated from the stored config; generation is a pure
    function of (config, seed) so the result matches the dumped db.jsonl.
    """
    text = (world_dir / "world-config.json").read_text()
    return world_from_config(text)


def write_goals(path, goals):
    """Dump a goal list as one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for goal in goals:
            fh.write(json.dumps(goal.to_dict(), sort_keys=True) + "\n")


def read_goals(path):
    with open(path, encoding="utf-8") as fh:
        return [UserGoal.from_dict(json.loads(line))
                for line in fh if line.strip()]
