"""Regenerate the 1000-name business/organisation fixture and its equivalence table.

Surnames and US state names come from Faker's en_US provider lists (which are
built from public census name lists). Output is deterministic for a given seed.

    python3 scripts/make_name_fixture.py crates/core/tests/data
"""
import random
import sys
from pathlib import Path

from faker import Faker

EQUIVALENCES = [
    ["center", "centre", "ctr"],
    ["company", "co", "comp"],
    ["association", "assoc", "assn"],
    ["services", "svc", "srvc"],
    ["international", "intl"],
    ["university", "univ"],
    ["corporation", "corp"],
    ["incorporated", "inc"],
    ["limited", "ltd"],
    ["brothers", "bros"],
    ["saint", "st"],
    ["mountain", "mtn"],
    ["department", "dept"],
    ["national", "natl"],
    ["theatre", "theater"],
    ["jewelry", "jewellery"],
    ["consulting", "consultin", "consltng"],
    ["management", "mgmt"],
    ["technology", "tech"],
    ["manufacturing", "mfg"],
    ["medical", "med"],
    ["apartments", "apts"],
    ["hospital", "hosp"],
    ["institute", "inst"],
    ["laboratory", "lab"],
    ["business", "busyness"],
    ["neighbourhood", "neighborhood"],
    ["restaurant", "restaurnt"],
]

TRADES = [
    "plumbing", "roofing", "bakery", "pizza", "dental", "cleaning", "auto repair",
    "landscaping", "catering", "electric", "printing", "flooring", "pharmacy",
    "insurance", "realty", "hardware", "tailoring", "fitness", "florist", "bistro",
    "grill", "cafe", "brewing", "coffee", "veterinary", "optical", "travel",
    "law", "accounting", "storage", "moving", "tire", "glass", "welding", "music",
]
FIELDS = [
    "data mining", "machine learning", "public health", "fine arts", "marine biology",
    "civil engineering", "economics", "nursing", "agriculture", "architecture",
    "dentistry", "journalism", "forestry", "linguistics", "robotics",
]


def main(out_dir: Path, seed: int = 7) -> None:
    fake = Faker("en_US")
    Faker.seed(seed)
    rng = random.Random(seed)

    def last():
        return fake.last_name().lower()

    def state():
        return fake.state().lower()

    templates = [
        lambda: f"{last()} {rng.choice(TRADES)}",
        lambda: f"{last()} {rng.choice(TRADES)} services",
        lambda: f"{last()} brothers {rng.choice(TRADES)}",
        lambda: f"{last()} and sons {rng.choice(TRADES)} company",
        lambda: f"{last()} {rng.choice(TRADES)} incorporated",
        lambda: f"{last()} {last()} limited",
        lambda: f"{last()} {rng.choice(TRADES)} corporation",
        lambda: f"{state()} {rng.choice(TRADES)} center",
        lambda: f"{state()} {rng.choice(TRADES)} association",
        lambda: f"university of {state()}",
        lambda: f"{state()} state university",
        lambda: f"{state()} institute of {rng.choice(FIELDS)}",
        lambda: f"international conference on {rng.choice(FIELDS)}",
        lambda: f"national {rng.choice(FIELDS)} association",
        lambda: f"saint {last()} hospital",
        lambda: f"{last()} medical center",
        lambda: f"{last()} mountain apartments",
        lambda: f"{state()} department of {rng.choice(FIELDS)}",
        lambda: f"{last()} technology consulting",
        lambda: f"{last()} management group",
        lambda: f"{last()} manufacturing company",
        lambda: f"{last()} jewelry",
        lambda: f"{last()} theatre",
        lambda: f"{last()} {rng.choice(FIELDS)} laboratory",
        lambda: f"{last()} family restaurant",
        lambda: f"{last()} neighbourhood {rng.choice(TRADES)}",
        lambda: f"{last()} business {rng.choice(TRADES)}",
        lambda: f"{last()} {last()} and {last()}",
        lambda: f"the {last()} {rng.choice(TRADES)}",
    ]

    names = []
    seen = set()
    while len(names) < 1000:
        name = rng.choice(templates)()
        if name not in seen:
            seen.add(name)
            names.append(name)

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "names_1000.tsv", "w", encoding="utf-8") as fh:
        for i, name in enumerate(names):
            fh.write(f"n{i:04d}\t{name}\n")
    with open(out_dir / "equivalences.tsv", "w", encoding="utf-8") as fh:
        for group in EQUIVALENCES:
            fh.write("\t".join(group) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/data"))
