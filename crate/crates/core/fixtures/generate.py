#!/usr/bin/env python3
"""Regenerate the bundled fixtures. Output is deterministic.

    python3 generate.py            # writes probe/ and rerank/ next to this file
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

# key -> sense -> relation -> targets; dist is per key
PROBE = {
    "disaster": {
        "disaster.n.01": {
            "syn": ["catastrophe", "calamity", "tragedy"],
            "hype": ["misfortune", "adversity"],
            "hypo": ["famine", "earthquake", "flood"],
            "cohyp": ["hardship", "accident"],
        },
    },
    "year": {
        "year.n.01": {
            "syn": ["twelvemonth"],
            "hype": ["period", "time"],
            "hypo": ["leap", "decade"],
            "cohyp": ["month", "week", "day"],
        },
    },
    "bank": {
        "bank.n.01": {
            "syn": ["lender"],
            "hype": ["institution", "company"],
            "hypo": ["credit", "savings"],
            "cohyp": ["insurer", "exchange"],
        },
        "bank.n.02": {
            "syn": ["shore"],
            "hype": ["slope", "land"],
            "hypo": ["riverbank", "levee"],
            "cohyp": ["hillside", "ridge"],
        },
    },
    "plant": {
        "plant.n.01": {
            "syn": ["factory", "works"],
            "hype": ["building", "facility"],
            "hypo": ["refinery", "mill"],
            "cohyp": ["warehouse", "depot"],
        },
        "plant.n.02": {
            "syn": ["flora", "vegetation"],
            "hype": ["organism"],
            "hypo": ["herb", "shrub", "tree"],
            "cohyp": ["animal", "fungus"],
        },
    },
    "car": {
        "car.n.01": {
            "syn": ["automobile", "auto", "motorcar"],
            "hype": ["vehicle"],
            "hypo": ["sedan", "coupe", "convertible"],
            "cohyp": ["truck", "bus", "van"],
        },
    },
    "doctor": {
        "doctor.n.01": {
            "syn": ["physician", "medic"],
            "hype": ["professional"],
            "hypo": ["surgeon", "dermatologist"],
            "cohyp": ["nurse", "dentist", "pharmacist"],
        },
    },
    "river": {
        "river.n.01": {
            "syn": ["watercourse"],
            "hype": ["stream"],
            "hypo": ["tributary", "estuary"],
            "cohyp": ["brook", "creek", "canal"],
        },
    },
    "song": {
        "song.n.01": {
            "syn": ["tune", "melody"],
            "hype": ["music", "composition"],
            "hypo": ["ballad", "anthem", "lullaby"],
            "cohyp": ["poem", "hymn"],
        },
    },
    "house": {
        "house.n.01": {
            "syn": ["home", "dwelling"],
            "hype": ["building"],
            "hypo": ["cottage", "bungalow", "villa"],
            "cohyp": ["apartment", "cabin"],
        },
    },
    "storm": {
        "storm.n.01": {
            "syn": ["tempest"],
            "hype": ["weather"],
            "hypo": ["hurricane", "blizzard", "thunderstorm"],
            "cohyp": ["drought", "heatwave"],
        },
    },
    "teacher": {
        "teacher.n.01": {
            "syn": ["instructor", "educator"],
            "hype": ["professional"],
            "hypo": ["tutor", "lecturer", "professor"],
            "cohyp": ["librarian", "counselor"],
        },
    },
    "city": {
        "city.n.01": {
            "syn": ["metropolis"],
            "hype": ["municipality", "settlement"],
            "hypo": ["capital", "megalopolis"],
            "cohyp": ["town", "village", "suburb"],
        },
    },
    "horse": {
        "horse.n.01": {
            "syn": ["equine"],
            "hype": ["animal", "mammal"],
            "hypo": ["stallion", "mare", "pony"],
            "cohyp": ["donkey", "zebra", "mule"],
        },
    },
    "game": {
        "game.n.01": {
            "syn": ["match", "contest"],
            "hype": ["activity"],
            "hypo": ["tournament", "playoff"],
            "cohyp": ["race", "bout"],
        },
    },
    "money": {
        "money.n.01": {
            "syn": ["cash", "currency"],
            "hype": ["asset"],
            "hypo": ["coin", "banknote"],
            "cohyp": ["property", "stock"],
        },
    },
    "weapon": {
        "weapon.n.01": {
            "syn": ["arm"],
            "hype": ["instrument", "device"],
            "hypo": ["rifle", "sword", "missile"],
            "cohyp": ["tool", "shield"],
        },
    },
    "ship": {
        "ship.n.01": {
            "syn": ["vessel", "boat"],
            "hype": ["craft"],
            "hypo": ["tanker", "freighter", "liner"],
            "cohyp": ["aircraft", "submarine"],
        },
    },
    "food": {
        "food.n.01": {
            "syn": ["nourishment", "nutrition"],
            "hype": ["substance"],
            "hypo": ["bread", "meat", "cheese"],
            "cohyp": ["drink", "medicine"],
        },
    },
    "road": {
        "road.n.01": {
            "syn": ["route", "highway"],
            "hype": ["way"],
            "hypo": ["avenue", "boulevard", "lane"],
            "cohyp": ["railway", "trail"],
        },
    },
    "child": {
        "child.n.01": {
            "syn": ["kid", "youngster"],
            "hype": ["person"],
            "hypo": ["toddler", "infant", "orphan"],
            "cohyp": ["adult", "teenager"],
        },
    },
}

DIST = {
    "disaster": ["catastrophe", "tragedy", "crisis", "devastation", "calamity", "chaos", "aftermath", "tsunami"],
    "year": ["month", "decade", "season", "week", "summer", "period", "quarter", "era"],
    "bank": ["lender", "banker", "loan", "deposit", "finance", "branch", "treasury", "fund"],
    "plant": ["factory", "reactor", "facility", "flower", "seed", "mill", "crop", "grower"],
    "car": ["vehicle", "truck", "automobile", "driver", "jeep", "motorcycle", "taxi", "suv"],
    "doctor": ["physician", "nurse", "surgeon", "patient", "clinic", "dentist", "hospital", "medic"],
    "river": ["creek", "lake", "stream", "valley", "bank", "delta", "shore", "canal"],
    "song": ["album", "ballad", "tune", "lyric", "melody", "track", "anthem", "singer"],
    "house": ["home", "apartment", "cottage", "mansion", "room", "bungalow", "garage", "porch"],
    "storm": ["hurricane", "rain", "typhoon", "cyclone", "wind", "flood", "tempest", "blizzard"],
    "teacher": ["student", "instructor", "professor", "tutor", "principal", "school", "lecturer", "educator"],
    "city": ["town", "metropolis", "capital", "suburb", "village", "downtown", "county", "municipality"],
    "horse": ["pony", "stallion", "mare", "rider", "saddle", "jockey", "donkey", "cattle"],
    "game": ["match", "season", "tournament", "playoff", "contest", "league", "team", "score"],
    "money": ["cash", "fund", "dollar", "currency", "profit", "budget", "debt", "coin"],
    "weapon": ["rifle", "gun", "missile", "bomb", "sword", "ammunition", "arsenal", "pistol"],
    "ship": ["vessel", "boat", "tanker", "freighter", "yacht", "cargo", "sailor", "harbor"],
    "food": ["meal", "bread", "grocery", "meat", "snack", "cuisine", "nutrition", "dish"],
    "road": ["highway", "street", "avenue", "lane", "route", "bridge", "freeway", "trail"],
    "child": ["kid", "toddler", "infant", "parent", "youngster", "baby", "teenager", "mother"],
}

FILLER = (
    "the a of in on at with for by from after before during while and but or "
    "people officials said reported yesterday today local many several some most "
    "new old large small long short early late first last recent major "
    "was were is are had has have will would could should began ended "
    "morning evening night week city region country area village coast "
    "report news story record study plan project meeting policy change"
).split()

TEMPLATES = [
    "officials said the {k} was the {a} of its kind in the {b} for many years",
    "many people reported that the {k} had changed the {a} life of the {b}",
    "after the {a} meeting the {k} was described as a {b} part of the plan",
    "the report said a {k} near the {a} {b} would be studied next week",
    "during the evening the {k} seemed {a} to several people from the {b}",
    "a new study of the {k} in the {a} region found {b} changes since last year",
]


def probe_fixture(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20)
    lexicon = []
    sentences = []
    for key, senses in PROBE.items():
        for sense, rels in senses.items():
            for rel, words in rels.items():
                for w in words:
                    lexicon.append({"key": key, "sense": sense, "relation": rel, "target": w})
            for i in range(3):
                t = rng.choice(TEMPLATES)
                a, b = rng.sample(FILLER[20:], 2)
                tokens = t.format(k=key, a=a, b=b).split()
                sentences.append(
                    {
                        "id": f"{sense}.s{i}",
                        "tokens": tokens,
                        "key": key,
                        "key_index": tokens.index(key),
                        "sense": sense,
                    }
                )
        for w in DIST[key]:
            lexicon.append({"key": key, "sense": None, "relation": "dist", "target": w})
    write_jsonl(out / "lexicon.jsonl", lexicon)
    write_jsonl(out / "sentences.jsonl", sentences)


RERANK_KEYS = list(PROBE) + [
    "forest", "market", "soldier", "church", "garden",
    "letter", "island", "painting", "computer", "bread",
]


def rerank_fixture(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(30)
    pool = sorted({w for ws in DIST.values() for w in ws} | {
        w for s in PROBE.values() for rels in s.values() for ws in rels.values() for w in ws
    })
    neighbors = []
    gold = []
    frequencies = []
    vocab = set(RERANK_KEYS)
    for key in RERANK_KEYS:
        base = [w for w in DIST.get(key, []) if w != key]
        extra = [w for w in rng.sample(pool, 20) if w != key and w not in base]
        words = (base + extra)[:15]
        scores = sorted((round(rng.uniform(0.35, 0.9), 4) for _ in words), reverse=True)
        neighbors.append({"key": key, "neighbors": [{"word": w, "score": s} for w, s in zip(words, scores)]})
        vocab.update(words)
        if key in PROBE:
            for rels in PROBE[key].values():
                for rel, ws in rels.items():
                    for w in ws:
                        gold.append({"key": key, "relation": rel, "word": w})
        else:
            for w in rng.sample(words, 3):
                gold.append({"key": key, "relation": rng.choice(["syn", "hype", "hypo", "cohyp"]), "word": w})
        frequencies.append({"key": key, "count": rng.randint(100, 100000)})
    seen = set()
    gold = [g for g in gold if (g["key"], g["word"]) not in seen and not seen.add((g["key"], g["word"]))]

    # Every key shares a few lines with some of its neighbors; every word gets several lines.
    lines = []
    for n in neighbors:
        key = n["key"]
        words = [x["word"] for x in n["neighbors"]]
        for i in range(4):
            w = words[i % len(words)]
            filler = rng.sample(FILLER, rng.randint(8, 14))
            filler.insert(rng.randrange(len(filler) + 1), key)
            filler.insert(rng.randrange(len(filler) + 1), w)
            lines.append(" ".join(filler))
    for w in sorted(vocab):
        for _ in range(3):
            filler = rng.sample(FILLER, rng.randint(9, 16))
            filler.insert(rng.randrange(len(filler) + 1), w)
            lines.append(" ".join(filler))
    for _ in range(20):
        lines.append(" ".join(rng.sample(FILLER, 5)))
    rng.shuffle(lines)
    (out / "corpus.txt").write_text("\n".join(lines) + "\n")
    write_jsonl(out / "neighbors.jsonl", neighbors)
    write_jsonl(out / "gold.jsonl", gold)
    write_jsonl(out / "frequencies.jsonl", frequencies)


def write_jsonl(path: Path, records) -> None:
    with path.open("w") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    probe_fixture(HERE / "probe")
    rerank_fixture(HERE / "rerank")
