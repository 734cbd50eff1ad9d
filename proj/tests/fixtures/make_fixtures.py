#!/usr/bin/env python3
"""Writes the fixture corpus, questions, QA records and mock config.

    python3 make_fixtures.py [outdir]

Output is a pure function of SEED. The golden results file is not made
here; it is the output of the first verified `kadr run` over these files.
"""

import json
import random
import sys
from pathlib import Path

SEED = 20250
N_DOCS = 1000
N_SINGLE = 30
N_MULTI = 20

SYLLABLES = ["ka", "lo", "mir", "ven", "tha", "dor", "quel", "sa", "ri", "bex", "nor", "ul", "fen", "zar", "ti", "gro", "wen", "pal"]
KINDS = ["river port", "mountain town", "trading city", "fishing village", "mining settlement", "monastery", "university town", "fortress"]
PRODUCTS = ["copper", "amber", "wool", "salt", "glass", "timber", "silk", "cider", "marble", "indigo", "pepper", "tin"]
TRADES = ["weavers", "smiths", "brewers", "masons", "scribes", "sailors", "potters", "tanners"]
FILLER = [
    "Travellers describe the streets as narrow and busy during the market season.",
    "Local records were kept in the old archive until it was moved.",
    "The climate is mild, with wet winters and long dry summers.",
    "Several festivals are held each year in the central square.",
    "A stone bridge connects the old quarter with the newer districts.",
    "The surrounding farmland produces grain and vegetables for the region.",
    "Historians still debate the origin of the name.",
    "The population grew steadily during the last century.",
]


def word(rng, n):
    return "".join(rng.choice(SYLLABLES) for _ in range(n)).capitalize()


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
    rng = random.Random(SEED)

    names = set()
    places = []
    while len(places) < N_DOCS:
        name = word(rng, rng.choice([2, 3]))
        if name in names:
            continue
        names.add(name)
        places.append({
            "doc_id": "doc%04d" % len(places),
            "name": name,
            "kind": rng.choice(KINDS),
            "year": rng.randrange(900, 1900),
            "founder": word(rng, 2) + " " + word(rng, 2),
            "product": rng.choice(PRODUCTS),
            "trade": rng.choice(TRADES),
            "river": word(rng, 2),
        })

    chunks = []
    for p in places:
        first = ("%(name)s is a %(kind)s on the %(river)s river. It was founded in %(year)d by %(founder)s. "
                 "Its best known export is %(product)s." % p)
        extra = rng.sample(FILLER, 2)
        if rng.random() < 0.2:
            chunks.append({"chunk_id": p["doc_id"] + "-0", "doc_id": p["doc_id"], "text": first + " " + extra[0]})
            chunks.append({"chunk_id": p["doc_id"] + "-1", "doc_id": p["doc_id"],
                           "text": "The guild of %(trade)s dominates the economy of %(name)s. " % p + extra[1]})
        else:
            chunks.append({"chunk_id": p["doc_id"] + "-0", "doc_id": p["doc_id"],
                           "text": first + " The guild of %(trade)s dominates its economy. " % p + " ".join(extra)})

    picks = rng.sample(places, N_SINGLE + 2 * N_MULTI)
    records = []
    for i, p in enumerate(picks[:N_SINGLE]):
        if i % 2 == 0:
            q = "Who founded %(name)s and in which year?" % p
            a = "%(name)s was founded in %(year)d by %(founder)s." % p
        else:
            q = "What is the best known export of %(name)s on the %(river)s river?" % p
            a = "The best known export of %(name)s is %(product)s." % p
        records.append({"question_id": "q%02d" % len(records), "question": q, "answer": a, "gold_doc_ids": [p["doc_id"]],
                        "kind": "single_doc", "categories": {"answer-type": "factoid", "premise": "direct"}})
    rest = picks[N_SINGLE:]
    for i in range(N_MULTI):
        p, r = rest[2 * i], rest[2 * i + 1]
        q = "Which was founded earlier, %s or %s?" % (p["name"], r["name"])
        older = p if p["year"] <= r["year"] else r
        a = "%s was founded earlier, in %d (%s: %d, %s: %d)." % (older["name"], older["year"], p["name"], p["year"], r["name"], r["year"])
        records.append({"question_id": "q%02d" % len(records), "question": q, "answer": a, "gold_doc_ids": [p["doc_id"], r["doc_id"]],
                        "kind": "multi_doc", "categories": {"answer-type": "comparison", "premise": "direct"}})

    def dump(name, rows):
        with open(out / name, "w", encoding="utf-8", newline="\n") as f:
            for row in rows:
                f.write(json.dumps(row, sort_keys=True) + "\n")

    dump("corpus.jsonl", chunks)
    dump("qa_records.jsonl", records)
    dump("questions.jsonl", [{"question_id": r["question_id"], "question": r["question"], "kind": r["kind"]} for r in records])

    config = {
        "sparse": {"base_url": "mock"},
        "dense": {"base_url": "mock"},
        "reranker": {"base_url": "mock"},
        "llm": {"base_url": "mock:heuristic"},
        "mock_corpus": "corpus.jsonl",
        "seed": 7,
    }
    with open(out / "mock_config.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(config, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
