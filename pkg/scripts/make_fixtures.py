"""Regenerate the desk-scale fixtures under src/asrnoise/data/fixtures/.

    python scripts/make_fixtures.py /path/to/cmudict.dict

Writes toy 10-dim word vectors with topical clusters, the matching CMU
dictionary subset, a template-generated corpus and a 50-pair synthetic STS
file in SICK layout.  Output is deterministic.
"""
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "src/asrnoise/data/fixtures"
DIM = 10

TOPICS = {
    "animal": "cat bat rat dog hog frog cow hen fish bird bear deer goat horse mouse "
              "sheep duck fox mole seal pig bug ant cub".split(),
    "object": "hat mat cap map box sock rock lock clock bed door floor chair pen pan "
              "pin cup ball bell bowl bag book fan van cot kit".split(),
    "food": "bread meat meal tea rice pie cake milk corn bean soup fruit pear beet "
            "peach ham jam nut bun fig pea".split(),
    "motion": "run ran walk ride hide fly sit sat set stand jump climb swim roll "
              "fall fell".split(),
    "contact": "hold holds help helps look looking let letting read write talk eat "
               "meet see bring sing ring buy try keep kept sees reads brings keeps lets "
               "meets".split(),
    "quality": "red white light bright big small tall black green blue new old "
               "cold hot wet fat thin bad sad glad".split(),
    "person": "man men woman boy girl king queen son baby child friend "
              "mother father kid".split(),
    "place": "sun moon sea tree rain train road lake hill field park town window "
             "river street house beach port".split(),
    "function": "the a an of on in at to is was and with by out over under up his "
                "her it this that every very from".split(),
}

DETS = ["The", "A", "This", "That", "Every", "His", "Her"]
PREPS = ["on", "in", "at", "by", "over", "under", "with", "from"]
VERBS_T = ["holds", "helps", "sees", "reads", "brings", "keeps", "kept", "lets", "meets"]
VERBS_I = ["sat", "ran", "fell", "walk", "run", "sit", "ride", "hide", "fly", "swim",
           "jump", "roll", "stand", "climb"]
NOUNS = (TOPICS["animal"] + TOPICS["object"] + TOPICS["food"] + TOPICS["person"]
         + TOPICS["place"])
ADJS = TOPICS["quality"]
OOV = ["3", "42", "Zyx", "qwerty"]


def load_cmu(path):
    entries = {}
    for line in Path(path).read_text(encoding="utf-8", errors="replace").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith(";;;"):
            continue
        word = line.split()[0]
        base = word.split("(")[0]
        entries.setdefault(base.lower(), []).append(line)
    return entries


def make_vectors(rng):
    words, rows = [], []
    for topic, members in TOPICS.items():
        centre = rng.normal(size=DIM)
        centre *= 1.5 / np.linalg.norm(centre)
        for w in members:
            words.append(w)
            rows.append(centre + rng.normal(scale=0.45, size=DIM))
    return words, np.array(rows)


def sentence(rng):
    det = DETS[rng.integers(len(DETS))]
    adj = ADJS[rng.integers(len(ADJS))]
    noun = NOUNS[rng.integers(len(NOUNS))]
    obj = NOUNS[rng.integers(len(NOUNS))]
    prep = PREPS[rng.integers(len(PREPS))]
    kind = rng.integers(3)
    if kind == 0:
        words = [det, adj, noun, VERBS_I[rng.integers(len(VERBS_I))], prep, "the", obj]
    elif kind == 1:
        words = [det, noun, VERBS_T[rng.integers(len(VERBS_T))], "the",
                 ADJS[rng.integers(len(ADJS))], obj]
    else:
        words = [det, adj, noun, "and", "the", obj, VERBS_I[rng.integers(len(VERBS_I))],
                 prep, "the", NOUNS[rng.integers(len(NOUNS))]]
    if rng.random() < 0.1:
        words.insert(rng.integers(1, len(words)), OOV[rng.integers(len(OOV))])
    return " ".join(words) + rng.choice([".", ".", ".", "!", "?"])


def perturb(rng, text, k):
    """Swap ``k`` content words of a sentence for random nouns/adjectives."""
    toks = text[:-1].split()
    slots = [i for i, t in enumerate(toks) if t.lower() in NOUNS or t.lower() in ADJS]
    rng.shuffle(slots)
    for i in slots[:k]:
        pool = NOUNS if toks[i].lower() in NOUNS else ADJS
        choice = toks[i].lower()
        while choice == toks[i].lower():
            choice = pool[rng.integers(len(pool))]
        toks[i] = choice
    return " ".join(toks) + text[-1]


def main(cmu_path):
    rng = np.random.default_rng(20190523)
    OUT.mkdir(parents=True, exist_ok=True)
    cmu = load_cmu(cmu_path)

    words, mat = make_vectors(rng)
    with open(OUT / "toy_vectors.txt", "w", encoding="utf-8") as fh:
        fh.write(f"{len(words)} {DIM}\n")
        for w, row in zip(words, mat):
            fh.write(w + " " + " ".join(f"{x:.6f}" for x in row) + "\n")

    needed = set(words) | {w.lower() for w in VERBS_T + VERBS_I}
    missing = sorted(w for w in needed if w not in cmu)
    if missing:
        raise SystemExit(f"words missing from CMU dict: {missing}")
    with open(OUT / "cmudict_subset.dict", "w", encoding="utf-8") as fh:
        fh.write(";;; Subset of the CMU Pronouncing Dictionary (BSD licence), test fixture.\n")
        for w in sorted(needed):
            for line in cmu[w]:
                fh.write(line + "\n")

    corpus = [sentence(rng) for _ in range(240)]
    (OUT / "corpus.txt").write_text("\n".join(corpus) + "\n", encoding="utf-8")

    with open(OUT / "sts_pairs.tsv", "w", encoding="utf-8") as fh:
        fh.write("pair_ID\tsentence_A\tsentence_B\trelatedness_score\n")
        for i in range(50):
            a = sentence(rng)
            k = int(rng.integers(0, 5))
            b = perturb(rng, a, k)
            gold = 5.0 - k + float(rng.uniform(-0.3, 0.0 if k == 0 else 0.3))
            fh.write(f"{i + 1}\t{a}\t{b}\t{min(5.0, max(1.0, gold)):.2f}\n")


if __name__ == "__main__":
    main(sys.argv[1])
