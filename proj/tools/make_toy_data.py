#!/usr/bin/env python3
"""Regenerates data/toy: a tiny labeled NC dataset, a parsed corpus, and
small vector files. Output is deterministic."""

import os
import random
import sys

OUT = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "toy")

NCS = {
    "CONTAIN": [("sugar", "bowl"), ("coffee", "cup"), ("water", "bottle"), ("flower", "vase"),
                ("tea", "pot"), ("bread", "basket"), ("money", "box"), ("fish", "tank"),
                ("wine", "barrel"), ("salt", "jar"), ("milk", "jug"), ("candy", "jar")],
    "MATERIAL": [("steel", "knife"), ("wool", "sweater"), ("glass", "window"), ("stone", "wall"),
                 ("paper", "bag"), ("plastic", "chair"), ("gold", "ring"), ("silk", "scarf"),
                 ("leather", "belt"), ("wood", "table"), ("iron", "gate"), ("cotton", "shirt")],
    "PURPOSE": [("pancake", "pan"), ("soup", "spoon"), ("tennis", "racket"), ("fishing", "rod"),
                ("dog", "leash"), ("pepper", "grinder"), ("bike", "helmet"), ("pizza", "cutter"),
                ("garden", "hose"), ("shoe", "brush"), ("hair", "dryer"), ("ski", "boot")],
}

# Token rows: (form, lemma, upos, head, deprel). "W1"/"W2" are substituted.
TEMPLATES = {
    "CONTAIN": [
        [("The", "the", "DET", 2, "det"), ("W2", "W2", "NOUN", 3, "nsubj"), ("contains", "contain", "VERB", 0, "ROOT"),
         ("W1", "W1", "NOUN", 3, "dobj"), (".", ".", "PUNCT", 3, "punct")],
        [("The", "the", "DET", 2, "det"), ("W1", "W1", "NOUN", 6, "nsubj"), ("in", "in", "ADP", 2, "prep"),
         ("the", "the", "DET", 5, "det"), ("W2", "W2", "NOUN", 3, "pobj"), ("is", "be", "AUX", 0, "ROOT"),
         ("fresh", "fresh", "ADJ", 6, "acomp"), (".", ".", "PUNCT", 6, "punct")],
    ],
    "MATERIAL": [
        [("The", "the", "DET", 2, "det"), ("W2", "W2", "NOUN", 4, "nsubjpass"), ("is", "be", "AUX", 4, "auxpass"),
         ("made", "make", "VERB", 0, "ROOT"), ("of", "of", "ADP", 4, "prep"), ("W1", "W1", "NOUN", 5, "pobj"),
         (".", ".", "PUNCT", 4, "punct")],
        [("She", "she", "PRON", 2, "nsubj"), ("bought", "buy", "VERB", 0, "ROOT"), ("a", "a", "DET", 4, "det"),
         ("W2", "W2", "NOUN", 2, "dobj"), ("of", "of", "ADP", 4, "prep"), ("W1", "W1", "NOUN", 5, "pobj"),
         (".", ".", "PUNCT", 2, "punct")],
    ],
    "PURPOSE": [
        [("The", "the", "DET", 2, "det"), ("W2", "W2", "NOUN", 4, "nsubjpass"), ("is", "be", "AUX", 4, "auxpass"),
         ("used", "use", "VERB", 0, "ROOT"), ("for", "for", "ADP", 4, "prep"), ("W1", "W1", "NOUN", 5, "pobj"),
         (".", ".", "PUNCT", 4, "punct")],
        [("They", "they", "PRON", 2, "nsubj"), ("sell", "sell", "VERB", 0, "ROOT"), ("a", "a", "DET", 4, "det"),
         ("W2", "W2", "NOUN", 2, "dobj"), ("for", "for", "ADP", 4, "prep"), ("W1", "W1", "NOUN", 5, "pobj"),
         (".", ".", "PUNCT", 2, "punct")],
    ],
}

COMPOUND = [("The", "the", "DET", 3, "det"), ("W1", "W1", "NOUN", 3, "compound"), ("W2", "W2", "NOUN", 4, "nsubj"),
            ("is", "be", "AUX", 0, "ROOT"), ("here", "here", "ADV", 4, "advmod"), (".", ".", "PUNCT", 4, "punct")]

FILLER = [("It", "it", "PRON", 2, "nsubj"), ("rained", "rain", "VERB", 0, "ROOT"), ("all", "all", "DET", 4, "det"),
          ("day", "day", "NOUN", 2, "npadvmod"), (".", ".", "PUNCT", 2, "punct")]


def conllu(rows, w1, w2, comment):
    out = ["# text = " + comment]
    for i, (form, lemma, pos, head, dep) in enumerate(rows, 1):
        form = w1 if form == "W1" else w2 if form == "W2" else form
        lemma = w1 if lemma == "W1" else w2 if lemma == "W2" else lemma
        out.append("\t".join([str(i), form, lemma, pos, "_", "_", str(head), dep, "_", "_"]))
    return "\n".join(out) + "\n\n"


def vec_line(token, v):
    return token + " " + " ".join("%.5f" % x for x in v) + "\n"


def main():
    rng = random.Random(20240917)
    os.makedirs(OUT, exist_ok=True)

    with open(os.path.join(OUT, "dataset.tsv"), "w") as f:
        for rel, pairs in NCS.items():
            for w1, w2 in pairs:
                f.write("%s\t%s\t%s\n" % (w1, w2, rel))

    blocks = []
    for rel, pairs in NCS.items():
        for w1, w2 in pairs:
            for tmpl in TEMPLATES[rel]:
                for _ in range(rng.randint(1, 3)):
                    blocks.append(conllu(tmpl, w1, w2, "%s %s" % (rel, w1)))
            blocks.append(conllu(COMPOUND, w1, w2, "compound %s %s" % (w1, w2)))
    for _ in range(5):
        blocks.append(conllu(FILLER, "", "", "filler"))
    rng.shuffle(blocks)

    # A sentence over the 32-token limit that mentions an NC.
    long_rows = [("The", "the", "DET", 2, "det"), ("W2", "W2", "NOUN", 3, "nsubj"),
                 ("contains", "contain", "VERB", 0, "ROOT"), ("W1", "W1", "NOUN", 3, "dobj")]
    long_rows += [("and", "and", "CCONJ", 3, "cc")] * 30
    blocks.insert(3, conllu(long_rows, "sugar", "bowl", "overlong"))
    # A malformed block (non-integer head).
    blocks.insert(7, "# text = broken\n1\tBroken\tbroken\tADJ\t_\t_\tx\tROOT\t_\t_\n\n")

    with open(os.path.join(OUT, "corpus.conllu"), "w") as f:
        f.writelines(blocks)

    rel_dir = {rel: [rng.gauss(0, 1) for _ in range(16)] for rel in NCS}
    words = sorted({w for pairs in NCS.values() for p in pairs for w in p} | {"the", "kitchen", "table", "day"})
    with open(os.path.join(OUT, "words.vec"), "w") as f:
        f.write("%d 16\n" % len(words))
        for w in words:
            f.write(vec_line(w, [rng.gauss(0, 1) for _ in range(16)]))

    lemmas = sorted({"the", "contain", "in", "be", "fresh", "make", "of", "she", "buy", "a", "use", "for", "they",
                     "sell", "here", "it", "rain", "day", "all", "."})
    with open(os.path.join(OUT, "lemmas.vec"), "w") as f:
        for w in lemmas:
            f.write(vec_line(w, [rng.uniform(-0.5, 0.5) for _ in range(50)]))

    with open(os.path.join(OUT, "ncs.vec"), "w") as f:
        for rel, pairs in NCS.items():
            for i, (w1, w2) in enumerate(pairs):
                if i % 5 == 4:
                    continue  # leave some NCs without a vector
                v = [c + rng.gauss(0, 0.35) for c in rel_dir[rel]]
                f.write(vec_line("%s_%s" % (w1, w2), v))
        for w in ("kitchen", "table"):
            f.write(vec_line(w, [rng.gauss(0, 1) for _ in range(16)]))


if __name__ == "__main__":
    main()
