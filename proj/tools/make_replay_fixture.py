#!/usr/bin/env python3
"""Writes the scripted 171-sample replay fixture.

The counts below are the targets the fixture is built to hit; everything else
(text, ids, which moderator dissents) is filler chosen deterministically.

Usage: make_replay_fixture.py <out-dir>
"""

import json
import random
import sys
from pathlib import Path

CATEGORIES = ["cultural_knowledge", "cultural_sentiment", "internet_culture"]

# category -> (unanimous samples, correct among them, split samples, human-correct among them)
PER_CATEGORY = {
    "cultural_knowledge": (54, 41, 7, 5),
    "cultural_sentiment": (41, 32, 10, 8),
    "internet_culture": (48, 39, 11, 8),
}

# (natives agree, decision correct) cell counts for unanimous samples.
UNANIMOUS_CELLS = {(True, True): 91, (True, False): 14, (False, True): 21, (False, False): 17}
# Same cells for split samples, scored by the LLM majority.
SPLIT_CELLS = {(True, True): 10, (True, False): 6, (False, True): 7, (False, False): 5}

# Which of r1, r2, r3 vote correctly on each split sample: 12 all three,
# 9 two of three, 7 one of three. Gives 21/28 majority-correct and individual
# accuracies 19/28, 23/28, 19/28.
REVIEWER_PATTERNS = (
    [(1, 1, 1)] * 12
    + [(1, 1, 0)] * 4
    + [(0, 1, 1)] * 4
    + [(1, 0, 1)] * 1
    + [(1, 0, 0)] * 2
    + [(0, 1, 0)] * 3
    + [(0, 0, 1)] * 2
)

SPANS = {
    "cultural_knowledge": ("김치", "Kimchi"),
    "cultural_sentiment": ("국뽕", "Gukppong"),
    "internet_culture": ("ㅇㅈ", "Injeong"),
}

SEARCH = {
    "김치": [
        {"title": "Kimchi - Encyclopedia", "url": "https://encyclopedia.example/kimchi",
         "snippet": "A traditional side dish of salted and fermented vegetables."},
        {"title": "Kimchi culture", "url": "https://heritage.example/kimjang",
         "snippet": "Making and sharing kimchi is a seasonal custom."},
    ],
    "국뽕": [
        {"title": "Gukppong (slang)", "url": "https://dictionary.example/gukppong",
         "snippet": "Slang for excessive national pride, often used mockingly."},
    ],
    "ㅇㅈ": [
        {"title": "ㅇㅈ - internet slang", "url": "https://slang.example/injeong",
         "snippet": "Abbreviation of 인정, meaning 'I admit' or 'agreed'."},
    ],
}

OPPOSITE = {"OFF": "NOT", "NOT": "OFF"}


def expand(cells):
    out = []
    for key, n in cells.items():
        out.extend([key] * n)
    return out


def verdict_text(label, variant, span):
    if label == "NOT":
        return ["Offensiveness : False", "offensiveness: false", "**Offensiveness** : False\n"][variant % 3]
    forms = [
        'Offensiveness : True\nSpan : ["{s}"]',
        'offensiveness : TRUE\nspan: ["{s}", "really"]',
        "Offensiveness: True\n  Span : ['{s}']",
    ]
    return forms[variant % 3].format(s=span)


def build(out_dir: Path):
    rng = random.Random(20240101)

    unanimous_slots = []  # (category, correct)
    split_slots = []  # (category, human_correct)
    for cat in CATEGORIES:
        n_u, c_u, n_s, c_s = PER_CATEGORY[cat]
        unanimous_slots += [(cat, True)] * c_u + [(cat, False)] * (n_u - c_u)
        split_slots += [(cat, True)] * c_s + [(cat, False)] * (n_s - c_s)

    # Pair categories with contingency cells, matching on correctness.
    cells = expand(UNANIMOUS_CELLS)
    rng.shuffle(cells)
    by_correct = {True: [c for c in cells if c[1]], False: [c for c in cells if not c[1]]}
    unanimous = []
    for cat, correct in unanimous_slots:
        agree, _ = by_correct[correct].pop()
        unanimous.append({"category": cat, "correct": correct, "agree": agree})

    split_cells = expand(SPLIT_CELLS)
    rng.shuffle(split_cells)
    patterns = list(REVIEWER_PATTERNS)
    majority_ok = [p for p in patterns if sum(p) >= 2]
    majority_bad = [p for p in patterns if sum(p) < 2]
    rng.shuffle(majority_ok)
    rng.shuffle(majority_bad)
    split = []
    for (cat, human_correct), (agree, llm_correct) in zip(split_slots, split_cells):
        pattern = (majority_ok if human_correct else majority_bad).pop()
        split.append({"category": cat, "human_correct": human_correct, "agree": agree,
                      "llm_correct": llm_correct, "pattern": pattern})

    samples = [dict(s, split=False) for s in unanimous] + [dict(s, split=True) for s in split]
    rng.shuffle(samples)

    annotators = [f"ann{n:02d}" for n in range(1, 31)]
    corpus, provider, votes = [], [], []
    reprompt_done = abstain_done = regen_done = False
    for index, s in enumerate(samples, start=1):
        sid = f"s{index:03d}"
        cat = s["category"]
        gold = rng.choice(["OFF", "NOT"])
        span_ko, span_en = SPANS[cat]
        no_spans = index % 10 == 0
        title = f"[게시판] 오늘의 이야기 {index}"
        comment = f"{span_ko} 얘기는 이제 그만하자 {index}번째" if not no_spans else f"그냥 그렇네요 {index}"
        title_en = f"[Board] Today's story {index}"
        comment_en = (f"Stop talking about {span_en} now, number {index}" if not no_spans
                      else f"It is just so-so {index}")

        voters = rng.sample(annotators, 3)
        if s["agree"]:
            native = [gold] * 3
        else:
            native = [gold, gold, OPPOSITE[gold]]
            rng.shuffle(native)
        corpus.append({
            "id": sid, "title": title, "comment": comment, "OFF": gold == "OFF", "category": cat,
            "annotations": [{"annotator_id": a, "OFF": l == "OFF"} for a, l in zip(voters, native)],
        })

        provider.append({"tag": f"translate/title/{sid}", "kind": "chat", "response": title_en})
        provider.append({"tag": f"translate/comment/{sid}", "kind": "chat", "response": comment_en})
        if no_spans:
            provider.append({"tag": f"annotate/detect/{sid}", "kind": "chat",
                             "response": "Nothing in this post needs cultural context.\nSPAN | none"})
        else:
            provider.append({"tag": f"annotate/detect/{sid}", "kind": "chat",
                             "response": f"The comment mentions {span_en}.\n"
                                         f"SPAN | comment | {cat.replace('_', ' ')} | {span_ko}"})
            explanation = {
                "cultural_knowledge": "A fermented vegetable dish that is a staple of Korean meals.",
                "cultural_sentiment": "Slang for excessive national pride, usually used with irony.",
                "internet_culture": "Internet shorthand for agreeing with someone.",
            }[cat]
            reply = f'- "{span_en} ({span_ko})": {explanation}'
            if not regen_done:
                regen_done = True
                provider.append({"tag": f"annotate/generate/{sid}", "kind": "chat",
                                 "response": reply[:-1] + ", so the comment is offensive."})
                provider.append({"tag": f"annotate/generate/{sid}#regen1", "kind": "chat",
                                 "response": reply})
            else:
                provider.append({"tag": f"annotate/generate/{sid}", "kind": "chat", "response": reply})

        offensive_span = comment_en.split(",")[0]
        if not s["split"]:
            label = gold if s["correct"] else OPPOSITE[gold]
            for m in (1, 2, 3):
                text = verdict_text(label, index + m, offensive_span)
                if m == 2 and not reprompt_done:
                    reprompt_done = True
                    provider.append({"tag": f"moderate/m2/{sid}", "kind": "chat",
                                     "response": "I think this is probably fine."})
                    provider.append({"tag": f"moderate/m2/{sid}#reprompt", "kind": "chat",
                                     "response": text})
                else:
                    provider.append({"tag": f"moderate/m{m}/{sid}", "kind": "chat", "response": text})
        else:
            majority = gold if s["llm_correct"] else OPPOSITE[gold]
            dissenter = 1 + index % 3
            for m in (1, 2, 3):
                if m == dissenter and not abstain_done:
                    abstain_done = True
                    provider.append({"tag": f"moderate/m{m}/{sid}", "kind": "chat",
                                     "response": "Offensiveness : True\nSpan : [unquoted]"})
                    provider.append({"tag": f"moderate/m{m}/{sid}#reprompt", "kind": "chat",
                                     "response": "Offensiveness : maybe"})
                    continue
                label = OPPOSITE[majority] if m == dissenter else majority
                provider.append({"tag": f"moderate/m{m}/{sid}", "kind": "chat",
                                 "response": verdict_text(label, index + m, offensive_span)})
            for reviewer, correct in zip(("r1", "r2", "r3"), s["pattern"]):
                vote = gold if correct else OPPOSITE[gold]
                votes.append({"sample_id": sid, "reviewer_id": reviewer, "vote": vote,
                              "spans": [offensive_span] if vote == "OFF" else []})

    for query, results in SEARCH.items():
        provider.append({"tag": query, "kind": "search", "response": results})

    out_dir.mkdir(parents=True, exist_ok=True)
    write_jsonl(out_dir / "corpus.jsonl", corpus)
    write_jsonl(out_dir / "provider.jsonl", provider)
    write_jsonl(out_dir / "votes.jsonl", votes)
    write_jsonl(out_dir / "annotators.jsonl", annotator_corpus())


def annotator_corpus():
    # Annotator A sits in every sample and disagrees with the other two on s02
    # and s08, so it matches the majority on 10 of 12.
    rows = [
        ("A", "OFF", "B", "OFF", "C", "OFF"),
        ("A", "NOT", "B", "OFF", "C", "OFF"),
        ("A", "OFF", "B", "OFF", "C", "NOT"),
        ("A", "NOT", "B", "NOT", "C", "NOT"),
        ("A", "OFF", "B", "NOT", "D", "OFF"),
        ("A", "NOT", "B", "NOT", "D", "OFF"),
        ("A", "OFF", "B", "OFF", "D", "OFF"),
        ("A", "OFF", "B", "NOT", "D", "NOT"),
        ("A", "NOT", "C", "NOT", "D", "NOT"),
        ("A", "OFF", "C", "OFF", "D", "NOT"),
        ("A", "NOT", "C", "OFF", "D", "NOT"),
        ("A", "OFF", "C", "OFF", "D", "OFF"),
    ]
    out = []
    for n, row in enumerate(rows, start=1):
        votes = [{"annotator_id": row[i], "OFF": row[i + 1] == "OFF"} for i in (0, 2, 4)]
        offensive = sum(v["OFF"] for v in votes) >= 2
        out.append({"id": f"a{n:02d}", "title": "", "comment": f"synthetic comment {n}",
                    "OFF": offensive, "annotations": votes})
    return out


def write_jsonl(path: Path, rows):
    with path.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit(__doc__)
    build(Path(sys.argv[1]))
