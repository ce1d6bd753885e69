#!/usr/bin/env python3
"""Brute-force reference for the evaluation report.

Recomputes every selection from scratch (tokenize, SIF weighted mean,
Euclidean distance, refusal filter, argmin with ensemble-order tie-break,
majority vote) with no shared code, and writes the expected report that the
C++ harness must reproduce.

Usage:
  sif_oracle.py --dataset D --vectors V --frequencies F --patterns P --out expected.json
"""

import argparse
import json
import math
import string
from collections import Counter

PUNCT = string.punctuation
A = 1e-3


def tokens(text):
    out = []
    for piece in text.split():
        piece = piece.strip(PUNCT)
        if piece:
            out.append(piece.lower())
    return out


def load_vectors(path):
    table = {}
    with open(path) as f:
        for line in f:
            parts = line.split()
            if len(parts) < 2:
                continue
            try:
                table[parts[0].lower()] = [float(x) for x in parts[1:]]
            except ValueError:
                continue
    return table


def load_freqs(path):
    counts = Counter()
    with open(path) as f:
        for line in f:
            parts = line.split()
            if parts:
                counts[parts[0].lower()] += float(parts[1])
    total = sum(counts.values())
    return {w: c / total for w, c in counts.items()}


def embed(text, vectors, freqs):
    acc = None
    k = 0
    for t in tokens(text):
        if t not in vectors or t not in freqs:
            continue
        w = A / (A + freqs[t])
        v = [w * x for x in vectors[t]]
        acc = v if acc is None else [a + b for a, b in zip(acc, v)]
        k += 1
    if k == 0:
        return None
    return [a / k for a in acc]


def refusal(text, agent, patterns):
    low = text.lower().replace("’", "'")
    pats = list(patterns.get("global", [])) + list(patterns.get("per_agent", {}).get(agent, []))
    return any(p.lower() in low for p in pats)


def ofa_select(task, vectors, freqs, patterns, prefilter):
    order = list(task["responses"].keys())
    cands = [(a, t) for a, t in task["responses"].items() if t]
    if prefilter:
        good = [(a, t) for a, t in cands if not refusal(t, a, patterns)]
        cands = good if good else cands
    q = embed(task["query_text"], vectors, freqs)
    if q is None:
        return None
    best = None
    for a, t in cands:
        e = embed(t, vectors, freqs)
        d = math.inf if e is None else math.sqrt(sum((x - y) ** 2 for x, y in zip(q, e)))
        key = (d, order.index(a))
        if best is None or key < best[0]:
            best = (key, a)
    return best[1]


def gold(votes):
    counts = Counter(votes)
    top = max(counts.values())
    return sorted(a for a, n in counts.items() if n == top)[0]


def report(tasks, policy, select):
    overall = [0, 0]
    per_domain = {}
    undesirable = [0, 0]
    hist = [0] * 5
    acceptable = [0, 0]
    for t in tasks:
        chosen = select(t)
        hit = chosen is not None and chosen == gold(t["human_votes"])
        d = per_domain.setdefault(t["domain"], [0, 0])
        d[1] += 1
        overall[1] += 1
        undesirable[1] += 1
        if hit:
            d[0] += 1
            overall[0] += 1
        if chosen is not None and refusal(t["responses"][chosen], chosen, PATTERNS):
            undesirable[0] += 1
        if chosen is not None and t.get("quality_ratings"):
            for r in t["quality_ratings"][chosen]:
                hist[r - 1] += 1
                acceptable[1] += 1
                if r >= 3:
                    acceptable[0] += 1
    return {
        "policy": policy,
        "overall_accuracy": {"hits": overall[0], "total": overall[1]},
        "per_domain_accuracy": {k: {"hits": v[0], "total": v[1]} for k, v in per_domain.items()},
        "undesirable_rate": {"hits": undesirable[0], "total": undesirable[1]},
        "quality_histogram": {str(i + 1): hist[i] for i in range(5)},
        "acceptable_or_better": {"hits": acceptable[0], "total": acceptable[1]},
    }


PATTERNS = {}


def main():
    global PATTERNS
    ap = argparse.ArgumentParser()
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--vectors", required=True)
    ap.add_argument("--frequencies", required=True)
    ap.add_argument("--patterns", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    with open(args.patterns) as f:
        PATTERNS = json.load(f)
    with open(args.dataset) as f:
        tasks = [json.loads(l) for l in f if l.strip()]
    vectors = load_vectors(args.vectors)
    freqs = load_freqs(args.frequencies)

    policies = [
        report(tasks, "human_gold", lambda t: gold(t["human_votes"])),
        report(tasks, "ofa:sif", lambda t: ofa_select(t, vectors, freqs, PATTERNS, True)),
        report(tasks, "fixed:adasa", lambda t: "adasa"),
    ]
    expected = {"prefilter": True, "task_count": len(tasks), "policies": policies}
    with open(args.out, "w") as f:
        json.dump(expected, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
