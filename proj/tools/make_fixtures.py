#!/usr/bin/env python3
"""Regenerates the demo fixture corpus under data/.

Outputs (all deterministic, seed fixed):
  data/vectors.txt          topic-structured toy word vectors (token c1 ... cd)
  data/frequencies.txt      token counts
  data/agents/*.json        scripted agents (alexa, google, houndify, adasa)
  data/agents.json          registry config
  data/eval/sample_tasks.jsonl  gold-standard tasks built from the sample task list

Usage: python3 tools/make_fixtures.py [--out data]
"""

import argparse
import json
import random
import re
from pathlib import Path

DIM = 16
SEED = 20211018

# Sample task list, grouped by domain.
QUERIES = {
    "automobile": [
        "Activate the adaptive cruise control, set distance to be one car unit",
        "Can my adaptive cruise control alert me if I drift out of my lane?",
        "Can I turn off the seatbelt light on my dashboard?",
        "Can you tell me which side of the car the fuel door is located on, please?",
        "Can I at least get to Baltimore with the gas I have",
    ],
    "weather": [
        "what's the weekly weather report for the city",
        "Is it humid in Compton now?",
        "What will the highest temperature in San Jose be in the next 7 days?",
        "will it snow tomorrow",
        "show me the weather forecast for the week",
    ],
    "time": [
        "What time is it in San Jose?",
        "When does the sun set today?",
        "Please give me the time in tanzania at this moment",
        "I need you to tell me what time it is in new york now",
        "What time is it in the eastern timezone?",
    ],
    "directions": [
        "Find me a chinese spot i could get to the quickest.",
        "Are there shopping centers nearby?",
        "Are there any hospitals near me",
        "I need a place that serves coffee locally.",
        "Where is there a pizza place near me?",
    ],
    "flight info": [
        "How much is a one way flight to new york leaving on Friday?",
        "What's the cost of a plane ticket to Brazil?",
        "Are there any one way american airline flights to miami leaving friday available",
        "is there any one way flight to New York for tomorrow available",
        "Cheap flights to the bahamas",
    ],
    "stock": [
        "Did the Dow Jones go up or down today?",
        "What times does the market open today?",
        "What is apple trading at right now?",
        "How did microsoft do for today?",
        "What was the closing price of apple?",
    ],
    "date": [
        "What is the current day?",
        "What is the date in 5 days?",
        "I need to know tomorrow's date",
        "Please tell me what today is",
        "Date please",
    ],
    "travel": [
        "Is there anything fun to do in berlin?",
        "What fun is there to do in england?",
        "What are the most popular attractions in gatlinburg?",
        "What are some things I can do in portland?",
        "Could you tell me what fun tourist things I could do in tokyo?",
    ],
    "restaurant": [
        "What are the best restaurants open tonight?",
        "I need some suggestions for dinner places tonight",
        "Can you suggest a thai restaurant, please?",
        "I need reviews for places serving tacos in chicago",
        "In Cleveland, are there any good places that serve clams?",
    ],
}

REFUSALS = {
    "alexa": "I'm not sure",
    "google": "Sorry I'm not sure how to help",
    "houndify": "Didn't get that",
    "adasa": "I don't know that one",
}

# What each agent says when it does handle a domain; absent means refusal.
ANSWERS = {
    "automobile": {
        "adasa": "Your vehicle adaptive cruise control and lane keeping system are ready, "
                 "the fuel door is on the driver side and your fuel level reaches 60 miles.",
        "google": "Here are some results about car dashboard lights from the web.",
    },
    "weather": {
        "houndify": "The weather forecast this week is sunny with a high temperature of 75 degrees and no snow.",
        "google": "Today the weather is humid and mild, with a temperature of 68 degrees.",
        "alexa": "Right now it is 60 degrees with cloudy weather.",
    },
    "time": {
        "alexa": "The time right now is 3 PM.",
        "google": "The current time is 3 PM in the eastern timezone and the sun sets at 7 PM.",
        "houndify": "It is 3 PM now.",
    },
    "directions": {
        "google": "I found a few places near you, the closest one is 2 miles away.",
        "houndify": "Here are nearby places open now, the nearest is a 5 minute drive.",
    },
    "flight info": {
        "google": "One way flights leaving Friday start at 240 dollars on American Airlines.",
        "houndify": "The cheapest one way flight ticket I found costs 199 dollars.",
    },
    "stock": {
        "google": "Apple stock is trading at 150 dollars, the market opens at 9 30 AM.",
        "alexa": "The Dow Jones closed up 120 points today.",
        "houndify": "Microsoft stock closed at 300 dollars today.",
    },
    "date": {
        "alexa": "Today is Monday, October 18.",
        "google": "The date today is October 18 and tomorrow is October 19.",
        "houndify": "It is Monday.",
    },
    "travel": {
        "google": "Popular tourist attractions include museums, parks and the old town.",
        "alexa": "Here are some fun things to do: visit the museum and the city park.",
    },
    "restaurant": {
        "houndify": "I found good restaurants open tonight with great reviews, including a thai place.",
        "google": "Here are some dinner places near you with good reviews.",
    },
}

# Human consensus per domain (cycled across the domain's tasks).
GOLD = {
    "automobile": ["adasa"],
    "weather": ["houndify", "google", "houndify", "alexa", "houndify"],
    "time": ["google", "alexa", "google", "alexa", "google"],
    "directions": ["google", "houndify", "google", "google", "houndify"],
    "flight info": ["google", "houndify", "google", "houndify", "google"],
    "stock": ["google", "alexa", "google", "houndify", "google"],
    "date": ["alexa", "google", "google", "alexa", "houndify"],
    "travel": ["google", "alexa", "google", "google", "alexa"],
    "restaurant": ["houndify", "houndify", "google", "houndify", "houndify"],
}

AGENTS = ["alexa", "google", "houndify", "adasa"]

# Keywords used by the scripted agents and to place words on topic axes.
TOPIC_WORDS = {
    "automobile": "cruise control adaptive distance car unit lane drift seatbelt light dashboard fuel door "
                  "gas baltimore vehicle keeping system driver miles level",
    "weather": "weather weekly report humid temperature highest snow forecast degrees sunny cloudy mild",
    "time": "time timezone eastern sun moment pm clock",
    "directions": "find spot quickest shopping centers nearby hospitals near place places coffee locally "
                  "pizza closest nearest drive minute away",
    "flight info": "flight flights one way plane ticket cost cheap airline airlines american leaving available "
                   "bahamas brazil miami dollars",
    "stock": "dow jones market open trading apple microsoft closing price stock points closed",
    "date": "date day current days tomorrow's today monday october tomorrow",
    "travel": "fun berlin england attractions popular gatlinburg portland tourist tokyo things museum "
              "museums parks park town visit",
    "restaurant": "restaurants restaurant dinner suggestions suggest thai reviews tacos chicago clams "
                  "cleveland tonight good best serve serves serving",
    "refusal": "sorry sure not know help understand didn't get apologies opinion i'm don't",
}

STOPWORDS = set(
    "the a an is it to of in on for be me my i you your what are there any can do does did at this that "
    "with and or if how which where when will please need could some up down now here from about out "
    "have has was were by as its it's i'm".split()
)


def tokenize(text):
    out = []
    for piece in text.split():
        piece = piece.strip("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")
        if piece:
            out.append(piece.lower())
    return out


def build_script(agent):
    entries = []
    for domain, answers in ANSWERS.items():
        if agent not in answers:
            continue
        words = "|".join(re.escape(w) for w in TOPIC_WORDS[domain].split())
        entries.append({"match": f"\\b({words})\\b", "regex": True, "response": answers[agent]})
    if agent == "adasa":
        entries.insert(0, {
            "match": "\\blka\\b",
            "regex": True,
            "response": "The Lane Keeping System can help you bring the vehicle back into the traveling lane "
                        "when your vehicle drifts.",
        })
    return {"default": REFUSALS[agent], "delay_ms": 0, "entries": entries}


def build_tasks(rng):
    tasks = []
    for domain, queries in QUERIES.items():
        for i, query in enumerate(queries):
            responses = {a: ANSWERS[domain].get(a, REFUSALS[a]) for a in AGENTS}
            gold = GOLD[domain][i % len(GOLD[domain])]
            runner = [a for a in AGENTS if a != gold and a in ANSWERS[domain]]
            votes = [gold] * 3 + ([runner[0]] * 2 if runner else [gold] * 2)
            rng.shuffle(votes)
            ratings = {}
            for a in AGENTS:
                if a in ANSWERS[domain]:
                    base = 4 if a == gold else 3
                    ratings[a] = [max(1, min(5, base + rng.choice([-1, 0, 0, 1]))) for _ in range(3)]
                else:
                    ratings[a] = [rng.choice([1, 1, 2]) for _ in range(3)]
            tasks.append({
                "task_id": f"{domain.replace(' ', '_')}-{i + 1}",
                "domain": domain,
                "query_text": query,
                "responses": responses,
                "human_votes": votes,
                "quality_ratings": ratings,
            })
    # One all-refusal task, and one 2-2-1 vote split resolved lexicographically.
    tasks.append({
        "task_id": "automobile-lka",
        "domain": "automobile",
        "query_text": "Can you explain LKA?",
        "responses": {a: REFUSALS[a] for a in AGENTS},
        "human_votes": ["adasa", "adasa", "adasa", "houndify", "google"],
        "quality_ratings": {a: [1, 1, 2] for a in AGENTS},
    })
    tasks.append({
        "task_id": "weather-split",
        "domain": "weather",
        "query_text": "is it going to rain this weekend",
        "responses": {a: ANSWERS["weather"].get(a, REFUSALS[a]) for a in AGENTS},
        "human_votes": ["houndify", "google", "houndify", "google", "alexa"],
        "quality_ratings": {"alexa": [3, 3, 4], "google": [4, 4, 3], "houndify": [4, 5, 4], "adasa": [1, 1, 1]},
    })
    return tasks


def build_vectors(rng, vocab):
    topics = list(TOPIC_WORDS)
    prototypes = {}
    for t in topics:
        v = [rng.gauss(0, 1) for _ in range(DIM)]
        norm = sum(x * x for x in v) ** 0.5
        prototypes[t] = [x / norm for x in v]
    topic_of = {}
    for t, words in TOPIC_WORDS.items():
        for w in words.split():
            topic_of.setdefault(w, t)
    lines = []
    for w in sorted(vocab):
        if w in topic_of:
            base = prototypes[topic_of[w]]
            v = [b + rng.gauss(0, 0.25) for b in base]
        else:
            v = [rng.gauss(0, 0.3) for _ in range(DIM)]
        lines.append(w + " " + " ".join(f"{x:.6f}" for x in v))
    return lines


def build_counts(rng, vocab):
    counts = {}
    for w in sorted(vocab):
        counts[w] = 50000 + rng.randint(0, 20000) if w in STOPWORDS else rng.randint(20, 2000)
    return counts


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()
    out = Path(args.out)
    (out / "agents").mkdir(parents=True, exist_ok=True)
    (out / "eval").mkdir(parents=True, exist_ok=True)

    rng = random.Random(SEED)
    tasks = build_tasks(rng)

    scripts = {a: build_script(a) for a in AGENTS}
    vocab = set()
    for t in tasks:
        vocab.update(tokenize(t["query_text"]))
        for r in t["responses"].values():
            vocab.update(tokenize(r))
    for s in scripts.values():
        vocab.update(tokenize(s["default"]))
        for e in s["entries"]:
            vocab.update(tokenize(e["response"]))
    for words in TOPIC_WORDS.values():
        vocab.update(words.split())
    vocab.update(tokenize("What is the weather outside? The weather outside is delightful. "
                          "Sorry, I don't know how to help with that."))
    # Leave a few words out so OOV handling is exercised.
    vocab -= {"lka", "acc", "gatlinburg", "compton"}

    (out / "vectors.txt").write_text("\n".join(build_vectors(rng, vocab)) + "\n")
    counts = build_counts(rng, vocab)
    (out / "frequencies.txt").write_text("".join(f"{w} {c}\n" for w, c in sorted(counts.items())))

    for a, s in scripts.items():
        (out / "agents" / f"{a}.json").write_text(json.dumps(s, indent=2) + "\n")
    display = {"alexa": "Amazon Alexa", "google": "Google Assistant", "houndify": "Houndify", "adasa": "Adasa"}
    registry = [
        {"agent_id": a, "display_name": display[a],
         "transport": {"kind": "scripted", "script_path": f"agents/{a}.json"},
         "timeout_ms": 3000, "enabled": True}
        for a in AGENTS
    ]
    (out / "agents.json").write_text(json.dumps(registry, indent=2) + "\n")

    with open(out / "eval" / "sample_tasks.jsonl", "w") as f:
        for t in tasks:
            f.write(json.dumps(t) + "\n")


if __name__ == "__main__":
    main()
