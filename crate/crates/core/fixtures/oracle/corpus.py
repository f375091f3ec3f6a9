"""Synthetic annotated corpus: 10 session logs (5 per condition) with 328
pharmacist and 90 student chat utterances, two raters' annotations, grade
marks, and a reference tabulation computed with pandas/scipy/sklearn.

Usage: python3 corpus.py
"""
import csv
import json
import math
import random
import re
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.metrics import cohen_kappa_score

from golden_scores import HERE, load_scenarios, score_log

OUT = HERE / "corpus"
PHASES = ["A", "B", "C1", "C2"]
T0 = datetime(2026, 3, 9, 9, 0, 0, tzinfo=timezone.utc)

PHARMACIST_UTTERANCES = [30, 35, 28, 36, 31, 33, 34, 32, 35, 34]
STUDENT_UTTERANCES = [8, 10, 9, 7, 11, 9, 8, 10, 9, 9]
assert sum(PHARMACIST_UTTERANCES) == 328 and sum(STUDENT_UTTERANCES) == 90

MECHANISMS = ["decomposing", "focusing", "monitoring", "elicit_articulation", "elicit_decision",
              "surface_gaps", "affirmative", "mistake"]
FAMILY = {"decomposing": "structuring", "focusing": "structuring", "monitoring": "structuring",
          "elicit_articulation": "problematizing", "elicit_decision": "problematizing",
          "surface_gaps": "problematizing", "affirmative": "affirmative", "mistake": "mistake"}
WEIGHTS = {
    "structuring_heavy": [0.2, 0.2, 0.2, 0.07, 0.07, 0.07, 0.16, 0.03],
    "problematizing_heavy": [0.07, 0.07, 0.07, 0.2, 0.2, 0.2, 0.16, 0.03],
}
STRATEGIES = ["checklist", "interpersonal", "possible_causes"]
ICAP = ["active", "constructive", "interactive"]
CORRECTNESS = ["correct", "incorrect"]
CATEGORIES = {
    "family": ["structuring", "problematizing", "affirmative", "mistake"],
    "mechanism": MECHANISMS,
    "strategy": STRATEGIES,
    "icap": ICAP,
    "correctness": CORRECTNESS,
}

PHARMACIST_LINES = [
    "Let us go through the checklist step by step.",
    "Which category have you not covered yet?",
    "You have asked about the symptoms already.",
    "What could explain the timing?",
    "Why do you think that fits?",
    "Which cause would you rule out first?",
    "Is there anything that contradicts your idea?",
    "Good thinking.",
    "That is a helpful question.",
    "Focus on the duration for now.",
    "How sure are you about that?",
    "Compare the two explanations.",
    "Keep in mind the other family members.",
    "Now decide which cause is most likely.",
]
STUDENT_LINES = [
    "I will ask about the duration next.",
    "What else should I check?",
    "He has no fever.",
    "I am not sure.",
    "That makes sense.",
    "Should I ask the mother?",
]
CAUSE_LINES = ["I think the porridge could be the reason.", "Could it be teething?"]


def iso(t):
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


class Log:
    def __init__(self, start):
        self.t = start
        self.events = []

    def add(self, gap, kind, **fields):
        self.t += timedelta(seconds=gap)
        self.events.append({"v": 1, "timestamp": iso(self.t), "type": kind, **fields})


def answer(scen, persona, topic):
    p = next(p for p in scen["personas"] if p["id"] == persona)
    return next(q for q in p["qa_entries"] if q["topic"] == topic)["answer"]


def split_counts(total, parts, rng):
    """`parts` positive integers summing to `total`."""
    cuts = sorted(rng.sample(range(1, total), parts - 1))
    return [b - a for a, b in zip([0] + cuts, cuts + [total])]


def build_transcript(i, rng, scen):
    condition = "structuring_heavy" if i < 5 else "problematizing_heavy"
    sid, student = f"corpus-{i + 1:02d}", f"student-{i + 1:02d}"
    log = Log(T0 + timedelta(hours=i))
    log.add(0, "session_started", session_id=sid, student_id=student, condition=condition,
            scenarios={p: scen[p]["id"] for p in PHASES})

    n_student = STUDENT_UTTERANCES[i]
    reply_sizes = split_counts(PHARMACIST_UTTERANCES[i], n_student, rng)
    n_disc = 2 + i % 2
    disc_sizes = split_counts(n_student, n_disc, rng)
    chat = []  # (speaker, sentence list)

    a = scen["A"]
    father_checklist = [q["topic"] for q in a["personas"][0]["qa_entries"] if q.get("checklist_item")]
    father_other = [q["topic"] for q in a["personas"][0]["qa_entries"] if not q.get("checklist_item")]
    mother = [q["topic"] for q in a["personas"][1]["qa_entries"]]
    checklist_budget = rng.sample(father_checklist, rng.randint(2, 5))

    exchange = 0
    for d, size in enumerate(disc_sizes):
        asks = [("father", t) for t in checklist_budget[d::n_disc]]
        asks += [("father", rng.choice(father_other)), ("mother", rng.choice(mother))]
        rng.shuffle(asks)
        for persona, topic in asks:
            log.add(rng.randint(8, 40), "client_question_asked", persona=persona, topic=topic)
            log.add(rng.randint(2, 6), "client_answered", text=answer(a, persona, topic))
        log.add(rng.randint(5, 20), "module_switched", **{"from": "client_inquiry"}, to="pedagogical",
                initiator="student")
        for k in range(size):
            last_discussion = d == n_disc - 1
            if last_discussion and k == 0:
                s_text = rng.choice(CAUSE_LINES)
            else:
                s_text = rng.choice(STUDENT_LINES)
            log.add(rng.randint(10, 60), "student_message", text=s_text)
            chat.append(("student", [s_text]))
            lines = [rng.choice(PHARMACIST_LINES) for _ in range(reply_sizes[exchange])]
            log.add(rng.randint(2, 8), "pharmacist_message", text=" ".join(lines))
            chat.append(("pharmacist", lines))
            exchange += 1
        if d < n_disc - 1:
            log.add(rng.randint(5, 20), "module_switched", **{"from": "pedagogical"}, to="client_inquiry",
                    initiator="student")
    log.add(rng.randint(5, 30), "module_switched", **{"from": "pedagogical"}, to="diagnostic",
            initiator="student")

    grades = []
    for pi, phase in enumerate(PHASES):
        s = scen[phase]
        if phase != "A":
            primary = next(p for p in s["personas"] if p["id"] == s["primary_client"])
            target = next(p for p in s["personas"] if p["id"] == s["interpersonal_target"])
            for persona in rng.sample(primary["qa_entries"], rng.randint(2, 8)):
                log.add(rng.randint(8, 40), "client_question_asked", persona=primary["id"], topic=persona["topic"])
                log.add(rng.randint(2, 6), "client_answered", text=persona["answer"])
            for q in rng.sample(target["qa_entries"], rng.randint(0, 3)):
                log.add(rng.randint(8, 40), "client_question_asked", persona=target["id"], topic=q["topic"])
                log.add(rng.randint(2, 6), "client_answered", text=q["answer"])
            log.add(rng.randint(5, 20), "module_switched", **{"from": "client_inquiry"}, to="diagnostic",
                    initiator="student")
        causes = rng.sample(s["causes"], rng.randint(1, len(s["causes"])))
        entries = [{"cause": c["label"], "likelihood": rng.choice(["unlikely", "possible", "likely", "most_likely"]),
                    "rationale": "from the answers"} for c in causes]
        if rng.random() < 0.5:
            entries.append({"cause": "stress", "likelihood": "possible", "rationale": "a guess"})
        log.add(rng.randint(60, 200), "diagnosis_submitted", form={"entries": entries})
        log.add(1, "solution_shown")
        log.add(1, "phase_advanced", to=PHASES[pi + 1] if pi + 1 < len(PHASES) else None)
        for idx in range(len(entries)):
            grades.append((student, phase, idx, rng.choice(["full", "partial", "none"])))

    # utterance ids in chat order
    utterances = []
    for speaker, lines in chat:
        for line in lines:
            utterances.append((f"u{len(utterances) + 1:04d}", speaker, line))
    return {"sid": sid, "student": student, "condition": condition, "events": log.events,
            "utterances": utterances, "grades": grades}


def annotate(t, rng):
    rows = []
    for uid, speaker, _ in t["utterances"]:
        if speaker == "pharmacist":
            mech = rng.choices(MECHANISMS, weights=WEIGHTS[t["condition"]])[0]
            strategy = rng.choice(STRATEGIES) if rng.random() < 0.6 else ""
            rows.append({"mechanism": mech, "strategy": strategy, "icap": "", "correctness": ""})
        else:
            rows.append({"mechanism": "", "strategy": "", "icap": rng.choices(ICAP, weights=[4, 4, 2])[0],
                         "correctness": rng.choices(CORRECTNESS, weights=[8, 2])[0]})
    out = []
    for (uid, speaker, _), labels in zip(t["utterances"], rows):
        out.append({"transcript_id": t["sid"], "utterance_id": uid, "rater_id": "r1", **labels})
        if rng.random() < 0.3:
            second = dict(labels)
            if rng.random() < 0.25:
                if speaker == "pharmacist":
                    second["mechanism"] = rng.choice(MECHANISMS)
                else:
                    second["icap"] = rng.choice(ICAP)
                    second["correctness"] = rng.choice(CORRECTNESS)
            out.append({"transcript_id": t["sid"], "utterance_id": uid, "rater_id": "r2", **second})
    return out


def category(row, dim):
    if dim == "family":
        return FAMILY.get(row["mechanism"]) or None
    return row[dim] or None


def welch(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    vx, vy = x.var(ddof=1) / len(x), y.var(ddof=1) / len(y)
    if vx + vy == 0:
        diff = x.mean() - y.mean()
        return (0.0 if diff == 0 else math.copysign(math.inf, diff)), len(x) + len(y) - 2.0, (1.0 if diff == 0 else 0.0)
    r = stats.ttest_ind(x, y, equal_var=False)
    df = (vx + vy) ** 2 / (vx ** 2 / (len(x) - 1) + vy ** 2 / (len(y) - 1))
    return float(r.statistic), float(df), float(r.pvalue)


def cohens_d(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    pooled = math.sqrt(((len(x) - 1) * x.var(ddof=1) + (len(y) - 1) * y.var(ddof=1)) / (len(x) + len(y) - 2))
    return None if pooled == 0 else float((x.mean() - y.mean()) / pooled)


def compare_rows(group, frame, measures, m):
    rows = []
    for measure in measures:
        s = frame[frame.condition == "structuring_heavy"][measure].to_numpy()
        p = frame[frame.condition == "problematizing_heavy"][measure].to_numpy()
        t, df, pv = welch(s, p)
        rows.append({"group": group, "measure": measure,
                     "n_s": len(s), "mean_s": float(s.mean()), "se_s": float(stats.sem(s)),
                     "n_p": len(p), "mean_p": float(p.mean()), "se_p": float(stats.sem(p)),
                     "t": t if math.isfinite(t) else None, "t_infinite": not math.isfinite(t),
                     "df": df, "p": pv, "p_adjusted": min(1.0, m * pv), "cohens_d": cohens_d(s, p)})
    return rows


def main():
    rng = random.Random(20260309)
    scen = load_scenarios()
    transcripts = [build_transcript(i, rng, scen) for i in range(10)]
    annotations = [a for t in transcripts for a in annotate(t, rng)]

    for t in transcripts:
        with open(OUT / "logs" / f"{t['sid']}.jsonl", "w") as f:
            for e in t["events"]:
                f.write(json.dumps(e, separators=(",", ":")) + "\n")
    fields = ["transcript_id", "utterance_id", "rater_id", "mechanism", "strategy", "icap", "correctness"]
    with open(OUT / "annotations.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(annotations)
    with open(OUT / "grades.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["student_id", "phase", "entry_index", "grade"])
        for t in transcripts:
            w.writerows(t["grades"])

    # ---- reference tabulation ----
    ann = pd.DataFrame(annotations)
    meta = pd.DataFrame([{"transcript_id": t["sid"], "student_id": t["student"], "condition": t["condition"]}
                         for t in transcripts])
    utt = pd.DataFrame([{"transcript_id": t["sid"], "utterance_id": u, "speaker": s}
                        for t in transcripts for u, s, _ in t["utterances"]])
    primary = ann[ann.rater_id == "r1"].merge(meta, on="transcript_id")

    distributions = {}
    dist_rows = []
    for dim, cats in CATEGORIES.items():
        lab = primary.assign(cat=primary.apply(lambda r: category(r, dim), axis=1)).dropna(subset=["cat"])
        counts = lab.groupby(["student_id", "condition", "cat"]).size().unstack(fill_value=0)
        counts = counts.reindex(columns=cats, fill_value=0)
        pct = counts.div(counts.sum(axis=1), axis=0) * 100
        for (student, condition), row in pct.iterrows():
            distributions.setdefault(student, {})[dim] = {c: float(row[c]) for c in cats}
            dist_rows.append({"student_id": student, "condition": condition, "dimension": dim,
                              **{c: float(row[c]) for c in cats}})

    kappa = {}
    both = ann[ann.rater_id == "r1"].merge(ann[ann.rater_id == "r2"], on=["transcript_id", "utterance_id"],
                                           suffixes=("_a", "_b"))
    for dim in CATEGORIES:
        a = both.apply(lambda r: category({k[:-2]: r[k] for k in r.index if k.endswith("_a")}, dim), axis=1)
        b = both.apply(lambda r: category({k[:-2]: r[k] for k in r.index if k.endswith("_b")}, dim), axis=1)
        mask = a.notna() & b.notna()
        kappa[dim] = {"n": int(mask.sum()), "kappa": float(cohen_kappa_score(a[mask], b[mask]))}

    report = []
    dist_frame = pd.DataFrame(dist_rows)
    for dim, cats in CATEGORIES.items():
        report += compare_rows(dim, dist_frame[dist_frame.dimension == dim], cats, len(cats))

    grades = {}
    for t in transcripts:
        for student, phase, idx, mark in t["grades"]:
            grades[(student, phase, idx)] = mark
    scores = {}
    score_rows = []
    for t in transcripts:
        sc = score_log(t["events"], grades, scen)
        scores[t["student"]] = sc
        for phase, v in sc.items():
            score_rows.append({"student_id": t["student"], "condition": t["condition"], "phase": phase,
                               **{k: v[k] for k in ["checklist_pct", "interpersonal_pct", "interpretation_pct"]}})
    score_frame = pd.DataFrame(score_rows)
    for phase in PHASES:
        report += compare_rows(f"scores_{phase}", score_frame[score_frame.phase == phase],
                               ["checklist_pct", "interpersonal_pct", "interpretation_pct"], 3)

    reference = {
        "utterances": {"pharmacist": int((utt.speaker == "pharmacist").sum()),
                       "student": int((utt.speaker == "student").sum())},
        "annotations": {"r1": int((ann.rater_id == "r1").sum()), "r2": int((ann.rater_id == "r2").sum())},
        "distributions": distributions,
        "kappa_r1_r2": kappa,
        "scores": scores,
        "report": report,
    }
    with open(OUT / "reference.json", "w") as f:
        json.dump(reference, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
