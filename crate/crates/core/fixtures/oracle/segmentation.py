"""Builds segmentation/transcript.jsonl (50 chat messages) and tabulates every
surface indicator into segmentation/expected.json with an independent
regex-based implementation.

Usage: python3 segmentation.py
"""
import json
import re
from datetime import datetime, timedelta, timezone
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "segmentation"
T0 = datetime(2026, 3, 2, 10, 0, 0, tzinfo=timezone.utc)

# (student message, pharmacist reply) pairs per discussion
DISCUSSIONS = [
    [
        ("Hello. How old is the baby?", "Good question. What else would you like to know?"),
        ("Is the diarrhea watery?", "Think about the checklist. Which categories are still open?"),
        ("Intensity... and duration!", "Right! Ask about both."),
        ("Ok", "..."),
        ("What about allergies? And medication?", "Those are important too. Keep going."),
        ("Thanks.", "You are welcome!"),
        ("The dose is 2.5 ml. Is that right?", "Check the compendium. It lists the dosage by weight."),
        ("Alright.\nI will check.", "Good."),
    ],
    [
        ("Could it be teething?", "Why do you think so? What supports it?"),
        ("He chews on everything. His first tooth is coming.", "That is one possible cause. Are there others?"),
        ("Maybe the new porridge?!", "Interesting. When was it introduced?"),
        ("Three days ago.", "And when did the diarrhea start?"),
        ("Yesterday. So the timing fits.", "Good reasoning. How likely is it compared to teething?"),
        ("More likely, I think", "Explain your decision."),
        ("The timing matches better...", "What about an infection?"),
        ("No fever. No sick contacts.", "So how would you rate it?"),
        ("Unlikely!", "Well argued. What about the mother?"),
    ],
    [
        ("She takes no medication.", "Then what follows for maternal medication?"),
        ("It is unlikely. ... Right?", "Decide for yourself. What is your conclusion?"),
        ("Porridge is most likely. Teething is possible.", "Summarize your diagnosis in the form."),
        ("Will do. Thank you!", "Good luck."),
        ("?!", "Is something unclear?"),
        ("No, all clear. Bye. ", "Bye!"),
        ("One more thing: should he drink more?", "Yes. Fluids matter with diarrhea."),
        ("Got it.", "Great."),
    ],
]
assert sum(len(d) for d in DISCUSSIONS) * 2 == 50

ASKS = [("father", "symptoms"), ("father", "age"), ("father", "diet")]


def iso(t):
    s = t.strftime("%Y-%m-%dT%H:%M:%S")
    return s + "Z"


def build_events():
    events = []
    t = [T0]

    def at(sec):
        t[0] = t[0] + timedelta(seconds=sec)
        return iso(t[0])

    events.append({"v": 1, "timestamp": iso(T0), "type": "session_started", "session_id": "seg-1",
                   "student_id": "student-050", "condition": "problematizing_heavy",
                   "scenarios": {"A": "scenario_A", "B": "scenario_B", "C1": "scenario_C1", "C2": "scenario_C2"}})
    answers = {q["topic"]: q["answer"] for q in json.loads(
        (OUT.parent / "scenarios/A.json").read_text())["personas"][0]["qa_entries"]}
    gaps = [11, 23, 9, 31, 17, 5, 42, 13, 8, 27]
    g = 0
    for d_index, pairs in enumerate(DISCUSSIONS):
        persona, topic = ASKS[d_index]
        events.append({"v": 1, "timestamp": at(20), "type": "client_question_asked", "persona": persona, "topic": topic})
        events.append({"v": 1, "timestamp": at(4), "type": "client_answered", "text": answers[topic]})
        events.append({"v": 1, "timestamp": at(10), "type": "module_switched", "from": "client_inquiry",
                       "to": "pedagogical", "initiator": "student"})
        for student, reply in pairs:
            events.append({"v": 1, "timestamp": at(gaps[g % len(gaps)]), "type": "student_message", "text": student})
            g += 1
            events.append({"v": 1, "timestamp": at(gaps[g % len(gaps)] // 2 + 1), "type": "pharmacist_message", "text": reply})
            g += 1
        if d_index < 2:
            events.append({"v": 1, "timestamp": at(15), "type": "module_switched", "from": "pedagogical",
                           "to": "client_inquiry", "initiator": "student"})
    # the last discussion is still open when the log ends
    events.append({"v": 1, "timestamp": at(12), "type": "resource_opened", "resource": "lecture_notes"})
    return events


def sentences(text):
    parts = re.split(r"(?<=[.!?])(?=\s|$)", text)
    return [p.strip() for p in parts if has_token(p)]


def tokens(text):
    return [w for w in text.split() if any(c.isalnum() for c in w)]


def has_token(text):
    return len(tokens(text)) > 0


def ts(s):
    return datetime.strptime(s, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def tabulate(events):
    discussions = []
    cur = None
    for e in events:
        if e["type"] == "module_switched":
            if e["from"] == "pedagogical" and cur is not None:
                cur["end"] = ts(e["timestamp"]); discussions.append(cur); cur = None
            if e["to"] == "pedagogical":
                cur = {"start": ts(e["timestamp"]), "msgs": []}
        elif e["type"] in ("student_message", "pharmacist_message"):
            cur["msgs"].append(("student" if e["type"] == "student_message" else "pharmacist", e["text"]))
    if cur is not None:
        cur["end"] = ts(events[-1]["timestamp"]); discussions.append(cur)

    per = []
    for d in discussions:
        utts = [(spk, s) for spk, text in d["msgs"] for s in sentences(text)]
        turns = []
        for spk, s in utts:
            if turns and turns[-1][0] == spk:
                turns[-1][1].append(s)
            else:
                turns.append((spk, [s]))
        rec = {"duration_s": (d["end"] - d["start"]).total_seconds(), "turns": len(turns)}
        for spk in ("student", "pharmacist"):
            rec[f"{spk}_utterances"] = sum(1 for u in utts if u[0] == spk)
            rec[f"{spk}_turns"] = sum(1 for tr in turns if tr[0] == spk)
            rec[f"{spk}_words"] = sum(len(tokens(u[1])) for u in utts if u[0] == spk)
        rec["utterances"] = [[spk, s] for spk, s in utts]
        per.append(rec)

    def tot(k):
        return sum(p[k] for p in per)

    def div(a, b):
        return None if b == 0 else a / b

    def mean(xs):
        xs = list(xs)
        return None if not xs else sum(xs) / len(xs)

    su, pu = tot("student_utterances"), tot("pharmacist_utterances")
    st, pt = tot("student_turns"), tot("pharmacist_turns")
    sw, pw = tot("student_words"), tot("pharmacist_words")
    switches = [e for e in events if e["type"] == "module_switched"]
    c2p = [e for e in switches if e["from"] == "client_inquiry" and e["to"] == "pedagogical"]
    p2c = [e for e in switches if e["from"] == "pedagogical" and e["to"] == "client_inquiry"]
    span_ped = sum(p["duration_s"] for p in per)
    span_ses = (ts(events[-1]["timestamp"]) - ts(events[0]["timestamp"])).total_seconds()

    def rate(n, span):
        return None if span < 1 else n / (span / 60)

    named = {
        "switches_to_pharmacist": sum(1 for e in switches if e["to"] == "pedagogical"),
        "switches_to_client": sum(1 for e in switches if e["to"] == "client_inquiry"),
        "voluntary_ratio_c2p": div(sum(1 for e in c2p if e["initiator"] == "student"), len(c2p)),
        "voluntary_ratio_p2c": div(sum(1 for e in p2c if e["initiator"] == "student"), len(p2c)),
        "discussions": len(per),
        "student_utterances": su, "pharmacist_utterances": pu,
        "student_turns": st, "pharmacist_turns": pt,
        "student_words": sw, "pharmacist_words": pw,
        "mean_discussion_duration_s": mean(p["duration_s"] for p in per),
        "mean_discussion_student_utterances": mean(p["student_utterances"] for p in per),
        "mean_discussion_pharmacist_utterances": mean(p["pharmacist_utterances"] for p in per),
        "mean_discussion_student_words": mean(p["student_words"] for p in per),
        "mean_discussion_pharmacist_words": mean(p["pharmacist_words"] for p in per),
        "mean_discussion_student_turns": mean(p["student_turns"] for p in per),
        "mean_discussion_pharmacist_turns": mean(p["pharmacist_turns"] for p in per),
        "mean_discussion_turns": mean(p["turns"] for p in per),
        "student_words_per_turn": div(sw, st), "pharmacist_words_per_turn": div(pw, pt),
        "student_words_per_utterance": div(sw, su), "pharmacist_words_per_utterance": div(pw, pu),
        "utterance_ratio": div(su, pu), "turn_ratio": div(st, pt),
        "mean_discussion_utterance_ratio": mean(
            x for x in (div(p["student_utterances"], p["pharmacist_utterances"]) for p in per) if x is not None),
        "mean_discussion_turn_ratio": mean(
            x for x in (div(p["student_turns"], p["pharmacist_turns"]) for p in per) if x is not None),
        "pharmacist_span_s": span_ped,
        "pharmacist_span_utterances_per_min": rate(su + pu, span_ped),
        "pharmacist_span_student_utterances_per_min": rate(su, span_ped),
        "pharmacist_span_pharmacist_utterances_per_min": rate(pu, span_ped),
        "pharmacist_span_turns_per_min": rate(st + pt, span_ped),
        "session_span_s": span_ses,
        "session_utterances_per_min": rate(su + pu, span_ses),
        "session_student_utterances_per_min": rate(su, span_ses),
        "session_pharmacist_utterances_per_min": rate(pu, span_ses),
        "session_turns_per_min": rate(st + pt, span_ses),
    }
    return {"messages": sum(len(d["msgs"]) for d in discussions), "indicators": named, "discussions": per}


def main():
    events = build_events()
    OUT.mkdir(exist_ok=True)
    with open(OUT / "transcript.jsonl", "w") as f:
        for e in events:
            f.write(json.dumps(e, ensure_ascii=False, separators=(",", ":")) + "\n")
    with open(OUT / "expected.json", "w") as f:
        json.dump(tabulate(events), f, indent=2, ensure_ascii=False)
        f.write("\n")


if __name__ == "__main__":
    main()
