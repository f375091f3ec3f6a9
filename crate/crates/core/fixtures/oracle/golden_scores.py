"""Brute-force scorer for golden/session.jsonl, written independently of the Rust code.

Usage: python3 golden_scores.py > ../golden/scores.json
"""
import csv
import json
from fractions import Fraction
from pathlib import Path

HERE = Path(__file__).resolve().parent.parent
PHASES = ["A", "B", "C1", "C2"]


def norm(s):
    s = "".join(c if (c.isalnum() or c.isspace()) else " " for c in s.lower())
    return " ".join(s.split())


def load_scenarios():
    return {p: json.loads((HERE / f"scenarios/{p}.json").read_text()) for p in PHASES}


def score_log(events, grades, scen):
    """grades: {(student_id, phase, entry_index): mark}"""
    student = events[0]["student_id"]
    points = {"full": Fraction(1), "partial": Fraction(1, 2), "none": Fraction(0)}

    # split into phases by phase_advanced markers
    chunks, cur, phase = {}, [], "A"
    for e in events:
        cur.append(e)
        if e["type"] == "phase_advanced":
            chunks[phase] = cur
            phase, cur = e["to"], []
    if phase is not None:
        chunks[phase] = cur

    out = {}
    for phase, evs in chunks.items():
        s = scen[phase]
        checklist = set()
        inter = set()
        for e in evs:
            if e["type"] != "client_question_asked":
                continue
            persona = next(p for p in s["personas"] if p["id"] == e["persona"])
            qa = next(q for q in persona["qa_entries"] if q["topic"] == e["topic"])
            if qa.get("checklist_item") in {c["id"] for c in s["checklist_items"]}:
                checklist.add(qa["checklist_item"])
            if e["persona"] == s["interpersonal_target"] and qa.get("interpersonal_category"):
                inter.add(qa["interpersonal_category"])
        forms = [e["form"] for e in evs if e["type"] == "diagnosis_submitted"]
        best = {}
        if forms:
            for i, entry in enumerate(forms[-1]["entries"]):
                g = points[grades.get((student, phase, i), "none")]
                text = entry["cause"]
                hit = [c["id"] for c in s["causes"] if c["id"] == text.strip() or norm(c["label"]) == norm(text)]
                if not hit:
                    hit = [c["id"] for c in s["causes"]
                           if any(norm(syn) and norm(syn) in norm(text) for syn in c["detection_synonyms"])]
                for c in hit:
                    best[c] = max(best.get(c, g), g)
        k = len(s["causes"])
        ident = min(len(best), k)
        assess = min(sum(best.values(), Fraction(0)), k)
        n_check = len(s["checklist_items"])
        n_inter = s.get("interpersonal_category_count", 3)
        out[phase] = {
            "checklist_fulfilled": len(checklist),
            "checklist_total": n_check,
            "interpersonal_fulfilled": min(len(inter), n_inter),
            "identification": ident,
            "assessment_half_points": int(assess * 2),
            "checklist_pct": float(Fraction(100 * len(checklist), n_check)),
            "interpersonal_pct": float(Fraction(100 * min(len(inter), n_inter), n_inter)),
            "interpretation_pct": float(Fraction(100) * (ident + assess) / (2 * k)),
        }
    return out


def read_grades(path):
    grades = {}
    with open(path) as f:
        for row in csv.DictReader(f):
            grades[(row["student_id"], row["phase"], int(row["entry_index"]))] = row["grade"]
    return grades


def main():
    events = [json.loads(l) for l in (HERE / "golden/session.jsonl").read_text().splitlines() if l.strip()]
    out = score_log(events, read_grades(HERE / "golden/grades.csv"), load_scenarios())
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
