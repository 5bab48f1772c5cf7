#!/usr/bin/env python3
"""Writes the hand-built touch-log fixtures under data/fixtures/."""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures"

ROW0, ROW1, ROW2 = "qwertyuiop", "asdfghjkl", "zxcvbnm"


def center(c):
    if c in ROW0:
        return 0.05 + 0.1 * ROW0.index(c), 0.125
    if c in ROW1:
        return 0.10 + 0.1 * ROW1.index(c), 0.375
    return 0.20 + 0.1 * ROW2.index(c), 0.625


def ev(kind, t, x, y, session, word_id=0, intent=None, user=None):
    e = {"session": session, "word_id": word_id, "kind": kind, "t": t, "x": x, "y": y, "intent": intent}
    if user is not None:
        e["user"] = user
    return e


def contact(events, t, pos, hold, intent, session, word_id=0, user=None):
    x, y = pos
    events.append(ev("down", t, x, y, session, word_id, intent, user))
    events.append(ev("move", t + hold / 2, x, y, session, word_id, intent, user))
    events.append(ev("up", t + hold, x, y, session, word_id, intent, user))


def eligible():
    s = "fixture"
    events = []
    # Hand placement: eight fingers land together, lift at t=80.
    rest = [center(c) for c in "asdfjkl"] + [(0.97, 0.375)]
    for i, (x, y) in enumerate(rest):
        events.append(ev("down", float(i), x, y, s, intent=False))
    for x, y in rest:
        events.append(ev("up", 80.0, x, y, s, intent=False))

    # (onset, landing, intent) per contact; co-contacts precede the reach.
    plan = [
        (290.0, (0.30, 0.375), False), (300.0, center("e"), True),
        (535.0, (0.79, 0.38), False), (550.0, (0.84, 0.36), True),  # reach for 'l' lands nearer 'k'
        (800.0, center("i"), True),
        (1050.0, center("g"), True),
        (1300.0, center("i"), True),
        (1540.0, (0.40, 0.38), False), (1550.0, center("b"), True),
        (1800.0, center("l"), True),
        (2040.0, (0.20, 0.38), False), (2050.0, center("e"), True),
    ]
    # Interleave by time: co-contact down, reach down, co-contact up, reach up.
    timed = []
    for onset, (x, y), intent in plan:
        hold = 60.0 if not intent else 70.0
        timed.append((onset, ev("down", onset, x, y, s, intent=intent)))
        timed.append((onset + hold / 2, ev("move", onset + hold / 2, x, y, s, intent=intent)))
        timed.append((onset + hold, ev("up", onset + hold, x, y, s, intent=intent)))
    timed.sort(key=lambda p: p[0])
    events += [e for _, e in timed]
    return events


# Known intentional inter-onset gaps per user (ms).
INTERVAL_GAPS = {
    "u1": [50, 150, 90, 300, 240, 260, 120, 95],
    "u2": [200, 210, 80, 400, 230, 250, 180, 310, 60, 220],
}


def intervals():
    events = []
    for user, gaps in INTERVAL_GAPS.items():
        t = 1000.0
        session = user + "-s1"
        onsets = [t]
        for g in gaps:
            t += g
            onsets.append(t)
        merged = []
        for i, onset in enumerate(onsets):
            x, y = center("asdfghjkl"[i % 9])
            merged.append((onset, ev("down", onset, x, y, session, 0, True, user)))
            merged.append((onset + 30, ev("up", onset + 30, x, y, session, 0, True, user)))
            # An incidental resting contact that must not count as a gap.
            if i % 3 == 0:
                merged.append((onset + 5, ev("down", onset + 5, 0.5, 0.875, session, 0, False, user)))
                merged.append((onset + 20, ev("up", onset + 20, 0.5, 0.875, session, 0, False, user)))
        merged.sort(key=lambda p: p[0])
        events += [e for _, e in merged]
    return events


def write_jsonl(path, events):
    with open(path, "w") as f:
        for e in events:
            f.write(json.dumps(e, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    write_jsonl(OUT / "eligible.jsonl", eligible())
    write_jsonl(OUT / "intervals.jsonl", intervals())
    below = sum(g <= 100 for gs in INTERVAL_GAPS.values() for g in gs)
    total = sum(len(gs) for gs in INTERVAL_GAPS.values())
    print(f"interval fixture: {below}/{total} gaps <= 100 ms")
