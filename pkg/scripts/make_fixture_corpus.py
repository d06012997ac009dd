"""Regenerate src/duet/fixtures/chorales.jsonl from the hand-written voice lines below.

Each voice is a list of (midi_pitch, duration_in_sixteenths) runs summing to 128
steps (8 measures of 4/4). Committed output is the source of truth; rerun only
when editing the lines.
"""
import json
from pathlib import Path

# fmt: off
CHORALES = {
    # C major
    "fixture-01": {
        "S": [(72, 4), (71, 4), (72, 4), (74, 4), (76, 8), (74, 4), (72, 4),
              (72, 4), (74, 2), (76, 2), (77, 4), (76, 4), (79, 8), (77, 4), (76, 4),
              (76, 4), (72, 4), (69, 4), (72, 4), (74, 4), (76, 2), (74, 2), (72, 4), (71, 4),
              (72, 12), (71, 4), (72, 16)],
        "A": [(67, 8), (67, 4), (69, 4), (67, 8), (67, 8),
              (67, 4), (69, 4), (69, 8), (72, 8), (69, 4), (67, 4),
              (67, 4), (64, 4), (65, 4), (67, 4), (65, 8), (67, 4), (67, 4),
              (67, 8), (66, 4), (67, 4), (64, 16)],
        "T": [(64, 4), (62, 4), (64, 8), (60, 4), (62, 2), (64, 2), (65, 4), (64, 4),
              (64, 4), (62, 4), (60, 4), (64, 4), (62, 4), (64, 2), (62, 2), (60, 4), (62, 4),
              (60, 4), (60, 4), (60, 8), (62, 8), (64, 4), (62, 4),
              (64, 4), (62, 8), (62, 4), (60, 16)],
        "B": [(48, 8), (45, 4), (47, 4), (48, 8), (52, 4), (53, 4),
              (55, 8), (53, 4), (52, 4), (48, 8), (50, 4), (52, 4),
              (53, 4), (55, 4), (53, 4), (52, 4), (50, 8), (43, 8),
              (48, 8), (43, 4), (48, 4), (48, 16)],
    },
    # G major
    "fixture-02": {
        "S": [(74, 4), (74, 4), (71, 4), (74, 4), (76, 4), (74, 4), (72, 8),
              (71, 4), (69, 4), (71, 2), (72, 2), (74, 4), (78, 8), (79, 8),
              (79, 4), (76, 4), (74, 4), (71, 4), (72, 4), (71, 2), (69, 2), (67, 8),
              (69, 4), (71, 4), (69, 8), (67, 16)],
        "A": [(67, 8), (67, 8), (67, 4), (66, 4), (67, 8),
              (67, 4), (66, 4), (67, 8), (69, 8), (71, 8),
              (71, 4), (67, 4), (67, 8), (64, 4), (66, 4), (64, 8),
              (66, 8), (66, 8), (62, 16)],
        "T": [(62, 4), (64, 2), (62, 2), (62, 4), (62, 4), (62, 8), (64, 4), (65, 4),
              (62, 8), (62, 4), (62, 4), (62, 2), (61, 2), (62, 4), (62, 8),
              (62, 4), (64, 4), (62, 8), (60, 4), (59, 4), (60, 8),
              (60, 4), (62, 2), (60, 2), (62, 8), (59, 16)],
        "B": [(55, 8), (55, 4), (50, 4), (48, 4), (50, 4), (48, 8),
              (43, 8), (50, 8), (50, 4), (52, 4), (55, 4), (53, 4),
              (52, 4), (48, 4), (50, 8), (45, 4), (47, 4), (48, 8),
              (50, 8), (50, 8), (43, 16)],
    },
    # A minor
    "fixture-03": {
        "S": [(69, 4), (71, 4), (72, 4), (74, 4), (76, 8), (74, 4), (76, 4),
              (77, 4), (76, 4), (74, 4), (72, 4), (71, 8), (69, 4), (71, 4),
              (72, 4), (74, 2), (72, 2), (71, 4), (69, 4), (68, 8), (69, 4), (71, 4),
              (72, 4), (71, 4), (69, 12), (68, 4), (69, 8)],
        "A": [(64, 8), (64, 4), (65, 4), (67, 8), (67, 8),
              (69, 4), (67, 4), (65, 4), (64, 4), (64, 8), (64, 8),
              (64, 4), (65, 4), (64, 8), (64, 8), (64, 8),
              (64, 4), (62, 4), (64, 4), (61, 4), (64, 8), (60, 8)],
        "T": [(60, 4), (59, 4), (57, 4), (59, 4), (60, 8), (59, 4), (60, 4),
              (60, 8), (57, 4), (57, 4), (56, 8), (57, 4), (56, 4),
              (57, 4), (57, 4), (56, 4), (57, 4), (59, 2), (57, 2), (56, 2), (57, 2), (57, 4), (56, 4),
              (57, 4), (56, 4), (57, 8), (52, 8), (57, 8)],
        "B": [(45, 8), (45, 4), (47, 4), (48, 4), (50, 4), (52, 4), (48, 4),
              (53, 4), (48, 4), (50, 4), (52, 4), (44, 8), (45, 8),
              (48, 4), (47, 4), (44, 4), (45, 4), (52, 8), (52, 4), (50, 4),
              (48, 4), (47, 4), (45, 8), (44, 8), (45, 8)],
    },
    # F major
    "fixture-04": {
        "S": [(69, 4), (70, 4), (72, 4), (69, 4), (67, 2), (69, 2), (70, 4), (69, 4), (67, 4),
              (65, 4), (67, 4), (69, 4), (70, 4), (72, 8), (74, 4), (72, 4),
              (70, 4), (69, 4), (67, 4), (70, 4), (69, 4), (67, 2), (65, 2), (64, 8),
              (65, 4), (67, 4), (65, 12), (64, 4), (65, 8)],
        "A": [(65, 8), (65, 4), (65, 4), (64, 8), (65, 4), (64, 4),
              (62, 4), (64, 4), (65, 8), (65, 8), (67, 8),
              (65, 4), (65, 4), (64, 4), (65, 4), (65, 8), (60, 8),
              (62, 4), (64, 4), (60, 16), (60, 8)],
        "T": [(60, 4), (62, 4), (60, 4), (60, 4), (60, 8), (60, 4), (60, 4),
              (57, 4), (58, 4), (60, 4), (62, 4), (60, 8), (58, 4), (57, 4),
              (58, 4), (60, 2), (58, 2), (57, 4), (58, 4), (60, 8), (57, 2), (55, 2), (57, 4),
              (58, 4), (58, 4), (57, 16), (57, 8)],
        "B": [(53, 8), (53, 4), (48, 4), (48, 8), (50, 4), (53, 4),
              (50, 4), (48, 4), (46, 4), (43, 4), (48, 8), (46, 4), (45, 4),
              (46, 8), (50, 4), (46, 4), (48, 8), (45, 4), (48, 4),
              (46, 4), (48, 8), (41, 16), (53, 4)],
    },
}
# fmt: on


def main():
    out = Path(__file__).resolve().parents[1] / "src" / "duet" / "fixtures" / "chorales.jsonl"
    lines = []
    for cid, voices in CHORALES.items():
        parts = []
        for name in ("S", "A", "T", "B"):
            runs = voices[name]
            total = sum(d for _, d in runs)
            assert total == 128, f"{cid}/{name}: {total} steps, want 128"
            notes, t = [], 0
            for pitch, dur in runs:
                assert 36 <= pitch <= 81, f"{cid}/{name}: pitch {pitch}"
                notes.append({"pitch": pitch, "onset": t, "dur": dur})
                t += dur
            parts.append(notes)
        lines.append(json.dumps({"id": cid, "parts": parts}))
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} chorales -> {out}")


if __name__ == "__main__":
    main()
