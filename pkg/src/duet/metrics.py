"""Objective evaluation: PC/bar, PI, IOI, pitch-class and note-length
histograms, 1-D earth mover's distance, and per-measure evolution curves.

All metrics look at one part (a note list); duet-level reports run them on the
machine parts only, since the human part is shared across systems.  Intervals
and inter-onset gaps are measured between successive pitched onsets, so rests
never break a pair.  The EMD ground distance is the linear bin-index distance
for both histogram families (a cyclic pitch-class distance would be a
reasonable alternative; the linear one keeps the two families consistent).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Duet
from .score import STEPS_PER_MEASURE, Note, decode_lenient, part_length

NLH_CLASSES = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32)  # sixteenth steps; +1 "other" bin
SCHEMA_VERSION = 1


class MetricError(ValueError):
    pass


def _onsets(part: list[Note]) -> list[Note]:
    return [n for n in part if n.pitch is not None]


def pitch_count_per_bar(part: list[Note], n_bars: int | None = None) -> float:
    """Mean count of distinct pitches per 16-step bar; silent bars count 0."""
    if n_bars is None:
        n_bars = -(-part_length(part) // STEPS_PER_MEASURE)
    if n_bars == 0:
        return 0.0
    per_bar: dict[int, set[int]] = {}
    for n in _onsets(part):
        per_bar.setdefault(n.onset // STEPS_PER_MEASURE, set()).add(n.pitch)
    return sum(len(s) for s in per_bar.values()) / n_bars


def avg_pitch_interval(part: list[Note]) -> float:
    """Mean |pitch difference| in semitones over successive pitched onsets."""
    onsets = _onsets(part)
    if len(onsets) < 2:
        return 0.0
    return float(np.mean([abs(b.pitch - a.pitch) for a, b in zip(onsets, onsets[1:])]))


def avg_ioi(part: list[Note]) -> float:
    """Mean onset-to-onset gap in sixteenth steps over successive pitched onsets."""
    onsets = _onsets(part)
    if len(onsets) < 2:
        return 0.0
    return float(np.mean([b.onset - a.onset for a, b in zip(onsets, onsets[1:])]))


def histograms(part: list[Note]) -> tuple[np.ndarray, np.ndarray]:
    """(PCH[12], NLH[11]): pitch classes weighted by onset count, duration classes.

    Both normalized to sum 1; an empty part gives all-zero histograms.
    """
    pch = np.zeros(12, dtype=np.float64)
    nlh = np.zeros(len(NLH_CLASSES) + 1, dtype=np.float64)
    for n in _onsets(part):
        pch[n.pitch % 12] += 1.0
        nlh[NLH_CLASSES.index(n.dur) if n.dur in NLH_CLASSES else len(NLH_CLASSES)] += 1.0
    if pch.sum() > 0:
        pch /= pch.sum()
    if nlh.sum() > 0:
        nlh /= nlh.sum()
    return pch, nlh


def emd_1d(p: np.ndarray, q: np.ndarray) -> float:
    """Minimal transport cost between equal-length normalized histograms.

    Ground distance |i - j| over bin indices; for the 1-D case this is the
    prefix-sum identity sum |CDF_p - CDF_q|.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise MetricError(f"histogram shapes differ: {p.shape} vs {q.shape}")
    for h in (p, q):
        if h.sum() > 0 and abs(h.sum() - 1.0) > 1e-6:
            raise MetricError("histograms must be normalized (or empty)")
    return float(np.abs(np.cumsum(p - q)).sum())


METRICS = {
    "pc_per_bar": pitch_count_per_bar,
    "pi": avg_pitch_interval,
    "ioi": avg_ioi,
}


@dataclass
class EvolutionCurve:
    """Metric values over a one-sided 4-measure window, per measure index."""

    metric: str
    indices: list[int]
    values: list[float]
    pieces: list[int]  # how many parts were long enough at each index


def _window_notes(part: list[Note], measure_index: int, window_measures: int = 4) -> list[Note]:
    lo = (measure_index - 1) * STEPS_PER_MEASURE
    hi = lo + window_measures * STEPS_PER_MEASURE
    return [Note(n.pitch, n.onset - lo, n.dur) for n in part if lo <= n.onset < hi]


def evolution(parts: list[list[Note]], metric: str, max_measure: int = 20,
              window_measures: int = 4) -> EvolutionCurve:
    """Average `metric` over measures m..m+3 across parts long enough to contain them."""
    if metric not in METRICS:
        raise MetricError(f"unknown metric {metric!r}; have {sorted(METRICS)}")
    fn = METRICS[metric]
    indices, values, counts = [], [], []
    for m in range(1, max_measure + 1):
        needed_measures = m + window_measures - 1
        vals = []
        for part in parts:
            if -(-part_length(part) // STEPS_PER_MEASURE) >= needed_measures:
                window = _window_notes(part, m, window_measures)
                if metric == "pc_per_bar":
                    vals.append(fn(window, n_bars=window_measures))
                else:
                    vals.append(fn(window))
        if vals:
            indices.append(m)
            values.append(float(np.mean(vals)))
            counts.append(len(vals))
    return EvolutionCurve(metric=metric, indices=indices, values=values, pieces=counts)


@dataclass
class MetricReport:
    """Dataset absolutes, per-system signed differences, and histogram EMDs."""

    dataset: dict[str, float]
    systems: dict[str, dict] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "dataset": self.dataset,
                "systems": self.systems}


def _aggregate_histograms(parts: list[list[Note]]) -> tuple[np.ndarray, np.ndarray]:
    pch = np.zeros(12, dtype=np.float64)
    nlh = np.zeros(len(NLH_CLASSES) + 1, dtype=np.float64)
    for part in parts:
        for n in _onsets(part):
            pch[n.pitch % 12] += 1.0
            nlh[NLH_CLASSES.index(n.dur) if n.dur in NLH_CLASSES else len(NLH_CLASSES)] += 1.0
    if pch.sum() > 0:
        pch /= pch.sum()
    if nlh.sum() > 0:
        nlh /= nlh.sum()
    return pch, nlh


def part_means(parts: list[list[Note]]) -> dict[str, float]:
    return {name: float(np.mean([fn(p) for p in parts])) if parts else 0.0
            for name, fn in METRICS.items()}


def report(generated: dict[str, list[Duet]], reference_parts: list[list[Note]]) -> MetricReport:
    """Table of dataset absolutes plus per-system differences and EMDs.

    `generated` maps a system name (e.g. "mle", "rl") to its duets; metrics
    run on machine parts decoded leniently, so raw sampled sequences score too.
    """
    ref_means = part_means(reference_parts)
    ref_pch, ref_nlh = _aggregate_histograms(reference_parts)
    rep = MetricReport(dataset={**ref_means})
    for name, duets in generated.items():
        parts = [decode_lenient(d.machine) for d in duets]
        means = part_means(parts)
        pch, nlh = _aggregate_histograms(parts)
        rep.systems[name] = {
            **{k: means[k] for k in METRICS},
            **{f"{k}_diff": means[k] - ref_means[k] for k in METRICS},
            "pch_emd": emd_1d(pch, ref_pch),
            "nlh_emd": emd_1d(nlh, ref_nlh),
            "pieces": len(parts),
        }
    return rep
