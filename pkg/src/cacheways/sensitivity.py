"""Cache-sensitivity attributes: way-time curves, the sensitivity factor
alpha, saturation (max-ways) detection, and the per-phase attribute bundle.

alpha sums the per-way execution-time improvement between observed points of
the way-time curve, up to the saturation point: a large alpha means the
process keeps speeding up as it gets more cache.  Curves may be sparse
(observed at a subset of way counts) as long as they start at w=2.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

from .errors import AttributesIncomplete, CurveIncomplete, MergeEmpty, SchemaError
from .loops import FootprintValue, ReuseClass
from .timing import TimingModel, predict_phase_time

MONOTONE_TOL = 1e-6


@dataclass(frozen=True)
class WayTimeCurve:
    """Execution time (ns) by allocated way count, observed at w >= 2.

    Points are (ways, time) sorted by ways; times are monotone non-increasing
    within a 1e-6 relative tolerance.
    """

    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.points:
            raise SchemaError("way-time curve has no points")
        ways = [w for w, _ in self.points]
        if ways != sorted(set(ways)):
            raise SchemaError("curve way counts must be strictly increasing")
        if ways[0] != 2:
            raise SchemaError("curve must start at 2 ways, got %d" % ways[0])
        prev = None
        for w, t in self.points:
            if t <= 0:
                raise SchemaError("curve time must be positive at w=%d" % w)
            if prev is not None and t > prev * (1.0 + MONOTONE_TOL):
                raise SchemaError("curve time increases at w=%d" % w)
            prev = t

    @classmethod
    def from_dict(cls, d) -> "WayTimeCurve":
        return cls(tuple(sorted((int(w), float(t)) for w, t in d.items())))

    def as_dict(self) -> dict[int, float]:
        return dict(self.points)

    @property
    def last_way(self) -> int:
        return self.points[-1][0]

    def time_at(self, ways: int) -> float:
        """Time at an arbitrary way count >= 2: exact at observed points,
        linear between them, flat beyond the last one."""
        if ways < 2:
            raise CurveIncomplete("time_at needs ways >= 2, got %d" % ways)
        ws = [w for w, _ in self.points]
        if ways <= ws[0]:
            return self.points[0][1]
        if ways >= ws[-1]:
            return self.points[-1][1]
        i = bisect_left(ws, ways)
        if ws[i] == ways:
            return self.points[i][1]
        w0, t0 = self.points[i - 1]
        w1, t1 = self.points[i]
        frac = (ways - w0) / (w1 - w0)
        return t0 + frac * (t1 - t0)


def compute_alpha(curve: WayTimeCurve, max_ways: int) -> float:
    """Sensitivity factor: sum of |t_i - t_prev| / (w_i - w_prev) over the
    curve's observed points up to max_ways.  Zero for flat curves and for
    max_ways = 2 (empty sum).  Requires observations at both 2 and max_ways.
    """
    if max_ways < 2:
        raise CurveIncomplete("max_ways must be >= 2")
    pts = [(w, t) for w, t in curve.points if w <= max_ways]
    observed = {w for w, _ in pts}
    if 2 not in observed or max_ways not in observed:
        raise CurveIncomplete(
            "curve must cover 2..%d (observed %s)" % (max_ways, sorted(observed))
        )
    alpha = 0.0
    for (w0, t0), (w1, t1) in zip(pts, pts[1:]):
        alpha += abs(t1 - t0) / (w1 - w0)
    return alpha


def detect_max_ways(curve: WayTimeCurve, epsilon: float = 0.05) -> int:
    """Saturation point: the way count past which no step of the curve
    improves time by at least `epsilon` relative.  Floor of 2: an insensitive
    process still occupies two ways (below that the cache degenerates)."""
    if epsilon <= 0:
        raise SchemaError("epsilon must be positive")
    best = 2
    for (w0, t0), (w1, t1) in zip(curve.points, curve.points[1:]):
        if (t0 - t1) / t0 >= epsilon:
            best = w1
    return best


@dataclass(frozen=True)
class ProbeAttributes:
    """The per-phase payload: everything allocation needs to know about one
    outermost loop nest."""

    phase_id: str
    footprint: FootprintValue
    reuse: ReuseClass
    alpha: float
    max_ways: int
    timing: TimingModel | None = None
    fixed_ns: float | None = None

    def predicted_time(self, bounds=()) -> float:
        """Predicted phase duration in ns (fixed value or model at bounds)."""
        if self.fixed_ns is not None:
            return self.fixed_ns
        if self.timing is not None:
            return predict_phase_time(self.timing, bounds)
        raise AttributesIncomplete("phase %r carries no timing" % self.phase_id)


def assemble_attributes(
    phase_id: str,
    footprint: FootprintValue | None,
    reuse: ReuseClass | None,
    curve: WayTimeCurve | None,
    timing: TimingModel | None = None,
    fixed_ns: float | None = None,
    epsilon: float = 0.05,
) -> ProbeAttributes:
    """Bundle the analysis outputs for one phase; the sensitivity pair
    (alpha, max-ways) is derived from the way-time curve here."""
    missing = []
    if footprint is None:
        missing.append("footprint")
    if reuse is None:
        missing.append("reuse class")
    if curve is None:
        missing.append("way-time curve")
    if timing is None and fixed_ns is None:
        missing.append("timing")
    if missing:
        raise AttributesIncomplete(
            "phase %r missing: %s" % (phase_id, ", ".join(missing))
        )
    max_ways = detect_max_ways(curve, epsilon)
    alpha = compute_alpha(curve, max_ways)
    return ProbeAttributes(
        phase_id=phase_id,
        footprint=footprint,
        reuse=reuse,
        alpha=alpha,
        max_ways=max_ways,
        timing=timing,
        fixed_ns=fixed_ns,
    )


def merge_nest_attributes(inner) -> ProbeAttributes:
    """Collapse inner-loop bundles into the outermost phase bundle (the
    hoisting step): reuse wins if any member reuses, footprints add, and the
    first bundle (the outermost nest) supplies everything else."""
    inner = list(inner)
    if not inner:
        raise MergeEmpty("no attribute bundles to merge")
    outer = inner[0]
    reuse = (
        ReuseClass.REUSE
        if any(a.reuse is ReuseClass.REUSE for a in inner)
        else ReuseClass.STREAM
    )
    fp_bytes = sum(a.footprint.bytes for a in inner)
    fp_lines = sum(a.footprint.lines for a in inner)
    exact = all(a.footprint.exact for a in inner)
    return ProbeAttributes(
        phase_id=outer.phase_id,
        footprint=FootprintValue(fp_bytes, fp_lines, exact),
        reuse=reuse,
        alpha=outer.alpha,
        max_ways=outer.max_ways,
        timing=outer.timing,
        fixed_ns=outer.fixed_ns,
    )
