"""Walk one loop nest from source shape to cache attributes.

The nest below streams over B while re-reading a window of A:

    for i in [0, 40):
        S1: read A[i]
        S2: read A[i+2]
        for j in [0, 25):
            S3: read B[j]

Run:  python3 demos/01_footprint_and_reuse.py
"""

from cacheways.loops import (
    Affine,
    Bound,
    LoopLevel,
    LoopNest,
    MemoryAccess,
    Statement,
    classify_reuse,
    compute_srd,
    footprint_closed_form,
    footprint_enumerate,
)

nest = LoopNest(
    name="window-sum",
    loops=(LoopLevel("i", Bound(40)), LoopLevel("j", Bound(25))),
    statements=(
        Statement((MemoryAccess("A", 8, Affine(0, (("i", 1),))),), 1),
        Statement((MemoryAccess("A", 8, Affine(2, (("i", 1),))),), 1),
        Statement((MemoryAccess("B", 8, Affine(0, (("j", 1),))),), 2),
    ),
)

closed = footprint_closed_form(nest, line_size=64)
walked = footprint_enumerate(nest, line_size=64)
print("closed-form footprint: %d bytes over %d lines (exact=%s)" % (closed.bytes, closed.lines, closed.exact))
print("enumerated footprint:  %d bytes over %d lines" % (walked.bytes, walked.lines))
assert (closed.bytes, closed.lines) == (walked.bytes, walked.lines)

res = compute_srd(nest)
print("\nreuse pairs:")
for p in res.pairs:
    print(
        "  %s: S%d -> S%d, carried by loop %d at distance %d, srd %d"
        % (p.array, p.stmt_a + 1, p.stmt_b + 1, p.level, p.distance, p.srd)
    )

# About 50 accesses separate the two touches of each A element.  Under the
# default threshold that distance is negligible: the line is still resident
# when it is touched again, so the nest behaves like a pure stream and gains
# nothing from a bigger partition.  Tighten the threshold and the same 50
# counts as significant reuse that cache capacity must bridge.
kind = classify_reuse(res, delta=1000.0)
print("\nclassification at delta=1000: %s" % kind.value)
kind_tight = classify_reuse(res, delta=10.0)
print("classification at delta=10:   %s" % kind_tight.value)
