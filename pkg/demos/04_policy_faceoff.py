"""Run one capacity-stressed mix under all four partitioning policies.

Run:  python3 demos/04_policy_faceoff.py [path/to/mix]
"""

import os
import sys

from cacheways.formats import read_mix
from cacheways.metrics import (
    deficit_proxy,
    jain_fairness,
    sla_check,
    throughputs,
    weighted_speedup,
)
from cacheways.simulate import Policy, run_mix

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT = os.path.join(HERE, os.pardir, "mixes", "heavy", "h3-triple.mix")

mix = read_mix(sys.argv[1] if len(sys.argv) > 1 else DEFAULT)
print("mix %s (%s), %d processes\n" % (mix.name, mix.category, len(mix.processes)))

base = run_mix(mix, Policy("unpartitioned"))
print("%-16s %10s %9s %9s %6s %10s" % ("policy", "end (ms)", "vs unprt", "fairness", "SLA", "deficit"))
for kind, policy in (
    ("unpartitioned", None),
    ("maxways", Policy("maxways")),
    ("reactive 500ms", Policy("reactive", 5e8)),
    ("comcas", Policy("comcas")),
):
    rep = base if policy is None else run_mix(mix, policy)
    ws = weighted_speedup(base.completions, rep.completions)
    jain = jain_fairness(throughputs(rep.completions, rep.unmixed))
    ok, _ = sla_check(rep.completions, rep.unmixed)
    deficit = deficit_proxy(rep.width_timeline, rep.end_time)
    print(
        "%-16s %10.3f %9.4f %9.4f %6s %10.3g"
        % (kind, rep.end_time / 1e6, ws, jain, "pass" if ok else "FAIL", deficit)
    )

guided = run_mix(mix, Policy("comcas"))
print(
    "\nthe guided policy re-apportioned %d times; largest shared group %d"
    % (guided.apportion_count, guided.max_clos_group_size)
)
print("per-process slowdown vs running alone under the guided policy:")
for pid in sorted(guided.completions):
    print("  pid %d: %.3fx" % (pid, guided.completions[pid] / guided.unmixed[pid]))
