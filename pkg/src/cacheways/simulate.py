"""Deterministic discrete-event co-execution of a process mix.

Execution is work-based: each phase carries abstract work units and a
way-time curve, and a process advances at speed work / t(effective ways).
When an allocation changes mid-phase the remaining work is preserved and the
remaining duration rescales with the new speed.  Contention is modeled only
inside a shared way region: active reuse-phase processes split the ways they
claim, streaming phases see their full region.  Simultaneous events settle in
(time, pid, kind) order; a rebalancing tick settles after the phase events of
its instant.

Four policies drive allocation:
  * comcas        probe-guided: batch placement at arrival, re-apportioning
                  at every phase change, releases recycled,
  * unpartitioned the socket is one undivided region,
  * maxways       every process statically holds its saturation way count,
  * reactive      equal split, then one way moved per fixed-interval tick
                  toward the neediest process (a counter-sampling stand-in).

Reports are bit-reproducible for identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .apportion import (
    AllocationRecord,
    Apportioner,
    SystemConfig,
    mask_width,
)
from .errors import TraceError
from .loops import ReuseClass
from .sensitivity import ProbeAttributes, WayTimeCurve, compute_alpha, detect_max_ways

CATEGORIES = ("light", "medium", "heavy")


@dataclass(frozen=True)
class PhaseSpec:
    phase_id: str
    attrs: ProbeAttributes
    work: float
    curve: WayTimeCurve


@dataclass(frozen=True)
class ProcessSpec:
    pid: int
    phases: tuple[PhaseSpec, ...]
    start_ns: float = 0.0
    alpha: float | None = None  # derived from curves when absent
    max_ways: int | None = None
    unmixed_ns: float | None = None


@dataclass
class MixSpec:
    name: str
    category: str
    processes: tuple[ProcessSpec, ...]
    config_overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Policy:
    kind: str  # comcas | unpartitioned | maxways | reactive
    interval_ns: float = 5e8

    def __post_init__(self):
        if self.kind not in ("comcas", "unpartitioned", "maxways", "reactive"):
            raise TraceError("unknown policy %r" % (self.kind,))
        if self.interval_ns <= 0:
            raise TraceError("policy interval must be positive")


@dataclass
class SimReport:
    mix_name: str
    category: str
    policy: str
    interval_ns: float | None
    completions: dict[int, float]
    unmixed: dict[int, float]
    records: list[AllocationRecord]
    width_timeline: list[tuple[float, dict[int, tuple[float, int, int]]]]
    end_time: float
    apportion_count: int
    max_clos_group_size: int
    warnings: list[str]

    def scenario_timeline(self) -> list[tuple[float, str]]:
        return [(r.time_ns, r.scenario.value) for r in self.records]


def validate_mix(mix: MixSpec) -> None:
    if mix.category not in CATEGORIES:
        raise TraceError("mix %r: category %r" % (mix.name, mix.category))
    if not mix.processes:
        raise TraceError("mix %r has no processes" % mix.name)
    seen = set()
    for proc in mix.processes:
        if proc.pid in seen:
            raise TraceError("mix %r: duplicate pid %d" % (mix.name, proc.pid))
        seen.add(proc.pid)
        if not proc.phases:
            raise TraceError("mix %r: pid %d has no phases" % (mix.name, proc.pid))
        for ph in proc.phases:
            if ph.work <= 0:
                raise TraceError(
                    "mix %r: pid %d phase %r work must be positive"
                    % (mix.name, proc.pid, ph.phase_id)
                )


def mix_config(mix: MixSpec, base: SystemConfig | None = None) -> SystemConfig:
    cfg = base or SystemConfig()
    if mix.config_overrides:
        cfg = replace(cfg, **mix.config_overrides)
    return cfg


def process_sensitivity(proc: ProcessSpec, config: SystemConfig) -> tuple[float, int]:
    """Process-level (alpha, max_ways): explicit values win, otherwise they
    are derived from the pointwise sum of the process's phase curves."""
    if proc.alpha is not None and proc.max_ways is not None:
        return proc.alpha, proc.max_ways
    points = tuple(
        (w, sum(ph.curve.time_at(w) for ph in proc.phases))
        for w in range(2, config.ways_per_socket + 1)
    )
    curve = WayTimeCurve(points)
    mw = proc.max_ways
    if mw is None:
        mw = detect_max_ways(curve, config.saturation_epsilon)
    alpha = proc.alpha
    if alpha is None:
        alpha = compute_alpha(curve, mw)
    return alpha, mw


def phase_speed(phase: PhaseSpec, ways: int, dm_penalty: float = 1.25) -> float:
    """Execution speed (work units per ns) at a way count.  One way behaves
    like a directly-mapped cache: t(2) stretched by the penalty factor."""
    if ways < 1:
        raise TraceError("phase %r: ways must be >= 1" % phase.phase_id)
    if ways == 1:
        t = phase.curve.time_at(2) * dm_penalty
    else:
        t = phase.curve.time_at(ways)
    return phase.work / t


def effective_ways(width: int, active_members, pid: int) -> int:
    """Ways a process effectively owns inside one shared region: a lone
    member or a streaming phase sees the full width; active reuse phases
    split it evenly (floored, at least 1).

    `active_members` is an iterable of (pid, ReuseClass) for the region's
    currently executing members, `pid` one of them.
    """
    members = list(active_members)
    mine = None
    reuse_count = 0
    for qpid, cls in members:
        if cls is ReuseClass.REUSE:
            reuse_count += 1
        if qpid == pid:
            mine = cls
    if mine is None:
        raise TraceError("pid %d is not among the active members" % pid)
    if len(members) <= 1 or mine is ReuseClass.STREAM:
        return width
    return max(1, width // max(1, reuse_count))


def run_unmixed(proc: ProcessSpec, config: SystemConfig | None = None) -> float:
    """Completion time of the process alone on an undivided socket (the SLA
    baseline): the sum of its phase times at full width."""
    cfg = config or SystemConfig()
    return sum(ph.curve.time_at(cfg.ways_per_socket) for ph in proc.phases)


# ---------------------------------------------------------------------------
# policy drivers
# ---------------------------------------------------------------------------

class _MaskedEff:
    """Shared contention arithmetic over explicit per-pid masks."""

    @staticmethod
    def effective(pid, socket_of, masks, active_class) -> int:
        mask = masks[pid]
        if active_class[pid] is ReuseClass.STREAM:
            return mask_width(mask)
        sid = socket_of[pid]
        claims: dict[int, int] = {}
        for q, qmask in masks.items():
            if socket_of[q] != sid or active_class[q] is not ReuseClass.REUSE:
                continue
            b = qmask
            while b:
                low = b & -b
                bit = low.bit_length() - 1
                claims[bit] = claims.get(bit, 0) + 1
                b ^= low
        share = 0.0
        b = mask
        while b:
            low = b & -b
            bit = low.bit_length() - 1
            share += 1.0 / max(1, claims.get(bit, 1))
            b ^= low
        return max(1, math.floor(share))


class _ComCasDriver:
    def __init__(self, config: SystemConfig):
        self.ap = Apportioner(config)

    def admit(self, t, runs):
        arrivals = [
            (r.pid, r.alpha, r.max_ways, r.phase.attrs, r.phase.attrs.predicted_time())
            for r in runs
        ]
        self.ap.ipca_batch(t, arrivals)

    def capacity(self):
        return sum(s.free_cores for s in self.ap.sockets)

    def phase_change(self, t, run):
        self.ap.pcca(t, run.pid, run.phase.attrs, run.phase.attrs.predicted_time())

    def process_end(self, t, run):
        self.ap.release_process(t, run.pid)

    def effective(self, run, active_runs):
        p = self.ap.procs[run.pid]
        masks = {}
        socket_of = {}
        active_class = {}
        for r in active_runs:
            q = self.ap.procs[r.pid]
            masks[r.pid] = self.ap.sockets[q.socket_id].clos[q.clos_id].mask
            socket_of[r.pid] = q.socket_id
            active_class[r.pid] = r.phase.attrs.reuse
        eff = _MaskedEff.effective(run.pid, socket_of, masks, active_class)
        return min(eff, mask_width(masks[run.pid]))

    def snapshot(self):
        return self.ap.widths_snapshot()


class _UnpartitionedDriver:
    def __init__(self, config: SystemConfig):
        self.config = config
        self.socket_of: dict[int, int] = {}
        self.active_per_socket: dict[int, list[int]] = {
            s: [] for s in range(config.sockets)
        }

    def capacity(self):
        return sum(
            self.config.cores_per_socket - len(v)
            for v in self.active_per_socket.values()
        )

    def admit(self, t, runs):
        for r in runs:
            sid = max(
                range(self.config.sockets),
                key=lambda s: (
                    self.config.cores_per_socket - len(self.active_per_socket[s]),
                    -s,
                ),
            )
            self.socket_of[r.pid] = sid
            self.active_per_socket[sid].append(r.pid)

    def phase_change(self, t, run):
        pass

    def process_end(self, t, run):
        self.active_per_socket[self.socket_of[run.pid]].remove(run.pid)

    def effective(self, run, active_runs):
        sid = self.socket_of[run.pid]
        members = [
            (r.pid, r.phase.attrs.reuse)
            for r in active_runs
            if self.socket_of[r.pid] == sid
        ]
        return effective_ways(self.config.ways_per_socket, members, run.pid)

    def snapshot(self):
        out = {}
        for sid, pids in self.active_per_socket.items():
            for pid in pids:
                out[pid] = (0.0, 0, self.config.ways_per_socket)
        return dict(sorted(out.items()))


class _MaxWaysStaticDriver:
    def __init__(self, config: SystemConfig):
        self.config = config
        self.socket_of: dict[int, int] = {}
        self.masks: dict[int, int] = {}
        self.alphas: dict[int, float] = {}
        self.maxw: dict[int, int] = {}

    def capacity(self):
        per = {s: 0 for s in range(self.config.sockets)}
        for pid, sid in self.socket_of.items():
            if pid in self.masks:
                per[sid] += 1
        return sum(self.config.cores_per_socket - n for n in per.values())

    def _free_cores(self, sid):
        n = sum(
            1 for pid, s in self.socket_of.items() if s == sid and pid in self.masks
        )
        return self.config.cores_per_socket - n

    def admit(self, t, runs):
        w_total = self.config.ways_per_socket
        for r in runs:
            sid = max(
                range(self.config.sockets), key=lambda s: (self._free_cores(s), -s)
            )
            used = 0
            for q, m in self.masks.items():
                if self.socket_of[q] == sid:
                    used |= m
            ways = min(r.max_ways, w_total)
            best = None
            best_key = None
            for start in range(w_total - ways + 1):
                m = ((1 << ways) - 1) << start
                key = (mask_width(m & used), start)
                if best_key is None or key < best_key:
                    best_key, best = key, m
            self.socket_of[r.pid] = sid
            self.masks[r.pid] = best
            self.alphas[r.pid] = r.alpha
            self.maxw[r.pid] = r.max_ways

    def phase_change(self, t, run):
        pass

    def process_end(self, t, run):
        del self.masks[run.pid]

    def effective(self, run, active_runs):
        masks = {r.pid: self.masks[r.pid] for r in active_runs}
        socket_of = {r.pid: self.socket_of[r.pid] for r in active_runs}
        active_class = {r.pid: r.phase.attrs.reuse for r in active_runs}
        eff = _MaskedEff.effective(run.pid, socket_of, masks, active_class)
        return min(eff, mask_width(masks[run.pid]))

    def snapshot(self):
        out = {}
        for pid in sorted(self.masks):
            out[pid] = (self.alphas[pid], self.maxw[pid], mask_width(self.masks[pid]))
        return out


class _ReactiveDriver:
    """Fixed-interval controller: equal split at admission, then one way per
    tick from the least needy donor to the neediest deficient process.  Masks
    are repacked contiguously (pid order) on every change, so they never
    overlap; the need proxy alpha * (max_ways - width) stands in for a
    hardware miss counter."""

    def __init__(self, config: SystemConfig):
        self.config = config
        self.socket_of: dict[int, int] = {}
        self.widths: dict[int, int] = {}
        self.masks: dict[int, int] = {}
        self.alphas: dict[int, float] = {}
        self.maxw: dict[int, int] = {}

    def capacity(self):
        per = {s: 0 for s in range(self.config.sockets)}
        for pid in self.widths:
            per[self.socket_of[pid]] += 1
        return sum(self.config.cores_per_socket - n for n in per.values())

    def _free_cores(self, sid):
        n = sum(1 for pid in self.widths if self.socket_of[pid] == sid)
        return self.config.cores_per_socket - n

    def admit(self, t, runs):
        for r in runs:
            sid = max(
                range(self.config.sockets), key=lambda s: (self._free_cores(s), -s)
            )
            self.socket_of[r.pid] = sid
            self.widths[r.pid] = 0
            self.alphas[r.pid] = r.alpha
            self.maxw[r.pid] = r.max_ways
        touched = {self.socket_of[r.pid] for r in runs}
        for sid in touched:
            self._equal_split(sid)
            self._repack(sid)

    def _socket_pids(self, sid):
        return sorted(pid for pid in self.widths if self.socket_of[pid] == sid)

    def _equal_split(self, sid):
        pids = self._socket_pids(sid)
        if not pids:
            return
        w = self.config.ways_per_socket
        base, rem = divmod(w, len(pids))
        for i, pid in enumerate(pids):
            self.widths[pid] = base + (1 if i >= len(pids) - rem else 0)

    def _repack(self, sid):
        start = 0
        for pid in self._socket_pids(sid):
            w = self.widths[pid]
            self.masks[pid] = ((1 << w) - 1) << start
            start += w

    def phase_change(self, t, run):
        pass

    def process_end(self, t, run):
        sid = self.socket_of[run.pid]
        del self.widths[run.pid]
        del self.masks[run.pid]
        self._repack(sid)

    def tick(self, t):
        for sid in range(self.config.sockets):
            pids = self._socket_pids(sid)
            if not pids:
                continue

            def proxy(pid):
                return self.alphas[pid] * max(0, self.maxw[pid] - self.widths[pid])

            deficient = [pid for pid in pids if proxy(pid) > 0]
            if not deficient:
                continue
            recipient = min(deficient, key=lambda pid: (-proxy(pid), pid))
            free = self.config.ways_per_socket - sum(self.widths[p] for p in pids)
            if free >= 1:
                self.widths[recipient] += 1
            else:
                donors = [
                    pid for pid in pids if proxy(pid) == 0 and self.widths[pid] >= 2
                ]
                if not donors:
                    continue
                donor = min(donors, key=lambda pid: (-self.widths[pid], pid))
                self.widths[donor] -= 1
                self.widths[recipient] += 1
            self._repack(sid)

    def effective(self, run, active_runs):
        # repacked masks never overlap, so a process owns its width outright
        return mask_width(self.masks[run.pid])

    def snapshot(self):
        out = {}
        for pid in sorted(self.widths):
            out[pid] = (self.alphas[pid], self.maxw[pid], self.widths[pid])
        return out


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

@dataclass
class _Run:
    spec: ProcessSpec
    alpha: float
    max_ways: int
    phase_idx: int = 0
    work_rem: float = 0.0
    speed: float = 0.0
    started_at: float = 0.0

    @property
    def pid(self) -> int:
        return self.spec.pid

    @property
    def phase(self) -> PhaseSpec:
        return self.spec.phases[self.phase_idx]


def _make_driver(policy: Policy, config: SystemConfig):
    if policy.kind == "comcas":
        return _ComCasDriver(config)
    if policy.kind == "unpartitioned":
        return _UnpartitionedDriver(config)
    if policy.kind == "maxways":
        return _MaxWaysStaticDriver(config)
    return _ReactiveDriver(config)


def run_mix(
    mix: MixSpec, policy: Policy, config: SystemConfig | None = None
) -> SimReport:
    """Co-execute the mix under one policy; fully deterministic."""
    validate_mix(mix)
    cfg = mix_config(mix, config)
    driver = _make_driver(policy, cfg)

    runs: dict[int, _Run] = {}
    for proc in mix.processes:
        alpha, maxw = process_sensitivity(proc, cfg)
        runs[proc.pid] = _Run(spec=proc, alpha=alpha, max_ways=maxw)

    pending = sorted(
        (proc.start_ns, proc.pid) for proc in mix.processes
    )
    waiting: list[int] = []
    active: list[int] = []
    completions: dict[int, float] = {}
    width_timeline: list[tuple[float, dict]] = []
    now = 0.0
    tick_no = 0  # completed reactive ticks

    def refresh_speeds():
        active_runs = [runs[p] for p in sorted(active)]
        for r in active_runs:
            eff = driver.effective(r, active_runs)
            r.speed = phase_speed(r.phase, eff, cfg.dm_penalty)

    def snapshot(t):
        snap = driver.snapshot()
        if not width_timeline or width_timeline[-1][1] != snap:
            width_timeline.append((t, snap))

    def admit(t, pids):
        """Admit in pid order up to capacity; the rest wait for a release."""
        pids = sorted(pids)
        room = driver.capacity()
        batch, rest = pids[:room], pids[room:]
        if batch:
            for pid in batch:
                runs[pid].started_at = t
                runs[pid].work_rem = runs[pid].phase.work
            driver.admit(t, [runs[pid] for pid in batch])
            active.extend(batch)
            active.sort()
        waiting.extend(rest)

    while pending or waiting or active:
        # candidate times for the next event
        end_at = {
            pid: now + runs[pid].work_rem / runs[pid].speed for pid in active
        }
        cands = list(end_at.values())
        if pending:
            cands.append(pending[0][0])
        if policy.kind == "reactive" and active:
            cands.append((tick_no + 1) * policy.interval_ns)
        if not cands:
            raise TraceError(
                "mix %r: waiting processes can never be admitted" % mix.name
            )
        t = min(cands)

        # elapse work to t; the ending set is exact, not tolerance-based
        dt = t - now
        ending = [pid for pid in active if end_at[pid] == t]
        for pid in active:
            r = runs[pid]
            r.work_rem = 0.0 if pid in ending else r.work_rem - dt * r.speed
        now = t

        released = False
        for pid in ending:
            r = runs[pid]
            r.work_rem = 0.0
            if r.phase_idx + 1 < len(r.spec.phases):
                r.phase_idx += 1
                r.work_rem = r.phase.work
                driver.phase_change(now, r)
            else:
                active.remove(pid)
                completions[pid] = now - r.started_at
                driver.process_end(now, r)
                released = True

        # reactive rebalance settles after the phase events of this instant
        if (
            policy.kind == "reactive"
            and active
            and t >= (tick_no + 1) * policy.interval_ns
        ):
            tick_no += 1
            driver.tick(now)

        # admissions due now, plus deferred ones once a slot opened
        due = []
        while pending and pending[0][0] <= now:
            due.append(pending.pop(0)[1])
        if due or (released and waiting):
            retry, waiting[:] = waiting[:], []
            admit(now, due + retry)

        if active:
            refresh_speeds()
        snapshot(now)

    unmixed = {}
    for proc in mix.processes:
        unmixed[proc.pid] = (
            proc.unmixed_ns
            if proc.unmixed_ns is not None
            else run_unmixed(proc, cfg)
        )

    if isinstance(driver, _ComCasDriver):
        records = driver.ap.records
        apportions = driver.ap.apportion_count
        max_group = driver.ap.max_clos_group_size
        warnings = driver.ap.warnings
    else:
        records, apportions, max_group, warnings = [], 0, 1, []

    return SimReport(
        mix_name=mix.name,
        category=mix.category,
        policy=policy.kind,
        interval_ns=policy.interval_ns if policy.kind == "reactive" else None,
        completions=completions,
        unmixed=unmixed,
        records=records,
        width_timeline=width_timeline,
        end_time=now,
        apportion_count=apportions,
        max_clos_group_size=max_group,
        warnings=warnings,
    )
