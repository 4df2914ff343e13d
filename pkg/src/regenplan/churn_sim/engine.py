"""Event-driven simulation of node churn and proactive block repair.

One run is a single sequential event loop over integer-nanosecond time.
Nodes arrive as a Poisson stream, live for an exponential lifetime and
alternate exponential on/off sessions. Every object spawns a repair job at a
fixed cadence; a job is placed on the least-loaded on-line node and pulls one
``beta``-sized transfer from each of ``d`` distinct on-line holders, subject
to per-node upload/download slot caps.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import random
from dataclasses import dataclass, field

from regenplan.churn_sim.config import DAY, HOUR, SimConfig

logger = logging.getLogger(__name__)

NS = 1_000_000_000

# Event kinds double as tie-break priority at equal timestamps.
EV_DEPART = 0
EV_JOIN = 1
EV_TOGGLE = 2
EV_XFER = 3
EV_REPAIR = 4
EV_SAMPLE = 5

QUEUED = 0
ACTIVE = 1
DEAD = 2

TIMESERIES_HEADER = (
    "t_days", "rho_hat", "mean_repair_s", "p95_repair_s",
    "wasted_frac", "nodes_online", "objects_below_k",
)


class Node:
    __slots__ = ("id", "death", "online", "epoch", "blocks", "up_active", "down_active",
                 "up_queue", "ready", "sending", "repairs")

    def __init__(self, nid: int, death: int, online: bool):
        self.id = nid
        self.death = death
        self.online = online
        self.epoch = 0
        self.blocks: set[int] = set()
        self.up_active = 0
        self.down_active = 0
        self.up_queue: list[Transfer] = []
        # heap of (transfer id, transfer) queued towards this node whose source has
        # a free upload slot; stale entries are skipped when popped
        self.ready: list[tuple[int, Transfer]] = []
        # transfer id -> transfer where this node is the source (queued or active)
        self.sending: dict[int, Transfer] = {}
        # job id -> job repaired on this node
        self.repairs: dict[int, RepairJob] = {}

    @property
    def load(self) -> int:
        return len(self.blocks) + len(self.repairs)


class StoredObject:
    __slots__ = ("id", "holders", "next_block", "jobs", "lost")

    def __init__(self, oid: int):
        self.id = oid
        self.holders: dict[int, int] = {}  # node id -> block id
        self.next_block = 0
        self.jobs: list[RepairJob] = []
        self.lost = False


class RepairJob:
    __slots__ = ("id", "obj", "repairer", "sources", "done", "scheduled", "started", "restarts")

    def __init__(self, jid: int, obj: StoredObject, scheduled: int):
        self.id = jid
        self.obj = obj
        self.repairer: Node | None = None
        self.sources: dict[int, Transfer] = {}  # source node id -> pending/active transfer
        self.done: set[int] = set()  # source node ids whose repair block arrived
        self.scheduled = scheduled
        self.started = scheduled
        self.restarts = 0


class Transfer:
    __slots__ = ("id", "job", "src", "dst", "start", "state", "listed")

    def __init__(self, tid: int, job: RepairJob, src: Node, dst: Node):
        self.id = tid
        self.job = job
        self.src = src
        self.dst = dst
        self.start = 0
        self.state = QUEUED
        self.listed = False


@dataclass
class _Accumulator:
    useful: float = 0.0
    wasted: float = 0.0
    repair_times: list[float] = field(default_factory=list)


@dataclass
class SimResult:
    config: SimConfig
    metrics: dict
    timeseries: list[tuple]


def _percentile(values: list[float], q: float) -> float:
    """Linear-interpolation percentile (numpy's default rule)."""
    s = sorted(values)
    pos = (len(s) - 1) * q
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)


def _stats(values: list[float]) -> dict:
    if not values:
        return {"count": 0, "mean": None, "median": None, "p95": None}
    return {
        "count": len(values),
        "mean": math.fsum(values) / len(values),
        "median": _percentile(values, 0.5),
        "p95": _percentile(values, 0.95),
    }


class Simulator:
    """Mutable world state for one run. Use :func:`run` for the usual entry point."""

    def __init__(self, cfg: SimConfig, check_every: int = 0):
        self.cfg = cfg
        self.check_every = check_every
        self.rng = random.Random(cfg.seed)
        point = cfg.point
        self.k = cfg.code.k
        self.d = cfg.d
        self.n = cfg.n
        self.alpha = point.alpha
        self.beta = point.beta
        self.omega = float(cfg.upload_rate)
        self.cap_up = cfg.max_concurrent_uploads
        self.cap_down = cfg.max_concurrent_downloads
        self.summed_load = cfg.repairer_policy == "sum"
        self.by_id = cfg.source_policy == "lowest_id"
        self.xfer_ns = max(1, math.ceil(self.beta * NS / self.omega))
        self.a = cfg.availability
        self.mean_life_ns = cfg.mean_lifetime_days * DAY * NS
        self.mean_on_ns = cfg.base_time_hours * HOUR * NS * self.a
        self.mean_off_ns = cfg.base_time_hours * HOUR * NS * (1 - self.a)
        self.repair_gap_ns = round(self.mean_life_ns / self.n)
        self.end = round(cfg.duration_days * DAY * NS)
        self.warm = round(cfg.warmup_days * DAY * NS)
        self.interval = round(cfg.metrics_interval_hours * HOUR * NS)

        self.now = 0
        self.heap: list[tuple] = []
        self.seq = itertools.count()
        self.ids = itertools.count()
        self.nodes: dict[int, Node] = {}
        self.online: dict[int, Node] = {}
        self.objects: list[StoredObject] = []
        self.unassigned: list[RepairJob] = []
        self.starving: set[int] = set()
        self.below_k = 0

        self.window = _Accumulator()
        self.tick = _Accumulator()
        self.uploaded = 0.0  # every byte that left a source, whole run
        self.useful_total = 0.0
        self.wasted_total = 0.0
        self.restarts = 0
        self.jobs_created = 0
        self.jobs_completed = 0
        self.loss_events = 0
        self.lifetimes_ns: list[int] = []
        self.node_time = 0.0
        self.online_time = 0.0
        self.last_count_t = 0
        self.rows: list[tuple] = []
        self.events = 0

    # ------------------------------------------------------------------ events

    def _push(self, t: int, kind: int, payload) -> None:
        heapq.heappush(self.heap, (t, kind, next(self.seq), payload))

    def _exp_ns(self, mean_ns: float) -> int:
        return max(1, round(self.rng.expovariate(1.0) * mean_ns))

    def _new_node(self, online: bool) -> Node:
        life = self._exp_ns(self.mean_life_ns)
        self.lifetimes_ns.append(life)
        node = Node(next(self.ids), self.now + life, online)
        self.nodes[node.id] = node
        if online:
            self.online[node.id] = node
        if self.cfg.departures_enabled:
            self._push(node.death, EV_DEPART, node)
        self._schedule_toggle(node)
        return node

    def _schedule_toggle(self, node: Node) -> None:
        if self.a >= 1.0:
            return
        mean = self.mean_on_ns if node.online else self.mean_off_ns
        self._push(self.now + self._exp_ns(mean), EV_TOGGLE, (node, node.epoch))

    def _count_nodes(self) -> None:
        """Integrate population and on-line counts over the measurement window."""
        lo = max(self.last_count_t, self.warm)
        hi = min(self.now, self.end)
        if hi > lo:
            dt = (hi - lo) / NS
            self.node_time += len(self.nodes) * dt
            self.online_time += len(self.online) * dt
        self.last_count_t = self.now

    def setup(self) -> None:
        cfg = self.cfg
        for _ in range(cfg.initial_nodes):
            self._new_node(self.rng.random() < self.a)
        initial = list(self.nodes.values())
        count = len(initial)
        for oid in range(cfg.resolved_object_count):
            obj = StoredObject(oid)
            self.objects.append(obj)
            for j in range(self.n):
                node = initial[(oid * self.n + j) % count]
                obj.holders[node.id] = obj.next_block
                obj.next_block += 1
                node.blocks.add(oid)
            self._push(round(self.rng.random() * self.repair_gap_ns), EV_REPAIR, obj)
        if cfg.departures_enabled:
            self._push(self._exp_ns(self.mean_life_ns / cfg.initial_nodes), EV_JOIN, None)
        self._push(self.interval, EV_SAMPLE, None)

    def run(self) -> SimResult:
        self.setup()
        heap = self.heap
        pop = heapq.heappop
        end = self.end
        check = self.check_every
        while heap and heap[0][0] <= end:
            t, kind, _, payload = pop(heap)
            self.now = t
            self.events += 1
            if kind == EV_XFER:
                if payload.state == ACTIVE:
                    self._complete_transfer(payload)
            elif kind == EV_REPAIR:
                self._fire_repair(payload)
            elif kind == EV_TOGGLE:
                node, epoch = payload
                if node.epoch == epoch and node.id in self.nodes:
                    self._toggle(node)
            elif kind == EV_DEPART:
                self._depart(payload)
            elif kind == EV_JOIN:
                self._join()
            else:
                self._sample()
            if check and self.events % check == 0:
                self.check_invariants()
        self.now = end
        self._count_nodes()
        return SimResult(self.cfg, self._summary(), self.rows)

    # ------------------------------------------------------------- node churn

    def _join(self) -> None:
        self._count_nodes()
        node = self._new_node(online=True)
        self._push(self.now + self._exp_ns(self.mean_life_ns / self.cfg.initial_nodes), EV_JOIN, None)
        self._retry_unassigned(node)

    def _toggle(self, node: Node) -> None:
        self._count_nodes()
        node.epoch += 1
        if node.online:
            self._go_offline(node)
        else:
            node.online = True
            self.online[node.id] = node
            for oid in sorted(node.blocks & self.starving):
                self._offer(self.objects[oid], node)
            self._retry_unassigned(node)
        self._schedule_toggle(node)

    def _depart(self, node: Node) -> None:
        self._count_nodes()
        if node.online:
            self._go_offline(node)
        node.epoch += 1
        del self.nodes[node.id]
        k = self.k
        for oid in node.blocks:
            obj = self.objects[oid]
            del obj.holders[node.id]
            if len(obj.holders) == k - 1:
                self.below_k += 1
        node.blocks.clear()

    def _go_offline(self, node: Node) -> None:
        node.online = False
        del self.online[node.id]
        touched: dict[int, Node] = {}
        refill: list[RepairJob] = []
        # Source role: drop this node's outgoing transfers; their jobs look elsewhere.
        for t in list(node.sending.values()):
            job = t.job
            if t.state == ACTIVE:
                self._waste(self._cut(t))
                t.dst.down_active -= 1
                touched[t.dst.id] = t.dst
            t.state = DEAD
            del job.sources[node.id]
            refill.append(job)
        node.sending.clear()
        node.up_queue = []
        node.up_active = 0
        # Repairer role: the whole job restarts elsewhere and its bytes are void.
        restarted = list(node.repairs.values())
        for job in restarted:
            self._abort_job(job, touched)
        node.repairs.clear()
        node.ready = []
        node.down_active = 0
        touched.pop(node.id, None)
        for job in refill:
            if job.repairer is not None and job.repairer is not node:
                self._fill(job)
        for other in touched.values():
            self._pump(other)
        for job in restarted:
            self._assign(job)

    def _abort_job(self, job: RepairJob, touched: dict[int, Node]) -> None:
        wasted = len(job.done) * self.beta
        for t in job.sources.values():
            if t.state == ACTIVE:
                wasted += self._cut(t)
                t.src.up_active -= 1
                touched[t.src.id] = t.src
                self._list_ready(t.src)
            t.state = DEAD
            del t.src.sending[t.id]
        self._waste(wasted)
        job.sources.clear()
        job.done.clear()
        job.repairer = None
        job.restarts += 1
        self.restarts += 1

    def _retry_unassigned(self, node: Node) -> None:
        """Give waiting jobs to ``node``, which just came on-line.

        A job waits only while no on-line node is eligible for it, and only an
        arriving node can change that, so ``node`` is the sole candidate.
        """
        if not self.unassigned:
            return
        pending, self.unassigned = self.unassigned, []
        nid = node.id
        for job in pending:
            obj = job.obj
            if nid in obj.holders or any(j.repairer is node for j in obj.jobs):
                self.unassigned.append(job)
                continue
            job.repairer = node
            job.started = self.now
            node.repairs[job.id] = job
            self._fill(job)

    # ----------------------------------------------------------------- repair

    def _fire_repair(self, obj: StoredObject) -> None:
        self._push(self.now + self.repair_gap_ns, EV_REPAIR, obj)
        job = RepairJob(next(self.seq), obj, self.now)
        self.jobs_created += 1
        if len(obj.holders) < self.k:
            self.loss_events += 1
            obj.lost = True
        obj.jobs.append(job)
        self._assign(job)

    def _assign(self, job: RepairJob) -> None:
        node = self.pick_repairer(job.obj)
        if node is None:
            self.unassigned.append(job)
            return
        job.repairer = node
        job.started = self.now
        node.repairs[job.id] = job
        self._fill(job)

    def pick_repairer(self, obj: StoredObject) -> Node | None:
        """Least-loaded on-line node without a stake in ``obj``; lowest id on ties.

        Nodes holding a block of ``obj`` or already repairing it are excluded.
        """
        holders = obj.holders
        busy = {j.repairer.id for j in obj.jobs if j.repairer is not None}
        best = None
        best_key = None
        summed = self.summed_load
        for nid, node in self.online.items():
            if nid in holders or nid in busy:
                continue
            if summed:
                key = (len(node.blocks) + len(node.repairs), 0, nid)
            else:
                key = (len(node.repairs), len(node.blocks), nid)
            if best_key is None or key < best_key:
                best, best_key = node, key
        return best

    def _fill(self, job: RepairJob) -> None:
        """Top up ``job`` with transfers from on-line holders not yet used by it."""
        need = self.d - len(job.done) - len(job.sources)
        if need <= 0:
            return
        obj = job.obj
        nodes = self.nodes
        done, sources = job.done, job.sources
        if self.by_id:
            cands = sorted((0, h) for h in obj.holders
                           if h not in done and h not in sources and nodes[h].online)
        else:
            cands = sorted((len(nodes[h].sending), h) for h in obj.holders
                           if h not in done and h not in sources and nodes[h].online)
        for _, h in cands[:need]:
            self._enqueue(job, nodes[h])
        if need > len(cands):
            self.starving.add(obj.id)

    def _offer(self, obj: StoredObject, node: Node) -> None:
        """``node`` is a newly reachable holder of ``obj``: hand it to jobs still short of sources."""
        short = False
        nid = node.id
        for job in obj.jobs:
            if job.repairer is None:
                continue
            if len(job.done) + len(job.sources) >= self.d:
                continue
            if nid not in job.done and nid not in job.sources:
                self._enqueue(job, node)
            if len(job.done) + len(job.sources) < self.d:
                short = True
        if not short:
            self.starving.discard(obj.id)

    # -------------------------------------------------------------- transfers

    def _enqueue(self, job: RepairJob, src: Node) -> None:
        dst = job.repairer
        t = Transfer(next(self.seq), job, src, dst)
        job.sources[src.id] = t
        src.sending[t.id] = t
        if src.up_active < self.cap_up and dst.down_active < self.cap_down:
            self._start(t)
        else:
            src.up_queue.append(t)
            if src.up_active < self.cap_up:
                t.listed = True
                heapq.heappush(dst.ready, (t.id, t))

    def _start(self, t: Transfer) -> None:
        t.state = ACTIVE
        t.start = self.now
        t.src.up_active += 1
        t.dst.down_active += 1
        self._push(self.now + self.xfer_ns, EV_XFER, t)

    def _pump(self, node: Node) -> None:
        """Start queued transfers touching ``node``, FIFO with skip-over of blocked peers.

        As a receiver, the oldest queued transfer whose source is idle goes first.
        """
        if not node.online:
            return
        cap_up, cap_down = self.cap_up, self.cap_down
        queue = node.up_queue
        i = 0
        while node.up_active < cap_up and i < len(queue):
            t = queue[i]
            if t.state != QUEUED:
                del queue[i]
            elif t.dst.down_active < cap_down:
                del queue[i]
                self._start(t)
            else:
                i += 1
        self._list_ready(node)
        ready = node.ready
        while ready and node.down_active < cap_down:
            t = heapq.heappop(ready)[1]
            t.listed = False
            if t.state == QUEUED and t.src.up_active < cap_up:
                self._start(t)

    def _list_ready(self, src: Node) -> None:
        """An idle source makes every transfer it has queued startable from the receiver side."""
        if src.up_active >= self.cap_up or not src.online:
            return
        for t in src.up_queue:
            if t.state == QUEUED and not t.listed:
                t.listed = True
                heapq.heappush(t.dst.ready, (t.id, t))

    def _partial(self, t: Transfer) -> float:
        return (self.now - t.start) * self.omega / NS

    def _cut(self, t: Transfer) -> float:
        """Abort an active transfer; its partial bytes were uploaded and are now waste."""
        nbytes = self._partial(t)
        self.uploaded += nbytes
        return nbytes

    def _waste(self, nbytes: float) -> None:
        self.wasted_total += nbytes
        if self.now >= self.warm:
            self.window.wasted += nbytes
        self.tick.wasted += nbytes

    def _complete_transfer(self, t: Transfer) -> None:
        t.state = DEAD
        src, dst, job = t.src, t.dst, t.job
        src.up_active -= 1
        dst.down_active -= 1
        del src.sending[t.id]
        del job.sources[src.id]
        job.done.add(src.id)
        self.uploaded += self.beta
        if len(job.done) >= self.d:
            self._complete_job(job)
        self._pump(src)
        self._pump(dst)

    def _complete_job(self, job: RepairJob) -> None:
        rep = job.repairer
        obj = job.obj
        assert len(job.done) == self.d and not job.sources
        assert rep.id not in obj.holders, "node would hold two blocks of one object"
        del rep.repairs[job.id]
        obj.jobs.remove(job)
        obj.holders[rep.id] = obj.next_block
        obj.next_block += 1
        rep.blocks.add(obj.id)
        if len(obj.holders) == self.k:
            self.below_k -= 1
        useful = self.d * self.beta
        self.useful_total += useful
        elapsed = (self.now - job.scheduled) / NS
        self.jobs_completed += 1
        if self.now >= self.warm:
            self.window.useful += useful
            self.window.repair_times.append(elapsed)
        self.tick.useful += useful
        self.tick.repair_times.append(elapsed)
        if obj.jobs:
            self._offer(obj, rep)

    # ---------------------------------------------------------------- metrics

    def _capacity_bytes(self, seconds: float) -> float:
        return self.a * self.cfg.initial_nodes * self.omega * seconds

    def _sample(self) -> None:
        self._push(self.now + self.interval, EV_SAMPLE, None)
        tick, self.tick = self.tick, _Accumulator()
        total = tick.useful + tick.wasted
        stats = _stats(tick.repair_times)
        self.rows.append((
            self.now / (DAY * NS),
            total / self._capacity_bytes(self.interval / NS),
            stats["mean"],
            stats["p95"],
            tick.wasted / total if total > 0 else None,
            len(self.online),
            self.below_k,
        ))

    def in_flight_bytes(self) -> float:
        """Bytes received by jobs that have neither completed nor been aborted."""
        received = 0.0
        for obj in self.objects:
            for job in obj.jobs:
                received += len(job.done) * self.beta
                for t in job.sources.values():
                    if t.state == ACTIVE:
                        received += self._partial(t)
        for job in self.unassigned:
            received += len(job.done) * self.beta
        return received

    def _summary(self) -> dict:
        window_s = (self.end - self.warm) / NS
        win = self.window
        if window_s <= 0:
            raise ValueError("empty measurement window")
        live = [len(o.holders) for o in self.objects]
        total_blocks = sum(live)
        uploaded = win.useful + win.wasted
        pending = sum(len(o.jobs) for o in self.objects)
        return {
            "measured_utilization": uploaded / self._capacity_bytes(window_s),
            "target_utilization": self.cfg.theoretical_utilization,
            "repair_time_stats": _stats(win.repair_times),
            "useful_bytes": win.useful,
            "wasted_bytes": win.wasted,
            "wasted_frac": win.wasted / uploaded if uploaded > 0 else None,
            "failed_restarts": self.restarts,
            "objects_below_k": self.below_k,
            "objects_lost": sum(1 for o in self.objects if o.lost),
            "blocks_per_object_stats": {
                "mean": total_blocks / len(live) if live else None,
                "min": min(live) if live else None,
                "max": max(live) if live else None,
            },
            "disk_bytes_total": total_blocks * self.alpha,
            "object_count": len(self.objects),
            "n": self.n,
            "k": self.k,
            "d": self.d,
            "alpha_bytes": self.alpha,
            "beta_bytes": self.beta,
            "repairs_scheduled": self.jobs_created,
            "repairs_completed": self.jobs_completed,
            "repairs_pending": pending,
            "loss_events": self.loss_events,
            "empirical_availability": self.online_time / self.node_time if self.node_time else None,
            "mean_population": self.node_time / window_s,
            "mean_lifetime_days": (math.fsum(self.lifetimes_ns) / len(self.lifetimes_ns) / NS / DAY
                                   if self.lifetimes_ns else None),
            "nodes_created": len(self.lifetimes_ns),
            "events": self.events,
            "seed": self.cfg.seed,
        }

    # ------------------------------------------------------------- invariants

    def check_invariants(self) -> None:
        per_object: dict[int, set[int]] = {}
        for node in self.nodes.values():
            assert node.up_active <= self.cap_up, f"node {node.id} exceeds upload cap"
            assert node.down_active <= self.cap_down, f"node {node.id} exceeds download cap"
            if not node.online:
                assert node.up_active == 0 and node.down_active == 0, f"off-line node {node.id} transferring"
                assert not node.repairs and not node.sending
            active_up = sum(1 for t in node.sending.values() if t.state == ACTIVE)
            assert active_up == node.up_active
            for oid in node.blocks:
                per_object.setdefault(oid, set()).add(node.id)
        for obj in self.objects:
            assert set(obj.holders) == per_object.get(obj.id, set()), f"object {obj.id} holder mismatch"
            reps = [j.repairer.id for j in obj.jobs if j.repairer is not None]
            assert len(reps) == len(set(reps)), "two jobs of one object on the same repairer"
            assert not set(reps) & set(obj.holders), "repairer already holds a block"
            for job in obj.jobs:
                assert len(job.done) + len(job.sources) <= self.d
                if job.repairer is None:
                    assert not job.sources and not job.done
        for job in self.unassigned:
            assert self.pick_repairer(job.obj) is None, "waiting job has an eligible repairer"
        below = sum(1 for o in self.objects if len(o.holders) < self.k)
        assert below == self.below_k
        expected = self.useful_total + self.wasted_total + self.in_flight_bytes()
        assert math.isclose(self.uploaded + self._active_partials(), expected, rel_tol=1e-9, abs_tol=1e-3), (
            "byte conservation violated")

    def _active_partials(self) -> float:
        return sum(self._partial(t) for node in self.nodes.values()
                   for t in node.sending.values() if t.state == ACTIVE)


def run(cfg: SimConfig, check_every: int = 0) -> SimResult:
    """Run one simulation to completion; deterministic for a fixed config and seed."""
    sim = Simulator(cfg, check_every=check_every)
    result = sim.run()
    logger.debug("run seed=%s events=%d", cfg.seed, sim.events)
    return result
