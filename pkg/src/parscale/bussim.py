"""Discrete-event simulation of neuron-to-neuron messaging over wires or a shared bus.

Layers of a layered network talk stage by stage: stage ``s`` carries the outputs
of layer ``s`` to every neuron of layer ``s+1``.  With direct wiring all of a
stage's messages travel concurrently and take ``T_d``.  On the shared bus every
sender needs one arbitrated bus transaction (reaching the bus twice, ``2*T_B``),
after which its message is delivered to the whole next layer in ``T_d + X``.
Transactions are serialized, so the last receiver of a stage with ``L`` senders
has everything after ``L*2*T_B + T_d + X``.

Time is kept in integer picoseconds throughout.  Events with equal time are
ordered by ``(kind priority, source id, insertion order)``.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import random
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional

from .workloads import AnnTopology

PS_PER_UNIT = {"ps": 1, "ns": 10**3, "us": 10**6, "ms": 10**9, "s": 10**12}

MAX_NEURONS = 100_000
MAX_EVENTS = 50_000_000

BROADCAST = -1


class SimulationError(RuntimeError):
    pass


class SimulationLimitError(SimulationError):
    """Topology larger than the configured desk-scale cap."""


class EventQueueOverflow(SimulationError):
    """Too many events; the partial run is discarded."""


def parse_duration(text: str) -> int:
    """``'5ns'`` -> 5000 (picoseconds).  A unit suffix is mandatory."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ps|ns|us|ms|s)\s*", str(text))
    if m is None:
        raise ValueError(f"duration {text!r} needs a unit suffix (ps, ns, us, ms, s)")
    value, unit = m.groups()
    ps = float(value) * PS_PER_UNIT[unit]
    if ps != round(ps):
        raise ValueError(f"duration {text!r} is not a whole number of picoseconds")
    return int(round(ps))


def format_ps(ps: int) -> str:
    for unit in ("s", "ms", "us", "ns"):
        if ps and ps % PS_PER_UNIT[unit] == 0:
            return f"{ps // PS_PER_UNIT[unit]}{unit}"
    return f"{ps}ps"


@dataclass(frozen=True)
class BusTiming:
    """Temporal parameters in picoseconds.

    ``foreign_range`` switches the foreign-traffic delay to a seeded uniform
    draw per bus acquisition; otherwise every acquisition pays ``t_foreign``.
    """

    t_bus_reach: int
    t_delivery: int
    t_process: int
    t_foreign: int = 0
    foreign_range: Optional[tuple] = None

    def __post_init__(self):
        for name in ("t_bus_reach", "t_delivery", "t_process", "t_foreign"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer number of ps, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.foreign_range is not None:
            lo, hi = (int(x) for x in self.foreign_range)
            if not 0 <= lo <= hi:
                raise ValueError("foreign_range must satisfy 0 <= lo <= hi")
            object.__setattr__(self, "foreign_range", (lo, hi))

    @property
    def bus_slot(self) -> int:
        """Time one transaction holds the bus."""
        return 2 * self.t_bus_reach


@dataclass(frozen=True)
class GridClock:
    grid_period: int = 10**9  # 1 ms
    device_clock: int = 10**3  # 1 ns

    def __post_init__(self):
        if not self.grid_period >= self.device_clock > 0:
            raise ValueError("need grid_period >= device_clock > 0")


@dataclass(frozen=True)
class DropPolicy:
    """``max_busy_cycles=None`` never drops."""

    max_busy_cycles: Optional[int] = None

    def __post_init__(self):
        if self.max_busy_cycles is not None and self.max_busy_cycles < 1:
            raise ValueError("max_busy_cycles must be >= 1")


class Wiring(str, Enum):
    DIRECT = "direct"
    SHARED_BUS = "shared-bus"


@dataclass(frozen=True)
class SimTopology:
    topology: AnnTopology
    wiring: Wiring = Wiring.SHARED_BUS
    arbitration: str = "fifo"
    per_layer_bus: bool = False

    def __post_init__(self):
        object.__setattr__(self, "wiring", Wiring(self.wiring))
        if self.arbitration != "fifo":
            raise ValueError(f"unsupported arbitration policy {self.arbitration!r}")


class EventKind(IntEnum):
    # value is the tie-break priority among events at the same instant
    DELIVERY_COMPLETE = 0
    DROPPED = 1
    GRID_TICK = 2
    COMPUTE_START = 3
    COMPUTE_DONE = 4
    SEND_REQUEST = 5
    BUS_GRANTED = 6

    @property
    def label(self) -> str:
        return "".join(w.capitalize() for w in self.name.split("_"))


@dataclass(frozen=True)
class Event:
    time: int
    kind: EventKind
    source: int
    destination: int

    def row(self):
        dest = "broadcast" if self.destination == BROADCAST else self.destination
        return (self.time, self.kind.label, self.source, dest)


def layer_transfer_time(timing: BusTiming, senders: int, wiring: Wiring = Wiring.SHARED_BUS) -> int:
    """Time (ps) until the last receiver holds all messages of ``senders`` senders."""
    if senders < 1:
        raise ValueError("senders must be >= 1")
    if Wiring(wiring) is Wiring.DIRECT:
        return timing.t_delivery
    return senders * 2 * timing.t_bus_reach + timing.t_delivery + timing.t_foreign


@dataclass
class StageStats:
    senders: int
    receivers: int
    first_request: int = -1
    last_delivery: int = -1
    closed_form: int = 0

    @property
    def duration(self) -> int:
        return self.last_delivery - self.first_request


@dataclass
class SimReport:
    topology: str
    wiring: str
    mode: str
    seed: int
    timing: dict
    total_time_ps: int
    stages: list
    idle_ps: list
    busy_ps: list
    messages_sent: int
    messages_delivered: int
    messages_dropped: int
    messages_in_flight: int
    bus_transactions: int
    bus_busy_ps: int
    glitch_window_ps: list
    grid_steps: Optional[int] = None
    events: list = field(default_factory=list, repr=False)

    @property
    def bus_utilization(self) -> float:
        return self.bus_busy_ps / self.total_time_ps if self.total_time_ps else 0.0

    @property
    def stage_transfer_ps(self) -> list:
        """Per stage: last delivery minus first send request."""
        return [s.duration for s in self.stages]

    def to_dict(self, per_neuron: bool = True) -> dict:
        ratio = apparent_processing_ratio(self)
        d = {
            "topology": self.topology,
            "wiring": self.wiring,
            "mode": self.mode,
            "seed": self.seed,
            "timing_ps": self.timing,
            "total_time_ps": self.total_time_ps,
            "stages": [
                {
                    "stage": i,
                    "senders": s.senders,
                    "receivers": s.receivers,
                    "first_request_ps": s.first_request,
                    "last_delivery_ps": s.last_delivery,
                    "transfer_time_ps": s.duration,
                    "closed_form_ps": s.closed_form,
                }
                for i, s in enumerate(self.stages)
            ],
            "messages_sent": self.messages_sent,
            "messages_delivered": self.messages_delivered,
            "messages_dropped": self.messages_dropped,
            "messages_in_flight": self.messages_in_flight,
            "bus_transactions": self.bus_transactions,
            "bus_busy_ps": self.bus_busy_ps,
            "bus_utilization": self.bus_utilization,
            "apparent_ratio_mean": ratio.mean,
            "apparent_ratio_max": ratio.max,
            "glitch_window_ps_max": max(self.glitch_window_ps, default=0),
            "grid_steps": self.grid_steps,
        }
        if per_neuron:
            d["idle_ps"] = self.idle_ps
            d["busy_ps"] = self.busy_ps
        return d

    def to_json(self, per_neuron: bool = True) -> str:
        return json.dumps(self.to_dict(per_neuron), sort_keys=True, indent=2)

    def events_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("time_ps", "kind", "source", "destination"))
        for ev in self.events:
            w.writerow(ev.row())
        return buf.getvalue()


@dataclass(frozen=True)
class ApparentRatio:
    mean: float
    max: float


def apparent_processing_ratio(report: SimReport) -> ApparentRatio:
    """``(idle + busy) / busy`` over every computing (non-input) neuron."""
    ratios = [(i + b) / b for i, b in zip(report.idle_ps, report.busy_ps) if b > 0]
    if not ratios:
        return ApparentRatio(float("nan"), float("nan"))
    return ApparentRatio(sum(ratios) / len(ratios), max(ratios))


def drop_count(report: SimReport) -> int:
    return report.messages_dropped


@dataclass(frozen=True)
class GridBound:
    steps: float
    clock_ratio: float


def grid_performance_bound(grid: GridClock, wall_time_ps: int) -> GridBound:
    """Synchronized steps that fit in ``wall_time_ps``, and grid-to-device clock ratio."""
    if not wall_time_ps > 0:
        raise ValueError("wall time must be positive")
    return GridBound(wall_time_ps / grid.grid_period, grid.grid_period / grid.device_clock)


class _Receiver:
    __slots__ = ("busy", "start", "queue", "accounted", "computes", "first_done", "last_done")

    def __init__(self):
        self.busy = False
        self.start = -1
        self.queue = deque()
        self.accounted = 0
        self.computes = 0
        self.first_done = -1
        self.last_done = -1


class _Simulation:
    def __init__(self, sim, timing, grid, drop, mode, grid_sync, seed, record_events, max_events):
        self.sim = sim
        self.timing = timing
        self.grid = grid
        self.drop = drop
        self.mode = mode
        self.grid_sync = grid_sync
        self.seed = seed
        self.record = record_events
        self.max_events = max_events
        self.rng = random.Random(seed)

        topo = sim.topology
        self.sizes = topo.layer_sizes()
        self.offsets = [0]
        for s in self.sizes:
            self.offsets.append(self.offsets[-1] + s)
        self.n_neurons = self.offsets[-1]
        self.layer_of = []
        for layer, s in enumerate(self.sizes):
            self.layer_of.extend([layer] * s)
        self.shared = sim.wiring is Wiring.SHARED_BUS
        n_stages = len(self.sizes) - 1
        self.stages = [
            StageStats(
                self.sizes[s],
                self.sizes[s + 1],
                closed_form=layer_transfer_time(timing, self.sizes[s], sim.wiring),
            )
            for s in range(n_stages)
        ]

        self.heap = []
        self.seq = 0
        self.processed = 0
        self.log = []

        n_bus = n_stages if sim.per_layer_bus else 1
        self.bus_queue = [[] for _ in range(n_bus)]
        self.bus_free_at = [0] * n_bus
        self.grant_pending = [False] * n_bus
        self.bus_transactions = 0
        self.bus_busy = 0

        self.stage_ref = [0] * len(self.sizes)  # first send request feeding each layer
        self.compute_start = [-1] * self.n_neurons
        self.busy_ps = [0] * self.n_neurons
        self.done_at = [-1] * self.n_neurons
        self.layer_received = [0] * len(self.sizes)
        self.receivers = [_Receiver() for _ in range(self.n_neurons)] if mode == "streaming" else None
        self.grid_ticks = set()

        self.sent = self.delivered = self.dropped = 0

        if self.shared:
            slot = timing.bus_slot + timing.t_delivery + timing.t_foreign
        else:
            slot = timing.t_delivery
        self.delivery_cycle = max(slot, grid.device_clock)

    # -- queue ---------------------------------------------------------------
    def push(self, time, kind, source, destination=BROADCAST):
        heapq.heappush(self.heap, (time, kind, source, self.seq, destination))
        self.seq += 1

    def emit(self, time, kind, source, destination):
        self.processed += 1
        if self.processed > self.max_events:
            raise EventQueueOverflow(f"more than {self.max_events} events; run discarded")
        if self.record:
            self.log.append(Event(time, kind, source, destination))

    # -- helpers ---------------------------------------------------------------
    def align(self, t):
        if not self.grid_sync:
            return t
        g = self.grid.grid_period
        tick = -(-t // g) * g
        if tick not in self.grid_ticks:
            self.grid_ticks.add(tick)
            self.push(tick, EventKind.GRID_TICK, BROADCAST, BROADCAST)
        return tick

    def foreign_delay(self):
        r = self.timing.foreign_range
        if r is None:
            return self.timing.t_foreign
        return self.rng.randint(r[0], r[1])

    def bus_of(self, layer):
        return layer if self.sim.per_layer_bus else 0

    # -- run -------------------------------------------------------------------
    def run(self) -> SimReport:
        for src in range(self.sizes[0]):
            self.push(0, EventKind.SEND_REQUEST, src)
        handlers = {
            EventKind.DELIVERY_COMPLETE: self.on_delivery,
            EventKind.COMPUTE_START: self.on_compute_start,
            EventKind.COMPUTE_DONE: self.on_compute_done,
            EventKind.SEND_REQUEST: self.on_send_request,
            EventKind.BUS_GRANTED: self.on_bus_granted,
            EventKind.GRID_TICK: self.on_grid_tick,
        }
        while self.heap:
            time, kind, source, _, dest = heapq.heappop(self.heap)
            handlers[kind](time, source, dest)
        return self.report()

    def on_grid_tick(self, t, source, dest):
        self.emit(t, EventKind.GRID_TICK, source, dest)

    def on_send_request(self, t, src, dest):
        self.emit(t, EventKind.SEND_REQUEST, src, BROADCAST)
        layer = self.layer_of[src]
        stage = self.stages[layer]
        if stage.first_request < 0:
            stage.first_request = t
            self.stage_ref[layer + 1] = t
        self.sent += stage.receivers
        if not self.shared:
            self.push(t + self.timing.t_delivery, EventKind.DELIVERY_COMPLETE, src)
            return
        bus = self.bus_of(layer)
        heapq.heappush(self.bus_queue[bus], (t, src))
        if not self.grant_pending[bus]:
            self.grant_pending[bus] = True
            self.push(max(t, self.bus_free_at[bus]), EventKind.BUS_GRANTED, bus)

    def on_bus_granted(self, t, bus, dest):
        _, src = heapq.heappop(self.bus_queue[bus])
        self.emit(t, EventKind.BUS_GRANTED, src, BROADCAST)
        slot = self.timing.bus_slot
        self.bus_transactions += 1
        self.bus_busy += slot
        self.push(t + slot + self.timing.t_delivery + self.foreign_delay(), EventKind.DELIVERY_COMPLETE, src)
        self.bus_free_at[bus] = t + slot
        if self.bus_queue[bus]:
            self.push(t + slot, EventKind.BUS_GRANTED, bus)
        else:
            self.grant_pending[bus] = False

    def on_delivery(self, t, src, dest):
        self.emit(t, EventKind.DELIVERY_COMPLETE, src, BROADCAST)
        layer = self.layer_of[src] + 1
        stage = self.stages[layer - 1]
        stage.last_delivery = max(stage.last_delivery, t)
        lo, hi = self.offsets[layer], self.offsets[layer + 1]
        if self.receivers is None:
            # synchronized: every receiver of the layer sees the same arrivals
            self.delivered += hi - lo
            self.layer_received[layer] += 1
            if self.layer_received[layer] == self.sizes[layer - 1]:
                start = self.align(t)
                for r in range(lo, hi):
                    self.push(start, EventKind.COMPUTE_START, r, r)
            return
        for r in range(lo, hi):
            self.stream_arrival(t, src, r)

    def stream_arrival(self, t, src, r):
        rec = self.receivers[r]
        if rec.busy and rec.start != t:
            rec.queue.append((t, src))
            return
        self.delivered += 1
        rec.accounted += 1
        if not rec.busy:
            self.begin_compute(t, r)
        # else: a simultaneous arrival joins the computation starting now

    def begin_compute(self, t, r):
        rec = self.receivers[r]
        rec.busy = True
        start = self.align(t)
        rec.start = start
        self.push(start, EventKind.COMPUTE_START, r, r)

    def on_compute_start(self, t, r, dest):
        self.emit(t, EventKind.COMPUTE_START, r, r)
        if self.compute_start[r] < 0:
            self.compute_start[r] = t
        self.busy_ps[r] += self.timing.t_process
        self.push(t + self.timing.t_process, EventKind.COMPUTE_DONE, r, r)

    def on_compute_done(self, t, r, dest):
        self.emit(t, EventKind.COMPUTE_DONE, r, r)
        self.done_at[r] = t
        layer = self.layer_of[r]
        if self.receivers is not None:
            rec = self.receivers[r]
            rec.busy = False
            rec.computes += 1
            if rec.first_done < 0:
                rec.first_done = t
            rec.last_done = t
            limit = None if self.drop.max_busy_cycles is None else self.drop.max_busy_cycles * self.delivery_cycle
            while rec.queue:
                arrived, src = rec.queue.popleft()
                rec.accounted += 1
                if limit is not None and t - arrived > limit:
                    self.dropped += 1
                    self.emit(t, EventKind.DROPPED, src, r)
                    continue
                self.delivered += 1
                self.begin_compute(t, r)
                return
            if rec.accounted < self.sizes[layer - 1]:
                return
        if layer + 1 < len(self.sizes):
            self.push(t, EventKind.SEND_REQUEST, r)

    def report(self) -> SimReport:
        outputs = range(self.offsets[-2], self.offsets[-1])
        total = max(self.done_at[r] for r in outputs)
        idle = [0] * self.n_neurons
        for r in range(self.sizes[0], self.n_neurons):
            ref = self.stage_ref[self.layer_of[r]]
            idle[r] = self.done_at[r] - ref - self.busy_ps[r]
        glitch = []
        if self.receivers is not None:
            glitch = [rec.last_done - rec.first_done for rec in self.receivers[self.sizes[0]:]]
        grid_steps = None
        if self.grid_sync:
            grid_steps = -(-total // self.grid.grid_period)
        t = self.timing
        timing = {
            "t_bus_reach": t.t_bus_reach,
            "t_delivery": t.t_delivery,
            "t_process": t.t_process,
            "t_foreign": t.t_foreign,
            "foreign_range": list(t.foreign_range) if t.foreign_range else None,
        }
        return SimReport(
            topology=str(self.sim.topology),
            wiring=self.sim.wiring.value,
            mode=self.mode,
            seed=self.seed,
            timing=timing,
            total_time_ps=total,
            stages=self.stages,
            idle_ps=idle,
            busy_ps=self.busy_ps,
            messages_sent=self.sent,
            messages_delivered=self.delivered,
            messages_dropped=self.dropped,
            messages_in_flight=self.sent - self.delivered - self.dropped,
            bus_transactions=self.bus_transactions,
            bus_busy_ps=self.bus_busy,
            glitch_window_ps=glitch,
            grid_steps=grid_steps,
            events=self.log,
        )


def simulate(
    sim: SimTopology,
    timing: BusTiming,
    grid: GridClock = GridClock(),
    drop: DropPolicy = DropPolicy(),
    *,
    mode: str = "synchronized",
    grid_sync: bool = False,
    seed: int = 0,
    record_events: bool = True,
    max_neurons: int = MAX_NEURONS,
    max_events: int = MAX_EVENTS,
) -> SimReport:
    """Run one forward pass of ``sim.topology`` and return its :class:`SimReport`.

    ``mode='synchronized'`` lets a neuron compute only once all of its inputs
    have arrived; ``mode='streaming'`` recomputes on every arrival (one input
    at a time, simultaneous arrivals together) and forwards only the final
    value, reporting per neuron how long the output differed from it.
    Messages queued at a busy receiver for longer than
    ``drop.max_busy_cycles`` delivery cycles are dropped.
    ``grid_sync`` delays every computation to the next grid tick.
    """
    if mode not in ("synchronized", "streaming"):
        raise ValueError(f"unknown mode {mode!r}")
    if sim.topology.n_neurons > max_neurons:
        raise SimulationLimitError(f"{sim.topology.n_neurons} neurons exceed the cap of {max_neurons}")
    run = _Simulation(sim, timing, grid, drop, mode, grid_sync, seed, record_events, max_events)
    return run.run()
