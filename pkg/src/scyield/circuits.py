"""Check-circuit composition and whole-chip asynchronous scheduling.

Each check compiles to INIT / (H) / gather-CNOTs / SWAP hops / (H) / MEAS.
Unit checks with a healthy home ancilla use fixed role-anchored templates
(depth 6 for Z, 8 for X) whose per-kind CNOT offsets are chosen so that a
fault-free chip schedules with zero conflicts.  Superunits and checks with a
faulty home search the smallest covering ancilla subset and the cheapest
traversal, with paired SWAPs restoring displaced data variables.

Scheduling allocates one slot per (device, step).  Deeper circuits get
priority; a blocked gate on a data device waits (identity padding), a blocked
syndrome device forces the whole instance to reschedule after the blocker.
Two checks of different kinds sharing data qubits must gather the shared
qubits in the same order whenever their access windows overlap.
"""

from __future__ import annotations

import itertools
from bisect import bisect_left
from dataclasses import dataclass, field

from .errors import UncoverableStabilizerError
from .lattice import Chip, DeviceId, is_data, neighbors
from .stabilizers import Stabilizer, StabilizerSet

CIRCUIT_FORMAT = "circuit-v1"

# Gather steps per role.  Z CNOTs occupy steps 1-4 (order N,W,S,E), X CNOTs
# steps 2-5 (order W,N,E,S) between the two Hadamards.  Vertical Z accesses
# land on odd steps and horizontal X accesses on even ones (and vice versa),
# which keeps fault-free neighbors conflict-free at every relative phase.
ROLE_STEP = {
    "Z": {"N": 1, "W": 2, "S": 3, "E": 4},
    "X": {"W": 2, "N": 3, "E": 4, "S": 5},
}
GATHER_ORDER = {"Z": ("N", "W", "S", "E"), "X": ("W", "N", "E", "S")}
UNIT_DEPTH = {"Z": 6, "X": 8}


@dataclass(frozen=True)
class Gate:
    kind: str  # INIT_Z | CNOT | SWAP | H | MEAS_Z | ID
    operands: tuple[DeviceId, ...]
    step: int
    owner: str | None = None

    def shifted(self, offset: int) -> "Gate":
        return Gate(self.kind, self.operands, self.step + offset, self.owner)


@dataclass(frozen=True)
class StabilizerCircuit:
    stab_id: str
    kind: str
    gates: tuple[Gate, ...]  # relative steps, sorted
    depth: int
    dq: int  # data qubits gathered
    q: int  # distinct devices touched
    home: DeviceId  # INIT device
    meas_device: DeviceId
    gather_steps: dict[DeviceId, int] = field(repr=False)  # data -> relative step
    device_uses: dict[DeviceId, tuple[int, ...]] = field(repr=False)


def unit_role(home: DeviceId, data: DeviceId) -> str:
    dr, dc = data[0] - home[0], data[1] - home[1]
    return {(-1, 0): "N", (1, 0): "S", (0, -1): "W", (0, 1): "E"}[(dr, dc)]


def _gather_gate(kind: str, data: DeviceId, carrier: DeviceId, step: int,
                 owner: str) -> Gate:
    if kind == "Z":
        return Gate("CNOT", (data, carrier), step, owner)
    return Gate("CNOT", (carrier, data), step, owner)


def _finish_circuit(stab: Stabilizer, gates: list[Gate], home: DeviceId,
                    meas_device: DeviceId) -> StabilizerCircuit:
    gates.sort(key=lambda g: (g.step, g.operands))
    depth = max(g.step for g in gates) + 1
    devices = sorted({d for g in gates for d in g.operands})
    gather_steps = {}
    for g in gates:
        if g.kind == "CNOT":
            data = g.operands[0] if stab.kind == "Z" else g.operands[1]
            gather_steps[data] = g.step
    uses: dict[DeviceId, list[int]] = {}
    for g in gates:
        for d in g.operands:
            uses.setdefault(d, []).append(g.step)
    return StabilizerCircuit(
        stab_id=stab.id, kind=stab.kind, gates=tuple(gates), depth=depth,
        dq=len(stab.data_qubits), q=len(devices), home=home,
        meas_device=meas_device, gather_steps=gather_steps,
        device_uses={d: tuple(sorted(s)) for d, s in uses.items()},
    )


def _compose_unit(stab: Stabilizer, chip: Chip) -> StabilizerCircuit:
    home = stab.homes[0]
    kind = stab.kind
    gates = [Gate("INIT_Z", (home,), 0, stab.id)]
    if kind == "X":
        gates.append(Gate("H", (home,), 1, stab.id))
    for d in stab.data_qubits:
        gates.append(_gather_gate(kind, d, home, ROLE_STEP[kind][unit_role(home, d)], stab.id))
    depth = UNIT_DEPTH[kind]
    if kind == "X":
        gates.append(Gate("H", (home,), depth - 2, stab.id))
    gates.append(Gate("MEAS_Z", (home,), depth - 1, stab.id))
    return _finish_circuit(stab, gates, home, home)


def _grid_path(chip: Chip, src: DeviceId, dst: DeviceId) -> tuple[DeviceId, ...] | None:
    """Shortest path over working devices, lexicographically smallest."""
    if src == dst:
        return (src,)
    best = {src: (src,)}
    frontier = {src: (src,)}
    while frontier:
        nxt: dict[DeviceId, tuple] = {}
        for node in sorted(frontier):
            path = frontier[node]
            for nb in neighbors(node, chip.n):
                if not chip.working[nb] or nb in best:
                    continue
                cand = path + (nb,)
                if nb not in nxt or cand < nxt[nb]:
                    nxt[nb] = cand
        if dst in nxt:
            return nxt[dst]
        best.update(nxt)
        frontier = nxt
    return None


def _emit_traversal(stab: Stabilizer, chip: Chip, ancillas: tuple[DeviceId, ...],
                    ) -> StabilizerCircuit | None:
    """Compose a circuit that walks the carrier variable along `ancillas`,
    gathering each data qubit at the first visited ancilla adjacent to it."""
    kind = stab.kind
    segs = []
    for a, b in zip(ancillas, ancillas[1:]):
        seg = _grid_path(chip, a, b)
        if seg is None:
            return None
        segs.append(seg)
    assigned: dict[DeviceId, list[DeviceId]] = {a: [] for a in ancillas}
    seen = set()
    for a in ancillas:
        order = GATHER_ORDER[kind]
        by_role = {unit_role(a, d): d for d in stab.data_qubits
                   if abs(d[0] - a[0]) + abs(d[1] - a[1]) == 1}
        for role in order:
            d = by_role.get(role)
            if d is not None and d not in seen:
                assigned[a].append(d)
                seen.add(d)
    if seen != set(stab.data_qubits):
        return None

    # One operation per time step, strictly in traversal order: restores do
    # not overlap later hops, matching the published cycle accounting.
    cursor = 0
    gates: list[Gate] = []

    def place(gkind: str, ops: tuple[DeviceId, ...]) -> None:
        nonlocal cursor
        gates.append(Gate(gkind, ops, cursor, stab.id))
        cursor += 1

    place("INIT_Z", (ancillas[0],))
    if kind == "X":
        place("H", (ancillas[0],))
    carrier = ancillas[0]
    for d in assigned[ancillas[0]]:
        place("CNOT", (d, carrier) if kind == "Z" else (carrier, d))
    for seg in segs:
        for u, v in zip(seg, seg[1:]):
            place("SWAP", (u, v))
        # Displaced variables sit one node behind; restore data in reverse
        # path order, bubbling the destination ancilla's variable backward.
        for j in range(len(seg) - 2, 0, -1):
            if is_data(seg[j]):
                place("SWAP", (seg[j - 1], seg[j]))
        carrier = seg[-1]
        for d in assigned.get(carrier, ()):
            place("CNOT", (d, carrier) if kind == "Z" else (carrier, d))
    if kind == "X":
        place("H", (carrier,))
    place("MEAS_Z", (carrier,))
    gates_out = list(gates)
    return _finish_circuit(stab, gates_out, ancillas[0], carrier)


def _covering_subsets(stab: Stabilizer, size: int) -> list[tuple[DeviceId, ...]]:
    cands = stab.ancilla_candidates
    coverage = {
        a: {d for d in stab.data_qubits
            if abs(d[0] - a[0]) + abs(d[1] - a[1]) == 1}
        for a in cands
    }
    out = []
    for subset in itertools.combinations(cands, size):
        covered = set()
        for a in subset:
            covered |= coverage[a]
        if covered == set(stab.data_qubits):
            out.append(subset)
    return out


def compose_stabilizer_circuit(stab: Stabilizer, chip: Chip) -> StabilizerCircuit:
    """Smallest covering ancilla subset, cheapest traversal among them."""
    cands = stab.ancilla_candidates
    cover_all = set()
    for a in cands:
        cover_all |= {d for d in stab.data_qubits
                      if abs(d[0] - a[0]) + abs(d[1] - a[1]) == 1}
    if cover_all != set(stab.data_qubits):
        missing = sorted(set(stab.data_qubits) - cover_all)
        raise UncoverableStabilizerError(
            f"{stab.id}: data qubits {missing} have no working adjacent ancilla")

    if (not stab.is_superunit and len(stab.homes) == 1
            and chip.working[stab.homes[0]]):
        return _compose_unit(stab, chip)

    best: StabilizerCircuit | None = None
    best_key = None
    for size in range(1, min(4, len(cands)) + 1):
        subsets = _covering_subsets(stab, size)
        for subset in subsets:
            for perm in itertools.permutations(subset):
                circ = _emit_traversal(stab, chip, perm)
                if circ is None:
                    continue
                key = (circ.depth, tuple((g.step, g.kind, g.operands) for g in circ.gates))
                if best_key is None or key < best_key:
                    best, best_key = circ, key
        if best is not None:
            return best
    # Greedy fallback for very large superunits: repeatedly take the ancilla
    # covering the most uncovered data qubits, then nearest-neighbor order.
    uncovered = set(stab.data_qubits)
    chosen = []
    while uncovered:
        scored = sorted(
            (len({d for d in uncovered
                  if abs(d[0] - a[0]) + abs(d[1] - a[1]) == 1}), a)
            for a in cands if a not in chosen)
        gain, a = scored[-1]
        if gain == 0:
            raise UncoverableStabilizerError(f"{stab.id}: no traversable cover")
        chosen.append(a)
        uncovered -= {d for d in uncovered
                      if abs(d[0] - a[0]) + abs(d[1] - a[1]) == 1}
    order = [chosen.pop(0)]
    while chosen:
        last = order[-1]
        chosen.sort(key=lambda a: (abs(a[0] - last[0]) + abs(a[1] - last[1]), a))
        order.append(chosen.pop(0))
    circ = _emit_traversal(stab, chip, tuple(order))
    if circ is None:
        raise UncoverableStabilizerError(f"{stab.id}: no traversable cover")
    return circ


# ---------------------------------------------------------------------------
# Whole-circuit scheduling


@dataclass(frozen=True)
class WholeCircuit:
    chip: Chip
    stabset: StabilizerSet
    circuits: dict[str, StabilizerCircuit]
    period: int
    gates: tuple[Gate, ...]  # one period, steps in [0, period)
    meas_slots: tuple[tuple[int, str, DeviceId], ...]  # (step, stab, device)
    ec_boundaries: tuple[int, ...]  # steps completing lattice coverage, per period
    stab_cycles: dict[str, float]  # steady-state steps between measurements

    @property
    def rounds_per_period(self) -> int:
        return len(self.ec_boundaries)

    @property
    def steps_per_ec_cycle(self) -> float:
        return self.period / len(self.ec_boundaries)

    def slot_round(self, slot_index: int) -> int:
        """Error-correction round (within one period) a measurement belongs to."""
        step = self.meas_slots[slot_index][0]
        return bisect_left(self.ec_boundaries, step)

    def dump(self) -> str:
        lines = [CIRCUIT_FORMAT, f"period {self.period}"]
        for g in sorted(self.gates, key=lambda g: (g.step, g.operands)):
            ops = ",".join(str(self.chip.linear(d)) for d in g.operands)
            lines.append(f"{g.step} {g.kind} {ops} {g.owner}")
        return "\n".join(lines) + "\n"


class _Scheduler:
    def __init__(self, circuits: list[StabilizerCircuit], chip: Chip,
                 shared_pairs: dict[str, list[tuple[str, tuple[DeviceId, ...]]]]):
        self.chip = chip
        self.circuits = {c.stab_id: c for c in circuits}
        self.shared = shared_pairs
        self.slots: dict[int, dict[DeviceId, int]] = {}
        self.instances: dict[int, tuple[str, int, int, dict[DeviceId, int]]] = {}
        self.by_stab: dict[str, list[int]] = {c.stab_id: [] for c in circuits}
        self.prev_end = {c.stab_id: -1 for c in circuits}
        self.gate_log: list[Gate] = []
        self.meas_log: list[tuple[int, str, DeviceId]] = []
        self.next_uid = 0

    def _free(self, step: int, dev: DeviceId) -> bool:
        return dev not in self.slots.get(step, ())

    def _occupant(self, step: int, dev: DeviceId) -> int | None:
        return self.slots.get(step, {}).get(dev)

    def _try_place(self, circ: StabilizerCircuit, start: int):
        """Place one instance with stretching.  Returns (placed, None) or
        (None, blocking_uid) on a syndrome-device conflict."""
        placed: list[tuple[Gate, int]] = []
        last_use: dict[DeviceId, tuple[int, int]] = {}  # dev -> (abs, rel)
        for g in circ.gates:
            lo = start + g.step
            for d in g.operands:
                if d in last_use:
                    abs_prev, rel_prev = last_use[d]
                    lo = max(lo, abs_prev + (g.step - rel_prev))
            step = lo
            while True:
                blockers = [d for d in g.operands if not self._free(step, d)]
                mine = [d for d in blockers
                        if self.instances[self._occupant(step, d)][0] == circ.stab_id]
                if mine:
                    step += 1
                    continue
                if not blockers:
                    break
                synd = [d for d in blockers if not is_data(d)]
                if synd:
                    return None, self._occupant(step, synd[0])
                step += 1
            placed.append((g, step))
            for d in g.operands:
                last_use[d] = (step, g.step)
        return placed, None

    def _violates_order(self, circ: StabilizerCircuit, placed) -> int | None:
        """Different-kind checks sharing data qubits must access overlapping
        shared pairs in the same order.  Returns a blocking uid or None."""
        gathers = {}
        for g, step in placed:
            if g.kind == "CNOT":
                data = g.operands[0] if circ.kind == "Z" else g.operands[1]
                gathers[data] = step
        for other_id, shared in self.shared.get(circ.stab_id, ()):
            for uid in self.by_stab[other_id]:
                _, ostart, oend, ogathers = self.instances[uid]
                for qa, qb in itertools.combinations(shared, 2):
                    t1, t2 = gathers[qa], gathers[qb]
                    u1, u2 = ogathers[qa], ogathers[qb]
                    if max(min(t1, t2), min(u1, u2)) > min(max(t1, t2), max(u1, u2)):
                        continue  # disjoint access windows
                    if (t1 < t2) != (u1 < u2):
                        return uid
        return None

    def place_instance(self, stab_id: str) -> int:
        circ = self.circuits[stab_id]
        start = self.prev_end[stab_id] + 1
        while True:
            placed, blocker = self._try_place(circ, start)
            if placed is None:
                start = max(start + 1, self.instances[blocker][2] + 1)
                continue
            blocker = self._violates_order(circ, placed)
            if blocker is not None:
                start = max(start + 1, self.instances[blocker][2] + 1)
                continue
            return self._commit(circ, placed)

    def _commit(self, circ: StabilizerCircuit, placed) -> int:
        uid = self.next_uid
        self.next_uid += 1
        end = max(step for _, step in placed)
        start = min(step for _, step in placed)
        gathers = {}
        uses: dict[DeviceId, list[tuple[int, int]]] = {}
        for g, step in placed:
            self.gate_log.append(Gate(g.kind, g.operands, step, circ.stab_id))
            if g.kind == "MEAS_Z":
                self.meas_log.append((step, circ.stab_id, g.operands[0]))
            if g.kind == "CNOT":
                data = g.operands[0] if circ.kind == "Z" else g.operands[1]
                gathers[data] = step
            for d in g.operands:
                self.slots.setdefault(step, {})[d] = uid
                uses.setdefault(d, []).append((step, g.step))
        # Lock the gaps between consecutive uses of each device; gaps grown
        # beyond the composed template are conflict waits and become noisy
        # identity gates.
        for d, use in uses.items():
            use.sort()
            for (a_abs, a_rel), (b_abs, b_rel) in zip(use, use[1:]):
                template_gap = b_rel - a_rel - 1
                extra = (b_abs - a_abs - 1) - template_gap
                for i, step in enumerate(range(a_abs + 1, b_abs)):
                    if self._free(step, d):
                        self.slots.setdefault(step, {})[d] = uid
                        if i >= template_gap:
                            self.gate_log.append(Gate("ID", (d,), step, circ.stab_id))
        self.instances[uid] = (circ.stab_id, start, end, gathers)
        self.by_stab[circ.stab_id].append(uid)
        self.prev_end[circ.stab_id] = end
        return end

    def fingerprint(self, w: int):
        rel_ends = tuple(sorted((sid, self.prev_end[sid] - w) for sid in self.prev_end))
        straddle = []
        for uid in sorted(self.instances):
            sid, start, end, gathers = self.instances[uid]
            if end > w:
                straddle.append((sid, start - w, end - w,
                                 tuple(sorted((q, t - w) for q, t in gathers.items()))))
        ahead = []
        for step in sorted(s for s in self.slots if s > w):
            for dev in sorted(self.slots[step]):
                ahead.append((step - w, dev))
        return (rel_ends, tuple(straddle), tuple(ahead))


def _shared_data_pairs(stabset: StabilizerSet) -> dict[str, list[tuple[str, tuple[DeviceId, ...]]]]:
    out: dict[str, list[tuple[str, tuple[DeviceId, ...]]]] = {}
    zs = stabset.by_kind("Z")
    xs = stabset.by_kind("X")
    for z in zs:
        zset = set(z.data_qubits)
        for x in xs:
            shared = tuple(sorted(zset & set(x.data_qubits)))
            if len(shared) >= 2:
                out.setdefault(z.id, []).append((x.id, shared))
                out.setdefault(x.id, []).append((z.id, shared))
    return out


def schedule_whole_circuit(circuits, max_step: int = 20000, *,
                           chip: Chip | None = None,
                           stabset: StabilizerSet | None = None) -> WholeCircuit:
    """Algorithm: sort by depth (deepest first, upper-left tie-break); the
    deepest instance paces a ceiling, everyone else repeats while they do not
    exceed it.  Runs until the relative schedule state recurs, then returns
    the periodic block."""
    circuits = list(circuits)
    if not circuits:
        raise ValueError("no stabilizer circuits to schedule")
    if stabset is None or chip is None:
        raise ValueError("schedule_whole_circuit requires chip= and stabset=")
    order = sorted(circuits, key=lambda c: (-c.depth, c.home))
    deepest, rest = order[0], order[1:]
    sched = _Scheduler(order, chip, _shared_data_pairs(stabset))

    seen: dict[tuple, int] = {}
    w1 = w2 = None
    w = 0
    while w <= max_step:
        w = sched.place_instance(deepest.stab_id)
        for c in rest:
            sched.place_instance(c.stab_id)
        while any(sched.prev_end[c.stab_id] <= w for c in rest):
            for c in rest:
                if sched.prev_end[c.stab_id] <= w:
                    sched.place_instance(c.stab_id)
        fp = sched.fingerprint(w)
        if fp in seen:
            w1, w2 = seen[fp], w
            break
        seen[fp] = w
    if w1 is None:
        raise RuntimeError(f"schedule did not become periodic within {max_step} steps")

    period = w2 - w1
    block = [g.shifted(-(w1 + 1)) for g in sched.gate_log if w1 < g.step <= w2]
    meas = sorted((s - (w1 + 1), sid, dev) for s, sid, dev in sched.meas_log
                  if w1 < s <= w2)
    boundaries = _ec_boundaries(meas, period, {c.stab_id for c in circuits})
    cycles = {}
    per_stab = {}
    for _, sid, _ in meas:
        per_stab[sid] = per_stab.get(sid, 0) + 1
    for c in circuits:
        cycles[c.stab_id] = period / per_stab[c.stab_id]
    return WholeCircuit(
        chip=chip, stabset=stabset,
        circuits={c.stab_id: c for c in circuits},
        period=period,
        gates=tuple(sorted(block, key=lambda g: (g.step, g.operands))),
        meas_slots=tuple(meas),
        ec_boundaries=boundaries,
        stab_cycles=cycles,
    )


def _ec_boundaries(meas, period: int, all_ids: set[str]) -> tuple[int, ...]:
    """Steps (within one steady period) at which every check has been
    measured since the previous boundary."""
    stream = []
    for copy in range(4):
        stream.extend((s + copy * period, sid) for s, sid, _ in meas)
    pending = set(all_ids)
    bounds = []
    for step, sid in stream:
        pending.discard(sid)
        if not pending:
            bounds.append(step)
            pending = set(all_ids)
    steady = sorted({b % period for b in bounds if period <= b < 3 * period})
    if not steady:
        raise RuntimeError("no coverage boundary found in a full period")
    counts = [sum(1 for b in bounds if k * period <= b < (k + 1) * period)
              for k in (1, 2)]
    if counts[0] != counts[1] or counts[0] != len(steady):
        raise RuntimeError("coverage boundaries are not periodic")
    return tuple(steady)


def compile_chip(stabset: StabilizerSet, max_step: int = 20000) -> WholeCircuit:
    """Compose every check circuit and schedule the whole chip."""
    chip = stabset.chip
    circuits = [compose_stabilizer_circuit(s, chip) for s in stabset.stabilizers]
    return schedule_whole_circuit(circuits, max_step, chip=chip, stabset=stabset)
