"""Planar-code device grid: roles, random fault generation, encodability.

The chip is a (2d-1) x (2d-1) grid of devices. Data qubits sit on cells with
even row+col (corners included), syndrome qubits on the odd-parity cells.
Z-check homes occupy odd rows / even columns, X-check homes even rows / odd
columns.  The horizontal logical operator terminates on the west/east edges,
the vertical one on north/south.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import UnencodableChipError

DeviceId = tuple[int, int]

NORTH, SOUTH, WEST, EAST = "N", "S", "W", "E"

# Boundary pair terminated by each logical operator kind.  An X chain runs
# north-south, a Z chain west-east.
OPERATOR_TERMINALS = {"X": (NORTH, SOUTH), "Z": (WEST, EAST)}

CHIP_FORMAT = "chip-v1"


def grid_size(distance: int) -> int:
    return 2 * distance - 1


def is_data(device: DeviceId) -> bool:
    r, c = device
    return (r + c) % 2 == 0


def syndrome_kind(device: DeviceId) -> str:
    r, c = device
    if (r + c) % 2 == 0:
        raise ValueError(f"{device} is a data device")
    return "Z" if r % 2 == 1 else "X"


def neighbors(device: DeviceId, n: int) -> list[DeviceId]:
    r, c = device
    out = []
    for rr, cc in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)):
        if 0 <= rr < n and 0 <= cc < n:
            out.append((rr, cc))
    return out


@dataclass(frozen=True)
class Chip:
    """Immutable fabricated chip: geometry plus the working/faulty map."""

    distance: int
    qubit_yield: float
    seed: int
    working: np.ndarray = field(repr=False)  # (n, n) bool

    @property
    def n(self) -> int:
        return grid_size(self.distance)

    def is_working(self, device: DeviceId) -> bool:
        return bool(self.working[device])

    def devices(self) -> Iterable[DeviceId]:
        n = self.n
        return ((r, c) for r in range(n) for c in range(n))

    def data_devices(self) -> list[DeviceId]:
        return [d for d in self.devices() if is_data(d)]

    def syndrome_devices(self) -> list[DeviceId]:
        return [d for d in self.devices() if not is_data(d)]

    def faulty_devices(self) -> list[DeviceId]:
        return [d for d in self.devices() if not self.working[d]]

    def faulty_data(self) -> list[DeviceId]:
        return [d for d in self.faulty_devices() if is_data(d)]

    def faulty_syndrome(self) -> list[DeviceId]:
        return [d for d in self.faulty_devices() if not is_data(d)]

    def linear(self, device: DeviceId) -> int:
        return device[0] * self.n + device[1]

    def from_linear(self, label: int) -> DeviceId:
        return divmod(label, self.n)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        devices = [
            {"role": "data" if is_data(d) else "syndrome",
             "working": bool(self.working[d])}
            for d in self.devices()
        ]
        return json.dumps(
            {
                "format": CHIP_FORMAT,
                "distance": self.distance,
                "yield": self.qubit_yield,
                "seed": self.seed,
                "devices": devices,
            },
            indent=None,
        )

    @classmethod
    def from_json(cls, text: str) -> "Chip":
        obj = json.loads(text)
        if obj.get("format") != CHIP_FORMAT:
            raise ValueError(f"unsupported chip format: {obj.get('format')!r}")
        d = int(obj["distance"])
        n = grid_size(d)
        devices = obj["devices"]
        if len(devices) != n * n:
            raise ValueError(f"expected {n * n} devices, got {len(devices)}")
        working = np.ones((n, n), dtype=bool)
        for idx, entry in enumerate(devices):
            r, c = divmod(idx, n)
            role = "data" if is_data((r, c)) else "syndrome"
            if entry["role"] != role:
                raise ValueError(f"device ({r},{c}) has role {entry['role']}, expected {role}")
            working[r, c] = bool(entry["working"])
        return cls(distance=d, qubit_yield=float(obj["yield"]),
                   seed=int(obj["seed"]), working=working)


def generate_chip(distance: int, qubit_yield: float, seed: int) -> Chip:
    """Fabricate a chip: each device works independently with probability
    `qubit_yield`.  One generator per chip, row-major draw order, so chips
    are reproducible bit-for-bit from (distance, yield, seed)."""
    if distance < 2:
        raise ValueError("distance must be >= 2")
    if not 0.0 < qubit_yield <= 1.0:
        raise ValueError("yield must be in (0, 1]")
    n = grid_size(distance)
    rng = np.random.default_rng(seed)
    working = rng.random((n, n)) < qubit_yield
    return Chip(distance=distance, qubit_yield=qubit_yield, seed=seed,
                working=working)


def unit_stabilizers(distance: int) -> list[tuple[str, DeviceId, tuple[DeviceId, ...]]]:
    """All unit checks of the fault-free layout as (kind, home, support)."""
    n = grid_size(distance)
    out = []
    for r in range(n):
        for c in range(n):
            if (r + c) % 2 == 1:
                home = (r, c)
                support = tuple(sorted(neighbors(home, n)))
                out.append((syndrome_kind(home), home, support))
    return out


def _boundary_tags(device: DeviceId, n: int, kind: str) -> set[str]:
    """Boundary pair a data device touches, for stabilizers of `kind`.

    Z checks are removed toward the north/south edges, X checks toward
    west/east."""
    r, c = device
    tags = set()
    if kind == "Z":
        if r == 0:
            tags.add(NORTH)
        if r == n - 1:
            tags.add(SOUTH)
    else:
        if c == 0:
            tags.add(WEST)
        if c == n - 1:
            tags.add(EAST)
    return tags


def check_encodable(chip: Chip) -> bool:
    """A chip is unencodable when a chain of faulty data qubits, chained by
    membership in a common unit check, stretches between a boundary pair:
    north-south through Z checks or west-east through X checks."""
    for kind in ("Z", "X"):
        if _faulty_chain_spans(chip, kind):
            return False
    return True


def _faulty_chain_spans(chip: Chip, kind: str) -> bool:
    n = chip.n
    faulty = [d for d in chip.faulty_data()]
    if not faulty:
        return False
    index = {d: i for i, d in enumerate(faulty)}
    first, second = len(faulty), len(faulty) + 1  # virtual boundary nodes
    parent = list(range(len(faulty) + 2))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    tag_first, tag_second = OPERATOR_TERMINALS["X" if kind == "Z" else "Z"]
    for d in faulty:
        tags = _boundary_tags(d, n, kind)
        if tag_first in tags:
            union(index[d], first)
        if tag_second in tags:
            union(index[d], second)
    for _, home, support in unit_stabilizers(chip.distance):
        if syndrome_kind(home) != kind:
            continue
        members = [q for q in support if not chip.working[q]]
        for a, b in zip(members, members[1:]):
            union(index[a], index[b])
    return find(first) == find(second)


def reduced_distance(chip: Chip, operator_type: str) -> int:
    """Length, in data qubits, of the shortest logical chain of the given
    kind on the reconfigured lattice."""
    if operator_type not in ("X", "Z"):
        raise ValueError("operator_type must be 'X' or 'Z'")
    if not check_encodable(chip):
        raise UnencodableChipError(
            f"chip d={chip.distance} seed={chip.seed} cannot encode a logical qubit")
    from .stabilizers import build_stabilizer_set

    stabset = build_stabilizer_set(chip)
    path = stabset.logical_operator_paths[operator_type]
    return len(path)


def logical_chain(chip: Chip, operator_type: str,
                  crossing_supports: list[frozenset],
                  sources: set[DeviceId], targets: set[DeviceId]) -> tuple[DeviceId, ...]:
    """Shortest chain of working data qubits from `sources` to `targets`
    where consecutive qubits share one of `crossing_supports`.  Ties broken
    toward the lexicographically smallest path."""
    adjacency: dict[DeviceId, set[DeviceId]] = {}
    for support in crossing_supports:
        members = sorted(support)
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                adjacency.setdefault(a, set()).add(b)
                adjacency.setdefault(b, set()).add(a)
    best: dict[DeviceId, tuple] = {}
    frontier = {}
    for s in sorted(sources):
        frontier[s] = (s,)
    visited = set(frontier)
    while frontier:
        hits = sorted((path, node) for node, path in frontier.items() if node in targets)
        if hits:
            return hits[0][0]
        nxt: dict[DeviceId, tuple] = {}
        for node in sorted(frontier):
            path = frontier[node]
            for nb in sorted(adjacency.get(node, ())):
                if nb in visited:
                    continue
                cand = path + (nb,)
                if nb not in nxt or cand < nxt[nb]:
                    nxt[nb] = cand
        visited.update(nxt)
        frontier = nxt
    raise UnencodableChipError(f"no {operator_type} chain between boundaries")
