"""Reconfigured check operators for a defective chip.

Faulty data qubits are excised by merging the unit checks that contain them
into superunits; broken checks that cannot merge (their faulty qubit touches
only one check of that kind) are dropped and their surviving data qubits are
promoted to the corresponding lattice boundary.  Faulty syndrome devices
never appear as ancilla candidates but leave supports untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UnencodableChipError
from .lattice import (
    Chip,
    DeviceId,
    OPERATOR_TERMINALS,
    check_encodable,
    is_data,
    logical_chain,
    neighbors,
    syndrome_kind,
    unit_stabilizers,
)

STABSET_FORMAT = "stabset-v1"


@dataclass(frozen=True)
class Stabilizer:
    id: str
    kind: str  # 'Z' or 'X'
    data_qubits: tuple[DeviceId, ...]
    ancilla_candidates: tuple[DeviceId, ...]
    homes: tuple[DeviceId, ...]  # home syndrome devices of the merged units

    @property
    def merged_from(self) -> int:
        return len(self.homes)

    @property
    def is_superunit(self) -> bool:
        return len(self.homes) > 1


@dataclass(frozen=True)
class StabilizerSet:
    chip: Chip
    stabilizers: tuple[Stabilizer, ...]
    # Per kind, for every working data qubit: the boundary tags it touches for
    # checks of that kind (natural edges plus promotions from removed checks).
    boundary_data: dict[str, dict[DeviceId, frozenset[str]]]
    logical_operator_paths: dict[str, tuple[DeviceId, ...]] = field(default_factory=dict)

    def by_kind(self, kind: str) -> list[Stabilizer]:
        return [s for s in self.stabilizers if s.kind == kind]

    def counts(self) -> dict[str, int]:
        return {"Z": len(self.by_kind("Z")), "X": len(self.by_kind("X"))}

    def stabilizer(self, stab_id: str) -> Stabilizer:
        for s in self.stabilizers:
            if s.id == stab_id:
                return s
        raise KeyError(stab_id)

    def dump(self) -> str:
        lines = [STABSET_FORMAT]
        for s in self.stabilizers:
            data = ",".join(f"{r}.{c}" for r, c in s.data_qubits)
            anc = ",".join(f"{r}.{c}" for r, c in s.ancilla_candidates)
            lines.append(f"{s.id} {s.kind} merged={s.merged_from} data:{data} anc:{anc}")
        return "\n".join(lines) + "\n"


def _stab_id(kind: str, homes: tuple[DeviceId, ...]) -> str:
    return kind + "+".join(f"{r}.{c}" for r, c in homes)


def build_stabilizer_set(chip: Chip) -> StabilizerSet:
    if not check_encodable(chip):
        raise UnencodableChipError(
            f"chip d={chip.distance} seed={chip.seed} cannot encode a logical qubit")
    n = chip.n
    stabilizers: list[Stabilizer] = []
    boundary_data: dict[str, dict[DeviceId, frozenset[str]]] = {}

    for kind in ("Z", "X"):
        units = {}
        for k, home, support in unit_stabilizers(chip.distance):
            if k == kind:
                units[(home,)] = set(support)
        tags: dict[DeviceId, set[str]] = {}
        first_tag, second_tag = OPERATOR_TERMINALS["X" if kind == "Z" else "Z"]
        for d in chip.data_devices():
            t = set()
            if kind == "Z":
                if d[0] == 0:
                    t.add(first_tag)
                if d[0] == n - 1:
                    t.add(second_tag)
            else:
                if d[1] == 0:
                    t.add(first_tag)
                if d[1] == n - 1:
                    t.add(second_tag)
            tags[d] = t

        # Merge/remove to a fixed point, faulty qubits in device order.
        while True:
            pending = sorted(
                q for homes, support in units.items() for q in support
                if not chip.working[q])
            if not pending:
                break
            q = pending[0]
            containing = sorted(h for h, sup in units.items() if q in sup)
            if len(containing) == 2:
                a, b = containing
                merged = (units[a] | units[b]) - {q}
                homes = tuple(sorted(a + b))
                del units[a], units[b]
                units[homes] = merged
            else:
                (homes,) = containing
                promote = tags[q]
                if not promote:
                    raise UnencodableChipError(
                        f"faulty qubit {q} breaks a {kind} check with no boundary to retreat to")
                for member in units[homes]:
                    tags[member] |= promote
                del units[homes]
        for homes in sorted(units):
            support = units[homes]
            if not support:
                continue
            data = tuple(sorted(support))
            cands = set()
            for d in data:
                for nb in neighbors(d, n):
                    if not is_data(nb) and chip.working[nb]:
                        cands.add(nb)
            stabilizers.append(Stabilizer(
                id=_stab_id(kind, homes),
                kind=kind,
                data_qubits=data,
                ancilla_candidates=tuple(sorted(cands)),
                homes=homes,
            ))
        boundary_data[kind] = {
            d: frozenset(tags[d]) for d in chip.data_devices() if chip.working[d]
        }

    stabset = StabilizerSet(chip=chip, stabilizers=tuple(stabilizers),
                            boundary_data=boundary_data)
    if not verify_commutation(stabset):
        raise AssertionError("reconfigured checks do not commute")

    paths = {}
    for op in ("X", "Z"):
        # An X chain crosses Z checks and ends on the north/south boundary,
        # a Z chain crosses X checks and ends west/east.
        crossing = "Z" if op == "X" else "X"
        supports = [frozenset(s.data_qubits) for s in stabset.by_kind(crossing)]
        first_tag, second_tag = OPERATOR_TERMINALS[op]
        tags = boundary_data[crossing]
        sources = {d for d, t in tags.items() if first_tag in t}
        targets = {d for d, t in tags.items() if second_tag in t}
        if not sources or not targets:
            raise UnencodableChipError(f"no boundary terminals left for the {op} operator")
        try:
            paths[op] = logical_chain(chip, op, supports, sources, targets)
        except UnencodableChipError:
            raise UnencodableChipError(
                f"merging left no {op} chain between boundaries "
                f"(d={chip.distance} seed={chip.seed})")
    object.__setattr__(stabset, "logical_operator_paths", paths)
    return stabset


def verify_commutation(stabset) -> bool:
    """Symplectic criterion: every X/Z pair must overlap on an even number
    of data qubits.  Accepts a StabilizerSet or a bare iterable of
    (kind, support) pairs, which the anti-commutation fixtures use."""
    if isinstance(stabset, StabilizerSet):
        pairs = [(s.kind, frozenset(s.data_qubits)) for s in stabset.stabilizers]
    else:
        pairs = [(kind, frozenset(sup)) for kind, sup in stabset]
    zs = [sup for kind, sup in pairs if kind == "Z"]
    xs = [sup for kind, sup in pairs if kind == "X"]
    for z in zs:
        for x in xs:
            if len(z & x) % 2 == 1:
                return False
    return True
