"""Processing elements, bandwidth, and per-task timing.

A task's duration on a PE is its scaled computation cost plus the largest
data-transfer delay from a parent placed on a different PE.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ProfileError, SchedulingError


@dataclass(frozen=True)
class ProcessingElement:
    pe_id: int
    name: str
    opp: tuple[tuple[float, float], ...]
    active_frequency: float | None = None

    def __post_init__(self):
        if not self.opp:
            raise ValueError(f"PE {self.pe_id} has no operating points")
        freqs = [f for _, f in self.opp]
        if self.active_frequency is None:
            # DVFS is not modelled: run at the top operating point.
            object.__setattr__(self, "active_frequency", max(freqs))
        elif self.active_frequency not in freqs:
            raise ValueError(
                f"PE {self.pe_id}: active frequency {self.active_frequency} not in OPP list"
            )


@dataclass(frozen=True)
class Platform:
    pes: tuple[ProcessingElement, ...]
    bandwidth: Mapping[tuple[int, int], float]
    mu: float = 1.0
    _mean_bw: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        ids = [p.pe_id for p in self.pes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate PE ids")
        for a in ids:
            for b in ids:
                if a == b:
                    continue
                bw = self.bandwidth.get((a, b))
                if bw is None:
                    raise ValueError(f"missing bandwidth for PE pair ({a}, {b})")
                if bw <= 0:
                    raise ValueError(f"bandwidth ({a}, {b}) must be positive")
        pairs = [v for (a, b), v in self.bandwidth.items() if a != b]
        object.__setattr__(self, "_mean_bw", sum(pairs) / len(pairs) if pairs else 0.0)

    @property
    def pe_ids(self) -> list[int]:
        return [p.pe_id for p in self.pes]

    @property
    def num_pes(self) -> int:
        return len(self.pes)

    @property
    def mean_bandwidth(self) -> float:
        """Mean over ordered pairs of distinct PEs; 0.0 for a single-PE platform."""
        return self._mean_bw

    def with_mu(self, mu: float) -> "Platform":
        return Platform(self.pes, dict(self.bandwidth), mu)

    def transfer_delay(self, weight: float, src_pe: int, dst_pe: int) -> float:
        if src_pe == dst_pe:
            return 0.0
        try:
            return weight / self.bandwidth[(src_pe, dst_pe)]
        except KeyError:
            raise SchedulingError(f"no bandwidth entry for ({src_pe}, {dst_pe})") from None

    def comm_delay(self, pe: int, parent_assignments: Mapping[int, tuple[int, float]]) -> float:
        """Largest parent-to-child transfer delay when the child runs on `pe`.

        `parent_assignments` maps parent id to (parent PE, edge weight).
        """
        delay = 0.0
        for parent_pe, weight in parent_assignments.values():
            d = self.transfer_delay(weight, parent_pe, pe)
            if d > delay:
                delay = d
        return delay

    def exec_time(self, comp_cost: Mapping[int, float], pe: int,
                  parent_assignments: Mapping[int, tuple[int, float]] | None = None) -> float:
        if pe not in comp_cost:
            raise SchedulingError(f"PE {pe} does not support this task")
        delay = self.comm_delay(pe, parent_assignments) if parent_assignments else 0.0
        return self.mu * comp_cost[pe] + delay


def parse_resource_profile(text: str, mu: float | None = None) -> Platform:
    """Parse `pe`, `opp`, `bw` and optional `mu` directives into a Platform."""
    names: dict[int, str] = {}
    opps: dict[int, list[tuple[float, float]]] = {}
    bw: dict[tuple[int, int], float] = {}
    file_mu = 1.0
    deferred: list[tuple[int, str, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *args = line.split()
        try:
            if kind == "pe":
                _arity(args, 2, lineno)
                pid = int(args[0])
                if pid in names:
                    raise ProfileError(lineno, f"duplicate pe {pid}")
                names[pid] = args[1]
            elif kind in ("opp", "bw"):
                deferred.append((lineno, kind, args))
            elif kind == "mu":
                _arity(args, 1, lineno)
                file_mu = float(args[0])
            else:
                raise ProfileError(lineno, f"unknown directive {kind!r}")
        except ProfileError:
            raise
        except ValueError as exc:
            raise ProfileError(lineno, str(exc)) from None
    for lineno, kind, args in deferred:
        try:
            if kind == "opp":
                _arity(args, 3, lineno)
                pid = int(args[0])
                if pid not in names:
                    raise ProfileError(lineno, f"opp references undefined pe {pid}")
                opps.setdefault(pid, []).append((float(args[1]), float(args[2])))
            else:
                _arity(args, 3, lineno)
                a, b = int(args[0]), int(args[1])
                for p in (a, b):
                    if p not in names:
                        raise ProfileError(lineno, f"bw references undefined pe {p}")
                value = float(args[2])
                if value <= 0:
                    raise ProfileError(lineno, "bandwidth must be positive")
                bw[(a, b)] = value
        except ProfileError:
            raise
        except ValueError as exc:
            raise ProfileError(lineno, str(exc)) from None
    if not names:
        raise ProfileError(0, "resource profile defines no PEs")
    pes = []
    for pid in sorted(names):
        if pid not in opps:
            raise ProfileError(0, f"pe {pid} has no opp lines")
        pes.append(ProcessingElement(pid, names[pid], tuple(opps[pid])))
    for a in names:
        for b in names:
            if a != b and (a, b) not in bw:
                raise ProfileError(0, f"missing bw line for pe pair ({a}, {b})")
    return Platform(tuple(pes), bw, file_mu if mu is None else mu)


def write_resource_profile(platform: Platform) -> str:
    lines = []
    for pe in platform.pes:
        lines.append(f"pe {pe.pe_id} {pe.name}")
    for pe in platform.pes:
        for volt, freq in pe.opp:
            lines.append(f"opp {pe.pe_id} {volt!r} {freq!r}")
    for (a, b), value in sorted(platform.bandwidth.items()):
        lines.append(f"bw {a} {b} {value!r}")
    lines.append(f"mu {platform.mu!r}")
    return "\n".join(lines) + "\n"


def _arity(args: Sequence[str], n: int, lineno: int) -> None:
    if len(args) != n:
        raise ProfileError(lineno, f"expected {n} arguments, got {len(args)}")


def load_synthetic_platform(mu: float | None = None) -> Platform:
    from importlib import resources

    text = resources.files("socsim.data").joinpath("synthetic_resource.txt").read_text()
    return parse_resource_profile(text, mu=mu)
