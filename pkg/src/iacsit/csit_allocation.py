"""Incomplete CSIT allocations: masks, sizes, and the allocation algorithms.

A TX's CSIT is parameterised by a sub-IC ``(S_RX, S_TX)``: it knows every
interfering block ``H_xy`` with ``x`` in ``S_RX``, ``y`` in ``S_TX`` and
``x != y``.  Direct blocks are never counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np

from .channel_model import AntennaConfig, SubIC, apply_reduction, removal_counts
from .feasibility import (
    Classification,
    EnumerationGuardError,
    is_feasible,
    scan,
    smallest_tight_subic,
)

__all__ = [
    "AllocationError",
    "NotTightError",
    "NotSuperError",
    "CsitMask",
    "CsitAllocation",
    "RemovalPlan",
    "EXHAUSTIVE_GUARD",
    "expand_mask",
    "allocation_size",
    "complete_size",
    "allocate_tight",
    "excess_antennas",
    "tight_membership",
    "remove_antennas_heuristic",
    "remove_antennas_exhaustive",
    "allocate_super",
]

EXHAUSTIVE_GUARD = 10**6


class AllocationError(ValueError):
    pass


class NotTightError(AllocationError):
    pass


class NotSuperError(AllocationError):
    pass


@dataclass(frozen=True)
class CsitMask:
    """CSIT of one TX: either ``COMPLETE`` or the blocks of a sub-IC."""

    owner_tx: int
    subic: SubIC | None = None  # None means COMPLETE

    @property
    def kind(self) -> str:
        return "COMPLETE" if self.subic is None else "SETS"

    def sets(self, K: int) -> SubIC:
        return SubIC.full(K) if self.subic is None else self.subic

    def to_dict(self, K: int) -> dict:
        s = self.sets(K)
        return {"tx": self.owner_tx, "kind": self.kind, **s.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "CsitMask":
        if d["kind"] == "COMPLETE":
            return cls(int(d["tx"]))
        return cls(int(d["tx"]), SubIC.from_dict(d))


@dataclass(frozen=True)
class CsitAllocation:
    masks: tuple[CsitMask, ...]

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))
        for j, m in enumerate(self.masks, start=1):
            if m.owner_tx != j:
                raise ValueError(f"mask {j} is owned by TX {m.owner_tx}")

    def __getitem__(self, tx: int) -> CsitMask:
        return self.masks[tx - 1]

    @property
    def K(self) -> int:
        return len(self.masks)

    def subics(self) -> dict[int, SubIC]:
        return {m.owner_tx: m.sets(self.K) for m in self.masks}

    def to_list(self) -> list[dict]:
        return [m.to_dict(self.K) for m in self.masks]

    @classmethod
    def from_list(cls, items: list[dict]) -> "CsitAllocation":
        return cls(tuple(CsitMask.from_dict(d) for d in sorted(items, key=lambda d: d["tx"])))


@dataclass(frozen=True)
class RemovalPlan:
    rx_removals: tuple[int, ...]
    tx_removals: tuple[int, ...]
    reduced_config: AntennaConfig
    original_config: AntennaConfig | None = field(default=None, compare=False)

    @property
    def size(self) -> int:
        return len(self.rx_removals) + len(self.tx_removals)

    @property
    def is_empty(self) -> bool:
        return self.size == 0

    def removal_vector(self) -> tuple[int, ...]:
        K = self.reduced_config.K
        return removal_counts(self.rx_removals, K) + removal_counts(self.tx_removals, K)

    def to_dict(self) -> dict:
        return {
            "rx_removals": sorted(self.rx_removals),
            "tx_removals": sorted(self.tx_removals),
            "reduced_config": str(self.reduced_config),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RemovalPlan":
        return cls(
            tuple(d["rx_removals"]),
            tuple(d["tx_removals"]),
            AntennaConfig.parse(d["reduced_config"]),
        )


# ---------------------------------------------------------------------------
# masks and sizes


def expand_mask(config: AntennaConfig, mask: CsitMask | SubIC) -> np.ndarray:
    """Boolean ``N_tot x M_tot`` matrix of the coefficients a mask grants."""
    s = mask if isinstance(mask, SubIC) else mask.sets(config.K)
    A = np.zeros((config.n_tot, config.m_tot), dtype=bool)
    for x in s.rx:
        r0 = config.row_offset(x)
        for y in s.tx:
            if x != y:
                c0 = config.col_offset(y)
                A[r0 : r0 + config.N[x - 1], c0 : c0 + config.M[y - 1]] = True
    return A


def _subic_size(config: AntennaConfig, s: SubIC) -> int:
    n = sum(config.N[x - 1] for x in s.rx)
    m = sum(config.M[y - 1] for y in s.tx)
    return n * m - sum(config.N[x - 1] * config.M[x - 1] for x in s.rx & s.tx)


def allocation_size(config: AntennaConfig, alloc: CsitAllocation) -> int:
    """Total number of channel coefficients fed back, summed over TXs."""
    return sum(_subic_size(config, m.sets(config.K)) for m in alloc.masks)


def complete_size(config: AntennaConfig) -> int:
    return config.K * (config.n_tot * config.m_tot - sum(n * m for n, m in config.pairs()))


def excess_antennas(config: AntennaConfig) -> int:
    return config.total_antennas - config.K * (config.K + 1)


# ---------------------------------------------------------------------------
# tightly-feasible allocation


@lru_cache(maxsize=65536)
def _allocate_tight_cached(key: tuple[tuple[int, ...], tuple[int, ...]]) -> CsitAllocation:
    config = AntennaConfig(*key)
    masks = []
    for j in config.users:
        s = smallest_tight_subic(config, anchor_tx=j)
        if s is None or s.is_full(config.K):
            masks.append(CsitMask(j))
        else:
            masks.append(CsitMask(j, s))
    return CsitAllocation(tuple(masks))


def allocate_tight(config: AntennaConfig) -> CsitAllocation:
    """Give every TX the CSI of the smallest tightly-feasible sub-IC containing it."""
    rep = is_feasible(config)
    if rep.classification is not Classification.TIGHT:
        raise NotTightError(f"{config} is {rep.classification.value}, not TIGHT")
    return _allocate_tight_cached(config.as_key())


# ---------------------------------------------------------------------------
# super-feasible: antenna removal


def tight_membership(config: AntennaConfig) -> tuple[set[int], set[int]]:
    """Nodes lying in at least one tightly-feasible sub-IC found by the scans.

    Returns ``(rx_members, tx_members)``.  Every scan (unanchored and
    anchored at each TX and RX) contributes the nodes of each non-empty
    tight sub-IC it visits.
    """
    rx: set[int] = set()
    tx: set[int] = set()
    walks = [scan(config)]
    walks += [scan(config, anchor_tx=j) for j in config.users]
    walks += [scan(config, anchor_rx=i) for i in config.users]
    for walk in walks:
        for s, sl in walk:
            if sl == 0 and not s.is_empty:
                rx |= s.rx
                tx |= s.tx
    return rx, tx


def _pick(candidates: list[int], own: tuple[int, ...]) -> int:
    # fewest antennas, then lowest index
    return min(candidates, key=lambda k: (own[k - 1], k))


def remove_antennas_heuristic(config: AntennaConfig) -> RemovalPlan:
    """Remove the excess antennas one at a time, TX side first.

    At each step the TX with the fewest antennas among those outside every
    tight sub-IC loses one antenna; if every TX is in a tight sub-IC, the
    RX with the fewest antennas outside every tight sub-IC does instead.
    """
    rep = is_feasible(config)
    if rep.classification is not Classification.SUPER:
        raise NotSuperError(f"{config} is {rep.classification.value}, not SUPER")
    S = excess_antennas(config)
    cur = config
    rx_rm: list[int] = []
    tx_rm: list[int] = []
    for _ in range(S):
        rx_mem, tx_mem = tight_membership(cur)
        tx_cand = [k for k in cur.users if k not in tx_mem]
        rx_cand = [k for k in cur.users if k not in rx_mem]
        if tx_cand:
            k = _pick(tx_cand, cur.M)
            tx_rm.append(k)
            cur = apply_reduction(cur, tx_removals=[k])
        elif rx_cand:
            k = _pick(rx_cand, cur.N)
            rx_rm.append(k)
            cur = apply_reduction(cur, rx_removals=[k])
        else:
            raise AssertionError(f"no removable node in {cur} with antennas still in excess")
    final = is_feasible(cur)
    assert final.classification is Classification.TIGHT, f"heuristic ended in {final.classification}"
    return RemovalPlan(tuple(rx_rm), tuple(tx_rm), cur, config)


def _bounded_compositions(total: int, caps: list[int]):
    """All vectors r with 0 <= r[i] <= caps[i] and sum(r) == total, lexicographic."""
    if not caps:
        if total == 0:
            yield ()
        return
    rest_cap = sum(caps[1:])
    for r0 in range(max(0, total - rest_cap), min(caps[0], total) + 1):
        for tail in _bounded_compositions(total - r0, caps[1:]):
            yield (r0,) + tail


def remove_antennas_exhaustive(config: AntennaConfig) -> RemovalPlan:
    """Try every distribution of the excess removals; keep the smallest allocation.

    Ties go to the lexicographically smallest removal vector
    ``(rx_1..rx_K, tx_1..tx_K)``.
    """
    rep = is_feasible(config)
    if rep.classification is not Classification.SUPER:
        raise NotSuperError(f"{config} is {rep.classification.value}, not SUPER")
    S = excess_antennas(config)
    nodes = 2 * config.K
    if math.comb(S + nodes - 1, nodes - 1) > EXHAUSTIVE_GUARD:
        raise EnumerationGuardError(f"exhaustive removal over {S} antennas exceeds the guard")
    return _exhaustive_cached(config.as_key())


@lru_cache(maxsize=65536)
def _exhaustive_cached(key) -> RemovalPlan:
    config = AntennaConfig(*key)
    K = config.K
    S = excess_antennas(config)
    caps = [n - 1 for n in config.N] + [m - 1 for m in config.M]
    best = None
    for vec in _bounded_compositions(S, caps):
        N = tuple(n - r for n, r in zip(config.N, vec[:K]))
        M = tuple(m - r for m, r in zip(config.M, vec[K:]))
        reduced = AntennaConfig(N, M)
        if not is_feasible(reduced).feasible:
            continue
        size = allocation_size(reduced, _allocate_tight_cached(reduced.as_key()))
        if best is None or size < best[0]:
            best = (size, vec, reduced)
    assert best is not None, f"no feasible reduction of {config}"
    _, vec, reduced = best
    rx_rm = tuple(i for i in config.users for _ in range(vec[i - 1]))
    tx_rm = tuple(i for i in config.users for _ in range(vec[K + i - 1]))
    return RemovalPlan(rx_rm, tx_rm, reduced, config)


def allocate_super(
    config: AntennaConfig, mode: Literal["heuristic", "exhaustive"] = "heuristic"
) -> tuple[RemovalPlan, CsitAllocation]:
    """Remove excess antennas, then allocate on the reduced configuration.

    Sizes of the returned allocation are meant to be counted on
    ``plan.reduced_config``.  Tight inputs get an empty plan.
    """
    rep = is_feasible(config)
    if not rep.feasible:
        raise AllocationError(f"{config} is infeasible")
    if rep.classification is Classification.TIGHT:
        return RemovalPlan((), (), config, config), allocate_tight(config)
    if mode == "heuristic":
        plan = remove_antennas_heuristic(config)
    elif mode == "exhaustive":
        plan = remove_antennas_exhaustive(config)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return plan, allocate_tight(plan.reduced_config)


def containment_sets(alloc: CsitAllocation) -> dict[int, set[int]]:
    """``C_j``: TXs whose sub-IC is strictly inside TX j's on both sides."""
    subs = alloc.subics()
    return {j: {k for k, sk in subs.items() if sk.strictly_inside(sj)} for j, sj in subs.items()}


def iter_removal_vectors(config: AntennaConfig):
    """Removal vectors explored by the exhaustive search (for inspection/tests)."""
    caps = [n - 1 for n in config.N] + [m - 1 for m in config.M]
    return _bounded_compositions(excess_antennas(config), caps)

