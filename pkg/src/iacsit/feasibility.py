"""Single-stream IA feasibility by variable/equation counting over sub-ICs.

Two routes decide feasibility:

* :func:`is_feasible_bruteforce` checks ``n_var >= n_eq`` on all ``4^K``
  (RX subset, TX subset) pairs.
* :func:`is_feasible` walks the ordered greedy scan used by the CSIT
  allocation algorithm, once unanchored and once from every TX and RX,
  which visits O(K^2) sub-ICs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .channel_model import AntennaConfig, SubIC

__all__ = [
    "Classification",
    "FeasibilityReport",
    "EnumerationGuardError",
    "BRUTE_FORCE_MAX_K",
    "n_var",
    "n_eq",
    "slack",
    "classify_by_count",
    "scan_orders",
    "scan",
    "is_feasible_bruteforce",
    "is_feasible",
    "smallest_tight_subic",
]

BRUTE_FORCE_MAX_K = 10


class EnumerationGuardError(RuntimeError):
    """Raised when an exhaustive enumeration would exceed its size guard."""


class Classification(str, enum.Enum):
    INFEASIBLE = "INFEASIBLE"
    TIGHT = "TIGHT"
    SUPER = "SUPER"


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    classification: Classification
    witness: SubIC | None = None
    witness_counts: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        d = {
            "feasible": self.feasible,
            "classification": self.classification.value,
            "witness": None,
            "counts": None,
        }
        if self.witness is not None:
            d["witness"] = self.witness.to_dict()
            nv, ne = self.witness_counts
            d["counts"] = {"n_var": nv, "n_eq": ne}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeasibilityReport":
        w = SubIC.from_dict(d["witness"]) if d.get("witness") else None
        c = d.get("counts")
        counts = (c["n_var"], c["n_eq"]) if c else None
        return cls(bool(d["feasible"]), Classification(d["classification"]), w, counts)


def n_var(config: AntennaConfig, s: SubIC) -> int:
    """Free beamformer variables: sum of (N_i - 1) over RXs plus (M_j - 1) over TXs."""
    return sum(config.N[i - 1] - 1 for i in s.rx) + sum(config.M[j - 1] - 1 for j in s.tx)


def n_eq(config: AntennaConfig, s: SubIC) -> int:
    """Number of zero-forcing equations: ordered (RX, TX) pairs that are not paired."""
    return len(s.rx) * len(s.tx) - len(s.rx & s.tx)


def slack(config: AntennaConfig, s: SubIC) -> int:
    return n_var(config, s) - n_eq(config, s)


def classify_by_count(config: AntennaConfig) -> Classification:
    """Classification a *feasible* config would get from its total antenna count."""
    excess = config.total_antennas - config.K * (config.K + 1)
    return Classification.TIGHT if excess == 0 else Classification.SUPER


# ---------------------------------------------------------------------------
# brute force


@lru_cache(maxsize=None)
def _subset_tables(K: int):
    masks = np.arange(1 << K)
    bits = ((masks[:, None] >> np.arange(K)[None, :]) & 1).astype(np.int64)
    size = bits.sum(axis=1)
    eqs = size[:, None] * size[None, :] - bits @ bits.T
    return bits, eqs


def is_feasible_bruteforce(config: AntennaConfig) -> FeasibilityReport:
    """Check every (RX subset, TX subset) pair.

    The witness of an infeasible config is the first violating pair in
    lexicographic order of ``(rx_mask, tx_mask)``, bit ``k-1`` standing for
    user ``k``.
    """
    K = config.K
    if K > BRUTE_FORCE_MAX_K:
        raise EnumerationGuardError(f"brute force limited to K <= {BRUTE_FORCE_MAX_K}, got {K}")
    bits, eqs = _subset_tables(K)
    a = bits @ (np.asarray(config.N) - 1)
    b = bits @ (np.asarray(config.M) - 1)
    sl = a[:, None] + b[None, :] - eqs
    bad = np.flatnonzero(sl.ravel() < 0)
    if bad.size:
        r, t = divmod(int(bad[0]), 1 << K)
        w = SubIC.from_masks(r, t)
        return FeasibilityReport(False, Classification.INFEASIBLE, w, (n_var(config, w), n_eq(config, w)))
    return _feasible_report(config)


# ---------------------------------------------------------------------------
# ordered greedy scan


def scan_orders(config: AntennaConfig) -> tuple[list[int], list[int]]:
    """Return ``(rx_order, tx_order)``, the selection orders of the scan.

    TXs by increasing M, equal M by decreasing paired N.  RXs by increasing
    N, equal N by decreasing paired M; users whose (N, M) pairs coincide
    are taken in opposite order on the RX side.  Remaining ties by index.
    """
    N, M = config.N, config.M
    tx = sorted(config.users, key=lambda k: (M[k - 1], -N[k - 1], k))
    pos = {k: p for p, k in enumerate(tx)}
    rx = sorted(config.users, key=lambda k: (N[k - 1], -M[k - 1], -pos[k]))
    return rx, tx


def scan(
    config: AntennaConfig,
    anchor_tx: int | None = None,
    anchor_rx: int | None = None,
    finish_rx: bool = False,
) -> Iterator[tuple[SubIC, int]]:
    """Yield ``(sub-IC, slack)`` for every state visited by the greedy scan.

    From the current state the next RX in order is added if that strictly
    lowers the slack (it brings more equations than variables); otherwise
    the next TX is added.  Once every TX is in, the scan ends, unless
    ``finish_rx`` is set, in which case the remaining RXs are appended.
    """
    if anchor_tx is not None and anchor_rx is not None:
        raise ValueError("at most one anchor may be given")
    K = config.K
    N, M = config.N, config.M
    rx_order, tx_order = scan_orders(config)
    R: list[int] = []
    T: list[int] = []
    if anchor_tx is not None:
        if not 1 <= anchor_tx <= K:
            raise IndexError(anchor_tx)
        T.append(anchor_tx)
        tx_order = [anchor_tx] + [k for k in tx_order if k != anchor_tx]
    if anchor_rx is not None:
        if not 1 <= anchor_rx <= K:
            raise IndexError(anchor_rx)
        R.append(anchor_rx)
        rx_order = [anchor_rx] + [k for k in rx_order if k != anchor_rx]
    cur = sum(N[i - 1] - 1 for i in R) + sum(M[j - 1] - 1 for j in T) - (len(R) * len(T) - len(set(R) & set(T)))
    ri = len(R)
    ti = len(T)
    while True:
        yield SubIC(frozenset(R), frozenset(T)), cur
        if ri < K:
            r = rx_order[ri]
            delta = (N[r - 1] - 1) - (len(T) - (r in T))
            if delta < 0:
                R.append(r)
                ri += 1
                cur += delta
                continue
        if ti < K:
            t = tx_order[ti]
            cur += (M[t - 1] - 1) - (len(R) - (t in R))
            T.append(t)
            ti += 1
            continue
        if finish_rx and ri < K:
            r = rx_order[ri]
            cur += (N[r - 1] - 1) - (len(T) - (r in T))
            R.append(r)
            ri += 1
            continue
        return


def smallest_tight_subic(
    config: AntennaConfig,
    anchor_tx: int | None = None,
    anchor_rx: int | None = None,
) -> SubIC | None:
    """First non-empty sub-IC with ``n_var == n_eq`` met by the scan, or None."""
    for s, sl in scan(config, anchor_tx, anchor_rx):
        if sl == 0 and not s.is_empty:
            return s
    return None


def _walks(config: AntennaConfig):
    yield scan(config, finish_rx=True)
    for j in config.users:
        yield scan(config, anchor_tx=j, finish_rx=True)
    for i in config.users:
        yield scan(config, anchor_rx=i, finish_rx=True)


def is_feasible(config: AntennaConfig) -> FeasibilityReport:
    """Polynomial-time feasibility test.

    Runs the unanchored scan and one scan anchored at each TX and each RX;
    the first visited sub-IC with fewer variables than equations is
    reported as the witness of infeasibility.
    """
    for walk in _walks(config):
        for s, sl in walk:
            if sl < 0:
                return FeasibilityReport(
                    False, Classification.INFEASIBLE, s, (n_var(config, s), n_eq(config, s))
                )
    return _feasible_report(config)


def _feasible_report(config: AntennaConfig) -> FeasibilityReport:
    w = smallest_tight_subic(config)
    counts = (n_var(config, w), n_eq(config, w)) if w is not None else None
    return FeasibilityReport(True, classify_by_count(config), w, counts)
