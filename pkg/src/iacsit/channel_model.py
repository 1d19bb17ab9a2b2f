"""Antenna configurations, random MIMO interference channels and subspace reduction.

User indices are 1-based everywhere in the public API, matching the bracket
notation ``[(N_1,M_1).(N_2,M_2)...]`` where ``N_k`` counts RX antennas and
``M_k`` TX antennas of user ``k``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "AntennaConfig",
    "SubIC",
    "ChannelMatrix",
    "SubspaceBasis",
    "ConfigParseError",
    "RNG_ID",
    "parse_config",
    "draw_channel",
    "block",
    "max_power_subspace",
    "apply_reduction",
    "project_channel",
    "ProjectedChannel",
]

#: Identifier of the random stream layout used by :func:`draw_channel`.
RNG_ID = "numpy-PCG64/SeedSequence(seed, spawn_key=(rx, tx))"


class ConfigParseError(ValueError):
    """Raised when an antenna configuration literal cannot be parsed."""


@dataclass(frozen=True)
class AntennaConfig:
    """Per-user RX/TX antenna counts of a K-user interference channel.

    Parameters
    ----------
    N : tuple of int
        RX antenna counts, ``N[k-1]`` for user ``k``.
    M : tuple of int
        TX antenna counts, ``M[k-1]`` for user ``k``.
    """

    N: tuple[int, ...]
    M: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "N", tuple(int(n) for n in self.N))
        object.__setattr__(self, "M", tuple(int(m) for m in self.M))
        if len(self.N) != len(self.M):
            raise ValueError("N and M must have the same length")
        if len(self.N) < 1:
            raise ValueError("at least one user is required")
        if min(self.N) < 1 or min(self.M) < 1:
            raise ValueError("antenna counts must be >= 1")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "AntennaConfig":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @classmethod
    def parse(cls, text: str) -> "AntennaConfig":
        return parse_config(text)

    @property
    def K(self) -> int:
        return len(self.N)

    @property
    def n_tot(self) -> int:
        return sum(self.N)

    @property
    def m_tot(self) -> int:
        return sum(self.M)

    @property
    def users(self) -> range:
        return range(1, self.K + 1)

    @property
    def total_antennas(self) -> int:
        return self.n_tot + self.m_tot

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.N, self.M))

    def row_offset(self, rx: int) -> int:
        return sum(self.N[: rx - 1])

    def col_offset(self, tx: int) -> int:
        return sum(self.M[: tx - 1])

    def as_key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return (self.N, self.M)

    def __str__(self) -> str:
        pairs = self.pairs()
        if self.K > 1 and len(set(pairs)) == 1:
            n, m = pairs[0]
            return f"[({n},{m})^{self.K}]"
        return "[" + ".".join(f"({n},{m})" for n, m in pairs) + "]"


_TOKEN = re.compile(r"\((\d+),(\d+)\)(?:\^(\d+))?")


def parse_config(text: str) -> AntennaConfig:
    """Parse bracket notation such as ``[(2,3).(2,4)]`` or ``[(2,2)^3]``.

    Whitespace is ignored.  A ``^K`` suffix repeats the preceding pair, so
    ``[(2,2)^3.(4,4)]`` is also accepted.
    """
    s = re.sub(r"\s+", "", text)
    if not (s.startswith("[") and s.endswith("]")):
        raise ConfigParseError(f"configuration must be enclosed in brackets: {text!r}")
    body = s[1:-1]
    if not body:
        raise ConfigParseError("empty configuration")
    pairs: list[tuple[int, int]] = []
    for tok in body.split("."):
        m = _TOKEN.fullmatch(tok)
        if m is None:
            raise ConfigParseError(f"bad token {tok!r} in {text!r}")
        n, mm = int(m.group(1)), int(m.group(2))
        rep = int(m.group(3)) if m.group(3) else 1
        if n < 1 or mm < 1 or rep < 1:
            raise ConfigParseError(f"counts must be >= 1 in token {tok!r}")
        pairs.extend([(n, mm)] * rep)
    return AntennaConfig.from_pairs(pairs)


@dataclass(frozen=True)
class SubIC:
    """A generalized sub-interference-channel: a set of RXs and a set of TXs."""

    rx: frozenset[int] = field(default_factory=frozenset)
    tx: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "rx", frozenset(int(i) for i in self.rx))
        object.__setattr__(self, "tx", frozenset(int(i) for i in self.tx))

    @classmethod
    def full(cls, K: int) -> "SubIC":
        return cls(frozenset(range(1, K + 1)), frozenset(range(1, K + 1)))

    @classmethod
    def from_masks(cls, rx_mask: int, tx_mask: int) -> "SubIC":
        return cls(_mask_to_set(rx_mask), _mask_to_set(tx_mask))

    def validate(self, K: int) -> None:
        for i in self.rx | self.tx:
            if not 1 <= i <= K:
                raise IndexError(f"user index {i} out of range 1..{K}")

    @property
    def rx_mask(self) -> int:
        return sum(1 << (i - 1) for i in self.rx)

    @property
    def tx_mask(self) -> int:
        return sum(1 << (i - 1) for i in self.tx)

    @property
    def is_empty(self) -> bool:
        return not self.rx and not self.tx

    def is_full(self, K: int) -> bool:
        return len(self.rx) == K and len(self.tx) == K

    def strictly_inside(self, other: "SubIC") -> bool:
        """True if both sets are strict subsets of the other's sets."""
        return self.rx < other.rx and self.tx < other.tx

    def union(self, other: "SubIC") -> "SubIC":
        return SubIC(self.rx | other.rx, self.tx | other.tx)

    def to_dict(self) -> dict:
        return {"rx_set": sorted(self.rx), "tx_set": sorted(self.tx)}

    @classmethod
    def from_dict(cls, d: dict) -> "SubIC":
        return cls(frozenset(d["rx_set"]), frozenset(d["tx_set"]))

    def __str__(self) -> str:
        rx = ",".join(map(str, sorted(self.rx)))
        tx = ",".join(map(str, sorted(self.tx)))
        return f"({{{rx}}},{{{tx}}})"


def _mask_to_set(mask: int) -> frozenset[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Global channel matrix ``H`` of shape ``(N_tot, M_tot)``."""

    entries: np.ndarray
    config: AntennaConfig
    seed: int | None = None

    def __post_init__(self):
        shape = (self.config.n_tot, self.config.m_tot)
        if self.entries.shape != shape:
            raise ValueError(f"channel shape {self.entries.shape} != {shape}")
        self.entries.setflags(write=False)

    def block(self, rx: int, tx: int) -> np.ndarray:
        return block(self, rx, tx)

    def blocks(self) -> dict[tuple[int, int], np.ndarray]:
        K = self.config.K
        return {(i, j): block(self, i, j) for i in range(1, K + 1) for j in range(1, K + 1)}


def draw_channel(config: AntennaConfig, seed: int) -> ChannelMatrix:
    """Draw i.i.d. CN(0, 1) entries, one independent sub-stream per block.

    Block ``(i, j)`` is filled from ``PCG64(SeedSequence(seed, spawn_key=(i, j)))``
    so its values do not depend on the other blocks' dimensions.
    """
    H = np.empty((config.n_tot, config.m_tot), dtype=complex)
    for i in config.users:
        r0 = config.row_offset(i)
        for j in config.users:
            c0 = config.col_offset(j)
            ss = np.random.SeedSequence(int(seed), spawn_key=(i, j))
            rng = np.random.Generator(np.random.PCG64(ss))
            shape = (config.N[i - 1], config.M[j - 1])
            z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            H[r0 : r0 + shape[0], c0 : c0 + shape[1]] = z / np.sqrt(2.0)
    return ChannelMatrix(H, config, int(seed))


def block(H: ChannelMatrix, rx: int, tx: int) -> np.ndarray:
    """Return the (read-only) view ``H_{rx,tx}``."""
    cfg = H.config
    if not (1 <= rx <= cfg.K and 1 <= tx <= cfg.K):
        raise IndexError(f"block ({rx},{tx}) out of range for K={cfg.K}")
    r0, c0 = cfg.row_offset(rx), cfg.col_offset(tx)
    return H.entries[r0 : r0 + cfg.N[rx - 1], c0 : c0 + cfg.M[tx - 1]]


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    columns: np.ndarray
    parent_dim: int
    reduced_dim: int
    singular_values: np.ndarray | None = None


def _fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its first nonzero entry is real and positive."""
    out = vectors.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size:
            ph = col[nz[0]] / abs(col[nz[0]])
            out[:, c] = col / ph
    return out


def max_power_subspace(A: np.ndarray, n: int) -> SubspaceBasis:
    """Orthonormal basis of the ``n`` strongest right-singular directions of ``A``.

    Among all ``B`` with ``n`` orthonormal columns this maximises ``||A B||_F``.
    """
    A = np.asarray(A)
    cols = A.shape[1]
    if not 1 <= n < cols:
        raise ValueError(f"n must satisfy 1 <= n < {cols}, got {n}")
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    V = _fix_phase(vh.conj().T[:, :n])
    return SubspaceBasis(V, cols, n, s)


def apply_reduction(
    config: AntennaConfig,
    rx_removals: Iterable[int] = (),
    tx_removals: Iterable[int] = (),
) -> AntennaConfig:
    """Remove one antenna per occurrence of a user index in the removal multisets."""
    N = list(config.N)
    M = list(config.M)
    for counts, removals, side in ((N, rx_removals, "RX"), (M, tx_removals, "TX")):
        for i, r in Counter(removals).items():
            if not 1 <= i <= config.K:
                raise IndexError(f"{side} index {i} out of range")
            if counts[i - 1] - r < 1:
                raise ValueError(f"removing {r} antenna(s) at {side} {i} leaves fewer than 1")
            counts[i - 1] -= r
    return AntennaConfig(tuple(N), tuple(M))


@dataclass(frozen=True, eq=False)
class ProjectedChannel:
    """Channel seen through reduced precoding/receive subspaces.

    ``tx_bases[k]`` maps a reduced TX beamformer back via ``t = V_k t'``;
    ``rx_bases[i]`` likewise for RX filters.  Users with no removal get
    identity bases.
    """

    channel: ChannelMatrix
    tx_bases: dict[int, np.ndarray]
    rx_bases: dict[int, np.ndarray]

    def lift_tx(self, k: int, t: np.ndarray) -> np.ndarray:
        return self.tx_bases[k] @ t

    def lift_rx(self, i: int, g: np.ndarray) -> np.ndarray:
        return self.rx_bases[i] @ g


def project_channel(H: ChannelMatrix, reduced: AntennaConfig) -> ProjectedChannel:
    """Restrict every TX/RX to the max-power subspace of its direct channel.

    TX ``k`` keeps the ``M'_k`` strongest right-singular vectors of ``H_kk``;
    RX ``i`` keeps the ``N'_i`` strongest left-singular vectors of ``H_ii``.
    """
    cfg = H.config
    if reduced.K != cfg.K or any(a > b for a, b in zip(reduced.N, cfg.N)) or any(
        a > b for a, b in zip(reduced.M, cfg.M)
    ):
        raise ValueError(f"{reduced} is not a reduction of {cfg}")
    tx_bases: dict[int, np.ndarray] = {}
    rx_bases: dict[int, np.ndarray] = {}
    for k in cfg.users:
        Hkk = block(H, k, k)
        m, mr = cfg.M[k - 1], reduced.M[k - 1]
        n, nr = cfg.N[k - 1], reduced.N[k - 1]
        tx_bases[k] = max_power_subspace(Hkk, mr).columns if mr < m else np.eye(m)
        rx_bases[k] = max_power_subspace(Hkk.conj().T, nr).columns if nr < n else np.eye(n)
    E = np.empty((reduced.n_tot, reduced.m_tot), dtype=complex)
    for i in cfg.users:
        r0 = reduced.row_offset(i)
        for k in cfg.users:
            c0 = reduced.col_offset(k)
            blk = rx_bases[i].conj().T @ block(H, i, k) @ tx_bases[k]
            E[r0 : r0 + blk.shape[0], c0 : c0 + blk.shape[1]] = blk
    return ProjectedChannel(ChannelMatrix(E, reduced, H.seed), tx_bases, rx_bases)


def reassemble(blocks: dict[tuple[int, int], np.ndarray], config: AntennaConfig) -> np.ndarray:
    """Tile a dict of blocks back into the global matrix (inverse of ``blocks()``)."""
    rows = [np.hstack([blocks[(i, j)] for j in config.users]) for i in config.users]
    return np.vstack(rows)


def removal_counts(removals: Sequence[int], K: int) -> tuple[int, ...]:
    c = Counter(removals)
    return tuple(c.get(i, 0) for i in range(1, K + 1))
