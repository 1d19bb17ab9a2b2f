"""Min-leakage interference alignment and the distributed incomplete-CSIT precoder."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .channel_model import AntennaConfig, ChannelMatrix, SubIC, block, project_channel
from .csit_allocation import CsitAllocation, RemovalPlan, containment_sets, expand_mask

__all__ = [
    "BeamformerSet",
    "SolverOptions",
    "LeakageTrace",
    "GeneralizedChannel",
    "restrict",
    "eig_min",
    "leakage",
    "min_leakage_solve",
    "precode_at_tx",
    "distributed_precode",
    "replication_check",
    "rx_filters",
    "user_rates",
]


@dataclass
class BeamformerSet:
    """Unit-norm TX beamformers ``t_j`` and RX filters ``g_i`` keyed by user index."""

    tx: dict[int, np.ndarray] = field(default_factory=dict)
    rx: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def present_tx(self) -> set[int]:
        return set(self.tx)

    @property
    def present_rx(self) -> set[int]:
        return set(self.rx)

    def to_dict(self) -> dict:
        def enc(d):
            return {str(k): {"re": v.real.tolist(), "im": v.imag.tolist()} for k, v in sorted(d.items())}

        return {"tx": enc(self.tx), "rx": enc(self.rx)}

    @classmethod
    def from_dict(cls, d: dict) -> "BeamformerSet":
        def dec(x):
            return {int(k): np.asarray(v["re"]) + 1j * np.asarray(v["im"]) for k, v in x.items()}

        return cls(dec(d["tx"]), dec(d["rx"]))


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-10
    max_iterations: int = 5000
    init_seed: int = 0

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class LeakageTrace:
    values: list[float]
    converged: bool
    iterations_used: int

    @property
    def final(self) -> float:
        return self.values[-1] if self.values else float("nan")


@dataclass(frozen=True, eq=False)
class GeneralizedChannel:
    """Interfering blocks of a (generalized) sub-IC.

    ``blocks[(i, k)]`` is ``H_ik`` for every present RX ``i`` and present TX
    ``k`` with ``i != k``; direct blocks are never stored.
    """

    config: AntennaConfig
    rx: tuple[int, ...]
    tx: tuple[int, ...]
    blocks: Mapping[tuple[int, int], np.ndarray]

    @property
    def subic(self) -> SubIC:
        return SubIC(frozenset(self.rx), frozenset(self.tx))


def restrict(H: ChannelMatrix, s: SubIC) -> GeneralizedChannel:
    """Keep only the interfering blocks between the RXs and TXs of ``s``."""
    s.validate(H.config.K)
    rx, tx = tuple(sorted(s.rx)), tuple(sorted(s.tx))
    blocks = {(i, k): block(H, i, k) for i in rx for k in tx if i != k}
    return GeneralizedChannel(H.config, rx, tx, blocks)


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size:
        v = v * (abs(v[nz[0]]) / v[nz[0]])
    return v


def eig_min(A: np.ndarray) -> np.ndarray:
    """Unit eigenvector of the smallest eigenvalue of a Hermitian matrix.

    The first nonzero entry is made real and positive.
    """
    if A.shape[0] == 1:
        return np.ones(1, dtype=complex)
    _, vecs = np.linalg.eigh(A)
    return _canonical_phase(vecs[:, 0])


def _random_unit(dim: int, init_seed: int, s: SubIC, k: int) -> np.ndarray:
    ss = np.random.SeedSequence(int(init_seed), spawn_key=(s.rx_mask, s.tx_mask, k))
    rng = np.random.Generator(np.random.PCG64(ss))
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def leakage(G: GeneralizedChannel | ChannelMatrix, b: BeamformerSet) -> float:
    """Total interference power ``sum_i sum_{k != i} |g_i^H H_ik t_k|^2`` over present nodes."""
    if isinstance(G, ChannelMatrix):
        G = restrict(G, SubIC(frozenset(b.rx), frozenset(b.tx)))
    total = 0.0
    for (i, k), Hik in G.blocks.items():
        if i in b.rx and k in b.tx:
            g, t = b.rx[i], b.tx[k]
            if Hik.shape != (g.shape[0], t.shape[0]):
                raise ValueError(f"dimension mismatch on block ({i},{k})")
            total += abs(np.vdot(g, Hik @ t)) ** 2
    return float(total)


class _Stack:
    """Index bookkeeping for a batch of padded Gram matrices.

    Member ``n`` owns rows ``off[n]:off[n]+dims[n]`` of a stacked vector
    space; the batch is padded to ``max(dims)``.
    """

    def __init__(self, dims: list[int], off: np.ndarray):
        self.n = len(dims)
        self.d = max(dims, default=0)
        self.valid = np.arange(self.d)[None, :] < np.asarray(dims, dtype=int)[:, None]
        self.member, self.pos = np.nonzero(self.valid)
        self.rows = np.asarray(off, dtype=int)[self.member] + self.pos
        pad = (~self.valid).astype(float)
        self.pad_diag = pad[:, :, None] * np.eye(self.d)[None, :, :]
        self.ar = np.arange(self.n)

    def eig_min(self, X: np.ndarray) -> np.ndarray:
        """Canonical ``eig_min`` of each ``X_n X_n^H``; returns (n, d), zero on padding."""
        Q = X @ X.conj().transpose(0, 2, 1)
        load = 1.0 + np.einsum("nii->n", Q).real
        Q += self.pad_diag * load[:, None, None]
        _, vecs = np.linalg.eigh(Q)
        V = vecs[:, :, 0] * self.valid
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        first = np.argmax(np.abs(V) > 1e-12, axis=1)
        ph = V[self.ar, first]
        V *= (np.abs(ph) / ph)[:, None]
        return V


def min_leakage_solve(
    G: GeneralizedChannel,
    fixed_tx: Mapping[int, np.ndarray] | None = None,
    opts: SolverOptions | None = None,
) -> tuple[BeamformerSet, LeakageTrace]:
    """Alternating minimisation of interference leakage over a generalized IC.

    Each iteration sets every RX filter to the least-interfered direction
    given the current TX beamformers, then every free TX beamformer to the
    direction leaking least into the other present RXs.  Sums run over the
    present nodes only, and TX beamformers in ``fixed_tx`` are never
    updated (they are returned as the very same arrays).
    """
    opts = opts or SolverOptions()
    fixed_tx = dict(fixed_tx or {})
    if not G.rx and not G.tx:
        raise ValueError("empty channel")
    cfg = G.config
    for k, v in fixed_tx.items():
        if k not in G.tx:
            raise ValueError(f"fixed TX {k} is not present")
        if v.shape != (cfg.M[k - 1],):
            raise ValueError(f"fixed TX {k} has dimension {v.shape}, expected {cfg.M[k - 1]}")

    s = G.subic
    R, T = list(G.rx), list(G.tx)
    ndim = [cfg.N[i - 1] for i in R]
    mdim = [cfg.M[k - 1] for k in T]
    roff = np.concatenate(([0], np.cumsum(ndim))).astype(int)
    coff = np.concatenate(([0], np.cumsum(mdim))).astype(int)
    # dense sub-IC channel with the direct blocks left at zero
    Hs = np.zeros((roff[-1], coff[-1]), dtype=complex)
    for a, i in enumerate(R):
        for b, k in enumerate(T):
            if i != k:
                Hs[roff[a] : roff[a + 1], coff[b] : coff[b + 1]] = G.blocks[(i, k)]
    HsH = Hs.conj().T
    free = [b for b, k in enumerate(T) if k not in fixed_tx]

    Tblk = np.zeros((coff[-1], len(T)), dtype=complex)
    for b, k in enumerate(T):
        v = fixed_tx[k] if k in fixed_tx else _random_unit(mdim[b], opts.init_seed, s, k)
        Tblk[coff[b] : coff[b + 1], b] = v
    Gblk = np.zeros((roff[-1], len(R)), dtype=complex)

    rxs = _Stack(ndim, roff[:-1])
    txs = _Stack([mdim[b] for b in free], coff[np.asarray(free, dtype=int)])
    free_col = np.asarray(free, dtype=int)[txs.member] if free else np.zeros(0, dtype=int)
    Xp = np.zeros((rxs.n, rxs.d, len(T)), dtype=complex)
    Yp = np.zeros((txs.n, txs.d, len(R)), dtype=complex)
    values: list[float] = []
    converged = False
    for _ in range(opts.max_iterations):
        if R:
            Xp[rxs.member, rxs.pos] = (Hs @ Tblk)[rxs.rows]
            V = rxs.eig_min(Xp)
            Gblk[rxs.rows, rxs.member] = V[rxs.member, rxs.pos]
        if free:
            Yp[txs.member, txs.pos] = (HsH @ Gblk)[txs.rows]
            V = txs.eig_min(Yp)
            Tblk[txs.rows, free_col] = V[txs.member, txs.pos]
        Z = Gblk.conj().T @ Hs @ Tblk
        val = float(np.sum(Z.real**2 + Z.imag**2))
        values.append(val)
        if val <= opts.tolerance:
            converged = True
            break
    t = {k: fixed_tx[k] if k in fixed_tx else Tblk[coff[b] : coff[b + 1], b].copy() for b, k in enumerate(T)}
    g = {i: Gblk[roff[a] : roff[a + 1], a].copy() for a, i in enumerate(R)} if values and R else {}
    return BeamformerSet(t, g), LeakageTrace(values, converged, len(values))


def rx_filters(H: ChannelMatrix, tx: Mapping[int, np.ndarray] | list[np.ndarray]) -> dict[int, np.ndarray]:
    """Each RX picks the direction of least received interference."""
    cfg = H.config
    if not isinstance(tx, Mapping):
        tx = {k: v for k, v in enumerate(tx, start=1)}
    if set(tx) != set(cfg.users):
        raise ValueError("rx_filters needs a beamformer for every TX")
    out = {}
    for i in cfg.users:
        n = cfg.N[i - 1]
        Q = np.zeros((n, n), dtype=complex)
        for k in cfg.users:
            if k == i:
                continue
            Hik = block(H, i, k)
            if Hik.shape[1] != tx[k].shape[0]:
                raise ValueError(f"TX {k} beamformer has wrong dimension")
            u = Hik @ tx[k]
            Q += np.outer(u, u.conj())
        out[i] = eig_min(Q)
    return out


def user_rates(H: ChannelMatrix, b: BeamformerSet, snr: float) -> np.ndarray:
    """Per-user rate with residual interference treated as noise.

    ``R_i = log2(1 + P |g_i^H H_ii t_i|^2 / (1 + P sum_{j!=i} |g_i^H H_ij t_j|^2))``
    """
    cfg = H.config
    P = float(snr)
    rates = np.zeros(cfg.K)
    if P <= 0:
        return rates
    for i in cfg.users:
        g = b.rx[i]
        sig = abs(np.vdot(g, block(H, i, i) @ b.tx[i])) ** 2
        intf = sum(abs(np.vdot(g, block(H, i, j) @ b.tx[j])) ** 2 for j in cfg.users if j != i)
        rates[i - 1] = np.log2(1.0 + P * sig / (1.0 + P * intf))
    return rates


# ---------------------------------------------------------------------------
# distributed precoding with incomplete CSIT


def _masked(H: ChannelMatrix, alloc: CsitAllocation, j: int) -> ChannelMatrix:
    A = expand_mask(H.config, alloc[j])
    return ChannelMatrix(np.where(A, H.entries, 0), H.config, H.seed)


def precode_at_tx(
    j: int,
    alloc: CsitAllocation,
    known: ChannelMatrix,
    opts: SolverOptions,
    _memo: dict | None = None,
    _path: tuple[int, ...] = (),
) -> np.ndarray:
    """Beamformer TX ``j`` computes from the channel coefficients it knows.

    TX ``j`` first reproduces the beamformers of every TX whose CSIT sub-IC
    is strictly inside its own, then solves its own sub-IC with those
    beamformers frozen.
    """
    if j in _path:
        raise AssertionError(f"cyclic containment through TX {j}")
    memo = {} if _memo is None else _memo
    if j in memo:
        return memo[j]
    C = containment_sets(alloc)[j]
    fixed = {k: precode_at_tx(k, alloc, known, opts, memo, _path + (j,)) for k in sorted(C)}
    G = restrict(known, alloc[j].sets(alloc.K))
    b, _ = min_leakage_solve(G, fixed, opts)
    memo[j] = b.tx[j]
    return memo[j]


@dataclass
class DistributedResult:
    beamformers: BeamformerSet
    leakage: float
    converged: bool
    tx_traces: dict[int, LeakageTrace]


def distributed_precode(
    config: AntennaConfig,
    alloc: CsitAllocation,
    H: ChannelMatrix,
    opts: SolverOptions | None = None,
    plan: RemovalPlan | None = None,
    *,
    return_details: bool = False,
):
    """Every TX computes its own beamformer from its own CSIT.

    With a non-empty ``plan`` the channel is first projected onto the
    max-power subspaces of the reduced configuration and ``alloc`` must be
    an allocation for ``plan.reduced_config``; the beamformers returned are
    lifted back to the full antenna dimensions.  RX filters are computed
    over the full channel once all TX beamformers exist.
    """
    opts = opts or SolverOptions()
    if H.config != config:
        raise ValueError("channel was not drawn for this configuration")
    work = H
    proj = None
    if plan is not None and not plan.is_empty:
        proj = project_channel(H, plan.reduced_config)
        work = proj.channel
    if alloc.K != config.K:
        raise ValueError("allocation has the wrong number of TXs")
    tx: dict[int, np.ndarray] = {}
    traces: dict[int, LeakageTrace] = {}
    for j in config.users:
        known = _masked(work, alloc, j)
        memo: dict[int, np.ndarray] = {}
        fixed = {k: precode_at_tx(k, alloc, known, opts, memo, (j,)) for k in sorted(containment_sets(alloc)[j])}
        b, trace = min_leakage_solve(restrict(known, alloc[j].sets(alloc.K)), fixed, opts)
        tx[j] = b.tx[j]
        traces[j] = trace
    if proj is not None:
        tx = {k: proj.lift_tx(k, v) for k, v in tx.items()}
    g = rx_filters(H, tx)
    bf = BeamformerSet(tx, g)
    if not return_details:
        return bf
    return DistributedResult(bf, leakage(restrict(H, SubIC.full(config.K)), bf),
                             all(tr.converged for tr in traces.values()), traces)


def replication_check(
    config: AntennaConfig,
    alloc: CsitAllocation,
    H: ChannelMatrix,
    opts: SolverOptions | None = None,
    plan: RemovalPlan | None = None,
) -> list[tuple[int, int]]:
    """Return the ``(j, k)`` pairs where TX j's replica of ``t_k`` differs from TX k's own.

    Each side is computed from only its own masked channel, without any
    shared cache.  An empty list means every replica is bit-identical.
    """
    opts = opts or SolverOptions()
    work = H
    if plan is not None and not plan.is_empty:
        work = project_channel(H, plan.reduced_config).channel
    own = {k: precode_at_tx(k, alloc, _masked(work, alloc, k), opts) for k in config.users}
    C = containment_sets(alloc)
    bad = []
    for j in config.users:
        known = _masked(work, alloc, j)
        memo: dict[int, np.ndarray] = {}
        for k in sorted(C[j]):
            replica = precode_at_tx(k, alloc, known, opts, memo, (j,))
            if not np.array_equal(replica, own[k]):
                bad.append((j, k))
    return bad
