"""Monte-Carlo harness: rate versus SNR and CSIT size versus antenna budget."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .channel_model import RNG_ID, AntennaConfig, SubIC, draw_channel, parse_config
from .csit_allocation import allocate_super, allocation_size, complete_size
from .feasibility import Classification, is_feasible
from .precoding import (
    BeamformerSet,
    SolverOptions,
    distributed_precode,
    leakage,
    min_leakage_solve,
    restrict,
    rx_filters,
    user_rates,
)

__all__ = [
    "RateSweepSpec",
    "FeedbackSweepSpec",
    "ResultRow",
    "ResultTable",
    "trial_seed",
    "random_feasible_config",
    "rate_vs_snr",
    "feedback_size_sweep",
    "load_spec",
]

RATE_POLICIES = ("COMPLETE", "INCOMPLETE")
FEEDBACK_POLICIES = ("COMPLETE", "HEURISTIC", "EXHAUSTIVE")


@dataclass(frozen=True)
class RateSweepSpec:
    config: AntennaConfig
    snr_grid_db: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)
    trials: int = 200
    policies: tuple[str, ...] = RATE_POLICIES
    seed: int = 0
    tolerance: float = 1e-10
    max_iterations: int = 50000

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(x) for x in self.snr_grid_db))
        object.__setattr__(self, "policies", tuple(p.upper() for p in self.policies))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        g = self.snr_grid_db
        if not g or any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("snr_grid_db must be non-empty and strictly increasing")
        bad = set(self.policies) - set(RATE_POLICIES)
        if bad or not self.policies:
            raise ValueError(f"unknown policies {sorted(bad)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config"] = str(self.config)
        return d


@dataclass(frozen=True)
class FeedbackSweepSpec:
    K: int = 3
    total_antennas_grid: tuple[int, ...] = (12, 13, 14, 15, 16, 17, 18)
    trials: int = 1000
    policies: tuple[str, ...] = FEEDBACK_POLICIES
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "total_antennas_grid", tuple(int(x) for x in self.total_antennas_grid))
        object.__setattr__(self, "policies", tuple(p.upper() for p in self.policies))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(t < 2 * self.K for t in self.total_antennas_grid):
            raise ValueError("every total must give each node at least one antenna")
        bad = set(self.policies) - set(FEEDBACK_POLICIES)
        if bad or not self.policies:
            raise ValueError(f"unknown policies {sorted(bad)}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ResultRow:
    x: float
    policy: str
    mean: float
    stderr: float
    n: int


@dataclass
class ResultTable:
    rows: list[ResultRow]
    metadata: dict = field(default_factory=dict)

    def get(self, x: float, policy: str) -> ResultRow:
        for r in self.rows:
            if r.x == x and r.policy == policy:
                return r
        raise KeyError((x, policy))

    def series(self, policy: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r.policy == policy]
        return np.array([r.x for r in rows]), np.array([r.mean for r in rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "policy", "mean", "stderr", "n"])
        for r in self.rows:
            w.writerow([repr(r.x), r.policy, repr(r.mean), repr(r.stderr), r.n])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"rows": [asdict(r) for r in self.rows], "metadata": self.metadata}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        d = json.loads(text)
        return cls([ResultRow(**r) for r in d["rows"]], d["metadata"])

    def write(self, out: str | os.PathLike) -> tuple[Path, Path]:
        """Write ``<out>.csv`` and ``<out>.json``; a .csv/.json suffix on ``out`` is dropped."""
        base = Path(out)
        if base.suffix in (".csv", ".json"):
            base = base.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        p_csv, p_json = base.with_suffix(".csv"), base.with_suffix(".json")
        p_csv.write_text(self.to_csv())
        p_json.write_text(self.to_json())
        return p_csv, p_json


def _summary(values: Sequence[float]) -> tuple[float, float, int]:
    v = np.asarray(values, dtype=float)
    n = v.size
    if n == 0:
        return float("nan"), float("nan"), 0
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(v.mean()), se, n


def trial_seed(seed: int, trial: int) -> int:
    """Sub-seed of one trial; independent of worker count and scheduling."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _metadata(kind: str, spec_dict: dict, seed: int) -> dict:
    return {"experiment": kind, "spec": spec_dict, "seed": seed, "version": __version__, "rng": RNG_ID}


def _run(fn: Callable, args: list, workers: int) -> list:
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, args, chunksize=max(1, len(args) // (4 * workers))))


# ---------------------------------------------------------------------------
# rate versus SNR


def _rate_trial(args) -> dict:
    spec, trial = args
    cfg = spec.config
    sub = trial_seed(spec.seed, trial)
    H = draw_channel(cfg, sub)
    opts = SolverOptions(spec.tolerance, spec.max_iterations, sub)
    snr = 10.0 ** (np.asarray(spec.snr_grid_db) / 10.0)
    full = SubIC.full(cfg.K)
    out = {"trial": trial, "seed": sub}
    for policy in spec.policies:
        if policy == "COMPLETE":
            b, _ = min_leakage_solve(restrict(H, full), {}, opts)
            bf = BeamformerSet(b.tx, rx_filters(H, b.tx))
        else:
            plan, alloc = allocate_super(cfg, "heuristic")
            bf = distributed_precode(cfg, alloc, H, opts, plan)
        out[policy] = {
            "rates": [float(user_rates(H, bf, p).mean()) for p in snr],
            "leakage": leakage(restrict(H, full), bf),
        }
    return out


def rate_vs_snr(spec: RateSweepSpec, workers: int = 1, converge_threshold: float = 1e-8) -> ResultTable:
    """Average per-user rate against SNR for each CSIT policy.

    Both policies see the same channel in a given trial.  A trial whose
    final leakage exceeds ``converge_threshold`` is left out of that
    policy's mean and listed under ``metadata["failures"]``.
    """
    if not is_feasible(spec.config).feasible:
        raise ValueError(f"{spec.config} is infeasible")
    results = _run(_rate_trial, [(spec, t) for t in range(spec.trials)], workers)
    meta = _metadata("rate_vs_snr", spec.to_dict(), spec.seed)
    meta["converge_threshold"] = converge_threshold
    meta["certificates"] = {p: [r[p]["leakage"] for r in results] for p in spec.policies}
    meta["failures"] = {
        p: [r["trial"] for r in results if r[p]["leakage"] > converge_threshold] for p in spec.policies
    }
    rows = []
    for k, x in enumerate(spec.snr_grid_db):
        for p in spec.policies:
            vals = [r[p]["rates"][k] for r in results if r[p]["leakage"] <= converge_threshold]
            rows.append(ResultRow(x, p, *_summary(vals)))
    return ResultTable(rows, meta)


# ---------------------------------------------------------------------------
# CSIT size versus total antennas


def random_feasible_config(K: int, total_antennas: int, seed: int, max_draws: int = 100000) -> AntennaConfig:
    """Spread antennas uniformly over the 2K nodes, redrawing until IA is feasible.

    Every node starts with one antenna; each remaining antenna goes to a
    node drawn uniformly at random.
    """
    if total_antennas < 2 * K:
        raise ValueError("need at least one antenna per node")
    if total_antennas < K * (K + 1):
        raise ValueError(f"{total_antennas} antennas < K(K+1) = {K * (K + 1)}: IA cannot be feasible")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    for _ in range(max_draws):
        counts = np.ones(2 * K, dtype=int)
        np.add.at(counts, rng.integers(0, 2 * K, size=total_antennas - 2 * K), 1)
        cfg = AntennaConfig(tuple(counts[:K]), tuple(counts[K:]))
        if is_feasible(cfg).feasible:
            return cfg
    raise RuntimeError(f"no feasible configuration found in {max_draws} draws")


def _feedback_trial(args) -> dict:
    spec, total, trial = args
    sub = trial_seed(spec.seed, total * 1_000_003 + trial)
    cfg = random_feasible_config(spec.K, total, sub)
    out = {"config": str(cfg)}
    for p in spec.policies:
        if p == "COMPLETE":
            out[p] = complete_size(cfg)
        else:
            plan, alloc = allocate_super(cfg, p.lower())
            out[p] = allocation_size(plan.reduced_config, alloc)
    out["tight"] = is_feasible(cfg).classification is Classification.TIGHT
    return out


def feedback_size_sweep(spec: FeedbackSweepSpec, workers: int = 1) -> ResultTable:
    """Mean CSIT allocation size per total antenna count and policy."""
    for t in spec.total_antennas_grid:
        if t < spec.K * (spec.K + 1):
            raise ValueError(f"total {t} < K(K+1): IA cannot be feasible")
    args = [(spec, t, i) for t in spec.total_antennas_grid for i in range(spec.trials)]
    results = _run(_feedback_trial, args, workers)
    rows = []
    meta = _metadata("feedback_size_sweep", spec.to_dict(), spec.seed)
    meta["configs"] = {}
    for t in spec.total_antennas_grid:
        chunk = [r for (s, tt, _), r in zip(args, results) if tt == t]
        meta["configs"][str(t)] = [r["config"] for r in chunk]
        for p in spec.policies:
            rows.append(ResultRow(float(t), p, *_summary([r[p] for r in chunk])))
    return ResultTable(rows, meta)


# ---------------------------------------------------------------------------
# spec files


def _parse_list(v: str, conv=float) -> tuple:
    v = v.strip().strip("[]()")
    if ":" in v:
        a, b, *step = (float(x) for x in v.split(":"))
        st = step[0] if step else 1.0
        n = int(math.floor((b - a) / st + 1e-9)) + 1
        return tuple(conv(a + i * st) for i in range(n))
    return tuple(conv(x) for x in v.split(",") if x.strip())


def load_spec(path: str | os.PathLike, kind: str):
    """Read a ``RateSweepSpec`` (kind="rate") or ``FeedbackSweepSpec`` (kind="feedback").

    JSON documents and ``key = value`` files are accepted; in the latter,
    lists are comma separated or given as ``start:stop:step`` (inclusive).
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        raw = {k: v for k, v in json.loads(text).items()}
    else:
        raw = {}
        for ln, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value")
            k, v = line.split("=", 1)
            raw[k.strip()] = v.strip()
    return _build_spec(raw, kind)


def _build_spec(raw: dict, kind: str):
    def lst(v, conv):
        return tuple(conv(x) for x in v) if isinstance(v, (list, tuple)) else _parse_list(str(v), conv)

    def pol(v):
        return tuple(v) if isinstance(v, (list, tuple)) else tuple(p.strip() for p in str(v).split(",") if p.strip())

    kw = {}
    if kind == "rate":
        allowed = {"config", "snr_grid_db", "trials", "policies", "seed", "tolerance", "max_iterations"}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown keys {sorted(unknown)}")
        if "config" not in raw:
            raise ValueError("rate spec needs a config")
        kw["config"] = parse_config(str(raw["config"]))
        if "snr_grid_db" in raw:
            kw["snr_grid_db"] = lst(raw["snr_grid_db"], float)
        for k, conv in (("trials", int), ("seed", int), ("max_iterations", int), ("tolerance", float)):
            if k in raw:
                kw[k] = conv(raw[k])
        if "policies" in raw:
            kw["policies"] = pol(raw["policies"])
        return RateSweepSpec(**kw)
    if kind == "feedback":
        allowed = {"K", "total_antennas_grid", "trials", "policies", "seed"}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown keys {sorted(unknown)}")
        for k in ("K", "trials", "seed"):
            if k in raw:
                kw[k] = int(raw[k])
        if "total_antennas_grid" in raw:
            kw["total_antennas_grid"] = lst(raw["total_antennas_grid"], lambda x: int(round(float(x))))
        if "policies" in raw:
            kw["policies"] = pol(raw["policies"])
        return FeedbackSweepSpec(**kw)
    raise ValueError(f"unknown spec kind {kind!r}")
