"""Monte Carlo BER measurement and SNR/IRR/order sweeps."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import beta

from .baseline import QamGrid, nearest_index
from .channel import ImpairedLink
from .demapper import features
from .mapper import constellation_dumps, constellation_forward, index_to_bits
from .neural import forward
from .training import CONVENTIONAL, RL, TrainConfig, TrainedPair, train

log = logging.getLogger(__name__)

BASELINE = "baseline"
LEARNED_CONV = "learned-conv"
LEARNED_RL = "learned-rl"
SYSTEMS = (LEARNED_CONV, LEARNED_RL, BASELINE)
REGIME_OF = {LEARNED_CONV: CONVENTIONAL, LEARNED_RL: RL}

CSV_COLUMNS = ["system", "m", "irr_db", "snr_db", "bits", "errors", "ber", "censored", "seed"]


class MissingCheckpoint(FileNotFoundError):
    pass


@dataclass(frozen=True)
class StopRule:
    min_errors: int = 100
    max_bits: int = 10_000_000
    chunk_symbols: int = 16384


@dataclass
class BerRecord:
    snr_db: float
    bit_errors: int
    bits_simulated: int
    wall_seconds: float = 0.0
    censored: bool = False

    def __post_init__(self):
        if self.bits_simulated <= 0:
            raise ValueError("a BER record needs at least one simulated bit")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_simulated

    @property
    def ber_upper(self) -> float:
        """One-sided 95 % Clopper-Pearson upper bound."""
        if self.bit_errors >= self.bits_simulated:
            return 1.0
        return float(beta.ppf(0.95, self.bit_errors + 1, self.bits_simulated - self.bit_errors))


class BaselineSystem:
    """Gray QAM with the IQI-unaware nearest-neighbour detector."""

    def __init__(self, m: int, link: ImpairedLink):
        self.m = m
        self.grid = QamGrid.build(m)
        self.link = link

    def simulate(self, n_symbols: int, snr_db: float, rng: np.random.Generator) -> tuple[int, int]:
        idx = rng.integers(0, 2**self.m, size=n_symbols)
        r = self.link.transmit(self.grid.points[idx], snr_db, rng)
        got = nearest_index(r, self.grid.points)
        errors = int(np.count_nonzero(index_to_bits(idx, self.m) != index_to_bits(got, self.m)))
        return errors, n_symbols * self.m


class LearnedSystem:
    """Trained mapper/demapper pair evaluated over its impaired link."""

    def __init__(self, pair: TrainedPair, link: Optional[ImpairedLink] = None):
        self.pair = pair
        self.m = pair.config.m
        self.link = pair.link if link is None else link
        self._cache: dict = {}

    def _points(self, sdnr_db: float) -> np.ndarray:
        if sdnr_db not in self._cache:
            self._cache[sdnr_db] = constellation_forward(self.pair.tx_net, sdnr_db)[0].points
        return self._cache[sdnr_db]

    def simulate(self, n_symbols: int, snr_db: float, rng: np.random.Generator) -> tuple[int, int]:
        sdnr = self.link.sdnr_db(snr_db)
        idx = rng.integers(0, 2**self.m, size=n_symbols)
        r = self.link.transmit(self._points(sdnr)[idx], snr_db, rng)
        p, _ = forward(self.pair.rx_net, features(r, sdnr))
        got = np.argmax(p, axis=1)
        errors = int(np.count_nonzero(index_to_bits(idx, self.m) != index_to_bits(got, self.m)))
        return errors, n_symbols * self.m


def run_ber_point(system, snr_db: float, stop: StopRule, rng: np.random.Generator) -> BerRecord:
    """Simulate until ``stop.min_errors`` bit errors or ``stop.max_bits`` bits.

    A point that hits the bit cap first is marked censored; its ``ber_upper``
    gives the usable bound.
    """
    t0 = time.perf_counter()
    errors = bits = 0
    m = system.m
    while errors < stop.min_errors and bits < stop.max_bits:
        n = min(stop.chunk_symbols, max(1, (stop.max_bits - bits) // m))
        e, b = system.simulate(n, snr_db, rng)
        errors += e
        bits += b
    return BerRecord(snr_db, errors, bits, time.perf_counter() - t0, errors < stop.min_errors)


def job_seed(master_seed: int, system: str, m: int, irr_db: float, snr_db: float) -> int:
    """Seed for one sweep job, independent of scheduling order."""
    key = f"{master_seed}|{system}|{m}|{float(irr_db)!r}|{float(snr_db)!r}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


@dataclass
class SweepSpec:
    snr_db: list
    irr_db: list
    m: list
    systems: list = field(default_factory=lambda: [BASELINE])
    min_errors: int = 100
    max_bits: int = 10_000_000
    seed: int = 0
    irr_mode: str = "amplitude"
    workers: int = 1
    checkpoint_dir: str = "checkpoints"
    train: bool = False
    train_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.snr_db or not self.irr_db or not self.m or not self.systems:
            raise ValueError("sweep grids must be non-empty")
        unknown = set(self.systems) - set(SYSTEMS)
        if unknown:
            raise ValueError(f"unknown systems {sorted(unknown)}; choose from {SYSTEMS}")
        if self.min_errors < 1 or self.max_bits < 1:
            raise ValueError("stop rule needs positive min_errors and max_bits")
        if BASELINE in self.systems and any(m % 2 for m in self.m):
            raise ValueError("the QAM baseline needs even m")

    @property
    def stop(self) -> StopRule:
        return StopRule(self.min_errors, self.max_bits)


SHIPPED_DIR = Path(__file__).resolve().parent / "checkpoints"


def shipped_checkpoints() -> list[Path]:
    """Trained pairs bundled with the package, named like :func:`checkpoint_path`."""
    if not SHIPPED_DIR.is_dir():
        return []
    return sorted(d for d in SHIPPED_DIR.iterdir() if (d / "pair.cfg").exists())


def checkpoint_path(root, system: str, m: int, irr_db: float, snr_db: float) -> Path:
    return Path(root) / f"{system}_m{m}_irr{irr_db:g}_snr{snr_db:g}"


def ensure_pair(spec: SweepSpec, system: str, m: int, irr_db: float, snr_db: float) -> Path:
    path = checkpoint_path(spec.checkpoint_dir, system, m, irr_db, snr_db)
    if (path / "pair.cfg").exists():
        return path
    if not spec.train:
        raise MissingCheckpoint(f"no checkpoint at {path} (pass --train to create it)")
    seed = job_seed(spec.seed, "train:" + system, m, irr_db, snr_db) % (2**63)
    kw = dict(m=m, irr_db=irr_db, irr_mode=spec.irr_mode, snr_db=snr_db, seed=seed)
    kw.update(spec.train_overrides)
    regime = REGIME_OF[system]
    cfg = TrainConfig.rl(**kw) if regime == RL else TrainConfig.conventional(**kw)
    log.info("training %s m=%d irr=%g snr=%g", system, m, irr_db, snr_db)
    pair, ledger = train(cfg)
    pair.save(path)
    log.info("saved %s (%s)", path, ledger.report())
    return path


def _make_system(system: str, m: int, irr_db: float, irr_mode: str, ckpt: Optional[Path]):
    link = ImpairedLink.from_irr(irr_db, irr_mode)
    if system == BASELINE:
        return BaselineSystem(m, link)
    return LearnedSystem(TrainedPair.load(ckpt), link)


def _eval_job(job):
    system, m, irr_db, irr_mode, snr_db, ckpt, stop, seed = job
    sysobj = _make_system(system, m, irr_db, irr_mode, ckpt)
    rec = run_ber_point(sysobj, snr_db, stop, np.random.default_rng(seed))
    return job, rec


def run_sweep(spec: SweepSpec, out_csv=None) -> dict:
    """BER curves keyed by ``(system, m, irr_db)``; writes the CSV when ``out_csv`` is given."""
    jobs = []
    for system in spec.systems:
        for m in spec.m:
            for irr in spec.irr_db:
                for snr in spec.snr_db:
                    ckpt = None if system == BASELINE else ensure_pair(spec, system, m, irr, snr)
                    seed = job_seed(spec.seed, system, m, irr, snr)
                    jobs.append((system, m, irr, spec.irr_mode, snr, ckpt, spec.stop, seed))
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_eval_job, jobs))
    else:
        results = [_eval_job(j) for j in jobs]

    curves: dict = {}
    rows = []
    for (system, m, irr, _, snr, _, _, seed), rec in results:
        curves.setdefault((system, m, irr), []).append(rec)
        rows.append(csv_row(system, m, irr, rec, seed))
    for (system, m, irr), recs in curves.items():
        if system == BASELINE:
            continue
        ordered = sorted(recs, key=lambda r: r.snr_db)
        for a, b in zip(ordered, ordered[1:]):
            if b.ber > a.ber and not (a.censored or b.censored):
                log.warning("%s m=%d irr=%g: BER rises from %.3g at %g dB to %.3g at %g dB",
                            system, m, irr, a.ber, a.snr_db, b.ber, b.snr_db)
    if out_csv is not None:
        write_csv(rows, out_csv)
    return curves


def csv_row(system: str, m: int, irr_db: float, rec: BerRecord, seed: int) -> list:
    return [system, m, _num(irr_db), _num(rec.snr_db), rec.bits_simulated, rec.bit_errors,
            repr(rec.ber), int(rec.censored), seed]


def _num(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)


def export_constellation(pair: TrainedPair, sdnr_db: float, path) -> Path:
    c, _ = constellation_forward(pair.tx_net, sdnr_db)
    path = Path(path)
    path.write_text(constellation_dumps(c, sdnr_db))
    return path
