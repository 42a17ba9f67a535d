"""Alternating TX/RX training: conventional (backprop through a channel model) and RL.

The transmitter and receiver are separate agents. Whatever crosses between them is
booked in an :class:`ExchangeLedger`:

* every round the TX sends its constellation (2^(m+1) real scalars);
* in conventional training the RX returns ``dL/dr`` for each sample of the TX
  batch (2 scalars per sample);
* in RL training the RX returns one scalar loss per perturbed sample.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import config as cfgio
from .channel import ImpairedLink, complex_awgn
from .demapper import build_demapper, features
from .mapper import Constellation, build_mapper, constellation_backward, constellation_forward
from .neural import DenseNet, Optimizer, backward, cce_from_indices, forward
from . import neural

log = logging.getLogger(__name__)

CONVENTIONAL = "conventional"
RL = "rl"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    m: int = 2
    regime: str = CONVENTIONAL
    snr_db: float = 10.0
    irr_db: float = math.inf
    irr_mode: str = "amplitude"
    dataset_size: int = 100_000
    finetune_size: int = 0
    batch_size: int = 256
    epochs: int = 10
    finetune_epochs: int = 10
    rx_iters: int = 10
    lr_adam: float = 1e-2
    lr_sgd: float = 5e-2
    lr_tx_rl: float = 1e-2
    sigma2: float = 0.02
    rl_baseline: bool = True
    hidden: int = 128
    snr_random: bool = False
    snr_min_db: float = 0.0
    snr_max_db: float = 15.0
    patience: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.regime not in (CONVENTIONAL, RL):
            raise ValueError(f"unknown training regime {self.regime!r}")
        if not 1 <= self.m <= 8:
            raise ValueError("m must be in 1..8")
        if self.batch_size < 1 or self.dataset_size - self.finetune_size < self.batch_size:
            raise ValueError("dataset (excluding fine-tuning data) must hold at least one batch")
        if self.finetune_size and self.finetune_size < self.batch_size:
            raise ValueError("fine-tuning set must hold at least one batch")
        if not 0 < self.sigma2 <= 0.5:
            raise ValueError("exploration variance sigma2 must lie in (0, 0.5]")
        if self.epochs < 1 or self.rx_iters < 1:
            raise ValueError("epochs and rx_iters must be positive")

    @classmethod
    def conventional(cls, **kw) -> "TrainConfig":
        base = dict(regime=CONVENTIONAL, dataset_size=100_000, finetune_size=0, rx_iters=10, epochs=10)
        base.update(kw)
        return cls(**base)

    @classmethod
    def rl(cls, **kw) -> "TrainConfig":
        base = dict(regime=RL, dataset_size=10_000, finetune_size=3000, rx_iters=1, epochs=60,
                    finetune_epochs=20)
        base.update(kw)
        return cls(**base)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ExchangeLedger:
    scalars_tx_to_rx: int = 0
    scalars_rx_to_tx: int = 0
    rounds: int = 0

    def send_constellation(self, c: Constellation) -> np.ndarray:
        self.scalars_tx_to_rx += 2 * len(c.points)
        self.rounds += 1
        # the receiver only ever sees a copy
        return c.points.copy()

    def feed_back(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        n = values.size * (2 if np.iscomplexobj(values) else 1)
        self.scalars_rx_to_tx += n
        return values.copy()

    def report(self) -> str:
        return (f"rounds={self.rounds} tx_to_rx_scalars={self.scalars_tx_to_rx} "
                f"rx_to_tx_scalars={self.scalars_rx_to_tx}")


class Transmitter:
    def __init__(self, net: DenseNet, optimizer: Optimizer):
        self.net = net
        self.opt = optimizer
        self._cache = None

    def constellation(self, sdnr_db: float) -> Constellation:
        c, self._cache = constellation_forward(self.net, sdnr_db)
        return c

    def update(self, grad_points: np.ndarray) -> None:
        """Descend along ``grad_points`` (d loss / d point, re + j im) for the last constellation."""
        grads = constellation_backward(self.net, self._cache, grad_points)
        self.opt.step(self.net, grads)


class Receiver:
    def __init__(self, net: DenseNet, optimizer: Optimizer):
        self.net = net
        self.opt = optimizer

    def losses(self, r, labels, sdnr_db: float) -> np.ndarray:
        p, _ = forward(self.net, features(r, sdnr_db))
        return cce_from_indices(p, labels)

    def _loss_grad(self, r, labels, sdnr_db):
        p, cache = forward(self.net, features(r, sdnr_db))
        g = p.copy()
        g[np.arange(len(labels)), labels] -= 1.0
        g /= len(labels)
        return cce_from_indices(p, labels), cache, g

    def train_step(self, r, labels, sdnr_db: float) -> float:
        loss, cache, g = self._loss_grad(r, labels, sdnr_db)
        grads = backward(self.net, cache, g, wrt_logits=True)
        self.opt.step(self.net, grads)
        return float(loss.mean())

    def input_gradient(self, r, labels, sdnr_db: float) -> tuple[float, np.ndarray]:
        """Mean loss and ``d(mean loss)/dRe r + j d(mean loss)/dIm r`` per sample."""
        loss, cache, g = self._loss_grad(r, labels, sdnr_db)
        gin = backward(self.net, cache, g, wrt_logits=True).inputs
        return float(loss.mean()), gin[:, 0] + 1j * gin[:, 1]


@dataclass
class TrainedPair:
    tx_net: DenseNet
    rx_net: DenseNet
    config: TrainConfig
    final_loss: float
    log_rows: list = field(default_factory=list)

    @property
    def link(self) -> ImpairedLink:
        return ImpairedLink.from_irr(self.config.irr_db, self.config.irr_mode)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        neural.save(self.tx_net, d / "tx.net")
        neural.save(self.rx_net, d / "rx.net")
        meta = {f"train.{k}": v for k, v in self.config.to_dict().items()}
        meta["result.final_loss"] = self.final_loss
        (d / "pair.cfg").write_text(cfgio.dumps(meta))

    @classmethod
    def load(cls, directory) -> "TrainedPair":
        d = Path(directory)
        meta = cfgio.loads((d / "pair.cfg").read_text())
        cfg = config_from_mapping(meta)
        return cls(neural.load(d / "tx.net"), neural.load(d / "rx.net"), cfg,
                   float(meta.get("result.final_loss", "nan")))


def config_from_mapping(values: dict, **overrides) -> TrainConfig:
    """Build a TrainConfig from ``train.*`` keys (strings or typed values)."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    kw = {}
    for key, raw in values.items():
        if not key.startswith("train."):
            continue
        name = key[len("train."):]
        if name not in fields:
            raise cfgio.ConfigError(f"unknown training key {key!r}")
        kw[name] = cfgio.coerce(raw, type(getattr(TrainConfig(), name)))
    kw.update(overrides)
    regime = kw.get("regime", CONVENTIONAL)
    return TrainConfig.rl(**kw) if regime == RL else TrainConfig.conventional(**kw)


class _BatchStream:
    """Endless reshuffled pass over a fixed label set, always yielding full batches."""

    def __init__(self, labels: np.ndarray, batch: int, rng: np.random.Generator):
        self.labels = labels
        self.batch = batch
        self.rng = rng
        self.order = rng.permutation(len(labels))
        self.pos = 0

    def next(self) -> np.ndarray:
        out = np.empty(self.batch, dtype=np.int64)
        filled = 0
        while filled < self.batch:
            if self.pos == len(self.order):
                self.order = self.rng.permutation(len(self.labels))
                self.pos = 0
            take = min(self.batch - filled, len(self.order) - self.pos)
            out[filled:filled + take] = self.labels[self.order[self.pos:self.pos + take]]
            filled += take
            self.pos += take
        return out


def _setup(cfg: TrainConfig, link: Optional[ImpairedLink], rng: np.random.Generator):
    if link is None:
        link = ImpairedLink.from_irr(cfg.irr_db, cfg.irr_mode)
    tx_net = build_mapper(cfg.m, rng)
    rx_net = build_demapper(cfg.m, rng, cfg.hidden)
    if cfg.regime == CONVENTIONAL:
        tx_opt = Optimizer("adam", cfg.lr_adam)
    else:
        tx_opt = Optimizer("sgd", cfg.lr_tx_rl)
    tx = Transmitter(tx_net, tx_opt)
    rx = Receiver(rx_net, Optimizer("sgd", cfg.lr_sgd))
    return link, tx, rx


def _round_snr(cfg: TrainConfig, rng: np.random.Generator) -> float:
    if cfg.snr_random:
        return float(rng.uniform(cfg.snr_min_db, cfg.snr_max_db))
    return cfg.snr_db


class _Monitor:
    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.stale = 0
        self.warned = False

    def check(self, loss: float, where: str) -> None:
        if not math.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} during {where}")
        if loss < self.best - 1e-6:
            self.best = loss
            self.stale = 0
            return
        self.stale += 1
        if self.stale >= self.patience and not self.warned:
            self.warned = True
            warnings.warn(f"training loss has not improved for {self.patience} rounds ({where})",
                          RuntimeWarning, stacklevel=3)


def _n_rounds(cfg: TrainConfig, train_size: int, steps_per_round: int) -> int:
    total_steps = max(1, cfg.epochs * train_size // cfg.batch_size)
    return max(1, math.ceil(total_steps / steps_per_round))


def _rx_phase(rx: Receiver, link: ImpairedLink, points: np.ndarray, stream: _BatchStream,
              steps: int, snr_db: float, sdnr_db: float, rng: np.random.Generator) -> float:
    total = 0.0
    for _ in range(steps):
        idx = stream.next()
        r = link.transmit(points[idx], snr_db, rng)
        total += rx.train_step(r, idx, sdnr_db)
    return total / steps


def train_conventional(cfg: TrainConfig, link: Optional[ImpairedLink] = None,
                       rng: Optional[np.random.Generator] = None):
    """Alternate one Adam step on the mapper with ``rx_iters`` SGD steps on the demapper.

    The mapper step backpropagates the demapper's input gradient through the
    (known, differentiable) widely-linear channel. Returns ``(TrainedPair, ExchangeLedger)``.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    link, tx, rx = _setup(cfg, link, rng)
    k = 2**cfg.m
    labels = rng.integers(0, k, size=cfg.dataset_size)
    stream = _BatchStream(labels, cfg.batch_size, rng)
    jac = link.jacobian()
    ledger = ExchangeLedger()
    monitor = _Monitor(cfg.patience)
    rows = []
    n_rounds = _n_rounds(cfg, cfg.dataset_size, cfg.rx_iters + 1)
    rx_loss = math.nan
    for rnd in range(n_rounds):
        snr = _round_snr(cfg, rng)
        sdnr = link.sdnr_db(snr)

        idx = stream.next()
        c = tx.constellation(sdnr)
        r = link.transmit(c.points[idx], snr, rng)
        tx_loss, g_r = rx.input_gradient(r, idx, sdnr)
        g_r = ledger.feed_back(g_r)
        g_vec = np.stack([g_r.real, g_r.imag], axis=1) @ jac
        grad_points = np.zeros(k, dtype=complex)
        np.add.at(grad_points, idx, g_vec[:, 0] + 1j * g_vec[:, 1])
        tx.update(grad_points)

        points = ledger.send_constellation(tx.constellation(sdnr))
        rx_loss = _rx_phase(rx, link, points, stream, cfg.rx_iters, snr, sdnr, rng)
        monitor.check(rx_loss, f"round {rnd}")
        rows.append((rnd, "tx", tx_loss, ledger.scalars_tx_to_rx, ledger.scalars_rx_to_tx))
        rows.append((rnd, "rx", rx_loss, ledger.scalars_tx_to_rx, ledger.scalars_rx_to_tx))
    log.info("conventional training done: %s", ledger.report())
    return TrainedPair(tx.net, rx.net, cfg, rx_loss, rows), ledger


def policy_gradient(losses: np.ndarray, perturbation: np.ndarray, sigma2: float,
                    baseline: bool = False) -> np.ndarray:
    """Per-sample score-function gradient w.r.t. the clean symbol.

    The policy emits ``sqrt(1 - sigma2) * s + sigma * w`` with ``w`` unit-power
    circular Gaussian, so ``grad_s log pi = 2 sqrt(1 - sigma2) w / sigma`` (as
    re + j im). Each sample's score is weighted by its loss, or by its loss minus
    the leave-one-out mean of the others when ``baseline`` is set.
    """
    losses = np.asarray(losses, dtype=float)
    weight = losses
    if baseline and len(losses) > 1:
        weight = losses - (losses.sum() - losses) / (len(losses) - 1)
    score = 2.0 * math.sqrt(1.0 - sigma2) * perturbation / math.sqrt(sigma2)
    return weight * score


def train_rl(cfg: TrainConfig, link: Optional[ImpairedLink] = None,
             rng: Optional[np.random.Generator] = None):
    """Alternate demapper SGD with score-function mapper updates, then fine-tune the demapper.

    No gradient crosses the channel: the mapper learns only from the per-sample
    losses the receiver reports for Gaussian-perturbed symbols.
    """
    if not cfg.sigma2 > 0:
        raise ValueError("RL training needs a positive exploration variance")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    link, tx, rx = _setup(cfg, link, rng)
    k = 2**cfg.m
    n_main = cfg.dataset_size - cfg.finetune_size
    labels = rng.integers(0, k, size=n_main)
    stream = _BatchStream(labels, cfg.batch_size, rng)
    ledger = ExchangeLedger()
    monitor = _Monitor(cfg.patience)
    rows = []
    a = math.sqrt(1.0 - cfg.sigma2)
    sigma = math.sqrt(cfg.sigma2)
    n_rounds = _n_rounds(cfg, n_main, cfg.rx_iters + 1)
    rx_loss = math.nan
    points = None
    snr = cfg.snr_db
    sdnr = link.sdnr_db(snr)
    for rnd in range(n_rounds):
        snr = _round_snr(cfg, rng)
        sdnr = link.sdnr_db(snr)

        idx = stream.next()
        c = tx.constellation(sdnr)
        w = complex_awgn(rng, len(idx), 1.0)
        r = link.transmit(a * c.points[idx] + sigma * w, snr, rng)
        losses = ledger.feed_back(rx.losses(r, idx, sdnr))
        g = policy_gradient(losses, w, cfg.sigma2, cfg.rl_baseline) / len(idx)
        grad_points = np.zeros(k, dtype=complex)
        np.add.at(grad_points, idx, g)
        tx.update(grad_points)

        points = ledger.send_constellation(tx.constellation(sdnr))
        rx_loss = _rx_phase(rx, link, points, stream, cfg.rx_iters, snr, sdnr, rng)
        monitor.check(rx_loss, f"round {rnd}")
        rows.append((rnd, "tx", float(losses.mean()), ledger.scalars_tx_to_rx, ledger.scalars_rx_to_tx))
        rows.append((rnd, "rx", rx_loss, ledger.scalars_tx_to_rx, ledger.scalars_rx_to_tx))

    if cfg.finetune_size:
        ft_labels = rng.integers(0, k, size=cfg.finetune_size)
        ft_stream = _BatchStream(ft_labels, cfg.batch_size, rng)
        steps = max(1, cfg.finetune_epochs * cfg.finetune_size // cfg.batch_size)
        if cfg.snr_random:
            snr, sdnr = cfg.snr_db, link.sdnr_db(cfg.snr_db)
            points = tx.constellation(sdnr).points
        rx_loss = _rx_phase(rx, link, points, ft_stream, steps, snr, sdnr, rng)
        monitor.check(rx_loss, "fine-tuning")
        rows.append((n_rounds, "finetune", rx_loss, ledger.scalars_tx_to_rx, ledger.scalars_rx_to_tx))
    log.info("RL training done: %s", ledger.report())
    return TrainedPair(tx.net, rx.net, cfg, rx_loss, rows), ledger


def train(cfg: TrainConfig, link: Optional[ImpairedLink] = None, rng=None):
    """Dispatch on ``cfg.regime``; any non-finite state surfaces as :class:`TrainingDiverged`."""
    fn = train_rl if cfg.regime == RL else train_conventional
    try:
        with np.errstate(over="raise", invalid="raise"):
            return fn(cfg, link, rng)
    except FloatingPointError as exc:
        raise TrainingDiverged(str(exc)) from exc


def evaluate_loss(pair: TrainedPair, snr_db: float, n_samples: int,
                  rng: np.random.Generator, link: Optional[ImpairedLink] = None) -> float:
    """Monte Carlo mean cross-entropy over fresh messages and noise."""
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    link = pair.link if link is None else link
    sdnr = link.sdnr_db(snr_db)
    c, _ = constellation_forward(pair.tx_net, sdnr)
    idx = rng.integers(0, len(c.points), size=n_samples)
    r = link.transmit(c.points[idx], snr_db, rng)
    p, _ = forward(pair.rx_net, features(r, sdnr))
    return float(cce_from_indices(p, idx).mean())


def round_trip_gate(pair: TrainedPair, snr_db: Optional[float] = None,
                    link: Optional[ImpairedLink] = None) -> bool:
    """True when every message survives the noiseless impaired channel."""
    link = pair.link if link is None else link
    snr_db = pair.config.snr_db if snr_db is None else snr_db
    sdnr = link.sdnr_db(snr_db)
    c, _ = constellation_forward(pair.tx_net, sdnr)
    r = link.transmit(c.points, snr_db, None)
    p, _ = forward(pair.rx_net, features(r, sdnr))
    return bool(np.all(np.argmax(p, axis=1) == np.arange(len(c.points))))


def write_training_log(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "phase", "mean_loss", "scalars_tx_to_rx", "scalars_rx_to_tx"])
        for rnd, phase, loss, t2r, r2t in rows:
            w.writerow([rnd, phase, repr(float(loss)), t2r, r2t])
