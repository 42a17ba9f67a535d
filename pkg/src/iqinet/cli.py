"""Command line entry point: ``iqinet <command> [options]``.

Every option can also come from a ``key = value`` config file (``--config``);
``--set key=value`` overrides the file. Exit codes: 0 success, 1 configuration
error, 2 training divergence, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import config as cfgio
from .channel import Atmosphere, ImpairedLink, LinkGeometry, link_budget_report
from .evaluation import (
    BASELINE,
    CSV_COLUMNS,
    BaselineSystem,
    LearnedSystem,
    MissingCheckpoint,
    StopRule,
    SweepSpec,
    csv_row,
    export_constellation,
    job_seed,
    run_ber_point,
    run_sweep,
    write_csv,
)
from .impairments import coeffs_from_irr
from .training import (
    CONVENTIONAL,
    RL,
    TrainedPair,
    TrainingDiverged,
    config_from_mapping,
    train,
    write_training_log,
)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3
BOLTZMANN = 1.380649e-23


def _settings(args) -> dict:
    values = cfgio.load(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise cfgio.ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    return values


def _channel_irr(values: dict) -> tuple[float, str]:
    return (cfgio.parse_float(values.get("channel.irr_db", "inf")),
            values.get("channel.irr_mode", "amplitude"))


def cmd_train(args, regime: str) -> int:
    values = _settings(args)
    irr_db, irr_mode = _channel_irr(values)
    overrides = {"regime": regime}
    if "train.irr_db" not in values:
        overrides["irr_db"] = irr_db
    if "train.irr_mode" not in values:
        overrides["irr_mode"] = irr_mode
    cfg = config_from_mapping(values, **overrides)
    pair, ledger = train(cfg)
    pair.save(args.out)
    if args.log:
        write_training_log(pair.log_rows, args.log)
    print(f"saved {args.out}")
    print(f"final_loss = {pair.final_loss!r}")
    print(f"exchange: {ledger.report()}")
    return EXIT_OK


def cmd_eval(args) -> int:
    values = _settings(args)
    snrs = cfgio.parse_list(values.get("sweep.snr_db_list", args.snr_db or "10"))
    stop = StopRule(cfgio.parse_int(values.get("sweep.min_errors", 100)),
                    cfgio.parse_int(values.get("sweep.max_bits", 10_000_000)))
    seed = cfgio.parse_int(values.get("sweep.seed", 0))
    if args.checkpoint:
        pair = TrainedPair.load(args.checkpoint)
        name = "learned-rl" if pair.config.regime == RL else "learned-conv"
        system = LearnedSystem(pair)
        m, irr_db = pair.config.m, pair.config.irr_db
    else:
        irr_db, irr_mode = _channel_irr(values)
        m = cfgio.parse_int(values.get("train.m", args.m))
        name = BASELINE
        system = BaselineSystem(m, ImpairedLink.from_irr(irr_db, irr_mode))
    rows = []
    for snr in snrs:
        s = job_seed(seed, name, m, irr_db, snr)
        rec = run_ber_point(system, snr, stop, np.random.default_rng(s))
        rows.append(csv_row(name, m, irr_db, rec, s))
    if args.out:
        write_csv(rows, args.out)
    else:
        print(",".join(CSV_COLUMNS))
        for row in rows:
            print(",".join(str(v) for v in row))
    return EXIT_OK


def sweep_spec_from(values: dict, train_flag: bool) -> SweepSpec:
    irr_mode = values.get("channel.irr_mode", "amplitude")
    train_overrides = {}
    if any(k.startswith("train.") for k in values):
        base = config_from_mapping({k: v for k, v in values.items() if k.startswith("train.")})
        defaults = config_from_mapping({})
        for k, v in base.to_dict().items():
            if v != getattr(defaults, k) and k not in ("m", "irr_db", "snr_db", "regime", "seed"):
                train_overrides[k] = v
    systems = [s.strip() for s in values.get("sweep.systems", BASELINE).split(",") if s.strip()]
    return SweepSpec(
        snr_db=cfgio.parse_list(values.get("sweep.snr_db_list", "")),
        irr_db=cfgio.parse_list(values.get("sweep.irr_db_list", "")),
        m=cfgio.parse_list(values.get("sweep.m_list", ""), cfgio.parse_int),
        systems=systems,
        min_errors=cfgio.parse_int(values.get("sweep.min_errors", 100)),
        max_bits=cfgio.parse_int(values.get("sweep.max_bits", 10_000_000)),
        seed=cfgio.parse_int(values.get("sweep.seed", 0)),
        irr_mode=irr_mode,
        workers=cfgio.parse_int(values.get("sweep.workers", 1)),
        checkpoint_dir=values.get("sweep.checkpoint_dir", "checkpoints"),
        train=train_flag,
        train_overrides=train_overrides,
    )


def cmd_sweep(args) -> int:
    values = _settings(args)
    try:
        spec = sweep_spec_from(values, args.train)
    except ValueError as exc:
        raise cfgio.ConfigError(str(exc)) from exc
    run_sweep(spec, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_export(args) -> int:
    pair = TrainedPair.load(args.checkpoint)
    if args.sdnr_db is not None:
        sdnr = args.sdnr_db
    else:
        snr = pair.config.snr_db if args.snr_db is None else args.snr_db
        sdnr = pair.link.sdnr_db(snr)
    export_constellation(pair, sdnr, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_link_budget(args) -> int:
    v = _settings(args)
    f = lambda key, default: cfgio.parse_float(v.get(key, default))  # noqa: E731
    geom = LinkGeometry(f("channel.distance_m", 10), f("channel.freq_hz", 100e9),
                        f("channel.gt_dbi", 30), f("channel.gr_dbi", 30))
    kappa = v.get("channel.kappa")
    atm = Atmosphere(f("channel.rel_humidity", 50), f("channel.temperature_k", 300.15),
                     f("channel.pressure_pa", 101325),
                     None if kappa is None else cfgio.parse_float(kappa))
    ps = f("channel.ps_w", 1.0)
    if "channel.no_w" in v:
        no = f("channel.no_w", 0)
    else:
        no = BOLTZMANN * atm.temperature_k * f("channel.bandwidth_hz", 50e6)
    irr_db, irr_mode = _channel_irr(v)
    g, k = coeffs_from_irr(irr_db, irr_mode)
    sys.stdout.write(link_budget_report(geom, atm, ps, no, g, k))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iqinet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    for name in ("train-conv", "train-rl"):
        sp = sub.add_parser(name, help=f"{'conventional' if name == 'train-conv' else 'RL-based'} training")
        common(sp)
        sp.add_argument("--out", required=True, help="checkpoint directory")
        sp.add_argument("--log", help="training log CSV")

    sp = sub.add_parser("eval", help="BER of one system at one or more SNRs")
    common(sp)
    sp.add_argument("--checkpoint", help="trained pair directory (omit for the QAM baseline)")
    sp.add_argument("--m", default="6", help="bits per symbol for the baseline")
    sp.add_argument("--snr-db", help="comma separated SNR list")
    sp.add_argument("--out", help="CSV output (stdout when omitted)")

    sp = sub.add_parser("sweep", help="BER curves over SNR, IRR and m")
    common(sp)
    sp.add_argument("--out", required=True, help="CSV output")
    sp.add_argument("--train", action="store_true", help="train missing checkpoints")

    sp = sub.add_parser("export-constellation", help="write a trained constellation record")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--snr-db", type=float)
    sp.add_argument("--sdnr-db", type=float)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("link-budget", help="physical link budget report")
    common(sp)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "train-conv": lambda: cmd_train(args, CONVENTIONAL),
        "train-rl": lambda: cmd_train(args, RL),
        "eval": lambda: cmd_eval(args),
        "sweep": lambda: cmd_sweep(args),
        "export-constellation": lambda: cmd_export(args),
        "link-budget": lambda: cmd_link_budget(args),
    }
    try:
        return handlers[args.command]()
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (MissingCheckpoint, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (cfgio.ConfigError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
