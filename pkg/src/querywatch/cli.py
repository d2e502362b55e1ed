"""querywatch command line.

Exit codes: 0 ok, 1 I/O failure, 2 bad data, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import synth
from .attack_sim import AttackSpec, load_trace, run_eval, save_trace, synth_attack_trace
from .audio_io import read_wav, write_wav
from .calibration import CalibrationResult, calibrate
from .detector import DetectorConfig
from .errors import QueryWatchError
from .experiments import AXES, run_sweep, to_csv
from .fingerprint import FingerprintConfig

EXIT_OK, EXIT_IO, EXIT_DATA, EXIT_USAGE = 0, 1, 2, 64

log = logging.getLogger("querywatch")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _values(text: str) -> list[float]:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty values list")
    return [float(t) for t in items]


# ------------------------------------------------------------------ config


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: top-level JSON object expected")
    return doc


def resolve_detector(file_cfg: dict, args: argparse.Namespace, calib: CalibrationResult | None = None) -> DetectorConfig:
    """Detector settings from the config file, then the calibration, then flags."""
    fields = {k: file_cfg[k] for k in ("k", "delta", "defense_noise_snr", "defense_noise_seed",
                                       "action_policy", "block_duration") if k in file_cfg}
    if isinstance(file_cfg.get("fingerprint"), dict):
        fields["fingerprint"] = FingerprintConfig.from_dict(file_cfg["fingerprint"])
    if calib is not None:
        fields.update(k=calib.k, delta=calib.delta, defense_noise_snr=calib.defense_noise_snr)
    for name in ("k", "delta", "defense_noise_snr"):
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    try:
        return DetectorConfig.from_dict(fields)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid detector config: {exc}") from exc


def _pick(args, file_cfg: dict, name: str, default=None):
    value = getattr(args, name, None)
    return value if value is not None else file_cfg.get(name, default)


def load_corpus(directory: str | Path) -> list:
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")
    return [read_wav(p) for p in sorted(root.glob("*.wav"))]


def _load_calib(path: str) -> CalibrationResult:
    return CalibrationResult.from_json(Path(path).read_text())


# -------------------------------------------------------------- subcommands


def cmd_calibrate(args, file_cfg) -> int:
    corpus_dir = _pick(args, file_cfg, "corpus")
    out = _pick(args, file_cfg, "out", "calib.json")
    if not corpus_dir:
        raise UsageError("--corpus is required")
    det = resolve_detector(file_cfg, args)
    corpus = load_corpus(corpus_dir)
    fpr = _pick(args, file_cfg, "fpr", 0.001)
    seed = _pick(args, file_cfg, "seed", 0)
    res = calibrate(corpus, det.k, fpr, seed, det.fingerprint, det.defense_noise_snr, det.defense_noise_seed)
    Path(out).write_text(res.to_json())
    print(f"k={res.k} delta={res.delta:.6f} corpus={res.corpus_size} -> {out}")
    return EXIT_OK


def cmd_scan(args, file_cfg) -> int:
    trace_path = _pick(args, file_cfg, "trace")
    calib_path = _pick(args, file_cfg, "calib")
    if not trace_path:
        raise UsageError("--trace is required")
    calib = _load_calib(calib_path) if calib_path else None
    cfg = resolve_detector(file_cfg, args, calib)
    report = run_eval(load_trace(trace_path), cfg, label=Path(trace_path).resolve().name if Path(trace_path).is_dir() else Path(trace_path).parent.name)
    out = _pick(args, file_cfg, "report")
    if out:
        Path(out).write_text(report.to_json(indent=2) + "\n")
    print(report.to_table())
    return EXIT_OK


def cmd_simulate(args, file_cfg) -> int:
    out = _pick(args, file_cfg, "out")
    carrier_path = _pick(args, file_cfg, "carrier")
    if not out or not carrier_path:
        raise UsageError("--carrier and --out are required")
    seed = _pick(args, file_cfg, "seed", 0)
    p_fake = _pick(args, file_cfg, "p_fake", 0.0)
    decoys = []
    if p_fake > 0:
        decoy_dir = _pick(args, file_cfg, "decoys")
        decoys = load_corpus(decoy_dir) if decoy_dir else synth.benign_corpus(200, seed=seed + 1, duration=4.0)
    spec = AttackSpec(
        read_wav(carrier_path),
        n_queries=_pick(args, file_cfg, "n", 300),
        p_fake=p_fake,
        decoys=decoys,
        attack_noise_snr=_pick(args, file_cfg, "attack_snr"),
        seed=seed,
        client_id=_pick(args, file_cfg, "client", "attacker"),
    )
    manifest = save_trace(synth_attack_trace(spec), out)
    print(f"wrote {spec.n_queries} queries -> {manifest}")
    return EXIT_OK


def cmd_sweep(args, file_cfg) -> int:
    values = args.values if args.values is not None else file_cfg.get("values")
    if not values:
        raise UsageError("--values must list at least one value")
    axis = _pick(args, file_cfg, "axis")
    seed = _pick(args, file_cfg, "seed", 0)
    calib_path = _pick(args, file_cfg, "calib")
    corpus_dir = _pick(args, file_cfg, "corpus")
    if calib_path is None and not (axis == "noise_snr" and corpus_dir):
        raise UsageError("--calib is required (or --corpus for the noise_snr axis)")
    cfg = resolve_detector(file_cfg, args, _load_calib(calib_path) if calib_path else None)

    carrier_path = _pick(args, file_cfg, "carrier")
    if carrier_path:
        carrier = read_wav(carrier_path)
    elif axis == "noise_snr":
        carrier = synth.dialogue_carrier(seed)
    else:
        carrier = synth.music_carrier(seed)
    decoy_dir = _pick(args, file_cfg, "decoys")
    decoys = load_corpus(decoy_dir) if decoy_dir else synth.benign_corpus(200, seed=seed + 1, duration=4.0)
    corpus = load_corpus(corpus_dir) if corpus_dir else None

    points = run_sweep(axis, values, carrier, cfg, decoys, corpus, _pick(args, file_cfg, "fpr", 0.001),
                       _pick(args, file_cfg, "n", 300), seed)
    text = to_csv(points)
    out = _pick(args, file_cfg, "out")
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_make_corpus(args, file_cfg) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for clip in synth.benign_corpus(args.n, seed=args.seed, duration=args.duration):
        write_wav(out / f"{clip.id}.wav", clip)
    if args.carrier:
        make = synth.dialogue_carrier if args.carrier == "dialogue" else synth.music_carrier
        write_wav(out.parent / f"carrier_{args.carrier}.wav", make(args.seed))
    print(f"wrote {args.n} clips -> {out}")
    return EXIT_OK


def cmd_serve(args, file_cfg) -> int:
    from .gateway import GatewayConfig, serve

    gw = dict(file_cfg)
    calib_path = gw.pop("calib", None) or args.calib
    if args.listen:
        gw["listen"] = args.listen
    try:
        cfg = GatewayConfig.from_dict(gw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid gateway config: {exc}") from exc
    if calib_path:
        calib = _load_calib(calib_path)
        cfg.detector = cfg.detector.with_(k=calib.k, delta=calib.delta, defense_noise_snr=calib.defense_noise_snr)
    serve(cfg)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="querywatch", description="Stateful detection of query-based audio adversarial attacks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def detector_flags(sp):
        sp.add_argument("--config", help="JSON config; flags override its values")
        sp.add_argument("--k", type=_positive_int)
        sp.add_argument("--delta", type=_fraction)
        sp.add_argument("--defense-snr", dest="defense_noise_snr", type=float)
        sp.add_argument("--seed", type=int)

    c = sub.add_parser("calibrate", help="choose delta from a benign corpus")
    detector_flags(c)
    c.add_argument("--corpus", help="directory of WAV clips")
    c.add_argument("--fpr", type=_fraction)
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("scan", help="replay a trace through the detector")
    detector_flags(s)
    s.add_argument("--trace")
    s.add_argument("--calib")
    s.add_argument("--report")
    s.set_defaults(func=cmd_scan)

    m = sub.add_parser("simulate", help="write a simulated attack trace")
    m.add_argument("--config")
    m.add_argument("--carrier")
    m.add_argument("-n", type=_positive_int)
    m.add_argument("--p-fake", dest="p_fake", type=_fraction)
    m.add_argument("--decoys", help="directory of decoy WAVs (default: synthetic)")
    m.add_argument("--attack-snr", dest="attack_snr", type=float)
    m.add_argument("--client")
    m.add_argument("--seed", type=int)
    m.add_argument("--out")
    m.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="DSR/FSNR across one axis")
    detector_flags(w)
    w.add_argument("--axis", choices=AXES, required=True)
    w.add_argument("--values", type=_values, help="comma separated; p_fake in percent")
    w.add_argument("--carrier", help="carrier WAV (default: synthetic)")
    w.add_argument("--calib")
    w.add_argument("--corpus", help="benign corpus; recalibrates delta per noise level")
    w.add_argument("--decoys")
    w.add_argument("--fpr", type=_fraction)
    w.add_argument("-n", type=_positive_int)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    g = sub.add_parser("make-corpus", help="write a synthetic benign corpus")
    g.add_argument("--n", type=_positive_int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--duration", type=float, default=4.0)
    g.add_argument("--carrier", choices=("music", "dialogue"), help="also write a synthetic carrier")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_make_corpus)

    v = sub.add_parser("serve", help="run the HTTP gateway")
    v.add_argument("--config")
    v.add_argument("--listen", help="host:port")
    v.add_argument("--calib")
    v.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_cfg = load_config(getattr(args, "config", None))
        return args.func(args, file_cfg)
    except UsageError as exc:
        print(f"querywatch: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QueryWatchError, json.JSONDecodeError, ValueError) as exc:
        print(f"querywatch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"querywatch: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
