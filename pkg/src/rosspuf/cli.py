"""Command-line surface: reproducible experiments from a single master seed.

Subcommands: fabricate, challenge, respond, calibrate, sweep {bitgrid|mrr|ecc},
enroll, reconstruct, nist, export-bits.  Every artifact file embeds the
config digest and master seed, all randomness is derived from the master
seed through named paths, and re-running a command with the same inputs
reproduces its outputs byte for byte (no timestamps anywhere).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import challenge as chal
from . import fuzzy, keygen, metrics, photonics, randtests
from ._util import config_digest, derive_seed, pack_bits, unpack_bits
from .photonics import DetectionConfig, NominalConfig
from .readout import RidgeConfig


def _write_json(path: Path, payload: dict, meta: dict) -> None:
    payload = dict(payload)
    payload["meta"] = meta
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def _read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _meta(cfg_dict: dict, master_seed: int) -> dict:
    return {"config_digest": config_digest(cfg_dict), "master_seed": master_seed}


def _write_csv(path: Path, fieldnames, rows, meta: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {json.dumps(meta, sort_keys=True)}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fieldnames})


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "master_seed": 1,
    "device": {},           # NominalConfig overrides
    "detection": {},        # DetectionConfig overrides
    "ridge": {},            # RidgeConfig overrides
    "keygen": {"n_bit": 4, "encoding": "natural", "mode": "indexed",
               "ensemble_size": 64, "mean_shrink": 0.7},
    "challenge_length": 2000,
    "sweep": {"m_bits": list(range(1, 17)), "n_bits": list(range(1, 9)),
              "calibration_crps": 32, "intra_trials": 30, "inter_crps": 40,
              "mrr_counts": [2, 3, 4, 5, 6], "ecc_t": [0, 8, 16, 24, 28, 32, 36, 48],
              "ecc_trials": 100},
}


def load_config(path: str | None) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if path:
        user = _read_json(path)
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    return cfg


def _nominal(cfg: dict) -> NominalConfig:
    return NominalConfig(**cfg["device"])


def _detection(cfg: dict, **overrides) -> DetectionConfig:
    merged = dict(cfg["detection"])
    merged.update(overrides)
    return DetectionConfig(**merged)


def _ridge(cfg: dict) -> RidgeConfig:
    return RidgeConfig(**cfg["ridge"])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fabricate(args) -> int:
    cfg = load_config(args.config)
    if args.mrrs_per_node:
        cfg["device"]["mrrs_per_node"] = args.mrrs_per_node
    seed = args.seed if args.seed is not None else derive_seed(
        cfg["master_seed"], "fabricate")
    device = photonics.fabricate(_nominal(cfg), seed)
    _write_json(Path(args.out), photonics.device_to_dict(device),
                _meta(cfg, cfg["master_seed"]))
    print(f"fabricated device: {device.n_channels} channels "
          f"({len(device.nodes)} nodes x {len(device.nodes[0].mrrs)} MRRs), "
          f"fab_seed={seed}")
    for i, node in enumerate(device.nodes):
        offsets = ", ".join(f"{m.resonance_offset / 1e9:+.2f}" for m in node.mrrs)
        print(f"  node {i}: resonance offsets [GHz]: {offsets}")
    lw = photonics.mrr_linewidth_analytic(device.nodes[0].mrrs[0])
    print(f"  drop-port linewidth (analytic): {lw / 1e9:.3f} GHz")
    print(f"wrote {args.out}")
    return 0


def cmd_challenge(args) -> int:
    cfg = load_config(args.config)
    ch = chal.make_challenge(args.seed, args.length or cfg["challenge_length"])
    _write_json(Path(args.out), chal.challenge_to_dict(ch, inline_series=args.inline),
                _meta(cfg, cfg["master_seed"]))
    print(f"challenge seed={args.seed} length={ch.length} "
          f"y_out range [{ch.y_out.min():.4f}, {ch.y_out.max():.4f}]")
    print(f"wrote {args.out}")
    return 0


def _load_device(path) -> photonics.DeviceProfile:
    return photonics.device_from_dict(_read_json(path))


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    device = _load_device(args.device)
    kg = cfg["keygen"]
    det = _detection(cfg, adc_bits=args.m_bit or cfg["detection"].get("adc_bits", 16))
    profile = keygen.calibrate_device(
        device, det, _ridge(cfg), n_bit=args.n_bit or kg["n_bit"],
        encoding=kg["encoding"], mode=args.mode or kg["mode"],
        ensemble_size=args.ensemble or kg["ensemble_size"],
        calibration_seed=derive_seed(cfg["master_seed"], "calibrate"),
        challenge_length=cfg["challenge_length"], mean_shrink=kg["mean_shrink"])
    _write_json(Path(args.out), keygen.profile_to_dict(profile),
                _meta(cfg, cfg["master_seed"]))
    print(f"calibrated ({profile.mode}) over {profile.ensemble_size} pairs; "
          f"n_bit={profile.n_bit}")
    print(f"wrote {args.out}")
    return 0


def cmd_respond(args) -> int:
    cfg = load_config(args.config)
    device = _load_device(args.device)
    det = _detection(cfg, adc_bits=args.m_bit or cfg["detection"].get("adc_bits", 16),
                     noise_seed=derive_seed(cfg["master_seed"], "respond-noise",
                                            args.challenge_seed))
    if args.calibration:
        profile = keygen.profile_from_dict(_read_json(args.calibration))
    elif args.no_calibrate:
        print("error: --no-calibrate set but no --calibration file given",
              file=sys.stderr)
        return 2
    else:
        kg = cfg["keygen"]
        profile = keygen.calibrate_device(
            device, det, _ridge(cfg), n_bit=kg["n_bit"], encoding=kg["encoding"],
            mode=kg["mode"], ensemble_size=kg["ensemble_size"],
            calibration_seed=derive_seed(cfg["master_seed"], "calibrate"),
            challenge_length=cfg["challenge_length"], mean_shrink=kg["mean_shrink"])
    ch = chal.make_challenge(args.challenge_seed, cfg["challenge_length"])
    resp = keygen.respond(device, ch, det, _ridge(cfg), profile)
    _write_json(Path(args.out), keygen.response_to_dict(resp),
                _meta(cfg, cfg["master_seed"]))
    print(f"key length: {resp.key.n_bits} bits "
          f"({resp.key.weight_count} weights x {resp.key.bits_per_weight})")
    print(f"nmse: {resp.nmse:.6f}")
    print(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    sw = cfg["sweep"]
    device = _load_device(args.device)
    budget = metrics.SweepBudget(
        calibration_crps=sw["calibration_crps"], intra_trials=sw["intra_trials"],
        inter_crps=sw["inter_crps"], challenge_length=cfg["challenge_length"],
        master_seed=derive_seed(cfg["master_seed"], "sweep", args.kind),
        mean_shrink=cfg["keygen"]["mean_shrink"])
    out = Path(args.out)
    meta = _meta(cfg, cfg["master_seed"])
    if args.kind == "bitgrid":
        det = _detection(cfg)
        rows = metrics.sweep_bit_grid(device, sw["m_bits"], sw["n_bits"], det,
                                      _ridge(cfg), budget)
        fields = ["m_bit", "n_bit", "intra_mean", "intra_std", "inter_mean",
                  "inter_std", "eer", "feasible"]
        _write_csv(out, fields, rows, meta)
    elif args.kind == "mrr":
        det = _detection(cfg, adc_bits=3)
        rows = metrics.sweep_mrr_count(sw["mrr_counts"], _nominal(cfg),
                                       device.fab_seed, det, _ridge(cfg), budget,
                                       n_bit=cfg["keygen"]["n_bit"])
        fields = ["mrrs_per_node", "n_channels", "key_bits", "intra_mean",
                  "intra_std", "inter_mean", "inter_std", "eer"]
        _write_csv(out, fields, rows, meta)
    elif args.kind == "ecc":
        det = _detection(cfg, adc_bits=16)
        kg = cfg["keygen"]
        profile = keygen.calibrate_device(
            device, det, _ridge(cfg), n_bit=kg["n_bit"], encoding=kg["encoding"],
            mode=kg["mode"], ensemble_size=kg["ensemble_size"],
            calibration_seed=derive_seed(cfg["master_seed"], "ecc-calibrate"),
            challenge_length=cfg["challenge_length"], mean_shrink=kg["mean_shrink"])
        ch = chal.make_challenge(derive_seed(cfg["master_seed"], "ecc-challenge"),
                                 cfg["challenge_length"])
        rows = fuzzy.ecc_sweep(device, ch, det, _ridge(cfg), profile, sw["ecc_t"],
                               trials=sw["ecc_trials"],
                               sweep_seed=derive_seed(cfg["master_seed"], "ecc-sweep"),
                               challenge_length=cfg["challenge_length"])
        fields = ["t", "parity_bits", "intra_corrected", "inter_accepted"]
        _write_csv(out, fields, rows, meta)
        ok = [r for r in rows
              if r["t"] > 0 and r["intra_corrected"] == 1.0 and r["inter_accepted"] == 0.0]
        if ok:
            lo = min(r["parity_bits"] for r in ok)
            hi = max(r["parity_bits"] for r in ok)
            print(f"accept/reject margin: parity in [{lo}, {hi}] bits corrects all "
                  f"intra repeats and rejects all inter keys")
        else:
            print("no capacity in the sweep separated intra from inter cleanly")
    else:
        print(f"unknown sweep kind {args.kind!r}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def cmd_enroll(args) -> int:
    cfg = load_config(args.config)
    resp = _read_json(args.response)
    key = keygen.BinaryKey.from_hex(resp["key"]["hex"],
                                    resp["key"]["bits_per_weight"],
                                    resp["key"]["weight_count"])
    code = fuzzy.bch_build(key.n_bits, args.t)
    helper, _ = fuzzy.enroll(key, code)
    _write_json(Path(args.out), fuzzy.helper_to_dict(helper),
                _meta(cfg, cfg["master_seed"]))
    print(f"enrolled {key.n_bits}-bit key: t={code.t}, parity={code.parity} bits "
          f"(GF(2^{code.m}), shortened from n={code.n})")
    print(f"wrote {args.out}")
    return 0


def cmd_reconstruct(args) -> int:
    helper = fuzzy.helper_from_dict(_read_json(args.helper))
    resp = _read_json(args.response)
    key = keygen.BinaryKey.from_hex(resp["key"]["hex"],
                                    resp["key"]["bits_per_weight"],
                                    resp["key"]["weight_count"])
    recovered = fuzzy.reconstruct(helper, key)
    if recovered is None:
        print("reconstruction REJECTED (uncorrectable or digest mismatch)")
        return 1
    flips = int(np.count_nonzero(recovered != key.bits))
    print(f"reconstruction OK: corrected {flips} bit flips")
    if args.out:
        cfg = load_config(args.config)
        _write_json(Path(args.out), {
            "schema": "rosspuf/recovered-key/v1",
            "hex": pack_bits(recovered).hex(),
            "n_bits": int(recovered.size),
        }, _meta(cfg, cfg["master_seed"]))
        print(f"wrote {args.out}")
    return 0


def _load_corpus(path: Path) -> list[np.ndarray]:
    path = Path(path)
    if path.is_dir():
        seqs = []
        for f in sorted(path.glob("*.bits")) + sorted(path.glob("*.txt")):
            seqs.append(randtests.import_bits(f, "ascii01"))
        if not seqs:
            raise FileNotFoundError(f"no .bits/.txt bitstream files in {path}")
        return seqs
    bits = randtests.import_bits(path, "ascii01")
    return [bits]


def cmd_nist(args) -> int:
    cfg = load_config(args.config)
    seqs = _load_corpus(args.corpus)
    if len(seqs) == 1 and args.split > 1:
        n = seqs[0].size // args.split
        seqs = [seqs[0][i * n:(i + 1) * n] for i in range(args.split)]
    report = randtests.run_battery(seqs, alpha=args.alpha)
    print(report.table())
    if args.out:
        _write_json(Path(args.out), report.to_dict(), _meta(cfg, cfg["master_seed"]))
        print(f"wrote {args.out}")
    return 0 if report.all_passed else 1


def cmd_export_bits(args) -> int:
    resp = _read_json(args.response)
    key = keygen.BinaryKey.from_hex(resp["key"]["hex"],
                                    resp["key"]["bits_per_weight"],
                                    resp["key"]["weight_count"])
    randtests.export_bits(key.bits, args.out, fmt=args.format)
    print(f"wrote {args.out} ({key.n_bits} bits, {args.format})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rosspuf",
        description="Spectrum-slicing photonic PUF simulator and key generator")
    parser.add_argument("--config", help="experiment config JSON", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fabricate", help="sample a device and write its profile")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mrrs-per-node", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fabricate)

    p = sub.add_parser("challenge", help="generate an input/target pair")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--inline", action="store_true", help="embed the series")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_challenge)

    p = sub.add_parser("calibrate", help="build a calibration profile")
    p.add_argument("--device", required=True)
    p.add_argument("--ensemble", type=int, default=None)
    p.add_argument("--mode", choices=["pooled", "indexed", "empirical"], default=None)
    p.add_argument("--m-bit", type=int, default=None)
    p.add_argument("--n-bit", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("respond", help="evaluate one challenge-response pair")
    p.add_argument("--device", required=True)
    p.add_argument("--challenge-seed", type=int, required=True)
    p.add_argument("--calibration", default=None)
    p.add_argument("--no-calibrate", action="store_true",
                   help="fail instead of auto-calibrating")
    p.add_argument("--m-bit", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_respond)

    p = sub.add_parser("sweep", help="run a sweep and write CSV")
    p.add_argument("kind", choices=["bitgrid", "mrr", "ecc"])
    p.add_argument("--device", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("enroll", help="publish helper data for a response key")
    p.add_argument("--response", required=True)
    p.add_argument("--t", type=int, default=32, help="correction capacity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("reconstruct", help="recover the enrolled key from a response")
    p.add_argument("--helper", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("nist", help="run the randomness battery on a corpus")
    p.add_argument("--corpus", required=True,
                   help="ascii01 bitstream file or directory of them")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--split", type=int, default=10,
                   help="split a single bitstream into this many sequences")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_nist)

    p = sub.add_parser("export-bits", help="export a response key as a bitstream")
    p.add_argument("--response", required=True)
    p.add_argument("--format", choices=["ascii01", "packed"], default="ascii01")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_bits)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
