"""Command-line harness: ``slicerec {design,rates,simulate,lemmas,sweep}``.

Exit codes: 0 ok, 2 bad configuration, 3 numerical failure, 4 keys differ
after reconciliation (only with ``--require-equal``).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelParams, IntegrationError, binary_entropy, sample_arrays
from .distill import PaParams, asymptotic_experiment, bsc_experiment, lemma1_check, privacy_amplify, rate_report
from .quantizer import OptimizationError, mutual_information
from .reconciliation import AccountingMode, parse_bcp, practical_leakage, run_sec
from .slicing import SliceSystem, design_system

OUTPUT_DIR_ENV = "SLICEREC_OUTPUT_DIR"

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_MISMATCH = 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    snr: float = 3.0
    sigma_source: float = 1.0
    sigma_noise: float | None = None
    m: int = 4
    t: int | None = None
    l: int = 10000
    seed: int = 1
    bcp: list[str] = field(default_factory=list)
    accounting_mode: AccountingMode = AccountingMode.MARKOV_BSC
    output_dir: Path = Path(".")

    def __post_init__(self):
        if self.t is not None and self.t != 2**self.m:
            raise ConfigError(f"t={self.t} does not match 2**m = {2**self.m}")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.l < 1:
            raise ConfigError("l must be >= 1")
        if self.sigma_noise is None and not self.snr > 0:
            raise ConfigError("snr must be positive")

    def params(self) -> ChannelParams:
        try:
            if self.sigma_noise is not None:
                return ChannelParams(self.sigma_source, self.sigma_noise)
            return ChannelParams.from_snr(self.snr, self.sigma_source)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _fmt_snr(params: ChannelParams) -> str:
    snr = params.snr()
    return "inf" if math.isinf(snr) else f"{snr:g}"


def _load_or_design(cfg: RunConfig, design_path: str | None) -> SliceSystem:
    if design_path:
        path = Path(design_path)
        if not path.exists():
            raise ConfigError(f"design file {path} not found")
        return SliceSystem.from_dict(json.loads(path.read_text()))
    return design_system(cfg.params(), cfg.m)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_design(cfg: RunConfig, out: str | None = None) -> dict:
    system = design_system(cfg.params(), cfg.m)
    data = system.to_dict()
    path = Path(out) if out else cfg.output_dir / f"design_snr{_fmt_snr(system.params)}_m{cfg.m}.json"
    _write(path, json.dumps(data, indent=2))
    th = system.design.partition.thresholds
    t = len(th) + 1
    print(f"t = {t}, sigma_source = {system.params.sigma_source:g}, sigma_noise = {system.params.sigma_noise:g}")
    for a in range(t // 2, t):
        print(f"  tau_{a:<3d} {th[a - 1]: .4f}")
    if system.params.sigma_noise > 0:
        print(f"I(T(X);X') = {mutual_information(system.params, system.design.partition).mi:.6f} bits")
    print("e =", " ".join(f"{v:.4f}" for v in system.profile.e))
    print(f"wrote {path}")
    return data


def cmd_rates(cfg: RunConfig, design_path: str | None = None, out: str | None = None) -> dict:
    system = _load_or_design(cfg, design_path)
    report = rate_report(system).to_dict()
    report.update({"snr": system.params.snr(), "m": system.m, "e": list(system.profile.e)})
    text = json.dumps(report, indent=2)
    print(text)
    if out:
        _write(Path(out), text)
    return report


def _bcps(cfg: RunConfig, system: SliceSystem, passes: int):
    specs = cfg.bcp or ["auto"] * system.m
    if len(specs) != system.m:
        raise ConfigError(f"--bcp needs {system.m} entries, got {len(specs)}")
    out = []
    for i, s in enumerate(specs, start=1):
        if s == "auto":
            # Cascade unless its expected cost reaches l (25% overhead guess).
            s = "all" if 1.25 * binary_entropy(system.profile.e[i - 1]) >= 1 else "cascade"
        try:
            out.append(parse_bcp(s, seed=cfg.seed * 1000 + i, passes=passes))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return out


def cmd_simulate(
    cfg: RunConfig,
    design_path: str | None = None,
    transcript_path: str | None = None,
    summary_path: str | None = None,
    passes: int = 4,
    eve_information: float = 0.0,
    margin: float = 30.0,
) -> dict:
    system = _load_or_design(cfg, design_path)
    bcps = _bcps(cfg, system, passes)
    x, xp = sample_arrays(system.params, cfg.l, cfg.seed)
    result = run_sec(system, x, xp, bcps, cfg.accounting_mode)
    ledger = result.transcript.ledger
    leakage = practical_leakage(system, cfg.l, bcps, result.transcript)
    used = ledger.total(cfg.accounting_mode)
    report = rate_report(system, used, cfg.l).to_dict()
    pa = PaParams(cfg.l, system.h_k(), eve_information, used, margin)
    final_len = pa.final_length()
    if final_len > len(result.alice_key):
        raise ConfigError("privacy amplification target exceeds key length")
    ka = privacy_amplify(result.alice_key, pa, cfg.seed)
    kb = privacy_amplify(result.bob_key, pa, cfg.seed)
    summary = {
        "snr": system.params.snr(),
        "m": system.m,
        "l": cfg.l,
        "seed": cfg.seed,
        "bcp": [b.name for b in bcps],
        "keys_equal": result.keys_equal,
        "slice_mismatches": result.slice_mismatches,
        "accounting_mode": AccountingMode(cfg.accounting_mode).value,
        "leakage_both": ledger.total(AccountingMode.BOTH_PARTIES),
        "leakage_markov": ledger.total(AccountingMode.MARKOV_BSC),
        "net_practical_both": system.h_k() - ledger.total(AccountingMode.BOTH_PARTIES) / cfg.l,
        "net_practical_markov": system.h_k() - ledger.total(AccountingMode.MARKOV_BSC) / cfg.l,
        **report,
        "xi": {str(s["slice"]): s["xi"] for s in leakage["slices"] if s["xi"] is not None},
        "practical_leakage": leakage,
        "pa_length": final_len,
        "pa_keys_equal": bool(np.array_equal(ka, kb)),
    }
    tpath = Path(transcript_path) if transcript_path else cfg.output_dir / f"transcript_seed{cfg.seed}.jsonl"
    spath = Path(summary_path) if summary_path else cfg.output_dir / f"summary_seed{cfg.seed}.json"
    _write(tpath, result.transcript.to_jsonl())
    _write(spath, json.dumps(summary, indent=2))
    print(
        f"keys equal: {result.keys_equal}  |C| both={summary['leakage_both']} markov={summary['leakage_markov']}  "
        f"net practical ({summary['accounting_mode']}) = {summary['net_practical']:.4f}  PA length = {final_len}"
    )
    return summary


PREFIX_POINTS = ((2, 1), (9, 3), (100, 7))


def cmd_lemmas(cfg: RunConfig, trials: int = 100_000, typical_trials: int = 10_000, out: str | None = None) -> dict:
    prefix = [lemma1_check(N, r, trials, cfg.seed) for N, r in PREFIX_POINTS]
    exp = asymptotic_experiment(bsc_experiment(0.11, 12, 0.2, typical_trials), cfg.seed)
    data = {"unique_prefix": prefix, "typical_list": exp}
    text = json.dumps(data, indent=2)
    print(text)
    if out:
        _write(Path(out), text)
    return data


SWEEP_FIELDS = ["snr", "capacity", "t", "m", "mi", "h_t", "i0", "is", "ie", "net_bsc"]


def sweep_rows(snrs, ms, sigma_source: float = 1.0, max_slices: int | None = None):
    """One row per (snr, m) in grid order; failed points carry an ``error:`` status."""
    width = max_slices or max(ms)
    fields = SWEEP_FIELDS + [f"e_{i}" for i in range(1, width + 1)] + ["status"]
    rows = []
    for snr in snrs:
        for m in ms:
            row = {"snr": snr, "t": 2**m, "m": m, "status": "ok"}
            try:
                params = ChannelParams.from_snr(snr, sigma_source)
                row["capacity"] = params.capacity()
                system = design_system(params, m)
                mi = mutual_information(params, system.design.partition)
                rep = rate_report(system)
                row.update(mi=mi.mi, h_t=mi.h_t, i0=rep.i0, ie=rep.ie, net_bsc=rep.net_bsc)
                row["is"] = rep.is_
                for i, e in enumerate(system.profile.e, start=1):
                    row[f"e_{i}"] = e
            except (OptimizationError, IntegrationError, ValueError) as exc:
                row["status"] = f"error: {exc}"
            rows.append(row)
    return fields, rows


def cmd_sweep(cfg: RunConfig, snrs, ms, out: str | None = None) -> list[dict]:
    fields, rows = sweep_rows(snrs, ms, cfg.sigma_source)
    path = Path(out) if out else cfg.output_dir / "sweep.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("# columns: " + ", ".join(fields) + "\n")
        fh.write("# mi = I(T(X);X'); i0/is/ie = leakage per element; e_i = slice error rates; capacity = 1/2 log2(1+snr)\n")
        writer = csv.DictWriter(fh, fieldnames=fields, restval="")
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {path}")
    if any(r["status"] != "ok" for r in rows):
        raise OptimizationError("some sweep points failed; see status column")
    return rows


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--snr", type=float, default=3.0)
    common.add_argument("--sigma-source", type=float, default=1.0)
    common.add_argument("--sigma-noise", type=float, default=None, help="overrides --snr")
    common.add_argument("--m", type=int, default=4, help="number of slices")
    common.add_argument("--t", type=int, default=None, help="number of intervals, must equal 2**m")
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--output-dir", default=os.environ.get(OUTPUT_DIR_ENV, "."))

    parser = argparse.ArgumentParser(prog="slicerec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", parents=[common], help="optimize thresholds and estimators")
    p.add_argument("--out")

    p = sub.add_parser("rates", parents=[common], help="H(K), I0, Is, Ie and net rates")
    p.add_argument("--design")
    p.add_argument("--out")

    p = sub.add_parser("simulate", parents=[common], help="sample, reconcile and amplify")
    p.add_argument("--design")
    p.add_argument("--l", type=int, default=10000)
    p.add_argument("--bcp", default="", help="comma list of all/none/cascade/auto, one per slice")
    p.add_argument("--passes", type=int, default=4)
    p.add_argument("--accounting", choices=[m.value for m in AccountingMode], default=AccountingMode.MARKOV_BSC.value)
    p.add_argument("--eve-info", type=float, default=0.0, help="I(K(X);E) bound in bits per element")
    p.add_argument("--margin", type=float, default=30.0, help="privacy amplification margin in bits")
    p.add_argument("--transcript")
    p.add_argument("--summary")
    p.add_argument("--require-equal", action="store_true")

    p = sub.add_parser("lemmas", parents=[common], help="finite-size identification experiments")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--typical-trials", type=int, default=10_000)
    p.add_argument("--out")

    p = sub.add_parser("sweep", parents=[common], help="CSV grid over SNR and slice count")
    p.add_argument("--snr-list", type=_floats, default=[1.0, 3.0, 7.0, 15.0])
    p.add_argument("--m-list", type=_ints, default=[1, 2, 3, 4])
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command,
            snr=args.snr,
            sigma_source=args.sigma_source,
            sigma_noise=args.sigma_noise,
            m=args.m,
            t=args.t,
            l=getattr(args, "l", 10000),
            seed=args.seed,
            bcp=[s.strip() for s in getattr(args, "bcp", "").split(",") if s.strip()],
            accounting_mode=AccountingMode(getattr(args, "accounting", "markov")),
            output_dir=Path(args.output_dir),
        )
        cfg.params()
        if args.command == "design":
            cmd_design(cfg, args.out)
        elif args.command == "rates":
            cmd_rates(cfg, args.design, args.out)
        elif args.command == "simulate":
            summary = cmd_simulate(
                cfg, args.design, args.transcript, args.summary, args.passes, args.eve_info, args.margin
            )
            if args.require_equal and not summary["keys_equal"]:
                print("reconciled keys differ", file=sys.stderr)
                return EXIT_MISMATCH
        elif args.command == "lemmas":
            cmd_lemmas(cfg, args.trials, args.typical_trials, args.out)
        elif args.command == "sweep":
            cmd_sweep(cfg, args.snr_list, args.m_list, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OptimizationError, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
