"""Write plot-ready CSVs for the threshold table, the MI-versus-t curves,
the net rate versus slice count and the error rates versus capacity.

    python3 scripts/reproduce_figures.py --out results/
"""

import argparse
import csv
from pathlib import Path

from slicerec.channel import ChannelParams
from slicerec.distill import rate_report
from slicerec.quantizer import mutual_information, optimize_partition
from slicerec.slicing import design_system


def write(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--snrs", default="1,3,7,15")
    ap.add_argument("--max-log-t", type=int, default=5)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snrs = [float(v) for v in args.snrs.split(",")]

    flagship = design_system(ChannelParams.from_snr(3.0), 4)
    th = flagship.design.partition.thresholds
    write(out / "tau_table.csv", ["a", "tau"], [[a, th[a - 1]] for a in range(8, 16)])

    rows = []
    for snr in snrs:
        p = ChannelParams.from_snr(snr)
        for log_t in range(1, args.max_log_t + 1):
            mi = mutual_information(p, optimize_partition(p, 2**log_t))
            rows.append([snr, p.capacity(), log_t, mi.mi, mi.h_t])
    write(out / "mi_vs_t.csv", ["snr", "capacity", "log2_t", "mi", "h_t"], rows)

    rows = []
    for m in range(1, 6):
        r = rate_report(design_system(ChannelParams.from_snr(3.0), m))
        rows.append([m, r.h_k, r.ie, r.net_bsc, r.i0, r.is_])
    write(out / "rate_vs_m_snr3.csv", ["m", "h_k", "ie", "net_bsc", "i0", "is"], rows)

    rows = []
    for snr in snrs:
        system = flagship if snr == 3.0 else design_system(ChannelParams.from_snr(snr), 4)
        rows.append([snr, system.params.capacity(), *system.profile.e])
    write(out / "error_vs_capacity_m4.csv", ["snr", "capacity", "e_1", "e_2", "e_3", "e_4"], rows)


if __name__ == "__main__":
    main()
