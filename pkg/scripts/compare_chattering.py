"""Adaptive controller against super-twisting and RMSE-matched first-order SMC.

Runs the comparison with and without measurement noise and prints both tables.
Usage: python scripts/compare_chattering.py
"""

from t2stc.config import PRESETS
from t2stc.experiment import compare, format_table


def main():
    base = PRESETS["duffing-track"]
    for label, cfg in (("noise-free", base.replace(**{"noise.snr_db": None})),
                       ("20 dB noise", base)):
        rows, _ = compare(cfg)
        by_kind = {r.kind: r for r in rows}
        ratio = by_kind["first_order_smc"].tv_u / by_kind["adaptive_t2_stc"].tv_u
        print(f"[{label}]")
        print(format_table(rows), end="")
        print(f"tv(u) ratio smc/adaptive: {ratio:.2f}\n")


if __name__ == "__main__":
    main()
