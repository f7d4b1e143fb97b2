"""Synthetic summary-CSV builders shared by the figures tests."""

import csv

SUMMARY_HEADER = [
    "mode", "n_agents", "seed", "converged", "rounds", "total_moves",
    "uplink", "downlink", "assistance_requests", "convergence_fraction",
    "config_hash",
]

# Synthetic sweep whose orderings mirror the simulator's expected behavior:
# P2P moves/traffic highest, DT2 uplink > DT1 but downlink < DT1, RW1
# uplink > 2x DT1 with degraded convergence at n=40.
CELL_PARAMS = {
    # mode: (moves_base, uplink_base, downlink_base, conv_by_n)
    "P2P": (1800, 35000, 0, {10: 1, 20: 1, 40: 1}),
    "DT1": (1000, 1100, 750, {10: 1, 20: 1, 40: 1}),
    "DT2": (800, 2300, 320, {10: 1, 20: 1, 40: 1}),
    "RW1": (2500, 4500, 2900, {10: 1, 20: 1, 40: 0}),
    "RW2": (2400, 5200, 500, {10: 1, 20: 1, 40: 0}),
}


def summary_rows(runs=6, counts=(10, 20, 40)):
    rows = []
    for mode, (mv, up, dn, conv) in CELL_PARAMS.items():
        for n in counts:
            for r in range(runs):
                jitter = 1.0 + 0.03 * r
                rows.append([
                    mode, n, r, conv[n], 300 + 10 * r,
                    int(mv * n / 10 * jitter), int(up * n / 10 * jitter),
                    int(dn * n / 10 * jitter), 3, 0.9 if conv[n] else 0.4,
                    "cafebabe",
                ])
    return rows


def write_summary(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_HEADER)
        w.writerows(rows)
