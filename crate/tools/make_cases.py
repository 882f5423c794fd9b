#!/usr/bin/env python3
"""Generate the bundled 39-bus case and its uncertainty model.

The network is 39-bus shaped: a 29-bus transmission ring with seven chords,
and ten generator buses (30-39) hanging off the ring through step-up
branches. Device data is synthetic; every number below is the documentation
of where it came from. Re-running the script reproduces the committed files
byte for byte.
"""

import json
import os
import sys

OUT = os.path.join(os.path.dirname(__file__), "..", "cases")

# (bus, MW) forecast loads on the ring, roughly 5.7 GW total.
LOADS = [
    (1, 100), (3, 320), (4, 500), (5, 180), (7, 230), (8, 520), (11, 160),
    (12, 90), (13, 150), (15, 320), (16, 330), (18, 160), (20, 630),
    (21, 270), (23, 250), (24, 310), (25, 220), (26, 140), (27, 280),
    (28, 210), (29, 280),
]
# Uncontrollable (non-dispatchable) IBR infeed netted against load.
IBR = [(5, 120), (13, 90), (17, 110), (24, 80)]

CHORDS = [(2, 25), (3, 18), (8, 13), (6, 22), (4, 14), (9, 26), (16, 21)]
# Generator bus 30+i attaches to this ring bus.
GEN_AT = [2, 6, 10, 14, 20, 22, 23, 25, 29, 1]

# p_max, inertia H, droop R, F_H, T_R, c1, c2, c0, agc
UNITS = [
    (900, 5.0, 0.05, 0.30, 8.0, 28.0, 0.004, 420.0, True),
    (700, 4.2, 0.04, 0.30, 7.5, 33.0, 0.006, 380.0, True),
    (800, 4.5, 0.05, 0.30, 8.5, 31.0, 0.005, 400.0, True),
    (650, 3.8, 0.06, 0.25, 7.0, 38.0, 0.007, 350.0, True),
    (600, 4.0, 0.05, 0.30, 7.5, 36.0, 0.007, 340.0, True),
    (750, 4.4, 0.04, 0.30, 8.0, 32.0, 0.005, 390.0, True),
    (600, 3.6, 0.06, 0.25, 6.5, 40.0, 0.008, 330.0, False),
    (550, 3.4, 0.05, 0.25, 6.5, 42.0, 0.008, 320.0, False),
    (850, 4.8, 0.05, 0.30, 8.5, 30.0, 0.004, 410.0, True),
    (1000, 5.2, 0.04, 0.30, 9.0, 26.0, 0.003, 450.0, False),
]

# id, bus, capacity
DIBRS = [(1, 4, 350), (2, 8, 300), (3, 16, 280), (4, 20, 320), (5, 26, 250), (6, 28, 300)]
# id, bus, p_max, e_min, e_max, e0
STORES = [(1, 7, 150, 50, 300, 180), (2, 15, 120, 40, 240, 140), (3, 23, 130, 45, 260, 150)]


def make_case():
    loads = dict(LOADS)
    ibr = dict(IBR)
    buses = [
        {"id": b, "load_mw": float(loads.get(b, 0)), "ibr_mw": float(ibr.get(b, 0))}
        for b in range(1, 40)
    ]

    lines = []
    lid = 0
    for i in range(1, 30):
        lid += 1
        lines.append({
            "id": lid, "from": i, "to": 1 if i == 29 else i + 1,
            "reactance_pu": 0.02, "capacity_mw": 900.0,
        })
    for a, b in CHORDS:
        lid += 1
        lines.append({"id": lid, "from": a, "to": b, "reactance_pu": 0.025, "capacity_mw": 700.0})
    for i, ring_bus in enumerate(GEN_AT):
        lid += 1
        lines.append({
            "id": lid, "from": 30 + i, "to": ring_bus,
            "reactance_pu": 0.015, "capacity_mw": 1300.0,
        })

    thermal = []
    for i, (pmax, h, r, fh, tr, c1, c2, c0, agc) in enumerate(UNITS):
        thermal.append({
            "id": i + 1,
            "bus": 30 + i,
            "p_min_mw": float(round(0.2 * pmax, 1)),
            "p_max_mw": float(pmax),
            "cost": {"c2": c2, "c1": c1, "c0": c0},
            "c_res_up": round(0.4 * c1, 2),
            "c_res_dn": round(0.4 * c1, 2),
            "c_redispatch": round(1.2 * c1, 2),
            "droop_pu": r,
            "inertia_s": h,
            "reheat_fraction": fh,
            "reheat_time_s": tr,
            "ramp_up_mw_per_min": float(round(pmax / 100.0, 1)),
            "ramp_dn_mw_per_min": float(round(pmax / 100.0, 1)),
            "agc": agc,
        })

    dibr = [
        {"id": i, "bus": b, "capacity_mw": float(cap), "c_curtail": 8.0,
         "h_max_s": 8.0, "d_max_pu": 12.0}
        for i, b, cap in DIBRS
    ]
    storage = [
        {"id": i, "bus": b, "p_max_mw": float(p), "e_min_mwh": float(lo),
         "e_max_mwh": float(hi), "e0_mwh": float(e0), "eta_ch": 0.9, "eta_dis": 0.95,
         "c_loss": 8.0, "c_res_up": 10.0, "c_res_dn": 10.0, "h_max_s": 6.0, "d_max_pu": 10.0}
        for i, b, p, lo, hi, e0 in STORES
    ]

    return {
        "name": "case39",
        "base_mva": 100.0,
        "f0_hz": 60.0,
        "buses": buses,
        "lines": lines,
        "thermal": thermal,
        "dibr": dibr,
        "storage": storage,
        "thresholds": {
            "rocof_max_hz_per_s": 0.5,
            "nadir_max_hz": 0.5,
            "ss_max_hz": 0.25,
            "d_load_pu": 1.0,
            "dt_h": 0.25,
            "delta_f": 0.0,
            "delta_dibr": 0.05,
            "delta_sfr": 0.05,
            "delta_l": 0.05,
            "delta_r": None,
        },
    }


def beta(a, b, lo, hi):
    return {"kind": "beta", "alpha": a, "beta": b, "lo": float(lo), "hi": float(hi)}


def make_uncertainty():
    # Forecast errors on the eight largest loads, about 5% of each forecast,
    # and skewed errors on the uncontrollable IBR buses. The worst-case sum
    # stays near 255 MW, well inside what the thermal fleet can absorb, so
    # the 39-bus case always admits a dispatch.
    return {
        "load_err": {
            "3": beta(4.0, 4.0, -16, 16),
            "4": beta(4.0, 4.0, -25, 25),
            "8": beta(4.0, 4.0, -26, 26),
            "15": beta(4.0, 4.0, -16, 16),
            "16": beta(4.0, 4.0, -16, 16),
            "20": beta(4.0, 4.0, -31, 31),
            "23": beta(4.0, 4.0, -12, 12),
            "29": beta(4.0, 4.0, -14, 14),
        },
        "ibr_err": {
            "5": beta(2.5, 3.5, -30, 25),
            "13": beta(2.5, 3.5, -22, 18),
            "17": beta(2.5, 3.5, -27, 22),
            "24": beta(2.5, 3.5, -20, 16),
        },
        "dibr_avail": {
            str(i): beta(5.0, 2.0, round(0.55 * cap, 1), float(cap)) for i, _, cap in DIBRS
        },
    }


def main():
    check = "--check" in sys.argv[1:]
    files = [
        ("case39.json", json.dumps(make_case(), indent=2) + "\n"),
        ("case39_uncertainty.json", json.dumps(make_uncertainty(), indent=2) + "\n"),
    ]
    for name, text in files:
        path = os.path.join(OUT, name)
        if check:
            with open(path) as fh:
                if fh.read() != text:
                    sys.exit(f"{name} differs from what this script generates")
        else:
            with open(path, "w") as fh:
                fh.write(text)
    total_load = sum(mw for _, mw in LOADS)
    verb = "matches" if check else "wrote"
    print(f"case39 ({verb}): 39 buses, {len(make_case()['lines'])} lines, "
          f"{total_load} MW load")


if __name__ == "__main__":
    main()
