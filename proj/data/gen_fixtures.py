#!/usr/bin/env python3
"""Regenerates the synthetic fixtures in this directory.

The level table, transition table and error budget are transcriptions of the
published measurement tables. The scan traces and the scan-set file are
synthetic: deterministic seeds, Gaussian noise, parameters recorded below so
the tests know the ground truth.
"""
import numpy as np

TABLE1 = [
    (33, 236429214, 1007000764), (34, 236604549, 1007176099),
    (35, 236765078, 1007336627), (36, 236912402, 1007483952),
    (37, 237047954, 1007619503), (38, 237172932, 1007744481),
    (39, 237288417, 1007859967), (40, 237395343, 1007966892),
    (41, 237494542, 1008066092), (42, 237586734, 1008158283),
    (43, 237672570, 1008244119), (44, 237752610, 1008324159),
    (45, 237827379, 1008398929), (46, 237897325, 1008468875),
    (47, 237962850, 1008534399), (48, 238024325, 1008595874),
    (49, 238082056, 1008653605), (50, 238136367, 1008707917),
    (55, 238364972, 1008936522), (60, 238538826, 1009110376),
    (65, 238674124, 1009245673), (70, 238781461, 1009353011),
    (75, 238868053, 1009439602), (80, 238938927, 1009510477),
    (85, 238997658, 1009569208), (90, 239046866, 1009618416),
    (95, 239088516, 1009660066), (100, 239124074, 1009695624),
]

BUDGET = [
    ("wavemeter_calibration", 6.2),
    ("first_step_frequency", 0.75),
    ("second_step_frequency", 1.0),
    ("pressure_shifts", 2.7),
    ("power_shifts", 4.0),
]

# Ground truth of the synthetic traces (asserted by the test suites).
WAHL_CENTER = 236429214.0
WAHL_FWHM = 20.0
WAHL_MOD = 15.0
WAHL_BASE = 0.1
WAHL_NOISE = 0.015  # 3% of the 0.5 half peak-to-peak
WAHL_SEED = 20210713

LORENTZ_CENTER = 236429214.0
LORENTZ_FWHM = 20.0
LORENTZ_AMP = -1.0  # absorption dip in the transmitted first-step intensity
LORENTZ_BASE = 2.0
LORENTZ_NOISE = 0.05  # 5% of |amplitude|
LORENTZ_SEED = 35

SCAN_TARGETS = {33: 236429214.0, 34: 236604549.0}
SCAN_STD = 2.0
SCAN_SEED = 1007


def wahlquist(hd, fwhm, mod):
    a = hd / mod
    b = 0.5 * fwhm / mod
    g = 1.0 + b * b + a * a
    disc = np.sqrt(g * g - 4.0 * a * a)
    u = g + disc
    out = np.sign(hd) * (2.0 / mod) ** 2 * np.sqrt(np.maximum(2 * g - u, 0)) \
        / (2.0 * np.sqrt(u - 2.0) * (u - g))
    return np.where(hd == 0.0, 0.0, out)


def lorentzian(x, c, fwhm, amp, base):
    h = fwhm / 2.0
    return base + amp * h * h / ((x - c) ** 2 + h * h)


def write_tables():
    with open("table1_levels.csv", "w") as f:
        f.write("n,energy_mhz,sigma_mhz\n")
        for n, _, e in TABLE1:
            f.write(f"{n},{e},8.0\n")
    with open("table1_transitions.csv", "w") as f:
        f.write("n,nu3_mhz,e_total_mhz\n")
        for n, nu3, e in TABLE1:
            f.write(f"{n},{nu3},{e}\n")
    with open("table2_budget.csv", "w") as f:
        f.write("label,value_mhz\n")
        for label, v in BUDGET:
            f.write(f"{label},{v}\n")


def write_wahlquist_trace():
    freqs = WAHL_CENTER + np.arange(-80.0, 81.0, 1.0)
    raw = wahlquist(freqs - WAHL_CENTER, WAHL_FWHM, WAHL_MOD)
    amp = 0.5 / np.abs(raw).max()
    rng = np.random.default_rng(WAHL_SEED)
    signal = WAHL_BASE + amp * raw + rng.normal(0.0, WAHL_NOISE, freqs.size)
    with open("trace_wahlquist_n33.csv", "w") as f:
        f.write("freq_mhz,signal\n")
        for x, s in zip(freqs, signal):
            f.write(f"{x:.1f},{s:.8f}\n")


def write_lorentzian_trace():
    freqs = LORENTZ_CENTER + np.arange(-100.0, 100.25, 0.25)
    clean = lorentzian(freqs, LORENTZ_CENTER, LORENTZ_FWHM, LORENTZ_AMP, LORENTZ_BASE)
    rng = np.random.default_rng(LORENTZ_SEED)
    signal = clean + rng.normal(0.0, LORENTZ_NOISE, freqs.size)
    with open("trace_lorentzian_fastscan.csv", "w") as f:
        f.write("freq_mhz,signal\n")
        for x, s in zip(freqs, signal):
            f.write(f"{x:.1f},{s:.8f}\n")


def write_scan_sets():
    rng = np.random.default_rng(SCAN_SEED)
    with open("scanset_n33_n34.csv", "w") as f:
        f.write("n,center_mhz\n")
        for n, target in sorted(SCAN_TARGETS.items()):
            noise = rng.normal(0.0, SCAN_STD, 10)
            noise -= noise.mean()  # pin the sample mean exactly on target
            print(f"scan set n={n}: sample std {noise.std(ddof=1):.3f} MHz")
            for c in target + noise:
                f.write(f"{n},{c:.3f}\n")


if __name__ == "__main__":
    write_tables()
    write_wahlquist_trace()
    write_lorentzian_trace()
    write_scan_sets()
    print("fixtures written")
