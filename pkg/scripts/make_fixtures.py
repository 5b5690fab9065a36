"""Regenerate the bundled price fixtures in src/rcca/data (synthetic, seeded)."""
import csv
import datetime as dt
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "rcca" / "data"


def business_days(start, count):
    days, d = [], start
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def write_prices(path, names, days, prices):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date"] + names)
        for d, row in zip(days, prices):
            w.writerow([d.isoformat()] + [f"{v:.4f}" for v in row])


def price_paths(rng, factors, loadings, vol=0.01, start=None):
    T, p = factors.shape[0], loadings.shape[1]
    eps = rng.standard_normal((T, p)) * vol
    ret = factors @ loadings + eps
    p0 = start if start is not None else rng.uniform(10, 120, size=p)
    return p0 * np.exp(np.vstack([np.zeros(p), np.cumsum(ret, axis=0)]))


def main():
    rng = np.random.default_rng(20000101)
    days = business_days(dt.date(2000, 1, 3), 21)
    market = rng.standard_normal((20, 1)) * 0.015
    P = price_paths(rng, market, rng.uniform(0.5, 1.5, (1, 10)))
    write_prices(OUT / "prices_10x21.csv", [f"S{i:02d}" for i in range(1, 11)], days, P)
    # two sections sharing eight factors, long enough for (15, 20, 25) scans
    days = business_days(dt.date(2000, 1, 3), 61)
    factors = rng.standard_normal((60, 8)) * 0.015
    for tag, lo in (("a", 0.6), ("b", 0.8)):
        P = price_paths(rng, factors, rng.normal(lo, 1.0, (8, 30)))
        write_prices(OUT / f"section_{tag}.csv", [f"{tag.upper()}{i:02d}" for i in range(1, 31)], days, P)


if __name__ == "__main__":
    main()
