"""Regenerates sample_ohlc.csv: a seeded geometric random walk with daily bars."""

import csv
import datetime
import math
import random

ROWS = 1000
SEED = 20240501


def main(path="sample_ohlc.csv"):
    rng = random.Random(SEED)
    close = 100.0
    day = datetime.date(2020, 1, 2)
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["date", "open", "high", "low", "close", "volume"])
        for _ in range(ROWS):
            while day.weekday() >= 5:
                day += datetime.timedelta(days=1)
            open_ = close * math.exp(rng.gauss(0.0, 0.003))
            close = open_ * math.exp(rng.gauss(0.0002, 0.012))
            high = max(open_, close) * math.exp(abs(rng.gauss(0.0, 0.005)))
            low = min(open_, close) * math.exp(-abs(rng.gauss(0.0, 0.005)))
            volume = int(rng.lognormvariate(13.0, 0.4))
            out.writerow([day.isoformat(), f"{open_:.2f}", f"{high:.2f}", f"{low:.2f}", f"{close:.2f}", volume])
            day += datetime.timedelta(days=1)


if __name__ == "__main__":
    main()
