import csv
import math
import random


def make_honest_csv(path, meters, days, slots=48, seed=0):
    """Schema-conformant synthetic honest readings (trainer-side generator)."""
    rng = random.Random(seed)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["meter_id", "date"] + ["r%d" % (i + 1) for i in range(slots)])
        for m in range(meters):
            night = rng.uniform(0.05, 0.3)
            peak = rng.uniform(0.8, 2.5)
            phase = rng.uniform(0.6, 0.9)
            for day in range(days):
                row = [m, "day-%03d" % day]
                for t in range(slots):
                    frac = t / slots
                    kwh = night + peak * math.exp(-((frac - phase) ** 2) / 0.01)
                    kwh += night * math.sin(2 * math.pi * frac) ** 2
                    kwh *= 1 + rng.uniform(-0.2, 0.2)
                    row.append("%.3f" % max(kwh, 0.0))
                writer.writerow(row)
    return path


