"""
Bucket histograms 101
=====================

Build an origin-destination histogram with categorical metadata, project it
onto attribute subsets, normalize it, and round-trip it through the CSV
format.  Every other capability in the package operates on these values.
"""

import tempfile
from pathlib import Path

from odrelease import (
    AttributeSchema,
    Histogram,
    group_by,
    marginalize,
    normalize,
    read_histogram_csv,
    support_union,
    write_histogram_csv,
)

# A schema declares every attribute and its full (global) domain.  The
# histogram itself stores only the active domain: buckets that actually
# carry trips.
schema = AttributeSchema(
    (
        ("origin", ("Downtown", "Ballard", "UDistrict")),
        ("destination", ("Downtown", "Ballard", "UDistrict")),
        ("gender", ("m", "f", "o")),
    )
)
print(f"global domain: {schema.global_size} buckets "
      f"({' x '.join(str(len(d)) for d in schema.domains)})")

trips = Histogram(
    schema,
    {
        ("Downtown", "Ballard", "f"): 245,
        ("Downtown", "Ballard", "m"): 181,
        ("Ballard", "Downtown", "f"): 160,
        ("UDistrict", "Downtown", "m"): 104,
        ("UDistrict", "Downtown", "o"): 9,
        ("Downtown", "UDistrict", "f"): 77,
    },
)
print(f"active domain: {len(trips)} buckets, {trips.total:.0f} trips\n")

# Contingency-table projections: group-by-and-count on any attribute subset.
by_gender = marginalize(trips, ["gender"])
print("trips by gender:", dict(sorted(by_gender.counts.items())))

by_origin = marginalize(trips, ["origin"])
print("trips by origin:", dict(sorted(by_origin.counts.items())))

# The empirical distribution over buckets.
dist = normalize(trips)
top = max(dist, key=dist.get)
print(f"heaviest bucket {top} carries {dist[top]:.1%} of the traffic\n")

# Post-hoc aggregation: collapse the metadata and keep pure OD flows.
od_only = group_by(trips, ["origin", "destination"])
print(f"grouped to OD only: {len(od_only)} buckets, total still {od_only.total:.0f}")
for key in od_only.canonical_order():
    print(f"  {key[0]:>9} -> {key[1]:<9} {od_only.get(key):>4}")

# Comparisons between histograms run over the union of their supports,
# ordered by the first histogram's counts (ties break lexicographically).
print("\nsupport union vs the OD-only view of itself:")
print(" ", support_union(od_only, od_only)[:3], "...")

# The CSV format: attribute columns in schema order plus a final count
# column, one bucket per row, canonical row order.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "trips.csv"
    write_histogram_csv(trips, path)
    print("\nCSV head:")
    for line in path.read_text().splitlines()[:4]:
        print(" ", line)
    assert read_histogram_csv(path, schema) == trips
    print("round-trip: OK")
