"""
Differentially private release over a sparse global domain
==========================================================

The release mechanism never returns only observed buckets: with some
probability it must include buckets from outside the active domain, or it
would leak which buckets were observed.  The knob is rho, the probability
that a release contains NO such spurious bucket; the mechanism derives the
count threshold tau from it.
"""

import math

import numpy as np

from odrelease import (
    AttributeSchema,
    Histogram,
    PrivacyParams,
    privatize,
    threshold,
)

# --- how the threshold behaves ---------------------------------------------
print("tau = -ln(2(1 - rho^(1/n)))/epsilon")
print(f"{'n':>12} {'rho':>6} {'eps':>5} {'tau':>9}")
for n, rho, eps in [
    (10**4, 0.5, 1.0),
    (10**4, 0.99, 1.0),
    (10**6, 0.9, 1.0),
    (10**6, 0.9, 0.1),
    (1, 0.5, 1.0),
]:
    print(f"{n:>12} {rho:>6} {eps:>5} {threshold(n, rho, eps):>9.3f}")
print("more unseen buckets or a stricter rho push tau up; budget scales it.\n")

# --- a release --------------------------------------------------------------
rng = np.random.default_rng(0)
labels = tuple(f"blk{i:03d}" for i in range(400))
schema = AttributeSchema((("block", labels),))
counts = {(labels[i],): int(c) for i, c in enumerate(rng.integers(1, 120, size=60)) if c > 0}
h = Histogram(schema, counts)

params = PrivacyParams.for_histogram(h, epsilon=1.0, rho=0.9)
print(f"active {len(h)} of {schema.global_size} buckets -> n = {params.n}, "
      f"tau = {params.tau:.2f} at epsilon = {params.epsilon}")

release = privatize(h, params, seed=42)
spurious = set(release.histogram.keys()) - set(h.keys())
print(f"release: kept {release.retained_active}, "
      f"suppressed {release.suppressed_active} (noised below tau), "
      f"added {release.spurious_added} spurious")
expected_k = params.n * 0.5 * math.exp(-params.epsilon * params.tau)
if spurious:
    print(f"spurious buckets this draw: {sorted(k[0] for k in spurious)[:4]}\n")
else:
    print(f"no spurious bucket this draw (expected {expected_k:.4f} per release)\n")

# --- rho really is the zero-spurious probability -----------------------------
empty = Histogram(schema, {})
params99 = PrivacyParams.derive(epsilon=1.0, rho=0.99, n=100)
clean = sum(1 for seed in range(2000) if privatize(empty, params99, seed).spurious_added == 0)
print(f"rho = 0.99: fraction of releases with zero spurious buckets "
      f"over 2000 seeds = {clean / 2000:.3f}")

expected = params99.n * 0.5 * math.exp(-params99.epsilon * params99.tau)
print(f"expected spurious count per release = {expected:.4f}\n")

# --- conservative parameters can wipe the data out ---------------------------
small = Histogram(schema, {(labels[0],): 30, (labels[1],): 12})
strict = PrivacyParams.for_histogram(small, epsilon=0.1, rho=0.99)
wiped = privatize(small, strict, seed=7)
print(f"epsilon = 0.1, rho = 0.99 implies tau = {strict.tau:.0f}, above every "
      f"count: released {len(wiped.histogram)} buckets")
print("an empty release is still a valid, private release; collect more data "
      "or relax rho/epsilon to get utility back")
