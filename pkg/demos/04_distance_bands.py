"""
Judging the damage: distances against bootstrap bands
=====================================================

Is an adjusted histogram still useful?  Compare its distance from the
original against the distances produced by plain resampling noise.  If the
adjustment sits inside the bootstrap band, it is no worse than sampling
variance.  Two complementary metrics: position-weighted Kendall's tau cares
about the ordering of heavy buckets, Hellinger about the distribution as a
whole.
"""

from odrelease import (
    AttributeSchema,
    Histogram,
    RepairSpec,
    SynthConfig,
    bootstrap_band,
    hellinger,
    pwkt,
    random_x_baseline,
    repair,
    synth_generate,
    synthetic_od_seed,
)

# --- unit intuition ----------------------------------------------------------
schema = AttributeSchema((("item", ("a", "b", "c")),))
ref = Histogram(schema, {("a",): 30, ("b",): 20, ("c",): 10})
top_swap = Histogram(schema, {("a",): 20, ("b",): 30, ("c",): 10})
tail_swap = Histogram(schema, {("a",): 30, ("b",): 10, ("c",): 20})
print("PWKT weighs the top of the ranking:")
print(f"  swapping ranks 1,2 costs {pwkt(ref, top_swap):.3f}")
print(f"  swapping ranks 2,3 costs {pwkt(ref, tail_swap):.3f}")
even = Histogram(schema, {("a",): 2, ("b",): 2})
tilted = Histogram(schema, {("a",): 1, ("b",): 3})
print(f"Hellinger((.5,.5),(.25,.75)) = {hellinger(even, tilted):.5f}\n")

# --- a small synthetic experiment -------------------------------------------
od = synthetic_od_seed(n_neighborhoods=40, n_pairs=80, total=20_000, seed=3,
                       skew=1.2, uniform_mix=0.15)
spec = RepairSpec("gender", "rating", ("origin", "destination"))

print(f"{'dataset':>14} {'metric':>10} {'band 2.5%':>10} {'mean':>8} "
      f"{'97.5%':>8} {'repair':>8} {'baseline':>9}")
for mode in ("uncorrelated", "correlated"):
    h = synth_generate(SynthConfig(od_seed=od, trips=30_000, mode=mode, seed=4))
    repaired = repair(h, spec).rounded
    baseline = random_x_baseline(h, spec, seed=5)
    for metric, fn in (("pwkt", pwkt), ("hellinger", hellinger)):
        band = bootstrap_band(h, metric, replicates=100, seed=6)
        print(f"{mode:>14} {metric:>10} {band.p2_5:>10.4f} {band.mean:>8.4f} "
              f"{band.p97_5:>8.4f} {fn(h, repaired):>8.4f} {fn(h, baseline):>9.4f}")

print("""
reading the table: with no real dependency the repair's damage falls below
the band (cheaper than resampling noise) while the scramble baseline does
not; with a genuine gender->rating dependency the repair must move real
mass, so the distribution distance jumps past the band even though the
heavy-bucket ordering stays comparatively intact.""")
