"""
Composing repair and privacy end to end
=======================================

The two adjustments compose in either order.  Privacy-first keeps the
guarantee easy to interpret (noise is added to real-world counts), which is
why it is the default; bias-first is available for comparison.  A small
epsilon sweep shows the released data converging to the noiseless repair as
the budget grows.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from odrelease import hellinger, read_histogram_csv, repair, synth_generate
from odrelease.cli import PipelineConfig, run_release, run_sweep
from odrelease import AttributeSchema, RepairSpec, SynthConfig, synthetic_od_seed

SYNTH = {
    "generate_od": {"n_neighborhoods": 40, "n_pairs": 80, "total": 20_000,
                    "seed": 3, "skew": 1.2, "uniform_mix": 0.15},
    "trips": 30_000,
    "mode": "correlated",
    "seed": 4,
}
REPAIR = {"x": "gender", "y": "rating", "z": ["origin", "destination"]}

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)

    # one pipeline config, two stage orders
    for order in ("privacy-first", "bias-first"):
        cfg_path = tmp / f"{order}.json"
        cfg_path.write_text(json.dumps({
            "synth": SYNTH,
            "repair": REPAIR,
            "privacy": {"epsilon": 1.0, "rho": 0.5},
            "order": order,
            "bootstrap": {"replicates": 100},
            "seed": 11,
        }))
        out = tmp / order
        code = run_release(PipelineConfig.load(cfg_path), out)
        report = json.loads((out / "distance_report.json").read_text())
        release = json.loads((out / "release_report.json").read_text())
        print(f"{order:>13}: exit {code}, tau = {release['params']['tau']:.2f}, "
              f"kept {release['retained_active']} bins, "
              f"hellinger {report['hellinger']:.4f} "
              f"(band mean {report['band']['hellinger']['mean']:.4f}, "
              f"baseline {report['baseline']['hellinger']:.4f})")

    # the same released artifacts can be re-measured from their CSVs later
    schema = AttributeSchema.load(tmp / "privacy-first" / "schema.json")
    released = read_histogram_csv(tmp / "privacy-first" / "released.csv", schema)
    print(f"released file reloads to {len(released)} buckets, "
          f"total {released.total:.0f}\n")

    # --- epsilon sweep --------------------------------------------------------
    cfg = PipelineConfig.load(tmp / "privacy-first.json")
    rows = run_sweep(cfg, epsilons=[0.1, 0.3, 1.0, 3.0, 10.0], rhos=[0.5],
                     trials=5, out_path=tmp / "sweep.csv")

    od = synthetic_od_seed(**SYNTH["generate_od"])
    h = synth_generate(SynthConfig(od_seed=od, trips=SYNTH["trips"],
                                   mode=SYNTH["mode"], seed=SYNTH["seed"]))
    spec = RepairSpec(REPAIR["x"], REPAIR["y"], tuple(REPAIR["z"]))
    noiseless = hellinger(h, repair(h, spec).rounded)

    print("epsilon sweep at rho = 0.5 (mean over 5 trials):")
    print(f"{'epsilon':>8} {'hellinger':>10} {'bins':>6}")
    for eps in (0.1, 0.3, 1.0, 3.0, 10.0):
        cell = [r for r in rows if r["epsilon"] == eps]
        hell = float(np.nanmean([r["hellinger"] for r in cell]))
        bins = int(np.mean([r["bins_released"] for r in cell]))
        print(f"{eps:>8} {hell:>10.4f} {bins:>6}")
    print(f"{'(no noise)':>8} {noiseless:>10.4f}")
    print("\nhigher budgets keep more bins and converge to the noiseless repair.")
