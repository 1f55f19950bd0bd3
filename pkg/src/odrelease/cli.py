"""Command-line pipelines: ingest/synthesize, repair, privatize, measure.

Subcommands: ingest, synth, repair, privatize, release, measure, sweep.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 empty release
(the warning-as-status default; set "empty_release_ok": true to get 0).
Every run is reproducible bit for bit given its config and seed: all
randomized stages draw from labelled substreams of one master seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError, DataError, ODReleaseError
from .histogram import AttributeSchema, Histogram, read_histogram_csv, write_histogram_csv
from .ingest import (
    BikeConfig,
    IngestResult,
    SynthConfig,
    TaxiConfig,
    bike_preprocess,
    synth_generate,
    synthetic_od_seed,
    taxi_preprocess,
)
from .metrics import DistanceReport, bootstrap_distances, build_distance_report, hellinger, pwkt
from .privacy import PrivacyParams, ReleaseResult, privatize
from .repair import FractionalRepairResult, RepairSpec, random_x_baseline, repair
from .rng import derive_seed

ORDERS = ("privacy-first", "bias-first", "repair-only", "privacy-only")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf8")


def _load_schema(path) -> AttributeSchema:
    try:
        return AttributeSchema.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read schema {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"schema {path} is not valid JSON: {exc}") from None


def _read_histogram(path, schema: AttributeSchema) -> Histogram:
    try:
        return read_histogram_csv(path, schema)
    except OSError as exc:
        raise ConfigError(f"cannot read histogram {path}: {exc}") from None


@dataclass(frozen=True)
class PipelineConfig:
    """One release pipeline: input source, stages, order, bootstrap options."""

    schema_path: str | None
    input_path: str | None
    synth: dict | None
    ingest: dict | None
    repair_spec: RepairSpec | None
    privacy: dict | None
    order: str
    replicates: int
    seed: int
    empty_release_ok: bool
    base_dir: str | None = None

    @classmethod
    def from_json_obj(cls, obj: Mapping, base_dir: Path | None = None) -> "PipelineConfig":
        def resolve(p):
            if p is None:
                return None
            p = Path(p)
            return str(p if p.is_absolute() or base_dir is None else base_dir / p)

        sources = [k for k in ("input", "synth", "ingest") if obj.get(k) is not None]
        if len(sources) != 1:
            raise ConfigError(f"exactly one of input/synth/ingest must be set, got {sources}")
        if obj.get("input") is not None and obj.get("schema") is None:
            raise ConfigError("an input histogram needs a schema path")

        repair_spec = None
        if obj.get("repair") is not None:
            repair_spec = RepairSpec.from_json_obj(obj["repair"])
        privacy = obj.get("privacy")
        if privacy is not None:
            if "epsilon" not in privacy or "rho" not in privacy:
                raise ConfigError("privacy config needs epsilon and rho")
        if repair_spec is None and privacy is None:
            raise ConfigError("at least one of repair/privacy must be configured")

        order = obj.get("order")
        if order is None:
            if repair_spec is not None and privacy is not None:
                order = "privacy-first"
            elif repair_spec is not None:
                order = "repair-only"
            else:
                order = "privacy-only"
        if order not in ORDERS:
            raise ConfigError(f"order must be one of {ORDERS}, got {order!r}")
        needs = {
            "privacy-first": (True, True),
            "bias-first": (True, True),
            "repair-only": (True, False),
            "privacy-only": (False, True),
        }[order]
        if needs[0] and repair_spec is None:
            raise ConfigError(f"order {order!r} requires a repair spec")
        if needs[1] and privacy is None:
            raise ConfigError(f"order {order!r} requires privacy parameters")
        if order == "repair-only" and privacy is not None:
            raise ConfigError("repair-only order conflicts with configured privacy parameters")
        if order == "privacy-only" and repair_spec is not None:
            raise ConfigError("privacy-only order conflicts with a configured repair spec")

        bootstrap = obj.get("bootstrap", {})
        return cls(
            schema_path=resolve(obj.get("schema")),
            input_path=resolve(obj.get("input")),
            synth=obj.get("synth"),
            ingest=obj.get("ingest"),
            repair_spec=repair_spec,
            privacy=privacy,
            order=order,
            replicates=int(bootstrap.get("replicates", 200)),
            seed=int(obj.get("seed", 0)),
            empty_release_ok=bool(obj.get("empty_release_ok", False)),
            base_dir=str(base_dir) if base_dir is not None else None,
        )

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_json_obj(_load_json(path), base_dir=Path(path).parent)


def _build_synth_config(obj: Mapping, base_dir: Path | None = None) -> SynthConfig:
    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() or base_dir is None else base_dir / p

    if obj.get("generate_od") is not None:
        od = synthetic_od_seed(**obj["generate_od"])
    elif obj.get("od_seed") is not None:
        if obj.get("od_schema") is None:
            raise ConfigError("an od_seed CSV needs an od_schema path")
        od_schema = AttributeSchema.load(resolve(obj["od_schema"]))
        od = read_histogram_csv(resolve(obj["od_seed"]), od_schema)
    else:
        raise ConfigError("synth config needs od_seed or generate_od")
    kwargs = {}
    for key in ("gender_domain", "rating_domain"):
        if key in obj:
            kwargs[key] = tuple(obj[key])
    if "rating_distribution" in obj:
        kwargs["rating_distributions"] = tuple(obj["rating_distribution"])
    elif "rating_distributions" in obj:
        dists = obj["rating_distributions"]
        kwargs["rating_distributions"] = (
            {g: tuple(d) for g, d in dists.items()} if isinstance(dists, Mapping) else tuple(dists)
        )
    try:
        return SynthConfig(
            od_seed=od,
            trips=int(obj["trips"]),
            mode=obj.get("mode", "uncorrelated"),
            seed=int(obj.get("seed", 0)),
            **kwargs,
        )
    except KeyError as exc:
        raise ConfigError(f"synth config missing {exc}") from None


def _run_ingest(obj: Mapping, base_dir: Path | None = None) -> IngestResult:
    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() or base_dir is None else base_dir / p

    kind = obj.get("kind")
    if kind == "taxi":
        config = TaxiConfig.from_json_obj(obj)
        path = resolve(obj["trips_csv"])
        try:
            with open(path, newline="", encoding="utf8") as f:
                return taxi_preprocess(csv.DictReader(f), config)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
    if kind == "bike":
        cfg_obj = dict(obj)
        if "neighborhoods_file" in cfg_obj and "neighborhoods" not in cfg_obj:
            text = Path(resolve(cfg_obj["neighborhoods_file"])).read_text(encoding="utf8")
            cfg_obj["neighborhoods"] = [line.strip() for line in text.splitlines() if line.strip()]
        config = BikeConfig.from_json_obj(cfg_obj)
        try:
            with open(resolve(obj["trips_csv"]), newline="", encoding="utf8") as tf, open(
                resolve(obj["riders_csv"]), newline="", encoding="utf8"
            ) as rf:
                return bike_preprocess(csv.DictReader(tf), csv.DictReader(rf), config)
        except OSError as exc:
            raise ConfigError(f"cannot read ingest input: {exc}") from None
    raise ConfigError(f"ingest kind must be taxi or bike, got {kind!r}")


def _load_pipeline_input(cfg: PipelineConfig) -> Histogram:
    base = Path(cfg.base_dir) if cfg.base_dir is not None else None
    if cfg.input_path is not None:
        return _read_histogram(cfg.input_path, _load_schema(cfg.schema_path))
    if cfg.synth is not None:
        return synth_generate(_build_synth_config(cfg.synth, base_dir=base))
    return _run_ingest(cfg.ingest, base_dir=base).histogram


@dataclass
class StageOutcome:
    final: Histogram
    repair_result: FractionalRepairResult | None
    release_result: ReleaseResult | None
    privacy_params: PrivacyParams | None
    warnings: list[str]


def _run_stages(h: Histogram, cfg: PipelineConfig, seed: int) -> StageOutcome:
    """Execute the configured stages in order on h; stops on an empty result."""
    stages = {
        "privacy-first": ("privacy", "repair"),
        "bias-first": ("repair", "privacy"),
        "repair-only": ("repair",),
        "privacy-only": ("privacy",),
    }[cfg.order]
    current = h
    outcome = StageOutcome(h, None, None, None, [])
    for stage in stages:
        try:
            if stage == "repair":
                outcome.repair_result = repair(current, cfg.repair_spec)
                current = outcome.repair_result.rounded
            else:
                params = PrivacyParams.for_histogram(
                    current,
                    epsilon=float(cfg.privacy["epsilon"]),
                    rho=float(cfg.privacy["rho"]),
                    n=cfg.privacy.get("n"),
                )
                outcome.privacy_params = params
                outcome.release_result = privatize(current, params, derive_seed(seed, "privacy"))
                current = outcome.release_result.histogram
        except DataError as exc:
            raise DataError(f"{stage} stage: {exc}") from exc
        if len(current) == 0:
            outcome.warnings.append(
                f"{stage} stage produced an empty histogram; remaining stages skipped"
            )
            break
    outcome.final = current
    return outcome


def _empty_distance_report(replicates: int, seed: int) -> dict:
    return {
        "pwkt": None,
        "hellinger": None,
        "band": None,
        "baseline": None,
        "replicates": replicates,
        "seed": seed,
        "warning": "empty release: no data for which to calculate distances",
    }


def run_release(cfg: PipelineConfig, out_dir, seed: int | None = None) -> int:
    """Full pipeline: load input, run stages, write histogram and reports.

    Returns the process exit code (0, or 4 for an empty release unless the
    config opts out of warning-as-status).
    """
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    original = _load_pipeline_input(cfg)
    outcome = _run_stages(original, cfg, seed)

    original.schema.save(out / "schema.json")
    write_histogram_csv(outcome.final, out / "released.csv")
    if outcome.repair_result is not None:
        rr = outcome.repair_result
        _write_json(
            {
                "cmi_before": rr.cmi_before,
                "cmi_after": rr.cmi_after,
                "kl": rr.kl_divergence,
                "total_before": original.total,
                "total_after_rounded": rr.rounded.total,
            },
            out / "repair_report.json",
        )
    if outcome.release_result is not None:
        report = outcome.release_result.to_report_obj()
        params = outcome.privacy_params
        report["params"] = {
            "epsilon": params.epsilon,
            "rho": params.rho,
            "n": params.n,
            "tau": params.tau,
        }
        _write_json(report, out / "release_report.json")

    if len(outcome.final) == 0:
        _write_json(_empty_distance_report(cfg.replicates, seed), out / "distance_report.json")
        for msg in outcome.warnings:
            print(f"warning: {msg}", file=sys.stderr)
        return 0 if cfg.empty_release_ok else 4

    baseline = None
    if cfg.repair_spec is not None:
        baseline = random_x_baseline(original, cfg.repair_spec, derive_seed(seed, "baseline"))
    report = build_distance_report(
        original,
        outcome.final,
        replicates=cfg.replicates,
        seed=derive_seed(seed, "bootstrap"),
        baseline=baseline,
    )
    _write_json(report.to_json_obj(), out / "distance_report.json")
    for msg in outcome.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return 0


def run_measure(
    schema_path,
    reference_path,
    other_path,
    replicates: int = 200,
    seed: int = 0,
    out_dir=None,
    write_replicates: bool = False,
) -> DistanceReport:
    """Distance report between two histogram files over one schema."""
    schema = _load_schema(schema_path)
    reference = _read_histogram(reference_path, schema)
    other = _read_histogram(other_path, schema)
    report = build_distance_report(reference, other, replicates=replicates, seed=seed)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(report.to_json_obj(), out / "distance_report.json")
        if write_replicates:
            distances = bootstrap_distances(
                reference, {"pwkt": "pwkt", "hellinger": "hellinger"}, replicates, seed
            )
            with open(out / "replicate_distances.csv", "w", newline="", encoding="utf8") as f:
                writer = csv.writer(f)
                writer.writerow(["replicate", "pwkt", "hellinger"])
                for i in range(replicates):
                    writer.writerow([i, f"{distances['pwkt'][i]:.9f}", f"{distances['hellinger'][i]:.9f}"])
    return report


def run_sweep(
    cfg: PipelineConfig,
    epsilons: Sequence[float],
    rhos: Sequence[float],
    trials: int = 10,
    out_path=None,
    seed: int | None = None,
) -> list[dict]:
    """Grid of releases over (epsilon, rho) with `trials` seeds per cell.

    Each row holds the distances of that trial's final output against the
    original input; cells whose threshold wipes out every bucket report
    bins_released = 0 and NaN distances.
    """
    if cfg.privacy is None:
        raise ConfigError("sweep requires privacy parameters in the pipeline config")
    if not epsilons or not rhos or trials < 1:
        raise ConfigError("sweep needs nonempty epsilon/rho grids and at least one trial")
    seed = cfg.seed if seed is None else seed
    original = _load_pipeline_input(cfg)

    rows = []
    for eps in epsilons:
        for rho in rhos:
            for trial in range(trials):
                cell_cfg = PipelineConfig(
                    schema_path=cfg.schema_path,
                    input_path=cfg.input_path,
                    synth=cfg.synth,
                    ingest=cfg.ingest,
                    repair_spec=cfg.repair_spec,
                    privacy={**cfg.privacy, "epsilon": eps, "rho": rho},
                    order=cfg.order,
                    replicates=cfg.replicates,
                    seed=seed,
                    empty_release_ok=True,
                )
                cell_seed = derive_seed(seed, "sweep", float(eps), float(rho), trial)
                outcome = _run_stages(original, cell_cfg, cell_seed)
                if len(outcome.final) == 0:
                    row = {"epsilon": eps, "rho": rho, "trial": trial,
                           "pwkt": math.nan, "hellinger": math.nan, "bins_released": 0}
                else:
                    row = {
                        "epsilon": eps,
                        "rho": rho,
                        "trial": trial,
                        "pwkt": pwkt(original, outcome.final),
                        "hellinger": hellinger(original, outcome.final),
                        "bins_released": len(outcome.final),
                    }
                rows.append(row)

    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", newline="", encoding="utf8") as f:
            writer = csv.writer(f)
            writer.writerow(["epsilon", "rho", "trial", "pwkt", "hellinger", "bins_released"])
            for row in rows:
                writer.writerow(
                    [
                        row["epsilon"],
                        row["rho"],
                        row["trial"],
                        f"{row['pwkt']:.9f}" if not math.isnan(row["pwkt"]) else "nan",
                        f"{row['hellinger']:.9f}" if not math.isnan(row["hellinger"]) else "nan",
                        row["bins_released"],
                    ]
                )
    return rows


def _cmd_ingest(args) -> int:
    result = _run_ingest(_load_json(args.config), base_dir=Path(args.config).parent)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.histogram.schema.save(out / "schema.json")
    write_histogram_csv(result.histogram, out / "histogram.csv")
    _write_json(
        {"stats": result.stats.to_json_obj(), "warnings": list(result.warnings)},
        out / "ingest_report.json",
    )
    for msg in result.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return 0


def _cmd_synth(args) -> int:
    obj = _load_json(args.config)
    if args.seed is not None:
        obj["seed"] = args.seed
    h = synth_generate(_build_synth_config(obj, base_dir=Path(args.config).parent))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    h.schema.save(out / "schema.json")
    write_histogram_csv(h, out / "histogram.csv")
    return 0


def _cmd_repair(args) -> int:
    schema = _load_schema(args.schema)
    h = _read_histogram(args.input, schema)
    spec = RepairSpec.from_json_obj(_load_json(args.config))
    result = repair(h, spec, rounding=args.rounding)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_histogram_csv(result.rounded, out / "repaired.csv")
    write_histogram_csv(result.fractional, out / "fractional.csv")
    _write_json(
        {
            "cmi_before": result.cmi_before,
            "cmi_after": result.cmi_after,
            "kl": result.kl_divergence,
            "total_before": h.total,
            "total_after_rounded": result.rounded.total,
        },
        out / "repair_report.json",
    )
    return 0


def _cmd_privatize(args) -> int:
    schema = _load_schema(args.schema)
    h = _read_histogram(args.input, schema)
    obj = _load_json(args.config)
    if "epsilon" not in obj or "rho" not in obj:
        raise ConfigError("privacy config needs epsilon and rho")
    params = PrivacyParams.for_histogram(h, float(obj["epsilon"]), float(obj["rho"]), obj.get("n"))
    seed = args.seed if args.seed is not None else int(obj.get("seed", 0))
    result = privatize(h, params, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_histogram_csv(result.histogram, out / "released.csv")
    report = result.to_report_obj()
    report["params"] = {"epsilon": params.epsilon, "rho": params.rho, "n": params.n, "tau": params.tau}
    _write_json(report, out / "release_report.json")
    if len(result.histogram) == 0:
        print("warning: empty release (threshold exceeded every bucket)", file=sys.stderr)
        return 0 if args.ok_empty else 4
    return 0


def _cmd_release(args) -> int:
    cfg = PipelineConfig.load(args.config)
    return run_release(cfg, args.out, seed=args.seed)


def _cmd_measure(args) -> int:
    run_measure(
        args.schema,
        args.reference,
        args.other,
        replicates=args.replicates,
        seed=args.seed if args.seed is not None else 0,
        out_dir=args.out,
        write_replicates=args.replicates_csv,
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = PipelineConfig.load(args.config)
    epsilons = [float(v) for v in args.epsilons.split(",") if v.strip()]
    rhos = [float(v) for v in args.rhos.split(",") if v.strip()]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_sweep(cfg, epsilons, rhos, trials=args.trials, out_path=out / "sweep.csv", seed=args.seed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odrelease",
        description="Repair and privately release origin-destination trip histograms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("ingest", help="bucketize raw trip CSVs into a histogram")
    common(p)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("synth", help="generate the synthetic ride-hailing dataset")
    common(p)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("repair", help="remove one causal dependency from a histogram")
    common(p)
    p.add_argument("--schema", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--rounding", choices=("largest_remainder", "half_even"), default="largest_remainder")
    p.set_defaults(fn=_cmd_repair)

    p = sub.add_parser("privatize", help="differentially private release of a histogram")
    common(p)
    p.add_argument("--schema", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--ok-empty", action="store_true", help="exit 0 instead of 4 on an empty release")
    p.set_defaults(fn=_cmd_privatize)

    p = sub.add_parser("release", help="full pipeline: input, stages, reports")
    common(p)
    p.set_defaults(fn=_cmd_release)

    p = sub.add_parser("measure", help="distance report between two histogram files")
    p.add_argument("reference")
    p.add_argument("other")
    p.add_argument("--schema", required=True)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--replicates-csv", action="store_true", help="also write per-replicate distances")
    p.set_defaults(fn=_cmd_measure)

    p = sub.add_parser("sweep", help="grid of releases over epsilon and rho")
    common(p)
    p.add_argument("--epsilons", required=True, help="comma-separated epsilon grid")
    p.add_argument("--rhos", required=True, help="comma-separated rho grid")
    p.add_argument("--trials", type=int, default=10)
    p.set_defaults(fn=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ODReleaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
