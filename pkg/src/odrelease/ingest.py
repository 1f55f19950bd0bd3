"""Loading raw trip records into bucket histograms.

Covers the bucketization rules shared by the real datasets (time-of-day
buckets, per-entity tertiles, coordinate rounding, tip categories) and the
seeded synthetic ride-hailing generator used by the experiments.
"""

from __future__ import annotations

import datetime as _dt
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError, EmptyInputError, SchemaError
from .histogram import AttributeSchema, BucketKey, Histogram, normalize
from .rng import substream

TIME_BUCKETS = ("morning", "day", "evening", "night")
TERTILE_LABELS = ("low", "medium", "high")
TIP_LABELS = ("low", "high")

# Column roles expected in the Jan-2013 TLC trip+fare join.
DEFAULT_TAXI_COLUMNS = {
    "pickup_datetime": "pickup_datetime",
    "pickup_lon": "pickup_longitude",
    "pickup_lat": "pickup_latitude",
    "dropoff_lon": "dropoff_longitude",
    "dropoff_lat": "dropoff_latitude",
    "trip_distance": "trip_distance",
    "fare_amount": "fare_amount",
    "tip_amount": "tip_amount",
    "payment_type": "payment_type",
    "driver_id": "hack_license",
}

DEFAULT_RATING_DOMAIN = ("1", "2", "3", "4", "5")
DEFAULT_GENDER_DOMAIN = ("m", "f", "o")
# Config defaults only: the source experiments never published theirs.
DEFAULT_RATING_DIST = (0.05, 0.10, 0.20, 0.30, 0.35)
DEFAULT_CORRELATED_DISTS = {
    "m": (0.35, 0.30, 0.20, 0.10, 0.05),
    "f": (0.05, 0.10, 0.20, 0.30, 0.35),
    "o": (0.20, 0.20, 0.20, 0.20, 0.20),
}


@dataclass(frozen=True)
class IngestStats:
    rows: int
    retained: int
    dropped_missing: int
    dropped_filtered: int
    malformed: int

    def to_json_obj(self) -> dict:
        return {
            "rows": self.rows,
            "retained": self.retained,
            "dropped_missing": self.dropped_missing,
            "dropped_filtered": self.dropped_filtered,
            "malformed": self.malformed,
        }


@dataclass(frozen=True)
class IngestResult:
    histogram: Histogram
    stats: IngestStats
    warnings: tuple[str, ...] = ()


def time_bucket(timestamp) -> str:
    """Map a local time of day to morning/day/evening/night.

    Half-open buckets: morning [05:00, 09:00), day [09:00, 15:00),
    evening [15:00, 19:00), night [19:00, 05:00).  Accepts datetime.time,
    datetime.datetime, or a parseable string.
    """
    t = timestamp
    if isinstance(t, str):
        text = t.strip()
        try:
            t = _dt.datetime.fromisoformat(text)
        except ValueError:
            try:
                t = _dt.time.fromisoformat(text)
            except ValueError:
                raise DataError(f"unparseable time {timestamp!r}") from None
    if isinstance(t, _dt.datetime):
        t = t.time()
    if not isinstance(t, _dt.time):
        raise DataError(f"unparseable time {timestamp!r}")
    hour = t.hour
    if 5 <= hour < 9:
        return "morning"
    if 9 <= hour < 15:
        return "day"
    if 15 <= hour < 19:
        return "evening"
    return "night"


def tertiles(totals: Mapping) -> dict:
    """Split entities into low/medium/high thirds by ascending total.

    Ties break by entity id.  When the count is not divisible by 3 the lower
    categories take the extra entities: sizes ceil(m/3), then ceil of half
    the rest, then the remainder.
    """
    if not totals:
        raise EmptyInputError("tertiles of an empty collection")
    order = sorted(totals, key=lambda e: (totals[e], e))
    m = len(order)
    s1 = math.ceil(m / 3)
    s2 = math.ceil((m - s1) / 2)
    out = {}
    for i, entity in enumerate(order):
        if i < s1:
            out[entity] = "low"
        elif i < s1 + s2:
            out[entity] = "medium"
        else:
            out[entity] = "high"
    return out


def round_coordinate(value: float) -> str:
    """Round to one decimal place, halves away from zero; returned formatted."""
    tenths = math.floor(abs(value) * 10.0 + 0.5)
    if value < 0 and tenths != 0:
        tenths = -tenths
    return f"{tenths / 10.0:.1f}"


def _tenths_range(lo: float, hi: float) -> tuple[str, ...]:
    lo_t = math.floor(lo * 10.0 + 0.5) if lo >= 0 else -math.floor(abs(lo) * 10.0 + 0.5)
    hi_t = math.floor(hi * 10.0 + 0.5) if hi >= 0 else -math.floor(abs(hi) * 10.0 + 0.5)
    return tuple(f"{t / 10.0:.1f}" for t in range(lo_t, hi_t + 1))


@dataclass(frozen=True)
class TaxiConfig:
    """Column mapping and filters for the taxi trip CSV."""

    columns: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_TAXI_COLUMNS))
    bbox: tuple[float, float, float, float] = (-74.3, -73.6, 40.4, 41.0)  # lon_min, lon_max, lat_min, lat_max
    card_values: tuple[str, ...] = ("CRD",)
    tip_threshold: float = 0.2

    def __post_init__(self):
        missing = set(DEFAULT_TAXI_COLUMNS) - set(self.columns)
        if missing:
            raise ConfigError(f"taxi column mapping missing roles: {sorted(missing)}")

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "TaxiConfig":
        columns = dict(DEFAULT_TAXI_COLUMNS)
        given = dict(obj.get("columns", {}))
        # accept either orientation: {column name: role} or {role: column name}
        if given and set(given.values()) <= set(DEFAULT_TAXI_COLUMNS) and not (
            set(given) <= set(DEFAULT_TAXI_COLUMNS)
        ):
            given = {role: col for col, role in given.items()}
        columns.update(given)
        bbox = obj.get("bbox", {})
        if isinstance(bbox, Mapping):
            box = (
                float(bbox.get("lon_min", -74.3)),
                float(bbox.get("lon_max", -73.6)),
                float(bbox.get("lat_min", 40.4)),
                float(bbox.get("lat_max", 41.0)),
            )
        else:
            box = tuple(float(v) for v in bbox)
        return cls(
            columns=columns,
            bbox=box,
            card_values=tuple(obj.get("card_values", ("CRD",))),
            tip_threshold=float(obj.get("tip_threshold", 0.2)),
        )


def _distance_cutoffs(distances: Sequence[float]) -> tuple[float, float]:
    ordered = sorted(distances)
    m = len(ordered)
    t1 = ordered[math.ceil(m / 3) - 1]
    t2 = ordered[math.ceil(2 * m / 3) - 1]
    return t1, t2


def taxi_preprocess(records: Iterable[Mapping[str, str]], config: TaxiConfig) -> IngestResult:
    """Bucketize taxi trips into the 8-attribute histogram of the experiments.

    Keeps card-paid trips inside the bounding box, rounds coordinates to one
    decimal, tertiles trip distance by trip count (ties to the lower
    category), marks tips high when tip >= tip_threshold * fare, tertiles
    drivers by trip count, and buckets pickup time of day.
    """
    cols = config.columns
    lon_min, lon_max, lat_min, lat_max = config.bbox
    card = set(config.card_values)

    rows = malformed = dropped_missing = dropped_filtered = 0
    trips = []
    for rec in records:
        rows += 1
        raw = {role: (rec.get(col) or "").strip() for role, col in cols.items()}
        if any(not raw[role] for role in cols):
            dropped_missing += 1
            continue
        if raw["payment_type"] not in card:
            dropped_filtered += 1
            continue
        try:
            pickup = time_bucket(raw["pickup_datetime"])
            o_lon, o_lat = float(raw["pickup_lon"]), float(raw["pickup_lat"])
            d_lon, d_lat = float(raw["dropoff_lon"]), float(raw["dropoff_lat"])
            distance = float(raw["trip_distance"])
            fare = float(raw["fare_amount"])
            tip = float(raw["tip_amount"])
        except (ValueError, DataError):
            malformed += 1
            continue
        if fare <= 0 or distance < 0 or tip < 0:
            malformed += 1
            continue
        in_box = lon_min <= o_lon <= lon_max and lon_min <= d_lon <= lon_max
        in_box = in_box and lat_min <= o_lat <= lat_max and lat_min <= d_lat <= lat_max
        if not in_box:
            dropped_filtered += 1
            continue
        trips.append(
            (
                round_coordinate(o_lon),
                round_coordinate(o_lat),
                round_coordinate(d_lon),
                round_coordinate(d_lat),
                pickup,
                distance,
                "high" if tip >= config.tip_threshold * fare else "low",
                raw["driver_id"],
            )
        )

    if rows and malformed > 0.5 * rows:
        raise DataError(f"{malformed} of {rows} rows malformed; refusing to continue")
    if not trips:
        raise EmptyInputError("no taxi trips survived preprocessing")

    t1, t2 = _distance_cutoffs([t[5] for t in trips])
    driver_totals: dict[str, int] = {}
    for t in trips:
        driver_totals[t[7]] = driver_totals.get(t[7], 0) + 1
    freq = tertiles(driver_totals)

    schema = AttributeSchema(
        (
            ("o_lon", _tenths_range(lon_min, lon_max)),
            ("o_lat", _tenths_range(lat_min, lat_max)),
            ("d_lon", _tenths_range(lon_min, lon_max)),
            ("d_lat", _tenths_range(lat_min, lat_max)),
            ("pickup", TIME_BUCKETS),
            ("dist", TERTILE_LABELS),
            ("tip", TIP_LABELS),
            ("freq", TERTILE_LABELS),
        )
    )
    counts: dict[BucketKey, int] = {}
    for o_lon, o_lat, d_lon, d_lat, pickup, distance, tip_cat, driver in trips:
        dist_cat = "low" if distance <= t1 else ("medium" if distance <= t2 else "high")
        key = (o_lon, o_lat, d_lon, d_lat, pickup, dist_cat, tip_cat, freq[driver])
        counts[key] = counts.get(key, 0) + 1

    stats = IngestStats(rows, len(trips), dropped_missing, dropped_filtered, malformed)
    return IngestResult(Histogram(schema, counts), stats)


@dataclass(frozen=True)
class BikeConfig:
    """Neighborhood list, survey domains, and column mappings for bike trips."""

    neighborhoods: tuple[str, ...]
    companies: tuple[str, ...]
    genders: tuple[str, ...] = ("male", "female", "other")
    helmet_values: tuple[str, ...] = ("yes", "no")
    trip_columns: Mapping[str, str] = field(
        default_factory=lambda: {
            "rider_id": "rider_id",
            "start": "start_nhood",
            "end": "end_nhood",
            "time": "start_time",
            "company": "company",
        }
    )
    rider_columns: Mapping[str, str] = field(
        default_factory=lambda: {"rider_id": "rider_id", "gender": "gender", "helmet": "helmet"}
    )

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "BikeConfig":
        try:
            neighborhoods = tuple(obj["neighborhoods"])
            companies = tuple(obj["companies"])
        except KeyError as exc:
            raise ConfigError(f"bike config missing {exc}") from None
        kwargs = {}
        for key in ("genders", "helmet_values"):
            if key in obj:
                kwargs[key] = tuple(obj[key])
        for key in ("trip_columns", "rider_columns"):
            if key in obj:
                base = dict(getattr(cls, "__dataclass_fields__")[key].default_factory())
                base.update(obj[key])
                kwargs[key] = base
        return cls(neighborhoods=neighborhoods, companies=companies, **kwargs)


def bike_preprocess(
    trips: Iterable[Mapping[str, str]],
    riders: Iterable[Mapping[str, str]],
    config: BikeConfig,
) -> IngestResult:
    """Join trips with rider survey attributes and bucketize.

    Trips whose rider id is absent from the survey are dropped and counted.
    If some company's joined gender column is a single constant value, a
    data-quality warning is emitted (a symptom of per-company default values
    flowing in upstream).
    """
    tcols, rcols = config.trip_columns, config.rider_columns
    survey: dict[str, tuple[str, str]] = {}
    for rec in riders:
        rid = (rec.get(rcols["rider_id"]) or "").strip()
        gender = (rec.get(rcols["gender"]) or "").strip()
        helmet = (rec.get(rcols["helmet"]) or "").strip()
        if rid and gender and helmet:
            survey[rid] = (gender, helmet)

    nhoods = set(config.neighborhoods)
    companies = set(config.companies)
    genders = set(config.genders)
    helmets = set(config.helmet_values)

    rows = malformed = dropped_missing = dropped_filtered = 0
    counts: dict[BucketKey, int] = {}
    genders_by_company: dict[str, set[str]] = {}
    for rec in trips:
        rows += 1
        raw = {role: (rec.get(col) or "").strip() for role, col in tcols.items()}
        if any(not raw[role] for role in tcols):
            dropped_missing += 1
            continue
        if raw["rider_id"] not in survey:
            dropped_filtered += 1
            continue
        gender, helmet = survey[raw["rider_id"]]
        try:
            bucket_time = time_bucket(raw["time"])
        except DataError:
            malformed += 1
            continue
        if (
            raw["start"] not in nhoods
            or raw["end"] not in nhoods
            or raw["company"] not in companies
            or gender not in genders
            or helmet not in helmets
        ):
            malformed += 1
            continue
        key = (raw["start"], raw["end"], bucket_time, helmet, raw["company"], gender)
        counts[key] = counts.get(key, 0) + 1
        genders_by_company.setdefault(raw["company"], set()).add(gender)

    if rows and malformed > 0.5 * rows:
        raise DataError(f"{malformed} of {rows} rows malformed; refusing to continue")
    if not counts:
        raise EmptyInputError("no bike trips survived preprocessing")

    warn_messages = []
    if len(genders_by_company) > 1:
        for company in sorted(genders_by_company):
            seen = genders_by_company[company]
            if len(seen) == 1:
                msg = (
                    f"company {company!r} reports a single constant gender value "
                    f"({next(iter(seen))!r}); suspect a default value in the source data"
                )
                warn_messages.append(msg)
                warnings.warn(msg)

    schema = AttributeSchema(
        (
            ("start_nhood", config.neighborhoods),
            ("end_nhood", config.neighborhoods),
            ("time_of_day", TIME_BUCKETS),
            ("helmet", config.helmet_values),
            ("company", config.companies),
            ("gender", config.genders),
        )
    )
    retained = sum(counts.values())
    stats = IngestStats(rows, retained, dropped_missing, dropped_filtered, malformed)
    return IngestResult(Histogram(schema, counts), stats, tuple(warn_messages))


def _check_distribution(dist: Sequence[float], size: int, what: str) -> tuple[float, ...]:
    dist = tuple(float(p) for p in dist)
    if len(dist) != size:
        raise ConfigError(f"{what} must have {size} entries, got {len(dist)}")
    if any(p < 0 for p in dist):
        raise ConfigError(f"{what} has negative probabilities")
    if abs(math.fsum(dist) - 1.0) > 1e-12:
        raise ConfigError(f"{what} must sum to 1 within 1e-12")
    return dist


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic ride-hailing generator settings.

    od_seed supplies the origin-destination traffic shape; each generated
    trip draws an OD pair from its normalized counts, a uniform gender, and
    a rating from either one shared distribution (uncorrelated mode) or a
    per-gender distribution (correlated mode).
    """

    od_seed: Histogram
    trips: int
    mode: str = "uncorrelated"
    gender_domain: tuple[str, ...] = DEFAULT_GENDER_DOMAIN
    rating_domain: tuple[str, ...] = DEFAULT_RATING_DOMAIN
    rating_distributions: object = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("uncorrelated", "correlated"):
            raise ConfigError(f"mode must be uncorrelated or correlated, got {self.mode!r}")
        if self.trips <= 0:
            raise ConfigError(f"trips must be positive, got {self.trips!r}")
        if len(self.od_seed.schema.names) != 2:
            raise SchemaError("od_seed must be a two-attribute (origin, destination) histogram")
        dists = self.rating_distributions
        size = len(self.rating_domain)
        if self.mode == "uncorrelated":
            if dists is None:
                dists = DEFAULT_RATING_DIST
            checked = _check_distribution(dists, size, "rating distribution")
        else:
            if dists is None:
                dists = DEFAULT_CORRELATED_DISTS
            if set(dists) != set(self.gender_domain):
                raise ConfigError(
                    f"correlated mode needs one rating distribution per gender {self.gender_domain}"
                )
            checked = {
                g: _check_distribution(dists[g], size, f"rating distribution for {g!r}")
                for g in self.gender_domain
            }
        object.__setattr__(self, "rating_distributions", checked)


def synth_generate(cfg: SynthConfig) -> Histogram:
    """Draw cfg.trips synthetic trips and aggregate them into a histogram.

    Deterministic given cfg.seed.  The output schema is the od_seed's two
    attributes followed by gender and rating.
    """
    if cfg.od_seed.total <= 0:
        raise EmptyInputError("od_seed histogram is empty")
    od_probs = normalize(cfg.od_seed)
    od_keys = sorted(od_probs)
    p = np.array([od_probs[k] for k in od_keys])

    rng = substream(cfg.seed, "synth")
    od_idx = rng.choice(len(od_keys), size=cfg.trips, p=p)
    gender_idx = rng.integers(0, len(cfg.gender_domain), size=cfg.trips)
    if cfg.mode == "uncorrelated":
        rating_idx = rng.choice(len(cfg.rating_domain), size=cfg.trips, p=cfg.rating_distributions)
    else:
        rating_idx = np.zeros(cfg.trips, dtype=np.int64)
        for gi, g in enumerate(cfg.gender_domain):
            mask = gender_idx == gi
            rating_idx[mask] = rng.choice(
                len(cfg.rating_domain), size=int(mask.sum()), p=cfg.rating_distributions[g]
            )

    stacked = np.stack([od_idx, gender_idx, rating_idx], axis=1)
    uniq, freq = np.unique(stacked, axis=0, return_counts=True)
    counts: dict[BucketKey, int] = {}
    for (oi, gi, ri), c in zip(uniq, freq):
        key = (*od_keys[int(oi)], cfg.gender_domain[int(gi)], cfg.rating_domain[int(ri)])
        counts[key] = int(c)

    od_schema = cfg.od_seed.schema
    schema = AttributeSchema(
        (
            *od_schema.attributes,
            ("gender", cfg.gender_domain),
            ("rating", cfg.rating_domain),
        )
    )
    return Histogram(schema, counts)


def synthetic_od_seed(
    n_neighborhoods: int = 90,
    n_pairs: int = 200,
    total: int = 50_000,
    seed: int = 0,
    skew: float = 0.7,
    uniform_mix: float = 0.5,
) -> Histogram:
    """A skewed origin-destination histogram standing in for real trip data.

    Draws n_pairs distinct OD pairs, gives them Zipf-like weights blended
    with a uniform floor (so tail strata keep workable mass), and assigns
    counts by one multinomial draw of `total` trips.
    """
    if n_pairs > n_neighborhoods * n_neighborhoods:
        raise ConfigError("more OD pairs requested than the neighborhood grid allows")
    labels = tuple(f"n{i:02d}" for i in range(n_neighborhoods))
    rng = substream(seed, "od-seed")
    flat = rng.choice(n_neighborhoods * n_neighborhoods, size=n_pairs, replace=False)
    zipf = np.power(np.arange(1, n_pairs + 1, dtype=float), -skew)
    weights = uniform_mix / n_pairs + (1.0 - uniform_mix) * zipf / zipf.sum()
    draws = rng.multinomial(total, weights / weights.sum())

    schema = AttributeSchema((("origin", labels), ("destination", labels)))
    counts: dict[BucketKey, int] = {}
    for idx, c in zip(flat, draws):
        if c:
            o, d = divmod(int(idx), n_neighborhoods)
            counts[(labels[o], labels[d])] = int(c)
    return Histogram(schema, counts)
