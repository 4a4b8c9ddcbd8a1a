"""The four augmentation techniques and their combiner.

Additive noise perturbs heard towers with per-(location, tower) Gaussian
noise scaled to half the observed signal range. Distribution sampling draws
each heard tower independently from its fitted model. The random dropper
zeroes a random subset of heard towers (never the strongest-mean one, the
serving-cell proxy); the threshold dropper enumerates all removal
combinations of weak entries. Everything is deterministic given the config
seed: each (technique, location) pair gets its own derived RNG stream.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import FingerprintDatabase, ReferenceLocation, TowerId, heard_count_histogram
from .distfit import FittedDistribution, fit_database, sample_from
from .preprocess import FeatureVector, heard_mask, normalize_asu, vectorize
from .util import ConfigError, derive_rng, parse_bool, read_kv_config
from .vae import VaeModel, VaeTrainConfig, generate, train_vae

MAX_THRESHOLD_CANDIDATES = 12  # 2^12 - 1 variants caps the combinatorial path


@dataclass(frozen=True)
class LocationStats:
    """Per-tower signal statistics at one location, aligned to the universe.

    Arrays cover the full tower universe; towers never heard at the location
    have zero noise_scale and zero heard_probability.
    """

    location_id: int
    min_values: np.ndarray
    max_values: np.ndarray
    mean_values: np.ndarray
    heard_probability: np.ndarray
    noise_scale: np.ndarray  # (max - min) / 2 per tower
    heard_histogram: dict[int, float]


@dataclass(frozen=True)
class AugmentConfig:
    """Which techniques run and how many samples each produces.

    ``None`` for the per-location counts means 10x the location's scan
    count. The VAE training knobs default to 3000 epochs at lr 0.001.
    """

    noise_enabled: bool = True
    noise_per_scan: int = 10
    sampling_enabled: bool = True
    sampling_n_per_location: int | None = None
    drop_random_enabled: bool = True
    drop_random_per_scan: int = 10
    drop_random_max_drop: int = 6
    drop_threshold_enabled: bool = True
    drop_threshold_value: float = 0.2
    vae_enabled: bool = True
    vae_n_per_location: int | None = None
    vae_epochs: int = 3000
    vae_learning_rate: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.noise_per_scan < 1 or self.drop_random_per_scan < 1:
            raise ConfigError("per-scan multipliers must be >= 1")
        if not (0.0 <= self.drop_threshold_value <= 1.0):
            raise ConfigError(f"threshold must be in [0,1]: {self.drop_threshold_value}")
        if self.drop_random_max_drop < 1:
            raise ConfigError("drop_random_max_drop must be >= 1")

    @staticmethod
    def none_enabled() -> "AugmentConfig":
        return AugmentConfig(
            noise_enabled=False, sampling_enabled=False, drop_random_enabled=False,
            drop_threshold_enabled=False, vae_enabled=False,
        )

    def only(self, technique: str) -> "AugmentConfig":
        """Copy of this config with a single technique enabled."""
        flags = {
            "noise": "noise_enabled",
            "sampling": "sampling_enabled",
            "drop_random": "drop_random_enabled",
            "drop_threshold": "drop_threshold_enabled",
            "vae": "vae_enabled",
        }
        if technique not in flags:
            raise ConfigError(f"unknown technique: {technique}")
        updates = {name: (key == technique) for key, name in flags.items()}
        return replace(self, **updates)

    @staticmethod
    def from_dict(raw: dict[str, str]) -> "AugmentConfig":
        kwargs = {}
        parsers = {
            "noise.enabled": ("noise_enabled", parse_bool),
            "noise.per_scan": ("noise_per_scan", _parse_int),
            "sampling.enabled": ("sampling_enabled", parse_bool),
            "sampling.n_per_location": ("sampling_n_per_location", _parse_optional_int),
            "drop_random.enabled": ("drop_random_enabled", parse_bool),
            "drop_random.per_scan": ("drop_random_per_scan", _parse_int),
            "drop_random.max_drop": ("drop_random_max_drop", _parse_int),
            "drop_threshold.enabled": ("drop_threshold_enabled", parse_bool),
            "drop_threshold.value": ("drop_threshold_value", _parse_float),
            "vae.enabled": ("vae_enabled", parse_bool),
            "vae.n_per_location": ("vae_n_per_location", _parse_optional_int),
            "vae.epochs": ("vae_epochs", _parse_int),
            "vae.learning_rate": ("vae_learning_rate", _parse_float),
            "seed": ("seed", _parse_int),
        }
        for key, value in raw.items():
            if key not in parsers:
                raise ConfigError(f"unknown augmentation config key: {key}")
            name, parser = parsers[key]
            kwargs[name] = parser(value, key)
        return AugmentConfig(**kwargs)

    @staticmethod
    def from_file(path: str | Path) -> "AugmentConfig":
        return AugmentConfig.from_dict(read_kv_config(path))

    def to_dict(self) -> dict:
        return {
            "noise.enabled": self.noise_enabled,
            "noise.per_scan": self.noise_per_scan,
            "sampling.enabled": self.sampling_enabled,
            "sampling.n_per_location": self.sampling_n_per_location,
            "drop_random.enabled": self.drop_random_enabled,
            "drop_random.per_scan": self.drop_random_per_scan,
            "drop_random.max_drop": self.drop_random_max_drop,
            "drop_threshold.enabled": self.drop_threshold_enabled,
            "drop_threshold.value": self.drop_threshold_value,
            "vae.enabled": self.vae_enabled,
            "vae.n_per_location": self.vae_n_per_location,
            "vae.epochs": self.vae_epochs,
            "vae.learning_rate": self.vae_learning_rate,
            "seed": self.seed,
        }


def _parse_int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


def _parse_optional_int(value: str, key: str) -> int | None:
    if value.strip().lower() == "auto":
        return None
    return _parse_int(value, key)


def _parse_float(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


def compute_stats(db: FingerprintDatabase) -> dict[int, LocationStats]:
    """Per-location signal statistics over scans where each tower was heard."""
    index = {tower: j for j, tower in enumerate(db.tower_universe)}
    m = db.n_towers
    out: dict[int, LocationStats] = {}
    for loc in db.locations:
        values: list[list[float]] = [[] for _ in range(m)]
        for scan in loc.scans:
            for tower, asu in scan.readings:
                values[index[tower]].append(normalize_asu(asu))
        mins = np.zeros(m)
        maxs = np.zeros(m)
        means = np.zeros(m)
        prob = np.zeros(m)
        for j, vals in enumerate(values):
            if vals:
                arr = np.array(vals)
                mins[j] = arr.min()
                maxs[j] = arr.max()
                means[j] = arr.mean()
                prob[j] = len(vals) / len(loc.scans)
        out[loc.location_id] = LocationStats(
            location_id=loc.location_id,
            min_values=mins,
            max_values=maxs,
            mean_values=means,
            heard_probability=prob,
            noise_scale=(maxs - mins) / 2.0,
            heard_histogram=heard_count_histogram(loc),
        )
    return out


def _heard_of(v: FeatureVector, heard: np.ndarray | None) -> np.ndarray:
    if heard is None:
        return v.values > 0.0
    heard = np.asarray(heard, dtype=bool)
    if heard.shape != v.values.shape:
        raise ValueError("heard mask shape disagrees with vector")
    return heard


def augment_noise(
    v: FeatureVector,
    stats: LocationStats,
    rng: np.random.Generator,
    heard: np.ndarray | None = None,
) -> FeatureVector:
    """Add per-tower Gaussian noise to the heard entries, clipped to [0, 1]."""
    mask = _heard_of(v, heard)
    noise = rng.normal(0.0, stats.noise_scale)
    out = v.values.copy()
    out[mask] = np.clip(v.values[mask] + noise[mask], 0.0, 1.0)
    return FeatureVector(values=out, location_id=v.location_id)


def augment_sampling(
    loc: ReferenceLocation,
    fits: dict[TowerId, FittedDistribution],
    universe: tuple[TowerId, ...],
    rng: np.random.Generator,
    n: int,
) -> list[FeatureVector]:
    """Draw n synthetic vectors, each tower independently from its fit.

    Independence across towers is what separates this technique from the
    generative one. Towers never heard at the location stay zero.
    """
    index = {tower: j for j, tower in enumerate(universe)}
    heard_towers = sorted({tower for scan in loc.scans for tower in scan.towers},
                          key=lambda t: index[t])
    missing = [t for t in heard_towers if t not in fits]
    if missing:
        raise ValueError(f"missing fit for heard tower(s): {', '.join(missing)}")
    out = np.zeros((n, len(universe)))
    for tower in heard_towers:
        out[:, index[tower]] = sample_from(fits[tower], rng, n)
    return [FeatureVector(values=row, location_id=loc.location_id) for row in out]


def augment_drop_random(
    v: FeatureVector,
    stats: LocationStats,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    heard: np.ndarray | None = None,
) -> FeatureVector:
    """Zero a random subset of heard towers, sparing the serving-cell proxy.

    The protected entry is the heard tower with the highest mean RSS at the
    location. The drop count is uniform on {1..min(max_drop, heard-1)}; a
    single-tower scan is returned unchanged.
    """
    mask = _heard_of(v, heard)
    heard_idx = np.flatnonzero(mask)
    if heard_idx.size <= 1:
        return FeatureVector(values=v.values.copy(), location_id=v.location_id)
    protected = heard_idx[int(np.argmax(stats.mean_values[heard_idx]))]
    droppable = heard_idx[heard_idx != protected]
    max_drop = min(cfg.drop_random_max_drop, heard_idx.size - 1)
    n_drop = int(rng.integers(1, max_drop + 1))
    chosen = rng.choice(droppable, size=n_drop, replace=False)
    out = v.values.copy()
    out[chosen] = 0.0
    return FeatureVector(values=out, location_id=v.location_id)


def augment_drop_threshold(v: FeatureVector, cfg: AugmentConfig) -> list[FeatureVector]:
    """All non-empty removal combinations of entries below the threshold.

    Candidates are strictly positive entries under the threshold (a zero
    entry already reads as unheard). If more than 12 qualify, only the 12
    weakest are combined.
    """
    candidates = np.flatnonzero((v.values > 0.0) & (v.values < cfg.drop_threshold_value))
    if candidates.size > MAX_THRESHOLD_CANDIDATES:
        weakest = np.argsort(v.values[candidates], kind="stable")[:MAX_THRESHOLD_CANDIDATES]
        candidates = np.sort(candidates[weakest])
    k = candidates.size
    out: list[FeatureVector] = []
    for bits in range(1, 2**k):
        values = v.values.copy()
        for i in range(k):
            if bits & (1 << i):
                values[candidates[i]] = 0.0
        out.append(FeatureVector(values=values, location_id=v.location_id))
    return out


def train_location_vaes(
    db: FingerprintDatabase, cfg: AugmentConfig
) -> dict[int, VaeModel]:
    """Train one VAE per location; locations with fewer than 2 scans are
    skipped with a warning."""
    models: dict[int, VaeModel] = {}
    vae_cfg = VaeTrainConfig(
        epochs=cfg.vae_epochs, learning_rate=cfg.vae_learning_rate, seed=cfg.seed
    )
    for loc in db.locations:
        if len(loc.scans) < 2:
            warnings.warn(
                f"location {loc.location_id}: only {len(loc.scans)} scan(s), "
                "skipping VAE training"
            )
            continue
        vectors = [vectorize(s, db.tower_universe, loc.location_id) for s in loc.scans]
        models[loc.location_id] = train_vae(vectors, vae_cfg, location_id=loc.location_id)
    return models


def augment_all(
    db: FingerprintDatabase,
    cfg: AugmentConfig,
    fits: dict[int, dict[TowerId, FittedDistribution]] | None = None,
    vae_models: dict[int, VaeModel] | None = None,
) -> tuple[list[FeatureVector], dict[str, int]]:
    """Originals plus every enabled technique's output, in a fixed order.

    Fits and VAE models are trained on the fly when not supplied. Returns
    the combined vector list and the per-technique sample counts.
    """
    universe = db.tower_universe
    per_loc: list[tuple[ReferenceLocation, list[FeatureVector], list[np.ndarray]]] = []
    for loc in db.locations:
        vecs = [vectorize(s, universe, loc.location_id) for s in loc.scans]
        masks = [heard_mask(s, universe) for s in loc.scans]
        per_loc.append((loc, vecs, masks))

    combined: list[FeatureVector] = [v for _, vecs, _ in per_loc for v in vecs]
    counts = {"original": len(combined), "noise": 0, "sampling": 0,
              "drop_random": 0, "drop_threshold": 0, "vae": 0}

    needs_stats = cfg.noise_enabled or cfg.drop_random_enabled
    stats = compute_stats(db) if needs_stats else {}

    if cfg.noise_enabled:
        for loc, vecs, masks in per_loc:
            rng = derive_rng(cfg.seed, "noise", loc.location_id)
            for v, mask in zip(vecs, masks):
                for _ in range(cfg.noise_per_scan):
                    combined.append(augment_noise(v, stats[loc.location_id], rng, mask))
                    counts["noise"] += 1

    if cfg.sampling_enabled:
        if fits is None:
            fits = fit_database(db)
        for loc, _, _ in per_loc:
            rng = derive_rng(cfg.seed, "sampling", loc.location_id)
            n = cfg.sampling_n_per_location or 10 * len(loc.scans)
            synthetic = augment_sampling(loc, fits[loc.location_id], universe, rng, n)
            combined.extend(synthetic)
            counts["sampling"] += len(synthetic)

    if cfg.drop_random_enabled:
        for loc, vecs, masks in per_loc:
            rng = derive_rng(cfg.seed, "drop_random", loc.location_id)
            for v, mask in zip(vecs, masks):
                for _ in range(cfg.drop_random_per_scan):
                    combined.append(augment_drop_random(v, stats[loc.location_id], cfg, rng, mask))
                    counts["drop_random"] += 1

    if cfg.drop_threshold_enabled:
        for _, vecs, _ in per_loc:
            for v in vecs:
                dropped = augment_drop_threshold(v, cfg)
                combined.extend(dropped)
                counts["drop_threshold"] += len(dropped)

    if cfg.vae_enabled:
        if vae_models is None:
            vae_models = train_location_vaes(db, cfg)
        for loc, _, _ in per_loc:
            model = vae_models.get(loc.location_id)
            if model is None:
                continue
            rng = derive_rng(cfg.seed, "vae-generate", loc.location_id)
            n = cfg.vae_n_per_location or 10 * len(loc.scans)
            synthetic = generate(model, rng, n)
            combined.extend(synthetic)
            counts["vae"] += len(synthetic)

    return combined, counts
