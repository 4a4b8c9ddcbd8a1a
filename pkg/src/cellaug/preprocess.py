"""Turn raw ASU scans into fixed-length normalized feature vectors.

ASU readings (0..31) are normalized to [0, 1] by dividing by 31; towers not
heard in a scan get feature value 0. The dBm conversion is exposed for
reference and diagnostics; the learning pipeline runs on normalized ASU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ASU_MAX, ASU_MIN, FingerprintDatabase, RawScan, TowerId


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Normalized RSS vector aligned to a tower universe, labeled by location."""

    values: np.ndarray
    location_id: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.location_id == other.location_id and np.array_equal(self.values, other.values)

    def __len__(self) -> int:
        return self.values.shape[0]


def _check_asu(asu: int) -> int:
    asu = int(asu)
    if not (ASU_MIN <= asu <= ASU_MAX):
        raise ValueError(f"ASU out of range: {asu}")
    return asu


def asu_to_dbm(asu: int) -> int:
    """Convert an ASU reading to dBm: dBm = 2 * ASU - 113."""
    return 2 * _check_asu(asu) - 113


def normalize_asu(asu: int) -> float:
    """Map an ASU reading onto [0, 1] using the fixed unit range 0..31."""
    return _check_asu(asu) / ASU_MAX


def vectorize(scan: RawScan, universe: tuple[TowerId, ...], label: int) -> FeatureVector:
    """Build the feature vector of one scan over the given tower universe.

    Entry j holds the normalized ASU of universe[j] if heard, else 0.
    """
    index = {tower: j for j, tower in enumerate(universe)}
    values = np.zeros(len(universe), dtype=np.float64)
    for tower, asu in scan.readings:
        if tower not in index:
            raise ValueError(f"unknown tower in scan: {tower}")
        values[index[tower]] = normalize_asu(asu)
    return FeatureVector(values=values, location_id=label)


def heard_mask(scan: RawScan, universe: tuple[TowerId, ...]) -> np.ndarray:
    """Boolean mask over the universe marking towers heard in this scan.

    ASU 0 and "unheard" collide at feature value 0, so augmenters that care
    about heard-set structure take this mask from the raw scan instead of
    inferring it from the vector.
    """
    index = {tower: j for j, tower in enumerate(universe)}
    mask = np.zeros(len(universe), dtype=bool)
    for tower, _ in scan.readings:
        if tower not in index:
            raise ValueError(f"unknown tower in scan: {tower}")
        mask[index[tower]] = True
    return mask


def vectorize_database(db: FingerprintDatabase) -> list[FeatureVector]:
    """One FeatureVector per scan, in deterministic (location, scan) order."""
    out: list[FeatureVector] = []
    for loc in db.locations:
        for scan in loc.scans:
            out.append(vectorize(scan, db.tower_universe, loc.location_id))
    return out


def stack_vectors(vectors: list[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    """Stack FeatureVectors into an (n, m) matrix and an (n,) label array."""
    if not vectors:
        raise ValueError("no vectors to stack")
    x = np.stack([v.values for v in vectors])
    labels = np.array([v.location_id for v in vectors], dtype=np.int64)
    return x, labels
