"""Synthetic fingerprint surveys from a log-distance path-loss radio model.

RSS at distance d is P_tx - 10*n*log10(d/d0) plus log-normal shadowing.
Towers below the receiver sensitivity are dropped and only the strongest
seven survive, reproducing the two phenomena the augmenters exploit:
RSS jitter at a fixed point and fluctuating heard-tower sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    MAX_READINGS_PER_SCAN,
    FingerprintDatabase,
    RawScan,
    ReferenceLocation,
    from_locations,
)
from .util import ConfigError, derive_rng, read_kv_config

REFERENCE_DISTANCE_M = 1.0


@dataclass(frozen=True)
class Tower:
    tower_id: str
    position: tuple[float, float]
    tx_power_dbm: float  # received power at the 1 m reference distance


@dataclass(frozen=True)
class TestbedSpec:
    """Geometry and radio parameters of a synthetic survey."""

    name: str
    area: tuple[float, float]
    towers: tuple[Tower, ...]
    path_loss_exponent: float
    shadow_sigma_db: float
    sensitivity_dbm: float
    scans_per_location: int
    seed: int
    grid_spacing_m: float | None = None
    points: tuple[tuple[float, float], ...] | None = None
    heard_cap: int = MAX_READINGS_PER_SCAN

    def __post_init__(self):
        if len(self.towers) < 2:
            raise ConfigError("need at least 2 towers")
        if self.area[0] <= 0 or self.area[1] <= 0:
            raise ConfigError("area dimensions must be positive")
        if self.grid_spacing_m is None and not self.points:
            raise ConfigError("either grid_spacing_m or explicit points required")
        if self.scans_per_location < 1:
            raise ConfigError("scans_per_location must be >= 1")
        if self.heard_cap != MAX_READINGS_PER_SCAN:
            raise ConfigError(f"heard cap is fixed at {MAX_READINGS_PER_SCAN}")
        if len(self.reference_points()) < 2:
            raise ConfigError("need at least 2 reference locations")

    def reference_points(self) -> list[tuple[float, float]]:
        """Grid-cell centers row by row, or the explicit points."""
        if self.points:
            return [tuple(p) for p in self.points]
        spacing = self.grid_spacing_m
        xs = np.arange(spacing / 2.0, self.area[0], spacing)
        ys = np.arange(spacing / 2.0, self.area[1], spacing)
        return [(float(x), float(y)) for y in ys for x in xs]


def received_dbm(
    tower: Tower, point: tuple[float, float], exponent: float, d0: float = REFERENCE_DISTANCE_M
) -> float:
    """Deterministic log-distance RSS at a point, before shadowing."""
    d = float(np.hypot(tower.position[0] - point[0], tower.position[1] - point[1]))
    d = max(d, d0)  # clamp co-located geometry to the reference distance
    return tower.tx_power_dbm - 10.0 * exponent * np.log10(d / d0)


def dbm_to_asu(dbm: float) -> int:
    """Inverse of the ASU-to-dBm relation, rounded and clipped to [0, 31]."""
    return int(np.clip(np.round((dbm + 113.0) / 2.0), 0, 31))


def generate(spec: TestbedSpec) -> FingerprintDatabase:
    """Simulate the survey: every location gets scans_per_location scans."""
    points = spec.reference_points()
    locations = []
    for loc_id, point in enumerate(points):
        rng = derive_rng(spec.seed, "testbed", loc_id)
        base = {t.tower_id: received_dbm(t, point, spec.path_loss_exponent) for t in spec.towers}
        scans = []
        for s in range(spec.scans_per_location):
            heard: list[tuple[str, float]] = []
            for tower in spec.towers:
                dbm = base[tower.tower_id]
                if spec.shadow_sigma_db > 0:
                    dbm += rng.normal(0.0, spec.shadow_sigma_db)
                if dbm >= spec.sensitivity_dbm:
                    heard.append((tower.tower_id, dbm))
            if not heard:
                raise ValueError(
                    f"location {loc_id} at {point} hears no towers; "
                    "spec geometry is degenerate"
                )
            heard.sort(key=lambda pair: (-pair[1], pair[0]))
            readings = tuple(
                (tower_id, dbm_to_asu(dbm)) for tower_id, dbm in heard[: spec.heard_cap]
            )
            scans.append(RawScan(timestamp=s, readings=readings))
        locations.append(
            ReferenceLocation(location_id=loc_id, coordinates=point, scans=tuple(scans))
        )
    grid = spec.grid_spacing_m if spec.grid_spacing_m else 1.0
    return from_locations(locations, testbed=spec.name, grid_cell_m=grid)


def default_desk_spec() -> TestbedSpec:
    """Small fixed testbed: 12x12 m, 36 grid points, 10 towers, 60 scans each.

    Four towers sit in or near the area so the path-loss gradient separates
    neighboring points; the rest are far enough that shadowing makes them
    flicker around the sensitivity floor, giving varied heard sets and weak
    entries for the droppers.
    """
    towers = (
        Tower("T00", (2.0, 3.0), -45.0),
        Tower("T01", (10.0, 2.0), -45.0),
        Tower("T02", (6.0, 11.0), -47.0),
        Tower("T03", (1.0, 9.0), -48.0),
        Tower("T04", (25.0, 18.0), -66.0),
        Tower("T05", (-20.0, 10.0), -68.0),
        Tower("T06", (30.0, -15.0), -67.0),
        Tower("T07", (-30.0, -30.0), -63.0),
        Tower("T08", (90.0, 60.0), -54.0),
        Tower("T09", (-80.0, 70.0), -52.0),
    )
    return TestbedSpec(
        name="desk",
        area=(12.0, 12.0),
        towers=towers,
        path_loss_exponent=3.0,
        shadow_sigma_db=4.0,
        sensitivity_dbm=-111.0,
        scans_per_location=60,
        seed=2024,
        grid_spacing_m=2.0,
    )


def spec_from_file(path: str | Path) -> TestbedSpec:
    """Read a TestbedSpec from the flat key-value format.

    Keys: name, area.width, area.height, grid.spacing, path_loss_exponent,
    shadow_sigma_db, sensitivity_dbm, scans_per_location, seed, and one
    ``tower.<id> = x, y, tx_power_dbm`` entry per tower.
    """
    raw = read_kv_config(path)
    towers = []
    plain: dict[str, str] = {}
    for key, value in raw.items():
        if key.startswith("tower."):
            tower_id = key[len("tower."):]
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != 3:
                raise ConfigError(f"{key}: expected 'x, y, tx_power_dbm', got {value!r}")
            try:
                towers.append(Tower(tower_id, (float(parts[0]), float(parts[1])), float(parts[2])))
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        else:
            plain[key] = value

    required = ("area.width", "area.height", "path_loss_exponent", "shadow_sigma_db",
                "sensitivity_dbm", "scans_per_location", "seed")
    missing = [k for k in required if k not in plain]
    if missing:
        raise ConfigError(f"missing testbed config keys: {', '.join(missing)}")
    known = set(required) | {"name", "grid.spacing"}
    unknown = [k for k in plain if k not in known]
    if unknown:
        raise ConfigError(f"unknown testbed config key(s): {', '.join(unknown)}")
    if not towers:
        raise ConfigError("no towers configured (add tower.<id> entries)")

    try:
        return TestbedSpec(
            name=plain.get("name", "custom"),
            area=(float(plain["area.width"]), float(plain["area.height"])),
            towers=tuple(sorted(towers, key=lambda t: t.tower_id)),
            path_loss_exponent=float(plain["path_loss_exponent"]),
            shadow_sigma_db=float(plain["shadow_sigma_db"]),
            sensitivity_dbm=float(plain["sensitivity_dbm"]),
            scans_per_location=int(plain["scans_per_location"]),
            seed=int(plain["seed"]),
            grid_spacing_m=float(plain["grid.spacing"]) if "grid.spacing" in plain else None,
        )
    except ValueError as exc:
        raise ConfigError(f"bad testbed config value: {exc}") from exc
