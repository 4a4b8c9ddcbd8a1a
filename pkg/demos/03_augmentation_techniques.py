"""Walk through the four augmentation techniques on one location: additive
noise scaled to each tower's observed range, independent per-tower sampling,
random tower dropping with a protected serving cell, and exhaustive
threshold-based dropping.

Run:  python demos/03_augmentation_techniques.py
"""

import numpy as np

from cellaug.augment import (
    AugmentConfig,
    augment_all,
    augment_drop_random,
    augment_drop_threshold,
    augment_noise,
    augment_sampling,
    compute_stats,
)
from cellaug.distfit import fit_database
from cellaug.preprocess import heard_mask, vectorize
from cellaug.testbed import default_desk_spec, generate
from cellaug.util import derive_rng


def show(name, values):
    print(f"  {name:18s} " + " ".join(f"{v:4.2f}" for v in values))


db = generate(default_desk_spec())
loc = db.locations[7]
stats = compute_stats(db)[loc.location_id]
scan = loc.scans[0]
v = vectorize(scan, db.tower_universe, loc.location_id)
mask = heard_mask(scan, db.tower_universe)

print(f"location {loc.location_id} at {loc.coordinates}, first scan:")
show("towers", range(len(db.tower_universe)))
show("original", v.values)
show("noise scale s", stats.noise_scale)

rng = derive_rng(0, "demo-noise")
print("\nadditive noise (three draws):")
for _ in range(3):
    show("noisy copy", augment_noise(v, stats, rng, heard=mask).values)

print("\nindependent per-tower sampling from fitted distributions:")
fits = fit_database(db)
rng = derive_rng(0, "demo-sampling")
for sample in augment_sampling(loc, fits[loc.location_id], db.tower_universe, rng, 3):
    show("sampled", sample.values)

print("\nrandom tower dropper (protected: strongest mean tower):")
cfg = AugmentConfig()
protected = int(np.argmax(np.where(mask, stats.mean_values, -1)))
print(f"  protected tower index: {protected}")
rng = derive_rng(0, "demo-drop")
for _ in range(3):
    show("masked copy", augment_drop_random(v, stats, cfg, rng, heard=mask).values)

weak = np.flatnonzero((v.values > 0) & (v.values < cfg.drop_threshold_value))
print(f"\nthreshold dropper (candidates below {cfg.drop_threshold_value}: "
      f"indices {weak.tolist()}):")
for out in augment_drop_threshold(v, cfg):
    show("combination", out.values)

print("\ncombining everything on the whole training set:")
fast = AugmentConfig(noise_per_scan=2, sampling_n_per_location=5,
                     drop_random_per_scan=2, vae_n_per_location=5,
                     vae_epochs=150, seed=0)
vectors, counts = augment_all(db, fast)
for technique, count in counts.items():
    print(f"  {technique:15s} {count:6d} vectors")
print(f"  {'total':15s} {len(vectors):6d}")
