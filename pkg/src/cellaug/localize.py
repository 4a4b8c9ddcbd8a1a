"""Deep fingerprint localizer: softmax over reference locations, decoded as
the probability-weighted average of all reference coordinates, plus the
error evaluation (percentiles and CDF) and the improvement comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn import (
    DenseNetwork,
    LayerSpec,
    TrainConfig,
    forward,
    init_network,
    network_from_dict,
    network_to_dict,
    one_hot,
    softmax_cross_entropy,
    train,
)
from .preprocess import FeatureVector, stack_vectors
from .util import derive_rng


@dataclass(frozen=True)
class HyperProfile:
    learning_rate: float
    batch_size: int
    dropout_rate: float
    epochs: int
    hidden_neurons: int
    hidden_layers: int

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.epochs,
               self.hidden_neurons, self.hidden_layers) <= 0:
            raise ValueError("profile values must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError(f"dropout must be in [0, 1): {self.dropout_rate}")


# Default hyperparameters for the indoor and outdoor evaluation scenarios.
INDOOR_PROFILE = HyperProfile(
    learning_rate=0.001, batch_size=256, dropout_rate=0.10,
    epochs=260, hidden_neurons=280, hidden_layers=4,
)
OUTDOOR_PROFILE = HyperProfile(
    learning_rate=0.005, batch_size=40, dropout_rate=0.10,
    epochs=500, hidden_neurons=345, hidden_layers=3,
)


def default_profile(kind: str) -> HyperProfile:
    """The default indoor or outdoor hyperparameter set."""
    if kind == "indoor":
        return INDOOR_PROFILE
    if kind == "outdoor":
        return OUTDOOR_PROFILE
    raise ValueError(f"unknown profile kind: {kind!r} (expected 'indoor' or 'outdoor')")


def desk_profile() -> HyperProfile:
    """Lightweight profile sized for the synthetic desk testbed."""
    return HyperProfile(
        learning_rate=0.01, batch_size=64, dropout_rate=0.10,
        epochs=150, hidden_neurons=64, hidden_layers=2,
    )


@dataclass
class LocalizerModel:
    """Trained classifier plus the label/coordinate bookkeeping for decoding."""

    network: DenseNetwork
    profile: HyperProfile
    classes: list[int]                       # class index -> location_id
    coords: dict[int, tuple[float, float]]   # location_id -> (x, y) meters

    def __post_init__(self):
        if self.network.output_dim != len(self.classes):
            raise ValueError("output dim disagrees with class count")

    @property
    def coordinate_matrix(self) -> np.ndarray:
        return np.array([self.coords[c] for c in self.classes])


@dataclass(frozen=True)
class ErrorReport:
    """Per-sample localization errors in meters with their percentiles."""

    errors: np.ndarray
    p25: float
    p50: float
    p75: float
    cdf: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {
            "percentiles": {"p25": self.p25, "p50": self.p50, "p75": self.p75},
            "cdf": [[e, f] for e, f in self.cdf],
            "n": int(self.errors.size),
        }

    def cdf_csv(self) -> str:
        lines = ["error_m,fraction"]
        lines += [f"{e},{f}" for e, f in self.cdf]
        return "\n".join(lines) + "\n"


def make_report(errors: np.ndarray) -> ErrorReport:
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("empty test set")
    p25, p50, p75 = (float(p) for p in np.percentile(errors, [25, 50, 75]))
    sorted_errors = np.sort(errors)
    n = errors.size
    cdf = tuple((float(e), (i + 1) / n) for i, e in enumerate(sorted_errors))
    return ErrorReport(errors=errors, p25=p25, p50=p50, p75=p75, cdf=cdf)


def train_localizer(
    train_vectors: list[FeatureVector],
    profile: HyperProfile,
    coords: dict[int, tuple[float, float]],
    seed: int = 0,
) -> LocalizerModel:
    """Train the multinomial classifier on labeled vectors.

    Classes are the sorted distinct labels; every label must have an entry
    in coords. Deterministic for a fixed seed.
    """
    x, labels = stack_vectors(train_vectors)
    classes = sorted(set(int(l) for l in labels))
    if len(classes) < 2:
        raise ValueError(f"need at least 2 distinct labels, got {len(classes)}")
    missing = [c for c in classes if c not in coords]
    if missing:
        raise ValueError(f"no coordinates for location(s): {missing}")

    m = x.shape[1]
    dims = [m] + [profile.hidden_neurons] * profile.hidden_layers
    specs = [LayerSpec(a, b, "relu") for a, b in zip(dims, dims[1:])]
    specs.append(LayerSpec(dims[-1], len(classes), "softmax"))
    net = init_network(specs, derive_rng(seed, "localizer-init"), dropout_rate=profile.dropout_rate)

    class_index = {c: i for i, c in enumerate(classes)}
    targets = one_hot(np.array([class_index[int(l)] for l in labels]), len(classes))
    cfg = TrainConfig(
        learning_rate=profile.learning_rate,
        batch_size=profile.batch_size,
        epochs=profile.epochs,
        seed=_train_seed(seed),
    )
    train(net, x, targets, softmax_cross_entropy, cfg)
    return LocalizerModel(network=net, profile=profile, classes=classes,
                          coords={c: tuple(coords[c]) for c in classes})


def _train_seed(seed: int) -> int:
    return int(derive_rng(seed, "localizer-train").integers(0, 2**31))


def predict_probabilities(model: LocalizerModel, x: np.ndarray) -> np.ndarray:
    return forward(model.network, x, train_mode=False)


def weighted_centroid(probabilities: np.ndarray, coordinates: np.ndarray) -> np.ndarray:
    """Average of the reference coordinates weighted by class probability."""
    p = np.asarray(probabilities, dtype=np.float64)
    return p @ np.asarray(coordinates, dtype=np.float64)


def estimate_location(model: LocalizerModel, v: FeatureVector | np.ndarray) -> np.ndarray:
    """Probability-weighted average of all reference coordinates."""
    values = v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64)
    p = predict_probabilities(model, values)
    return weighted_centroid(p, model.coordinate_matrix)


def evaluate(model: LocalizerModel, test_vectors: list[FeatureVector]) -> ErrorReport:
    """Euclidean error of each test vector against its location's coordinates."""
    if not test_vectors:
        raise ValueError("empty test set")
    x, labels = stack_vectors(test_vectors)
    probs = predict_probabilities(model, x)
    estimates = weighted_centroid(probs, model.coordinate_matrix)
    truth = np.array([model.coords[int(l)] for l in labels])
    errors = np.linalg.norm(estimates - truth, axis=1)
    return make_report(errors)


def improvement(with_aug: ErrorReport, without_aug: ErrorReport) -> dict[str, float | str]:
    """Percent improvement per percentile: (without - with) / with * 100.

    A percentile where the augmented error is exactly zero is reported as
    "exact" rather than dividing by zero.
    """
    out: dict[str, float | str] = {}
    for name in ("p25", "p50", "p75"):
        w = getattr(with_aug, name)
        wo = getattr(without_aug, name)
        out[name] = "exact" if w == 0.0 else (wo - w) / w * 100.0
    return out


def model_to_dict(model: LocalizerModel) -> dict:
    return {
        "network": network_to_dict(model.network),
        "profile": {
            "learning_rate": model.profile.learning_rate,
            "batch_size": model.profile.batch_size,
            "dropout_rate": model.profile.dropout_rate,
            "epochs": model.profile.epochs,
            "hidden_neurons": model.profile.hidden_neurons,
            "hidden_layers": model.profile.hidden_layers,
        },
        "classes": model.classes,
        "coords": {str(c): list(model.coords[c]) for c in model.classes},
    }


def model_from_dict(data: dict) -> LocalizerModel:
    profile = HyperProfile(**data["profile"])
    coords = {int(k): (float(v[0]), float(v[1])) for k, v in data["coords"].items()}
    return LocalizerModel(
        network=network_from_dict(data["network"]),
        profile=profile,
        classes=[int(c) for c in data["classes"]],
        coords=coords,
    )


def save_model(model: LocalizerModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path: str | Path) -> LocalizerModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
