"""Synthetic open-set datasets drawn from vMF mixtures.

Each class is a vMF component on the latent sphere. Unknown-class directions
are placed by a single ``hardness`` dial: at 0 they are orthogonal to every
known direction, at 1 each sits 15 degrees from one known direction. The
latent points are then pushed through a fixed observation map so the
encoder has something nontrivial to invert.
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionTooSmall, InvalidClassCounts, ShapeMismatch
from .numerics import l2_normalize, sample_uniform_sphere, sample_vmf, seeded_rng

UNKNOWN = -1
OBSERVATION_MAPS = ("identity", "random-affine", "random-affine-tanh")
DIRECTION_MODES = ("random", "orthogonal")

# angle between an unknown direction and its anchor known direction is
# MAX_ANGLE - hardness * (MAX_ANGLE - MIN_ANGLE)
MAX_ANGLE_DEG = 90.0
MIN_ANGLE_DEG = 15.0
MIN_KNOWN_SEPARATION_DEG = 60.0


@dataclass
class SyntheticSpec:
    p_latent: int = 16
    input_dim: int = 32
    n_known_classes: int = 8
    n_unknown_classes: int = 8
    samples_per_class_train: int = 100
    samples_per_class_test: int = 100
    kappa_data: float = 20.0
    hardness: float = 0.5
    observation_map: str = "random-affine-tanh"
    direction_mode: str = "random"
    map_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_known_classes < 2:
            raise InvalidClassCounts("need at least two known classes")
        if self.n_unknown_classes < 0:
            raise InvalidClassCounts("n_unknown_classes must be nonnegative")
        if not 0.0 <= self.hardness <= 1.0:
            raise ValueError("hardness must lie in [0, 1]")
        if self.kappa_data < 0:
            raise ValueError("kappa_data must be nonnegative")
        if self.observation_map not in OBSERVATION_MAPS:
            raise ValueError(f"observation_map must be one of {OBSERVATION_MAPS}")
        if self.direction_mode not in DIRECTION_MODES:
            raise ValueError(f"direction_mode must be one of {DIRECTION_MODES}")
        if self.observation_map == "identity" and self.input_dim != self.p_latent:
            raise ShapeMismatch("identity observation map needs input_dim == p_latent")

    @property
    def n_test_classes(self):
        return self.n_known_classes + self.n_unknown_classes


@dataclass
class Dataset:
    """Samples of one split. Unknown-class samples carry ``labels == UNKNOWN``."""

    inputs: np.ndarray
    labels: np.ndarray
    known: np.ndarray
    role: str
    latent: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.known = np.asarray(self.known, dtype=bool)
        if self.role not in ("train", "test"):
            raise ValueError(f"role must be 'train' or 'test', got {self.role!r}")
        n = self.inputs.shape[0]
        if self.labels.shape != (n,) or self.known.shape != (n,):
            raise ShapeMismatch("inputs, labels and known flags disagree in length")
        if np.any(self.known != (self.labels != UNKNOWN)):
            raise ValueError("known flags inconsistent with labels")
        if self.role == "train" and not np.all(self.known):
            raise ValueError("train split may only hold known-class samples")

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, mask):
        latent = None if self.latent is None else self.latent[mask]
        return Dataset(self.inputs[mask], self.labels[mask], self.known[mask],
                       self.role, latent)


def openness(n_train_classes, n_test_classes):
    """Benchmark openness ``1 - sqrt(N_train / N_test)``."""
    if not 1 <= n_train_classes <= n_test_classes:
        raise InvalidClassCounts(
            f"need 1 <= n_train ({n_train_classes}) <= n_test ({n_test_classes})")
    return 1.0 - float(np.sqrt(n_train_classes / n_test_classes))


def unknown_angle_deg(hardness):
    return MAX_ANGLE_DEG - hardness * (MAX_ANGLE_DEG - MIN_ANGLE_DEG)


def _orthonormal_frame(p, k, rng):
    q, _ = np.linalg.qr(rng.standard_normal((p, k)))
    return q.T


def _random_known_directions(p, n, rng, max_tries=10_000):
    max_cos = np.cos(np.deg2rad(MIN_KNOWN_SEPARATION_DEG))
    dirs = []
    for _ in range(max_tries):
        v = sample_uniform_sphere(p, rng)
        if all(v @ d <= max_cos for d in dirs):
            dirs.append(v)
            if len(dirs) == n:
                return np.array(dirs)
    raise DimensionTooSmall(
        f"could not place {n} directions 60 degrees apart in dimension {p}")


def generate_class_directions(spec, rng):
    """Return ``(n_known + n_unknown, p_latent)`` unit directions, knowns first."""
    p, nk, nu = spec.p_latent, spec.n_known_classes, spec.n_unknown_classes
    if spec.direction_mode == "orthogonal":
        if p < nk + nu:
            raise DimensionTooSmall(
                f"orthogonal mode needs p_latent >= {nk + nu}, got {p}")
        frame = _orthonormal_frame(p, nk + nu, rng)
        known, complement = frame[:nk], frame[nk:]
    else:
        if p <= nk and nu > 0:
            raise DimensionTooSmall(
                f"unknown placement needs p_latent > n_known ({nk}), got {p}")
        known = _random_known_directions(p, nk, rng)
        complement = np.empty((nu, p))
        basis = np.linalg.svd(known, full_matrices=True)[2][nk:]  # rows span known^perp
        for j in range(nu):
            complement[j] = l2_normalize(rng.standard_normal(basis.shape[0]) @ basis)

    if nu == 0:
        return known.copy()
    anchors = np.concatenate([rng.permutation(nk) for _ in range(-(-nu // nk))])[:nu]
    theta = np.deg2rad(unknown_angle_deg(spec.hardness))
    # slerp between a known anchor and a direction orthogonal to every known
    unknown = np.cos(theta) * known[anchors] + np.sin(theta) * complement
    return np.vstack([known, l2_normalize(unknown)])


def make_observation_map(spec, rng):
    """Fixed map latent -> input space, drawn once per dataset."""
    if spec.observation_map == "identity":
        return lambda z: np.array(z, dtype=np.float64)
    weight = spec.map_scale * rng.standard_normal((spec.p_latent, spec.input_dim))
    bias = 0.25 * rng.standard_normal(spec.input_dim)
    if spec.observation_map == "random-affine":
        return lambda z: z @ weight + bias
    return lambda z: np.tanh(z @ weight + bias)


def generate_dataset(spec, rng=None):
    """Draw ``(train, test)`` splits; train holds knowns only."""
    if rng is None:
        rng = seeded_rng(spec.seed)
    directions = generate_class_directions(spec, rng)
    observe = make_observation_map(spec, rng)
    nk = spec.n_known_classes

    def draw(classes, per_class, role):
        latent, labels = [], []
        for c in classes:
            latent.append(sample_vmf(directions[c], spec.kappa_data, rng, size=per_class))
            labels.append(np.full(per_class, c if c < nk else UNKNOWN))
        latent = np.concatenate(latent) if latent else np.empty((0, spec.p_latent))
        labels = np.concatenate(labels) if labels else np.empty(0, dtype=np.int64)
        return Dataset(observe(latent), labels, labels != UNKNOWN, role, latent)

    train = draw(range(nk), spec.samples_per_class_train, "train")
    test = draw(range(spec.n_test_classes), spec.samples_per_class_test, "test")
    return train, test


def write_dataset_csv(directory, train, test):
    """Write the ``inputs.csv`` / ``labels.csv`` pair covering both splits."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    dim = train.inputs.shape[1]
    with open(directory / "inputs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id"] + [f"x{i}" for i in range(dim)])
        sid = 0
        for split in (train, test):
            for row in split.inputs:
                w.writerow([sid] + [repr(float(v)) for v in row])
                sid += 1
    with open(directory / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "class_id", "known", "role"])
        sid = 0
        for split in (train, test):
            for label, known in zip(split.labels, split.known):
                w.writerow([sid, int(label), int(known), split.role])
                sid += 1


def read_dataset_csv(directory):
    directory = Path(directory)
    with open(directory / "inputs.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    inputs = {int(r[0]): [float(v) for v in r[1:]] for r in rows}
    splits = {"train": ([], [], []), "test": ([], [], [])}
    with open(directory / "labels.csv", newline="") as fh:
        for rec in csv.DictReader(fh):
            x, y, k = splits[rec["role"]]
            x.append(inputs[int(rec["sample_id"])])
            y.append(int(rec["class_id"]))
            k.append(bool(int(rec["known"])))
    out = []
    for role in ("train", "test"):
        x, y, k = splits[role]
        dim = len(next(iter(inputs.values())))
        out.append(Dataset(np.array(x).reshape(len(x), dim), y, k, role))
    return tuple(out)
