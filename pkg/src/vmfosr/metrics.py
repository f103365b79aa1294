"""Closed-set and open-set evaluation metrics plus feature-geometry diagnostics."""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ClassWithNoSamples, EmptyInput, ZeroVector
from .numerics import NORM_EPS


def _nonempty(*arrays):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=np.float64).ravel()
        if a.size == 0:
            raise EmptyInput("metric input is empty")
        out.append(a)
    return out


def accuracy(predictions, true_classes):
    predictions = np.asarray(predictions)
    true_classes = np.asarray(true_classes)
    if predictions.size == 0:
        raise EmptyInput("no predictions")
    return float(np.mean(predictions == true_classes))


def auroc(known_scores, unknown_scores):
    """P(known > unknown) + P(tie)/2 via the Mann-Whitney rank sum."""
    k, u = _nonempty(known_scores, unknown_scores)
    ranks = rankdata(np.concatenate([k, u]))  # average ranks, multiples of 1/2
    nk, nu = k.size, u.size
    twice_u = int(round(2.0 * ranks[:nk].sum())) - nk * (nk + 1)
    return twice_u / (2 * nk * nu)


def _descending_groups(scores):
    """Distinct score values in descending order and the group id of each score."""
    values, inverse = np.unique(scores, return_inverse=True)
    return values[::-1], values.size - 1 - inverse


def roc_curve(known_scores, unknown_scores):
    """(FPR, TPR) points for thresholds at every distinct score, from (0,0) to (1,1)."""
    k, u = _nonempty(known_scores, unknown_scores)
    values, group = _descending_groups(np.concatenate([k, u]))
    is_known = np.r_[np.ones(k.size), np.zeros(u.size)]
    tp = np.cumsum(np.bincount(group, weights=is_known, minlength=values.size))
    fp = np.cumsum(np.bincount(group, weights=1.0 - is_known, minlength=values.size))
    return np.r_[0.0, fp / u.size], np.r_[0.0, tp / k.size]


def _oscr_counts(known_scores, known_correct, unknown_scores):
    k, u = _nonempty(known_scores, unknown_scores)
    correct = np.asarray(known_correct, dtype=bool).ravel()
    if correct.size != k.size:
        raise ValueError("known_correct must align with known_scores")
    values, group = _descending_groups(np.concatenate([k, u]))
    cc = np.r_[correct, np.zeros(u.size, dtype=bool)].astype(np.int64)
    is_unknown = np.r_[np.zeros(k.size, np.int64), np.ones(u.size, np.int64)]
    cc_counts = np.r_[0, np.cumsum(np.bincount(group, weights=cc, minlength=values.size))]
    fp_counts = np.r_[0, np.cumsum(np.bincount(group, weights=is_unknown, minlength=values.size))]
    return cc_counts.astype(np.int64), fp_counts.astype(np.int64), k.size, u.size


def oscr_curve(known_scores, known_correct, unknown_scores):
    """(FPR, CCR) points for thresholds at every distinct score.

    CCR(t) is the fraction of known samples that are both correctly
    classified and scored >= t; FPR(t) the fraction of unknowns scored >= t.
    """
    cc, fp, nk, nu = _oscr_counts(known_scores, known_correct, unknown_scores)
    return fp / nu, cc / nk


def oscr(known_samples, unknown_scores):
    """Area under the CCR-vs-FPR curve (trapezoidal).

    ``known_samples`` is a sequence of :class:`~vmfosr.scoring.ScoredSample`
    or a ``(scores, correct)`` pair of arrays.
    """
    if isinstance(known_samples, tuple) and len(known_samples) == 2:
        scores, correct = known_samples
    else:
        if len(known_samples) == 0:
            raise EmptyInput("no known samples")
        scores = [s.score for s in known_samples]
        correct = [s.predicted_class == s.true_class for s in known_samples]
    cc, fp, nk, nu = _oscr_counts(scores, correct, unknown_scores)
    # trapezoids on integer counts, one division at the end: exact when the
    # curve is a single plateau (every unknown below every known)
    twice_area = int(np.sum(np.diff(fp) * (cc[1:] + cc[:-1])))
    return twice_area / (2 * nk * nu)


def dtacc(known_scores, unknown_scores):
    """Best balanced detection accuracy over every threshold (known iff s >= t)."""
    k, u = _nonempty(known_scores, unknown_scores)
    fpr, tpr = roc_curve(k, u)
    # point i <-> threshold at the i-th largest distinct score; point 0 is +inf
    return float(np.max(0.5 * tpr + 0.5 * (1.0 - fpr)))


def _rows(features, name):
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if X.shape[0] == 0 or X.size == 0:
        raise EmptyInput(f"{name} is empty")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms <= NORM_EPS):
        raise ZeroVector(f"{name} contains a zero vector")
    return X, norms


def angular_separability(known_features, unknown_features):
    """Mean over unknowns of the highest cosine to any known feature (lower is better)."""
    K, kn = _rows(known_features, "known_features")
    U, un = _rows(unknown_features, "unknown_features")
    cos = (U / un[:, None]) @ (K / kn[:, None]).T
    return float(np.mean(np.max(cos, axis=1)))


def norm_separability(known_features, unknown_features):
    """AUROC of known vs unknown feature norms."""
    K = np.atleast_2d(np.asarray(known_features, dtype=np.float64))
    U = np.atleast_2d(np.asarray(unknown_features, dtype=np.float64))
    return auroc(np.linalg.norm(K, axis=1), np.linalg.norm(U, axis=1))


def class_means(features, labels, n_classes=None):
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    labels = np.asarray(labels)
    classes = np.arange(n_classes) if n_classes is not None else np.unique(labels)
    means = []
    for c in classes:
        mask = labels == c
        if not mask.any():
            raise ClassWithNoSamples(f"class {c} has no samples")
        means.append(X[mask].mean(axis=0))
    return np.array(means)


def dispersion(features, labels, n_classes=None):
    """Mean pairwise angle (degrees) between normalized class-mean features."""
    means = class_means(features, labels, n_classes)
    C = means.shape[0]
    if C < 2:
        raise ClassWithNoSamples("dispersion needs at least two classes")
    mu, _ = _rows(means, "class means")
    mu = mu / np.linalg.norm(mu, axis=1, keepdims=True)
    cos = np.clip(mu @ mu.T, -1.0, 1.0)
    off = ~np.eye(C, dtype=bool)
    return float(np.degrees(np.arccos(cos[off])).sum() / (C * (C - 1)))


@dataclass
class EvalReport:
    seed: int
    rule: str
    accuracy: float
    auroc: float
    oscr: float
    dtacc: float
    angular_separability: float
    norm_separability: float
    dispersion_degrees: float
    openness: float
    metadata: dict = field(default_factory=dict)

    RATE_FIELDS = ("accuracy", "auroc", "oscr", "dtacc", "norm_separability")
    NUMERIC_FIELDS = RATE_FIELDS + ("angular_separability", "dispersion_degrees", "openness")

    def to_dict(self):
        return asdict(self)

    def csv_row(self):
        return {k: v for k, v in asdict(self).items() if k != "metadata"}


def aggregate(reports):
    """Mean and (population) std of every numeric field, grouped by rule."""
    by_rule = {}
    for r in reports:
        by_rule.setdefault(r.rule, []).append(r)
    out = {}
    for rule, rs in by_rule.items():
        out[rule] = {"n_seeds": len(rs)}
        for name in EvalReport.NUMERIC_FIELDS:
            vals = np.array([getattr(r, name) for r in rs])
            out[rule][name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out
