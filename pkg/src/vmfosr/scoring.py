"""Open-set scoring rules. Every score is "higher means more known-like"."""
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BankTooSmall, EmptyInput
from .numerics import l2_normalize, softmax

RULES = ("maxlogit", "msp", "knn", "nnguide")
DEFAULT_K = 10


@dataclass
class ScoredSample:
    score: float
    predicted_class: int
    is_known_truth: bool
    true_class: int


def _logits(logits):
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape[-1] == 0:
        raise EmptyInput("empty logit vector")
    return logits


def maxlogit(logits):
    return np.max(_logits(logits), axis=-1)


def msp(logits):
    return np.max(softmax(_logits(logits)), axis=-1)


def _bank_cosines(features, bank_features, k):
    bank = np.asarray(bank_features, dtype=np.float64)
    if not 1 <= k <= bank.shape[0]:
        raise BankTooSmall(f"k={k} but the bank holds {bank.shape[0]} features")
    q = l2_normalize(np.asarray(features, dtype=np.float64))
    return np.atleast_2d(q) @ l2_normalize(bank).T


def knn_score(features, bank_features, k=DEFAULT_K):
    """Negative distance to the k-th nearest bank feature, all on the unit sphere."""
    cos = _bank_cosines(features, bank_features, k)
    # for unit vectors |q - b|^2 = 2 - 2 cos
    kth = -np.partition(-cos, k - 1, axis=1)[:, k - 1]
    out = -np.sqrt(np.clip(2.0 - 2.0 * kth, 0.0, None))
    return out[0] if np.ndim(features) == 1 else out


def nnguide_score(features, logits, bank_features, k=DEFAULT_K):
    """MaxLogit scaled by the mean cosine to the k most similar bank features."""
    cos = _bank_cosines(features, bank_features, k)
    topk = -np.partition(-cos, k - 1, axis=1)[:, :k]
    guidance = topk.mean(axis=1)
    out = maxlogit(np.atleast_2d(logits)) * guidance
    return out[0] if np.ndim(features) == 1 else out


def decide(score, theta):
    """``"known"`` iff ``score >= theta``."""
    return "known" if score >= theta else "unknown"


def score_all(rule, features, logits, bank_features=None, k=DEFAULT_K):
    """Vectorized dispatch used by the evaluation pipeline."""
    if rule == "maxlogit":
        return maxlogit(logits)
    if rule == "msp":
        return msp(logits)
    if rule == "knn":
        return knn_score(features, bank_features, k)
    if rule == "nnguide":
        return nnguide_score(features, logits, bank_features, k)
    raise ValueError(f"unknown scoring rule {rule!r}; choose from {RULES}")


def write_score_dump(path, rows):
    """CSV with columns sample_id, rule, score, predicted_class, known."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "rule", "score", "predicted_class", "known"])
        for sample_id, rule, score, pred, known in rows:
            w.writerow([int(sample_id), rule, repr(float(score)), int(pred), int(known)])
