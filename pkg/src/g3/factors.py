"""Factor models: log-linear correspondence factors over word-by-geometry
cross features, the Naive Bayes / salient-object landmark models, and the
three-state verb turn model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import minimize

from . import geometry
from .world import wrap_angle


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscretizerConfig:
    distance_bins: int = 6
    angle_bins: int = 4
    ratio_bins: int = 6
    ratio_max: float = 2.0


DEFAULT_DISCRETIZER = DiscretizerConfig()


def discretize(value: float, name: str, config: DiscretizerConfig = DEFAULT_DISCRETIZER) -> int:
    """Bin index for a base-feature value; out-of-range values clamp to the
    edge bins.  Binary features pass through."""
    if not math.isfinite(value):
        raise ValueError(f"cannot discretize non-finite value for {name}")
    kind = geometry.feature_kind(name)
    if kind == geometry.BINARY:
        return int(value != 0.0)
    if kind == geometry.ANGLE:
        lo, hi, n = 0.0, math.pi / 2, config.angle_bins
    elif kind == geometry.SIGNED_DISTANCE:
        lo, hi, n = -1.0, 1.0, config.distance_bins
    elif kind == geometry.RATIO:
        lo, hi, n = 0.0, config.ratio_max, config.ratio_bins
    else:
        lo, hi, n = 0.0, 1.0, config.distance_bins
    if value <= lo:
        return 0
    if value >= hi:
        return n - 1
    return min(n - 1, int((value - lo) / (hi - lo) * n))


def cross_features(base: dict[str, float], words, config: DiscretizerConfig = DEFAULT_DISCRETIZER) -> frozenset:
    """Word-by-geometry cross product: one active id per (discretized base
    feature, word).  Binary base features fire only when true."""
    active = set()
    for name in base:
        v = base[name]
        b = discretize(v, name, config)
        if geometry.feature_kind(name) == geometry.BINARY and b == 0:
            continue
        for w in words:
            active.add(f"{name}|{b}|{w.lower()}")
    return frozenset(active)


@dataclass
class FeatureWeights:
    """Learned weights over binary cross-feature ids; unseen ids weigh 0."""
    weights: dict[str, float] = field(default_factory=dict)
    l2_lambda: float = 0.0
    config: dict = field(default_factory=dict)

    def score(self, features) -> float:
        w = self.weights
        return sum(w.get(f, 0.0) for f in features)

    def save(self, path: str):
        doc = {"config": dict(self.config, l2_lambda=self.l2_lambda),
               "weights": {k: self.weights[k] for k in sorted(self.weights)}}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "FeatureWeights":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        cfg = dict(doc.get("config", {}))
        lam = cfg.pop("l2_lambda", 0.0)
        return cls(dict(doc.get("weights", {})), lam, cfg)


def loglinear_prob(weights: FeatureWeights, features) -> float:
    """p(phi=1 | lambda, gamma...): features fire only for phi=1, so the
    locally normalized factor reduces to a logistic unit."""
    s = weights.score(features)
    if s >= 0:
        return 1.0 / (1.0 + math.exp(-s))
    e = math.exp(s)
    return e / (1.0 + e)


def nll_and_gradient(theta: np.ndarray, rows: list[tuple[np.ndarray, int]],
                     l2_lambda: float) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of (feature index array, label) examples with
    an L2 penalty, and its analytic gradient."""
    nll = l2_lambda * float(theta @ theta)
    grad = 2.0 * l2_lambda * theta
    for idx, label in rows:
        s = float(theta[idx].sum()) if len(idx) else 0.0
        # log(1 + exp(-z)) with z = s for label 1, -s for label 0
        z = s if label == 1 else -s
        nll += math.log1p(math.exp(-abs(z))) + max(-z, 0.0)
        p = 1.0 / (1.0 + math.exp(-s)) if s >= 0 else math.exp(s) / (1.0 + math.exp(s))
        if len(idx):
            grad[idx] += p - label
    return nll, grad


def train(corpus: list[tuple], config: DiscretizerConfig = DEFAULT_DISCRETIZER,
          l2_lambda: float = 0.01, max_iter: int = 500,
          gtol: float = 1e-5) -> FeatureWeights:
    """Fit weights by penalized maximum likelihood (L-BFGS).

    corpus: (feature id collection, phi label) pairs with both labels present.
    """
    labels = {label for _, label in corpus}
    if labels != {0, 1}:
        raise TrainingError(
            "training corpus must contain both phi labels; "
            "generate negative examples first")
    feat_index: dict[str, int] = {}
    rows = []
    for feats, label in corpus:
        idx = []
        for f in sorted(feats):
            if f not in feat_index:
                feat_index[f] = len(feat_index)
            idx.append(feat_index[f])
        rows.append((np.array(idx, dtype=int), int(label)))
    n = len(feat_index)
    x0 = np.zeros(n)
    if n == 0:
        return FeatureWeights({}, l2_lambda, {"iterations": 0, "objective": 0.0,
                                              "grad_inf_norm": 0.0})
    res = minimize(nll_and_gradient, x0, args=(rows, l2_lambda), jac=True,
                   method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-12})
    _, grad = nll_and_gradient(res.x, rows, l2_lambda)
    ginf = float(np.abs(grad).max()) if n else 0.0
    names = sorted(feat_index, key=feat_index.get)
    weights = {name: float(w) for name, w in zip(names, res.x)}
    return FeatureWeights(weights, l2_lambda,
                          {"iterations": int(res.nit), "objective": float(res.fun),
                           "grad_inf_norm": ginf})


# --- landmark models ---------------------------------------------------------

STOP_WORDS = {"the", "a", "an", "of", "some", "this", "that", "to", "and", "with"}


@dataclass
class CooccurrenceCounts:
    """Caption co-occurrence counts between words and object labels."""
    total_captions: int
    word_caption_count: dict[str, int]
    pair_caption_count: dict[tuple[str, str], int]

    def __post_init__(self):
        for (o, w), c in self.pair_caption_count.items():
            if c < 0 or c > min(self.word_caption_count.get(o, 0) or c,
                                self.word_caption_count.get(w, 0) or c):
                raise ValueError(f"pair count for ({o},{w}) exceeds marginals")

    def count_word(self, w: str) -> int:
        return self.word_caption_count.get(w, 0)

    def count_pair(self, label: str, word: str) -> int:
        return self.pair_caption_count.get((label, word), 0)

    def p_word(self, w: str, alpha: float = 1.0) -> float:
        return (self.count_word(w) + alpha) / (self.total_captions + 2 * alpha)

    def p_label_given_word(self, label: str, word: str, alpha: float = 1.0) -> float:
        return (self.count_pair(label, word) + alpha) / (self.count_word(word) + 2 * alpha)

    def p_label_given_not_word(self, label: str, word: str, alpha: float = 1.0) -> float:
        not_w = self.total_captions - self.count_word(word)
        pair_not = self.word_caption_count.get(label, 0) - self.count_pair(label, word)
        return (pair_not + alpha) / (not_w + 2 * alpha)

    def save(self, path: str):
        doc = {
            "total_captions": self.total_captions,
            "word_caption_count": dict(sorted(self.word_caption_count.items())),
            "pair_caption_count": {f"{o}|{w}": c for (o, w), c
                                   in sorted(self.pair_caption_count.items())},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "CooccurrenceCounts":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        pairs = {}
        for key, c in doc.get("pair_caption_count", {}).items():
            o, w = key.split("|", 1)
            pairs[(o, w)] = c
        return cls(doc["total_captions"], dict(doc.get("word_caption_count", {})), pairs)


def nb_landmark_prob(counts: CooccurrenceCounts, words, observed,
                     alpha: float = 1.0) -> float:
    """Naive Bayes landmark factor: probability that the landmark words apply
    given the object labels observed at the trajectory end.

    Per word w: p(w | o_1..o_K) with the labels treated as independent; the
    result is the product over non-stop words.  An empty observed set falls
    back to the word priors.
    """
    prob = 1.0
    content = [w.lower() for w in words if w.lower() not in STOP_WORDS]
    if not content:
        content = [w.lower() for w in words]
    for w in content:
        pw = counts.p_word(w, alpha)
        if not observed:
            prob *= pw
            continue
        num = pw
        den_neg = 1.0 - pw
        for o in sorted(observed):
            num *= counts.p_label_given_word(o, w, alpha)
            den_neg *= counts.p_label_given_not_word(o, w, alpha)
        prob *= num / (num + den_neg) if (num + den_neg) > 0 else 0.0
    return prob


MAX_OBSERVED_LABELS = 20


def salient_landmark_prob(counts: CooccurrenceCounts, words, observed,
                          alpha: float = 1.0) -> tuple[float, frozenset]:
    """Maximize the Naive Bayes factor over non-empty subsets of the observed
    labels; ties prefer smaller, then lexicographically earlier subsets."""
    observed = sorted(set(observed))
    if len(observed) > MAX_OBSERVED_LABELS:
        raise ValueError(f"too many observed labels ({len(observed)}); "
                         f"the map builder should cap visibility sets")
    if not observed:
        return nb_landmark_prob(counts, words, frozenset(), alpha), frozenset()
    best = None
    for r in range(1, len(observed) + 1):
        for subset in combinations(observed, r):
            p = nb_landmark_prob(counts, words, subset, alpha)
            key = (-p, r, subset)
            if best is None or key < best[0]:
                best = (key, p, frozenset(subset))
    return best[1], best[2]


# --- verb model ---------------------------------------------------------------

ELEVATION_MISMATCH = 1e-6

_LEFT, _RIGHT = math.pi / 2, -math.pi / 2


def expected_turn(verb_words) -> float:
    """Expected turn angle: +90 deg for 'left', -90 deg for 'right', else 0."""
    ws = {w.lower() for w in verb_words}
    if "left" in ws:
        return _LEFT
    if "right" in ws:
        return _RIGHT
    return 0.0


def verb_prob(verb_words, start_heading: float, end_heading: float,
              start_level: int = 0, end_level: int = 0) -> float:
    """Sigmoid on the gap between expected and actual net turn; in 3-D an
    up/down directive multiplies by 1 on elevation match, else 1e-6."""
    actual = wrap_angle(end_heading - start_heading)
    expected = expected_turn(verb_words)
    delta = abs(wrap_angle(expected - actual))
    p = 1.0 / (1.0 + math.exp(delta))
    ws = {w.lower() for w in verb_words}
    if "up" in ws or "down" in ws:
        want = 1 if "up" in ws else -1
        got = (end_level > start_level) - (end_level < start_level)
        p *= 1.0 if got == want else ELEVATION_MISMATCH
    return p
