"""Membership-inference attack scores, household aggregation, activations.

Every attack compares the synthetic data against the auxiliary data through
ratios of floored probability tables; a record with a high ratio looks more
typical of the synthetic data than of the population, suggesting membership
in the training set. Scores are kept in log-space internally.
"""

from dataclasses import dataclass, field

import numpy as np

from . import marginals, sdg
from .errors import ConfigurationError

LOG_SIMPLE_THRESHOLD = np.log(3.0)  # 2*sigmoid(ln 3) - 1 = 0.5


@dataclass(frozen=True)
class ScoreVector:
    """Per-record raw attack scores, stored as logs."""

    attack_name: str
    log_scores: np.ndarray
    target_ids: np.ndarray = None

    def __post_init__(self):
        logs = np.ascontiguousarray(self.log_scores, dtype=np.float64)
        logs.setflags(write=False)
        object.__setattr__(self, "log_scores", logs)
        if self.target_ids is None:
            ids = np.arange(logs.size, dtype=np.int64)
        else:
            ids = np.ascontiguousarray(self.target_ids, dtype=np.int64)
            if ids.shape != logs.shape:
                raise ConfigurationError("target_ids must align with scores")
        ids.setflags(write=False)
        object.__setattr__(self, "target_ids", ids)

    def __len__(self):
        return self.log_scores.size

    @property
    def scores(self):
        return np.exp(self.log_scores)


@dataclass(frozen=True)
class ActivationConfig:
    regime: str = "simple"
    threshold: float = 0.5
    prior: float = None

    def __post_init__(self):
        if self.regime not in ("simple", "calibrated"):
            raise ConfigurationError(f"unknown activation regime {self.regime!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError("threshold must lie in [0, 1]")
        if self.regime == "calibrated":
            if self.prior is None or not 0.0 < self.prior < 1.0:
                raise ConfigurationError("calibrated activation needs a prior in (0, 1)")


def _rows(target):
    return np.atleast_2d(np.asarray(getattr(target, "rows", target), dtype=np.int64))


def _log_marginal_ratio(rows, attrs, synth, aux):
    """log of the floored marginal ratio mu^synth / mu^aux, per record."""
    ts = marginals.marginal(synth, attrs, floor=marginals.default_floor(len(synth)))
    ta = marginals.marginal(aux, attrs, floor=marginals.default_floor(len(aux)))
    return np.log(ts.lookup_rows(rows)) - np.log(ta.lookup_rows(rows))


def _log_conditional_ratio(rows, node, parents, synth, aux):
    ts = marginals.conditional(synth, node, parents)
    ta = marginals.conditional(aux, node, parents)
    return np.log(ts.lookup_rows(rows)) - np.log(ta.lookup_rows(rows))


def tamis_mst(target, edges, synth, aux):
    """Ratio of tree-factorized densities fitted on synth and on aux."""
    rows = _rows(target)
    model_s = sdg.tree_model_from_data(synth, edges)
    model_a = sdg.tree_model_from_data(aux, edges)
    logs = sdg.tree_log_density(model_s, rows) - sdg.tree_log_density(model_a, rows)
    return ScoreVector("tamis-mst", logs)


def tamis_pb(target, order, synth, aux):
    """Ratio of Bayesian-network densities fitted on synth and on aux."""
    rows = _rows(target)
    model_s = sdg.bayes_model_from_data(synth, order)
    model_a = sdg.bayes_model_from_data(aux, order)
    logs = sdg.bayes_log_density(model_s, rows) - sdg.bayes_log_density(model_a, rows)
    return ScoreVector("tamis-pb", logs)


def mamamia_mst(target, weights, synth, aux):
    """Weight-normalized average of 2-way marginal ratios (1-ways excluded)."""
    rows = _rows(target)
    total = weights.total()
    if total <= 0:
        raise ConfigurationError("shadow weights are degenerate (total 0)")
    acc = np.zeros(rows.shape[0])
    for (i, j), w in sorted(weights.weights.items()):
        if w:
            acc += w * np.exp(_log_marginal_ratio(rows, (i, j), synth, aux))
    return ScoreVector("mamamia-mst", np.log(acc / total))


def mamamia_pb(target, weights, synth, aux):
    """Weight-normalized average of conditional-table ratios."""
    rows = _rows(target)
    total = weights.total()
    if total <= 0:
        raise ConfigurationError("shadow weights are degenerate (total 0)")
    acc = np.zeros(rows.shape[0])
    for (node, parents), w in sorted(weights.weights.items()):
        if w:
            acc += w * np.exp(_log_conditional_ratio(rows, node, parents, synth, aux))
    return ScoreVector("mamamia-pb", np.log(acc / total))


def hybrid_mst(target, edges, synth, aux):
    """Uniform average of 2-way ratios over the recovered tree's edges."""
    rows = _rows(target)
    edges = tuple(sorted(tuple(sorted(e)) for e in edges))
    if not edges:
        raise ConfigurationError("hybrid score needs at least one edge")
    acc = np.zeros(rows.shape[0])
    for i, j in edges:
        acc += np.exp(_log_marginal_ratio(rows, (i, j), synth, aux))
    return ScoreVector("hybrid-mst", np.log(acc / len(edges)))


def hybrid_pb(target, order, synth, aux):
    """Uniform average of conditional ratios over the recovered network."""
    rows = _rows(target)
    acc = np.zeros(rows.shape[0])
    # sorted key order keeps the floating-point sum identical to the
    # weight-normalized variant under indicator weights
    for node, parents in sorted((n, tuple(p)) for n, p in order):
        acc += np.exp(_log_conditional_ratio(rows, node, parents, synth, aux))
    return ScoreVector("hybrid-pb", np.log(acc / len(order)))


def tamis_mst_avg(target, edges, synth, aux):
    """Average (rather than product) of node and edge ratio terms."""
    rows = _rows(target)
    edges = tuple(sorted(tuple(sorted(e)) for e in edges))
    d = len(synth.domain)
    node_ratio = {i: _log_marginal_ratio(rows, (i,), synth, aux) for i in range(d)}
    acc = np.zeros(rows.shape[0])
    for i in range(d):
        acc += np.exp(node_ratio[i])
    for i, j in edges:
        pair = _log_marginal_ratio(rows, (i, j), synth, aux)
        acc += np.exp(pair - node_ratio[i] - node_ratio[j])
    return ScoreVector("tamis-mst-avg", np.log(acc / (d + len(edges))))


def marginals_sigma(target, synth, aux):
    """Structure-free baseline: average over all 1- and 2-way ratio terms."""
    rows = _rows(target)
    d = len(synth.domain)
    node_ratio = {i: _log_marginal_ratio(rows, (i,), synth, aux) for i in range(d)}
    acc = np.zeros(rows.shape[0])
    for i in range(d):
        acc += np.exp(node_ratio[i])
    for i in range(d):
        for j in range(i + 1, d):
            pair = _log_marginal_ratio(rows, (i, j), synth, aux)
            acc += np.exp(pair - node_ratio[i] - node_ratio[j])
    n_terms = d + d * (d - 1) // 2
    return ScoreVector("marginals-sigma", np.log(acc / n_terms))


def marginals_pi(target, synth, aux):
    """Structure-free baseline: prefactored product of 1- and 2-way ratios."""
    rows = _rows(target)
    d = len(synth.domain)
    logs = np.zeros(rows.shape[0])
    for i in range(d):
        logs += (2 - d) * _log_marginal_ratio(rows, (i,), synth, aux)
    for i in range(d):
        for j in range(i + 1, d):
            logs += _log_marginal_ratio(rows, (i, j), synth, aux)
    n_terms = d + d * (d - 1) // 2
    return ScoreVector("marginals-pi", logs - np.log(n_terms))


def aggregate_households(score_vector, household_id):
    """Mean of raw (linear-space) scores within each household."""
    household_id = np.asarray(household_id, dtype=np.int64)
    if household_id.shape != score_vector.log_scores.shape:
        raise ConfigurationError("household ids must align with scores")
    ids, inverse = np.unique(household_id, return_inverse=True)
    sums = np.bincount(inverse, weights=score_vector.scores)
    counts = np.bincount(inverse)
    means = sums / counts
    return ScoreVector(score_vector.attack_name, np.log(means), ids)


def activate_simple(score_vector, threshold=0.5):
    """Map raw scores through 2*sigmoid(score) - 1, then threshold."""
    lam = score_vector.scores
    probs = 2.0 / (1.0 + np.exp(-lam)) - 1.0
    preds = (probs >= threshold).astype(np.int64)
    return probs, preds


def activate_calibrated(score_vector, prior, threshold=0.5):
    """Quantile-centered activation enforcing a predicted-positive rate.

    Scores are standardized with the population standard deviation, centered
    on their (1 - prior) linearly-interpolated quantile, passed through a
    sigmoid, and thresholded. Degenerate (constant) score vectors give all
    negative predictions.
    """
    if not 0.0 < prior < 1.0:
        raise ConfigurationError("prior must lie in (0, 1)")
    lam = score_vector.scores
    std = lam.std()
    if lam.size < 2 or std == 0.0:
        return np.zeros(lam.size), np.zeros(lam.size, dtype=np.int64)
    z = (lam - lam.mean()) / std
    centered = z - np.quantile(z, 1.0 - prior)
    probs = 1.0 / (1.0 + np.exp(-centered))
    preds = (probs >= threshold).astype(np.int64)
    return probs, preds


def activate(score_vector, config):
    if config.regime == "simple":
        return activate_simple(score_vector, config.threshold)
    return activate_calibrated(score_vector, config.prior, config.threshold)
