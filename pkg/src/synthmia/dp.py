"""Differential-privacy primitives: noise mechanisms, selection, budgeting.

``epsilon = math.inf`` is the supported noiseless sentinel: noise calls are
skipped by callers and the exponential mechanism degenerates to argmax.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, ParameterError, SelectionError


@dataclass(frozen=True)
class DpParams:
    epsilon: float
    delta: float = 0.0
    theta: float = None
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigurationError("delta must lie in [0, 1)")
        if self.theta is not None and not self.theta > 0:
            raise ConfigurationError("theta must be positive")

    def with_seed(self, seed):
        return replace(self, seed=seed)


@dataclass
class BudgetLedger:
    """Audit log of budget fractions spent, per labeled mechanism call."""

    total: DpParams
    spent: list = field(default_factory=list)

    def spend(self, label, epsilon_fraction, delta_fraction=0.0, mechanism=""):
        self.spent.append((label, float(epsilon_fraction), float(delta_fraction), mechanism))
        if self.epsilon_spent() > 1.0 + 1e-9 or self.delta_spent() > 1.0 + 1e-9:
            raise ConfigurationError(f"privacy budget exceeded at {label!r}")

    def epsilon_spent(self):
        return sum(e for _, e, _, _ in self.spent)

    def delta_spent(self):
        return sum(d for _, _, d, _ in self.spent)

    def to_json(self):
        return {
            "epsilon": self.total.epsilon,
            "delta": self.total.delta,
            "spent": [
                {"label": l, "epsilon_share": e, "delta_share": d, "mechanism": m}
                for l, e, d, m in self.spent
            ],
        }


def as_generator(seed):
    """Accept either an integer seed or an existing numpy Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_seed(seed, index):
    """Stable 63-bit sub-seed for parallel replicas and staged pipelines."""
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def laplace_noise(scale, n, seed):
    if not scale > 0:
        raise ParameterError("laplace scale must be positive")
    rng = as_generator(seed)
    return rng.laplace(0.0, scale, size=int(n))


def gaussian_noise(sigma, n, seed):
    if not sigma > 0:
        raise ParameterError("gaussian sigma must be positive")
    rng = as_generator(seed)
    return rng.normal(0.0, sigma, size=int(n))


def gaussian_sigma(epsilon, delta, sensitivity):
    """Classic Gaussian-mechanism calibration for one measurement."""
    if not (epsilon > 0 and 0 < delta < 1):
        raise ParameterError("gaussian calibration needs epsilon > 0 and delta in (0, 1)")
    return sensitivity * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


def exponential_mechanism(scores, epsilon, sensitivity, seed, size=None):
    """Select index k with probability proportional to exp(eps * s_k / (2 * sens)).

    Computed in log-space for stability. With epsilon = inf this is an
    argmax with lowest-index tie-breaking. ``size`` draws a vector of
    independent selections (used for statistical testing).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise SelectionError("exponential mechanism received no candidates")
    if not np.isfinite(scores).all():
        raise SelectionError("scores must be finite")
    if not sensitivity > 0:
        raise ParameterError("sensitivity must be positive")
    if math.isinf(epsilon):
        best = int(np.argmax(scores))
        return np.full(size, best, dtype=np.int64) if size is not None else best
    logits = epsilon * scores / (2.0 * sensitivity)
    logits -= logits.max()
    probs = np.exp(logits)
    probs /= probs.sum()
    rng = as_generator(seed)
    if size is not None:
        return rng.choice(scores.size, size=int(size), p=probs)
    return int(rng.choice(scores.size, p=probs))


def ledger_to_file(ledger, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ledger.to_json(), fh, indent=2)
