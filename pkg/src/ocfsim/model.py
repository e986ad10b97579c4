"""Latent preference model and stochastic response channel.

Users belong to one of K types; users of the same type find exactly the same
items likable. Each entry of the preference matrix is the probability that
the user likes the item, bounded away from 1/2 by the noise gap delta.
Responses are one-class (a positive rating arrives with probability
p_ui * pf, nothing else is ever revealed) or two-class (the signed rating
arrives with probability pf).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import stream

ONE_CLASS = "one-class"
TWO_CLASS = "two-class"


class ParameterError(ValueError):
    """Model or algorithm parameters violate a precondition."""


class GenerationError(RuntimeError):
    """Could not generate a matrix meeting the separation target."""

    def __init__(self, message: str, best_gamma: float):
        super().__init__(message)
        self.best_gamma = best_gamma


class DegenerateSeparationError(ValueError):
    """A same-type inner product is zero; the separation ratio is undefined."""


@dataclass(frozen=True)
class ModelParams:
    n_users: int
    n_items: int
    n_types: int
    delta: float
    nu: float
    pf: float
    gamma_target: float | None = None

    def validate(self) -> None:
        if self.n_users < 1 or self.n_items < 1 or self.n_types < 1:
            raise ParameterError("N, M, K must be positive")
        if self.n_types > self.n_users:
            raise ParameterError(f"K={self.n_types} exceeds N={self.n_users}")
        if self.n_types > self.n_items:
            raise ParameterError(f"K={self.n_types} exceeds M={self.n_items}")
        if not 0.0 < self.delta <= 0.5:
            raise ParameterError("delta must lie in (0, 1/2]")
        if not 0.0 < self.nu <= 1.0:
            raise ParameterError("nu must lie in (0, 1]")
        if self.nu * self.n_items < 1.0:
            raise ParameterError("nu*M < 1: some user would have no likable item")
        if not 0.0 < self.pf <= 1.0:
            raise ParameterError("pf must lie in (0, 1]")
        if self.gamma_target is not None and not 0.0 <= self.gamma_target < 1.0:
            raise ParameterError("gamma_target must lie in [0, 1)")


@dataclass(frozen=True)
class PreferenceMatrix:
    probs: np.ndarray  # (N, M) floats in [0, 1]
    type_of: np.ndarray  # (N,) ints in [0, K)
    achieved_gamma: float
    params: ModelParams | None = None

    @property
    def n_users(self) -> int:
        return self.probs.shape[0]

    @property
    def n_items(self) -> int:
        return self.probs.shape[1]

    def likable(self) -> np.ndarray:
        """Boolean (N, M) mask of likable items (p_ui > 1/2)."""
        return self.probs > 0.5


def check_separation(pm: PreferenceMatrix) -> float:
    """Smallest gamma such that, for every user u,
    gamma * min_{v in T_u} <p_u, p_v>  >=  max_{v not in T_u} <p_u, p_v>.

    The minimum over the own type includes u itself. Returns 0 when there is
    a single type (no cross-type pair exists).
    """
    types = np.asarray(pm.type_of)
    if len(np.unique(types)) < 2:
        return 0.0
    gram = pm.probs @ pm.probs.T
    gamma = 0.0
    for u in range(pm.n_users):
        same = types == types[u]
        within_min = gram[u, same].min()
        if within_min == 0.0:
            raise DegenerateSeparationError(
                f"user {u}: zero inner product within own type"
            )
        cross_max = gram[u, ~same].max()
        gamma = max(gamma, cross_max / within_min)
    return float(gamma)


def generate_model(
    params: ModelParams, seed: int, max_retries: int = 100
) -> PreferenceMatrix:
    """Draw a preference matrix satisfying all model invariants.

    Users are assigned to types round-robin (u mod K), which guarantees at
    least floor(N/K) >= N/(2K) members per type. Each type gets a uniformly
    random likable set of exactly ceil(nu*M) items; likable probabilities
    are uniform on [1/2+delta, 1], the rest uniform on [0, 1/2-delta].

    If gamma_target is set, regenerate up to max_retries times until the
    measured separation is <= gamma_target.
    """
    params.validate()
    n, m, k = params.n_users, params.n_items, params.n_types
    n_likable = math.ceil(params.nu * m)
    type_of = np.arange(n) % k
    rng = stream(seed, "model")
    best_gamma = math.inf
    attempts = max_retries if params.gamma_target is not None else 1
    for _ in range(max(attempts, 1)):
        likable = np.zeros((k, m), dtype=bool)
        for t in range(k):
            likable[t, rng.choice(m, size=n_likable, replace=False)] = True
        lo = rng.uniform(0.0, 0.5 - params.delta, size=(n, m))
        hi = rng.uniform(0.5 + params.delta, 1.0, size=(n, m))
        probs = np.where(likable[type_of], hi, lo)
        pm = PreferenceMatrix(probs=probs, type_of=type_of, achieved_gamma=0.0,
                              params=params)
        gamma = check_separation(pm)
        pm = PreferenceMatrix(probs=probs, type_of=type_of, achieved_gamma=gamma,
                              params=params)
        if params.gamma_target is None or gamma <= params.gamma_target:
            return pm
        best_gamma = min(best_gamma, gamma)
    raise GenerationError(
        f"no draw met gamma_target={params.gamma_target} in {max_retries} tries "
        f"(best achieved {best_gamma:.4f})",
        best_gamma,
    )


@dataclass(frozen=True)
class Environment:
    """Response channel: synthetic (latent preferences) or replayed ratings.

    With fixed_ratings=True the hidden synthetic ratings R_ui are drawn once
    at construction and reused; the default redraws them per recommendation
    (memoryless channel, P(response=1) = p_ui * pf each time).
    """

    pf: float
    feedback_mode: str = ONE_CLASS
    preferences: PreferenceMatrix | None = None
    ratings: np.ndarray | None = None  # (N, M) ints in {-1, 0, +1}
    fixed_ratings: bool = False
    rng_seed: int = 0
    _hidden: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.preferences is None) == (self.ratings is None):
            raise ParameterError("exactly one of preferences/ratings required")
        if not 0.0 <= self.pf <= 1.0:
            raise ParameterError("pf must lie in [0, 1]")
        if self.feedback_mode not in (ONE_CLASS, TWO_CLASS):
            raise ParameterError(f"unknown feedback mode {self.feedback_mode!r}")
        if self.fixed_ratings and self.preferences is not None:
            rng = stream(self.rng_seed, "hidden")
            r = np.where(
                rng.random(self.preferences.probs.shape) < self.preferences.probs,
                1, -1,
            ).astype(np.int8)
            object.__setattr__(self, "_hidden", r)

    @property
    def synthetic(self) -> bool:
        return self.preferences is not None

    @property
    def n_users(self) -> int:
        src = self.preferences.probs if self.synthetic else self.ratings
        return src.shape[0]

    @property
    def n_items(self) -> int:
        src = self.preferences.probs if self.synthetic else self.ratings
        return src.shape[1]

    def hidden_rating(self, u: int, i: int, rng: np.random.Generator) -> int:
        """Signed rating R_ui in {-1, +1} (synthetic) or stored entry (replay)."""
        if self.synthetic:
            if self._hidden is not None:
                return int(self._hidden[u, i])
            return 1 if rng.random() < self.preferences.probs[u, i] else -1
        return int(self.ratings[u, i])


def sample_response(
    env: Environment, u: int, i: int, rng: np.random.Generator
) -> int:
    """One recommendation's response.

    One-class: 1 iff the (hidden or stored) rating is +1 and an independent
    Bernoulli(pf) reveal succeeds, else 0. Two-class: the signed rating iff
    the reveal succeeds, else 0.
    """
    r = env.hidden_rating(u, i, rng)
    revealed = rng.random() < env.pf
    if env.feedback_mode == ONE_CLASS:
        return 1 if (r == 1 and revealed) else 0
    return r if revealed else 0


def export_preferences(pm: PreferenceMatrix, path) -> None:
    """Plain-text export: header `N M K delta nu pf`, N probability rows,
    then one row of type indices."""
    p = pm.params
    if p is None:
        raise ParameterError("preference matrix carries no params; cannot export")
    with open(path, "w") as f:
        f.write(f"{p.n_users} {p.n_items} {p.n_types} "
                f"{p.delta!r} {p.nu!r} {p.pf!r}\n")
        for row in pm.probs:
            f.write(" ".join(repr(float(x)) for x in row) + "\n")
        f.write(" ".join(str(int(t)) for t in pm.type_of) + "\n")


def import_preferences(path) -> PreferenceMatrix:
    """Inverse of export_preferences; recomputes achieved_gamma."""
    with open(path) as f:
        head = f.readline().split()
        n, m, k = int(head[0]), int(head[1]), int(head[2])
        delta, nu, pf = float(head[3]), float(head[4]), float(head[5])
        probs = np.empty((n, m))
        for u in range(n):
            row = np.fromstring(f.readline(), sep=" ")
            if row.size != m:
                raise ParameterError(f"row {u}: expected {m} entries, got {row.size}")
            probs[u] = row
        type_of = np.fromstring(f.readline(), sep=" ").astype(int)
        if type_of.size != n:
            raise ParameterError("type row has wrong length")
    params = ModelParams(n, m, k, delta, nu, pf)
    pm = PreferenceMatrix(probs=probs, type_of=type_of, achieved_gamma=0.0,
                          params=params)
    gamma = check_separation(pm)
    return PreferenceMatrix(probs=probs, type_of=type_of, achieved_gamma=gamma,
                            params=params)
