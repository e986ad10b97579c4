"""The online User-CF policy.

Time is split into three step types. Preference exploration happens exactly
at t = floor(eta*Q*q) and recommends a random unrated item from the q-th
batch. All other steps are similarity exploration with probability
(t - floor(t/(eta*Q)))^(-alpha) (same permutation-ordered item for every
user), otherwise exploitation: recommend the unrated item maximizing the
neighbor-averaged estimate p_hat.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ONE_CLASS, TWO_CLASS, Environment, ParameterError, sample_response
from .rng import stream

EXHAUSTED = -1  # sentinel item index: no admissible recommendation for the user


class ScheduleError(RuntimeError):
    """Internal scheduler inconsistency (unreachable when eta*Q >= 2)."""


@dataclass(frozen=True)
class AlgoParams:
    alpha: float
    eta: float
    batch_size: int
    k_neighbors: int
    feedback_mode: str = ONE_CLASS
    allow_repeat: bool = True
    random_on_cold: bool = False
    sim_skip_rated_only: bool = False

    def validate(self) -> None:
        if not 0.0 < self.alpha < 4.0 / 7.0:
            raise ParameterError("alpha must lie in (0, 4/7)")
        if not 0.0 < self.eta < 1.0:
            raise ParameterError("eta must lie in (0, 1)")
        if self.batch_size < 1 or self.k_neighbors < 1:
            raise ParameterError("Q and k must be positive")
        if self.eta * self.batch_size < 2.0:
            raise ParameterError("eta*Q must be >= 2")
        if self.feedback_mode not in (ONE_CLASS, TWO_CLASS):
            raise ParameterError(f"unknown feedback mode {self.feedback_mode!r}")


@dataclass(frozen=True)
class StepType:
    kind: str  # "preference" | "similarity" | "exploit"
    q: int | None = None


@dataclass
class AlgoState:
    perm: np.ndarray  # permutation of [M]
    batches: list[np.ndarray]  # partition of [M], all size Q but maybe the last
    sim_responses: np.ndarray  # (N, M) responses from similarity steps only
    all_responses: np.ndarray  # (N, M) latest informative response per pair
    recommended: np.ndarray  # (N, M) bool: ever recommended, any step type
    rated: np.ndarray  # (N, M) bool: consumed / informatively rated
    t: int = 0
    fallback_events: list[tuple[int, int, str]] = field(default_factory=list)
    last_responses: np.ndarray | None = None

    @property
    def n_users(self) -> int:
        return self.recommended.shape[0]

    @property
    def n_items(self) -> int:
        return self.recommended.shape[1]

    def record(self, u: int, i: int, response: int, similarity: bool) -> None:
        """Commit one (user, item, response) observation."""
        if i == EXHAUSTED:
            return
        self.recommended[u, i] = True
        if similarity:
            self.sim_responses[u, i] = response
        if response != 0:
            self.all_responses[u, i] = response
            self.rated[u, i] = True


def init_state(
    params: AlgoParams, n_users: int, n_items: int, seed: int
) -> AlgoState:
    """Fresh state: uniformly random permutation and random batch partition
    into ceil(M/Q) parts of size Q (the last possibly smaller)."""
    params.validate()
    q = params.batch_size
    if q > n_items:
        raise ParameterError(f"Q={q} exceeds M={n_items}")
    rng = stream(seed, "perm")
    perm = rng.permutation(n_items)
    batch_order = rng.permutation(n_items)
    batches = [batch_order[s:s + q] for s in range(0, n_items, q)]
    dtype = np.int8
    return AlgoState(
        perm=perm,
        batches=batches,
        sim_responses=np.zeros((n_users, n_items), dtype=dtype),
        all_responses=np.zeros((n_users, n_items), dtype=dtype),
        recommended=np.zeros((n_users, n_items), dtype=bool),
        rated=np.zeros((n_users, n_items), dtype=bool),
    )


def n_batches(n_items: int, batch_size: int) -> int:
    return math.ceil(n_items / batch_size)


def step_type(
    t: int,
    params: AlgoParams,
    n_items: int,
    rng: np.random.Generator,
) -> StepType:
    """Classify time step t per the schedule."""
    eta_q = params.eta * params.batch_size
    nb = n_batches(n_items, params.batch_size)
    # Preference iff floor(eta_q * q) == t for an in-range integer q, i.e.
    # q in [t/eta_q, (t+1)/eta_q). eta_q >= 2 makes the hit unique.
    q_lo = math.ceil(t / eta_q)
    if q_lo < nb and math.floor(eta_q * q_lo) == t:
        return StepType("preference", q_lo)
    q = math.floor(t / eta_q)
    if t - q <= 0:
        raise ScheduleError(f"t={t}, q={q}: nonpositive exponent base")
    p_sim = (t - q) ** (-params.alpha)
    if rng.random() < p_sim:
        return StepType("similarity")
    return StepType("exploit")


def _similarity_pick(state: AlgoState, params: AlgoParams) -> np.ndarray:
    """Per-user first admissible item in permutation order."""
    skip = state.rated if params.sim_skip_rated_only else state.recommended
    fresh = ~skip[:, state.perm]
    items = np.full(state.n_users, EXHAUSTED, dtype=np.int64)
    hit = fresh.any(axis=1)
    items[hit] = state.perm[fresh.argmax(axis=1)[hit]]
    # Fallback for users who have seen every item: first unrated in pi order
    # (only meaningful when re-recommendation is allowed at all).
    if params.allow_repeat:
        for u in np.flatnonzero(~hit):
            unrated = ~state.rated[u, state.perm]
            if unrated.any():
                items[u] = state.perm[unrated.argmax()]
                state.fallback_events.append((state.t, u, "similarity"))
    return items


def similarity_explore(
    state: AlgoState,
    params: AlgoParams,
    env: Environment,
    rng: np.random.Generator,
) -> np.ndarray:
    """Recommend to each user the first item in pi order not yet recommended
    to them; record the responses as similarity responses."""
    items = _similarity_pick(state, params)
    responses = _respond(state, items, env, rng, similarity=True)
    return items


def preference_explore(
    state: AlgoState,
    q: int,
    params: AlgoParams,
    env: Environment,
    rng: np.random.Generator,
) -> np.ndarray:
    """Recommend to each user a uniform unrated item from batch q."""
    if q >= len(state.batches):
        raise ParameterError(f"batch index {q} out of range")
    batch = state.batches[q]
    blocked = state.rated if params.allow_repeat else (
        state.rated | state.recommended)
    items = np.full(state.n_users, EXHAUSTED, dtype=np.int64)
    for u in range(state.n_users):
        cand = batch[~blocked[u, batch]]
        if cand.size == 0:
            cand = np.flatnonzero(~blocked[u])
            if cand.size == 0:
                continue
            state.fallback_events.append((state.t, u, "preference"))
        items[u] = rng.choice(cand)
    _respond(state, items, env, rng, similarity=False)
    return items


def nearest_neighbors(state: AlgoState, u: int, k: int) -> np.ndarray:
    """The k users v != u with largest <r_sim_u, r_sim_v>, ties broken by
    ascending user index."""
    scores = state.sim_responses.astype(np.int64) @ state.sim_responses[u].astype(np.int64)
    return _neighbors_from_scores(scores, u, k)


def _neighbors_from_scores(scores: np.ndarray, u: int, k: int) -> np.ndarray:
    order = np.argsort(-scores, kind="stable")
    return order[order != u][:k]


def estimate_p_hat(
    state: AlgoState, u: int, i: int, neighbors: np.ndarray
) -> float:
    """Neighbor-averaged liking estimate: sum of neighbor responses for i
    divided by the number of neighbors ever recommended i (0 if none)."""
    n_ui = int(state.recommended[neighbors, i].sum())
    if n_ui == 0:
        return 0.0
    return float(state.all_responses[neighbors, i].sum()) / n_ui


def _phat_row(state: AlgoState, neighbors: np.ndarray) -> np.ndarray:
    counts = state.recommended[neighbors].sum(axis=0)
    sums = state.all_responses[neighbors].astype(np.int64).sum(axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)


def exploit_pick(
    state: AlgoState,
    params: AlgoParams,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-user exploitation choice: argmax of p_hat over unrated items
    (lowest index on ties). With random_on_cold, an all-zero estimate row
    instead draws a uniform unrated candidate."""
    n = state.n_users
    sims = state.sim_responses.astype(np.int64)
    score_matrix = sims @ sims.T
    items = np.full(n, EXHAUSTED, dtype=np.int64)
    for u in range(n):
        cand = ~state.rated[u]
        if not params.allow_repeat:
            cand = cand & ~state.recommended[u]
        if not cand.any():
            continue
        neighbors = _neighbors_from_scores(score_matrix[u], u, params.k_neighbors)
        phat = _phat_row(state, neighbors)
        cand_idx = np.flatnonzero(cand)
        if params.random_on_cold and rng is not None and not phat[cand_idx].any():
            items[u] = rng.choice(cand_idx)
            continue
        masked = np.where(cand, phat, -np.inf)
        items[u] = int(np.argmax(masked))  # first max -> lowest index
    return items


def exploit(
    state: AlgoState,
    params: AlgoParams,
    env: Environment,
    rng: np.random.Generator,
) -> np.ndarray:
    items = exploit_pick(state, params, rng)
    _respond(state, items, env, rng, similarity=False)
    return items


def _respond(
    state: AlgoState,
    items: np.ndarray,
    env: Environment,
    rng: np.random.Generator,
    similarity: bool,
) -> np.ndarray:
    """Sample and commit responses for one simultaneous recommendation batch."""
    responses = np.zeros(len(items), dtype=np.int64)
    for u, i in enumerate(items):
        if i == EXHAUSTED:
            continue
        responses[u] = sample_response(env, u, int(i), rng)
        state.record(u, int(i), int(responses[u]), similarity)
    state.last_responses = responses
    return responses


@dataclass
class RunTrace:
    """Per-step record of one simulation run."""

    step_kinds: list[str]
    items: np.ndarray  # (T, N), EXHAUSTED where no recommendation
    responses: np.ndarray  # (T, N)
    env: Environment

    @property
    def horizon(self) -> int:
        return len(self.step_kinds)

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("t,step_type,user,item,response\n")
            for t, kind in enumerate(self.step_kinds):
                for u in range(self.items.shape[1]):
                    f.write(f"{t},{kind},{u},{self.items[t, u]},"
                            f"{self.responses[t, u]}\n")


def run(env: Environment, params: AlgoParams, horizon: int, seed: int) -> RunTrace:
    """Execute the full scheduled policy for `horizon` steps.

    All N recommendations within a step are computed from the state frozen
    at the end of the previous step, then responses are applied as a batch.
    """
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    n, m = env.n_users, env.n_items
    state = init_state(params, n, m, seed)
    rng_sched = stream(seed, "schedule")
    rng_pref = stream(seed, "preference")
    rng_resp = stream(seed, "response")
    rng_cold = stream(seed, "exploit")
    kinds: list[str] = []
    items = np.full((horizon, n), EXHAUSTED, dtype=np.int64)
    responses = np.zeros((horizon, n), dtype=np.int64)
    for t in range(horizon):
        state.t = t
        st = step_type(t, params, m, rng_sched)
        if st.kind == "preference":
            chosen = preference_explore(state, st.q, params, env, rng_pref)
        elif st.kind == "similarity":
            chosen = similarity_explore(state, params, env, rng_resp)
        else:
            chosen = exploit_pick(state, params, rng_cold)
            _respond(state, chosen, env, rng_resp, similarity=False)
        kinds.append(st.kind)
        items[t] = chosen
        responses[t] = state.last_responses
    return RunTrace(step_kinds=kinds, items=items, responses=responses, env=env)
