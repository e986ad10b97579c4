"""Closed-form sample-complexity quantities.

Evaluates the cold-start time, the normalized reward lower bound, the
impossibility bound for short horizons, the recommended parameter triple
(eta, k, Q), and the named validity conditions. All formulas are evaluated
exactly as written, with no hidden constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class BoundsDomainError(ValueError):
    """A bound was evaluated outside its validity domain."""


@dataclass(frozen=True)
class BoundsInput:
    n_users: int
    n_items: int
    n_types: int
    delta_gap: float  # noise gap (distance of p_ui from 1/2)
    nu: float
    pf: float
    gamma: float
    alpha: float
    eta: float
    batch_size: int  # Q
    k_neighbors: int  # k
    confidence_delta: float = 0.1
    horizon: int = 1
    lam: float = 0.5  # short-horizon bound parameter


@dataclass
class BoundsReport:
    t_start: float
    reward_lower_bound: float | None
    low_feedback_ceiling: float
    low_feedback_horizon: float
    recommended_eta: float
    recommended_k: int
    recommended_q: int
    condition_flags: dict[str, bool] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [
            f"t_start              = {self.t_start:.10g}",
            f"reward_lower_bound   = "
            + ("n/a (T < t_start)" if self.reward_lower_bound is None
               else f"{self.reward_lower_bound:.10g}"),
            f"low_feedback_ceiling          = {self.low_feedback_ceiling:.10g}",
            f"low_feedback_horizon        = {self.low_feedback_horizon:.10g}",
            f"recommended_eta      = {self.recommended_eta:.10g}",
            f"recommended_k        = {self.recommended_k}",
            f"recommended_q        = {self.recommended_q}",
        ]
        for name, ok in self.condition_flags.items():
            out.append(f"flag {name:<22s} = {'pass' if ok else 'FAIL'}")
        return out


def t_start(b: BoundsInput) -> float:
    """Cold-start time:
    (512*max(log(4NQ/(k*delta)), log(88/d)))^(1/(1-a))
      / ( (3*pf^2*(1-gamma)^2*nu)^(1/(1-a)) * (1 - max(1/T, 2/(eta*Q))) ).
    """
    a = b.alpha
    if not 0.0 < a < 1.0:
        raise BoundsDomainError("alpha must lie in (0, 1)")
    tail = 1.0 - max(1.0 / b.horizon, 2.0 / (b.eta * b.batch_size))
    if tail <= 0.0:
        raise BoundsDomainError(
            "1 - max(1/T, 2/(eta*Q)) <= 0: need eta*Q > 2 or T > 1")
    num = 512.0 * max(
        math.log(4.0 * b.n_users * b.batch_size / (b.k_neighbors * b.delta_gap)),
        math.log(88.0 / b.confidence_delta),
    )
    base = 3.0 * b.pf**2 * (1.0 - b.gamma) ** 2 * b.nu
    if base <= 0.0:
        raise BoundsDomainError("3*pf^2*(1-gamma)^2*nu must be positive")
    ex = 1.0 / (1.0 - a)
    return num**ex / (base**ex * tail)


def reward_lower_bound(b: BoundsInput) -> float:
    """Normalized lower bound on reward(T)/(N*T), valid for T >= t_start:
    (1 - Ts/T - 2^a*(T-Ts)^(1-a)/(T*(1-a)) - max(1/T, 2/(eta*Q))) * (1-d).
    """
    ts = t_start(b)
    t = b.horizon
    if t < ts:
        raise BoundsDomainError(f"T={t} below t_start={ts:.4g}")
    a = b.alpha
    val = (
        1.0
        - ts / t
        - 2.0**a * (t - ts) ** (1.0 - a) / (t * (1.0 - a))
        - max(1.0 / t, 2.0 / (b.eta * b.batch_size))
    ) * (1.0 - b.confidence_delta)
    return val


def low_feedback_ceiling(b: BoundsInput) -> tuple[float, float]:
    """Short-horizon impossibility bound: reward(T)/(NT) <= lam + 1/K for all
    T <= lam/pf^2, on the non-overlapping preference construction."""
    if not 0.0 < b.lam < 1.0:
        raise BoundsDomainError("lambda must lie in (0, 1)")
    if b.n_items < b.n_types:
        raise BoundsDomainError("requires M >= K")
    return b.lam + 1.0 / b.n_types, b.lam / b.pf**2


def recommended_params(b: BoundsInput) -> tuple[float, int, int, dict[str, bool]]:
    """Parameter choices eta = nu/2, k = (9/40)*N/K,
    Q = k*pf*delta^2 / (64*log(8M/d)), with k and Q floored to ints >= 1.

    Returns (eta, k, Q, condition_flags). Infeasibility is reported via the
    flags, never raised.
    """
    d = b.confidence_delta
    eta = b.nu / 2.0
    k = max(1, math.floor(9.0 * b.n_users / (40.0 * b.n_types)))
    q_exact = k * b.pf * b.delta_gap**2 / (64.0 * math.log(8.0 * b.n_items / d))
    q = max(1, math.floor(q_exact))
    flags = condition_flags(b, eta=eta, k=k, q=q)
    return eta, k, q, flags


def condition_flags(
    b: BoundsInput,
    eta: float | None = None,
    k: int | None = None,
    q: int | None = None,
) -> dict[str, bool]:
    """Named validity conditions for the guarantee, evaluated at the given
    (eta, k, Q) or at the values carried by the input.

    `users_per_type` uses the unspecified leading constant as 1.
    """
    eta = b.eta if eta is None else eta
    k = b.k_neighbors if k is None else k
    q = b.batch_size if q is None else q
    d = b.confidence_delta
    t = b.horizon
    flags = {
        "users_per_type": (
            b.n_users / b.n_types
            >= math.log(b.n_items / d) * math.log(4.0 / d)
            / (b.nu * b.pf * b.delta_gap**2)
        ),
        "batch_ratio": k / q >= 64.0 * math.log(8.0 * b.n_items / d)
        / (b.pf * b.delta_gap**2),
        "batch_floor": q >= (10.0 / b.nu) * math.log(4.0 / d),
        "k_small_enough": k <= 9.0 * b.n_users / (40.0 * b.n_types),
        "eta_small_enough": eta <= b.nu / 2.0,
        "eta_q_at_least_2": eta * q >= 2.0,
    }
    try:
        ts = t_start(BoundsInput(
            n_users=b.n_users, n_items=b.n_items, n_types=b.n_types,
            delta_gap=b.delta_gap, nu=b.nu, pf=b.pf, gamma=b.gamma,
            alpha=b.alpha, eta=eta, batch_size=q, k_neighbors=k,
            confidence_delta=d, horizon=t, lam=b.lam,
        ))
        flags["horizon_window"] = ts <= t <= 0.8 * b.nu * b.n_items * b.pf
    except BoundsDomainError:
        flags["horizon_window"] = False
    return flags


def bounds_report(b: BoundsInput) -> BoundsReport:
    """Evaluate every quantity at the input's own (eta, k, Q)."""
    eta_r, k_r, q_r, _ = recommended_params(b)
    ts = t_start(b)
    try:
        rlb = reward_lower_bound(b)
    except BoundsDomainError:
        rlb = None
    p1, p1_h = low_feedback_ceiling(b)
    return BoundsReport(
        t_start=ts,
        reward_lower_bound=rlb,
        low_feedback_ceiling=p1,
        low_feedback_horizon=p1_h,
        recommended_eta=eta_r,
        recommended_k=k_r,
        recommended_q=q_r,
        condition_flags=condition_flags(b),
    )
