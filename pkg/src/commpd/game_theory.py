"""Stage-game algebra for the repeated prisoner's dilemma.

Payoffs come in raw points ``(T, R, P, S)`` and are reduced to the
two-parameter form ``(g, l)``. Every critical discount factor here is the
same rational function of ``(g, l, p)`` evaluated at different beliefs:
``p = 1`` (Pareto dominance), ``p = 0.5`` (risk dominance) and an elevated
communication belief ``0.5 < p < 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Returned by :func:`cooperation_threshold` when no belief in ``[0, 1]``
#: makes grim at least as good as always-defect.
NEVER = math.inf


@dataclass(frozen=True)
class StagePayoffs:
    T: float
    R: float
    P: float
    S: float

    def __iter__(self):
        return iter((self.T, self.R, self.P, self.S))

    def payoff(self, own_coop: bool, other_coop: bool) -> float:
        if own_coop:
            return self.R if other_coop else self.S
        return self.T if other_coop else self.P


@dataclass(frozen=True)
class NormalizedGame:
    g: float
    l: float


@dataclass(frozen=True)
class Validity:
    valid: bool
    violations: tuple[str, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.valid


def validate_pd(payoffs: StagePayoffs) -> Validity:
    """Check the prisoner's dilemma conditions ``T>R>P>S`` and ``2R>T+S``.

    Returns a truthy :class:`Validity` whose ``violations`` name every broken
    condition. Non-finite payoffs raise ``ValueError``.
    """
    T, R, P, S = payoffs
    for name, value in zip("TRPS", (T, R, P, S)):
        if not math.isfinite(value):
            raise ValueError(f"payoff {name}={value!r} is not finite")
    violations = []
    if not T > R:
        violations.append("T>R")
    if not R > P:
        violations.append("R>P")
    if not P > S:
        violations.append("P>S")
    if not 2 * R > T + S:
        violations.append("2R>T+S")
    return Validity(not violations, tuple(violations))


def normalize(payoffs: StagePayoffs) -> NormalizedGame:
    T, R, P, S = payoffs
    if R == P:
        raise ValueError("R == P: payoffs cannot be normalized")
    return NormalizedGame(g=(T - R) / (R - P), l=(P - S) / (R - P))


def _check_belief(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"belief must lie in [0, 1], got {p!r}")


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"discount factor must lie in (0, 1), got {delta!r}")


def delta_star(game: NormalizedGame, p: float) -> float:
    """Minimum discount factor at which grim weakly beats always-defect
    against an opponent who plays grim with probability ``p``."""
    _check_belief(p)
    g, l = game.g, game.l
    denom = p * (1.0 + g - l) + l
    if denom <= 0.0:
        raise ValueError(f"critical discount factor undefined for g={g}, l={l}, p={p}")
    return (p * (g - l) + l) / denom


def delta_pd(game: NormalizedGame) -> float:
    return delta_star(game, 1.0)


def delta_rd(game: NormalizedGame) -> float:
    return delta_star(game, 0.5)


def delta_plus(game: NormalizedGame, p_plus: float) -> float:
    """Critical discount factor under the communication belief ``p_plus``.

    Identical to :func:`delta_star`; the ``0.5 < p_plus < 1`` range is a
    modelling assumption left to the caller.
    """
    return delta_star(game, p_plus)


def strategy_values(game: NormalizedGame, p: float, delta: float) -> tuple[float, float]:
    """Normalized values ``(grim, always_defect)`` at belief ``p``."""
    _check_belief(p)
    if delta == 1.0:
        raise ValueError("delta = 1 gives an infinite value for grim")
    _check_delta(delta)
    value_grim = p / (1.0 - delta) + (1.0 - p) * (-game.l)
    value_ad = p * (1.0 + game.g)
    return value_grim, value_ad


def cooperation_threshold(game: NormalizedGame, delta: float) -> float:
    """Smallest belief at which grim is (weakly) chosen, or :data:`NEVER`.

    Solves ``p / (1 - delta) - (1 - p) l >= p (1 + g)`` for ``p``.
    """
    _check_delta(delta)
    slope = 1.0 / (1.0 - delta) - (1.0 + game.g) + game.l
    if game.l == 0.0:
        return 0.0 if slope >= 0.0 else NEVER
    if slope <= 0.0:
        return NEVER
    p_star = game.l / slope
    return p_star if p_star <= 1.0 else NEVER


def is_never(threshold: float) -> bool:
    return math.isinf(threshold)


@dataclass
class StaticsReport:
    samples: int
    n_violations: int
    # at most ``max_reported`` offending tuples, in draw order
    violations: list[dict]
    # smallest observed margin per inequality; positive means it held everywhere
    min_margin_loss: float
    min_margin_comm: float
    min_margin_pareto: float

    @property
    def ok(self) -> bool:
        return self.n_violations == 0


def _delta_star_arr(g, l, p):
    return (p * (g - l) + l) / (p * (1.0 + g - l) + l)


def check_comparative_statics(
    sample_count: int,
    rng_seed=None,
    *,
    p_plus: float | None = None,
    max_reported: int = 20,
) -> StaticsReport:
    """Randomized witness for the three orderings of the communication model.

    For random ``g > 0``, ``0 < l_low < l_high`` and ``0.5 < p+ < 1``:

    * loss:    ``delta+(g, l_high, p+) > delta+(g, l_low, p+)``
    * comm:    ``delta_rd(g, l) > delta+(g, l, p+)`` for both losses
    * pareto:  ``delta+(g, l, p+) > delta_pd(g)`` for both losses

    Passing ``p_plus`` pins the belief instead of sampling it, which is how
    the boundary cases ``p+ = 1`` and ``p+ = 0.5`` are probed.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(rng_seed)
    n = sample_count
    g = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n))
    l_pair = np.sort(np.exp(rng.uniform(np.log(1e-3), np.log(1e3), (n, 2))), axis=1)
    l_lo, l_hi = l_pair[:, 0], l_pair[:, 1]
    if p_plus is None:
        # open interval: redraw the (measure-zero) endpoint hits
        pp = rng.uniform(0.5, 1.0, n)
        while np.any((pp <= 0.5) | (pp >= 1.0)):
            bad = (pp <= 0.5) | (pp >= 1.0)
            pp[bad] = rng.uniform(0.5, 1.0, bad.sum())
    else:
        _check_belief(p_plus)
        pp = np.full(n, float(p_plus))

    d_lo = _delta_star_arr(g, l_lo, pp)
    d_hi = _delta_star_arr(g, l_hi, pp)
    rd_lo = _delta_star_arr(g, l_lo, 0.5)
    rd_hi = _delta_star_arr(g, l_hi, 0.5)
    pd = _delta_star_arr(g, l_lo, 1.0)

    m_loss = d_hi - d_lo
    m_comm = np.minimum(rd_lo - d_lo, rd_hi - d_hi)
    m_pareto = np.minimum(d_lo - pd, d_hi - pd)

    bad = np.flatnonzero((m_loss <= 0) | (m_comm <= 0) | (m_pareto <= 0))
    violations = []
    for i in bad[:max_reported]:
        failed = [
            name
            for name, m in (("loss", m_loss[i]), ("comm", m_comm[i]), ("pareto", m_pareto[i]))
            if m <= 0
        ]
        violations.append(
            dict(g=g[i], l_low=l_lo[i], l_high=l_hi[i], p_plus=pp[i], failed=failed)
        )
    return StaticsReport(
        samples=n,
        n_violations=int(bad.size),
        violations=violations,
        min_margin_loss=float(m_loss.min()),
        min_margin_comm=float(m_comm.min()),
        min_margin_pareto=float(m_pareto.min()),
    )
