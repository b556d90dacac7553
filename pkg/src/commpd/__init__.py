"""Equilibrium selection, treatment simulation, statistics and chat
clustering for the infinitely repeated prisoner's dilemma with
pre-play communication."""

__version__ = "0.1.0"

from .game_theory import (  # noqa: F401
    NEVER,
    NormalizedGame,
    StagePayoffs,
    check_comparative_statics,
    cooperation_threshold,
    delta_pd,
    delta_plus,
    delta_rd,
    delta_star,
    normalize,
    strategy_values,
    validate_pd,
)
