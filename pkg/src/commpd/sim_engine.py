"""Agent-based simulation of the four-treatment repeated-PD experiment.

Subjects are grouped into matching graphs of six. Within a graph they are
re-paired every supergame so that nobody meets the same partner twice, and
each supergame ends by a shared random continuation draw. At the start of a
supergame every subject draws a belief that their partner plays grim and
picks grim or always-defect by comparing it to the game's cooperation
threshold.

Randomness: every (treatment, graph) cell gets its own
``numpy.random.PCG64`` stream built from
``SeedSequence(entropy=seed, spawn_key=(treatment_index, graph_index))``,
so graphs can run in any order, or in parallel, and reproduce exactly.
"""

from __future__ import annotations

import enum
import zlib
from statistics import NormalDist
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from . import kernels
from .game_theory import (
    StagePayoffs,
    cooperation_threshold,
    normalize,
    validate_pd,
)

RNG_ALGORITHM = (
    "numpy.random.PCG64 seeded by SeedSequence(entropy=seed, "
    "spawn_key=(treatment_index, graph_index))"
)

CANONICAL_TREATMENTS = ("NoComm70", "NoComm0", "Comm70", "Comm0")
# name -> (communication, S)
TREATMENT_DESIGN = {
    "NoComm70": (False, 70.0),
    "NoComm0": (False, 0.0),
    "Comm70": (True, 70.0),
    "Comm0": (True, 0.0),
}

CSV_COLUMNS = [
    "session", "treatment", "graph", "supergame", "round", "subject",
    "partner", "action", "partner_action", "payoff", "belief",
]


class Action(enum.Enum):
    COOPERATE = "A"
    DEFECT = "B"


class StrategyKind(enum.IntEnum):
    GRIM = kernels.GRIM
    ALWAYS_DEFECT = kernels.ALWAYS_DEFECT
    TIT_FOR_TAT = kernels.TIT_FOR_TAT


@dataclass
class StrategyState:
    kind: StrategyKind
    triggered: bool = False
    last_partner_action: Action | None = None

    def next_action(self) -> Action:
        if self.kind is StrategyKind.GRIM:
            return Action.DEFECT if self.triggered else Action.COOPERATE
        if self.kind is StrategyKind.TIT_FOR_TAT:
            return self.last_partner_action or Action.COOPERATE
        return Action.DEFECT

    def observe(self, partner_action: Action) -> None:
        self.last_partner_action = partner_action
        if partner_action is Action.DEFECT:
            self.triggered = True


def step_strategy(state: StrategyState, round_index: int) -> Action:
    """Action for round ``round_index`` (1-based); call ``state.observe``
    with the partner's move afterwards."""
    if round_index < 1:
        raise ValueError("rounds are 1-based")
    return state.next_action()


@dataclass(frozen=True)
class MatchSchedule:
    n_subjects: int
    n_supergames: int
    pairs: tuple[tuple[tuple[int, int], ...], ...]

    def partners(self, supergame: int) -> np.ndarray:
        """Partner index per subject for a 0-based supergame."""
        out = np.empty(self.n_subjects, dtype=np.int64)
        for a, b in self.pairs[supergame]:
            out[a], out[b] = b, a
        return out


def build_schedule(n_subjects: int = 6, n_supergames: int = 5, rng=None) -> MatchSchedule:
    """Perfect-stranger plan from the circle method.

    Subject ``n-1`` stays fixed while the others rotate; each rotation is
    one perfect matching of the complete graph. With ``rng`` the subject
    labels are shuffled first.
    """
    if n_subjects < 2 or n_subjects % 2:
        raise ValueError(f"need an even number of subjects >= 2, got {n_subjects}")
    if not 1 <= n_supergames <= n_subjects - 1:
        raise ValueError(
            f"{n_subjects} subjects admit at most {n_subjects - 1} perfect-stranger "
            f"supergames, got {n_supergames}"
        )
    labels = np.arange(n_subjects)
    if rng is not None:
        labels = rng.permutation(n_subjects)
    m = n_subjects - 1
    rounds = []
    for r in range(n_supergames):
        ring = [(r + i) % m for i in range(m)]
        pairs = [(ring[0], m)]
        for i in range(1, n_subjects // 2):
            pairs.append((ring[i], ring[m - i]))
        rounds.append(
            tuple(tuple(sorted((int(labels[a]), int(labels[b])))) for a, b in pairs)
        )
    return MatchSchedule(n_subjects, n_supergames, tuple(rounds))


def supergame_length(delta: float, rng) -> int:
    """Realised number of rounds: round 1 always, then continue while
    ``u <= delta`` for fresh uniforms ``u``."""
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"continuation probability must lie in [0, 1), got {delta!r}")
    length = 1
    while rng.random() <= delta:
        length += 1
    return length


def select_strategy(game: StagePayoffs, delta: float, belief: float) -> StrategyKind:
    """Grim iff ``belief`` reaches the cooperation threshold (ties pick grim)."""
    p_star = cooperation_threshold(normalize(game), delta)
    return StrategyKind.GRIM if belief >= p_star else StrategyKind.ALWAYS_DEFECT


_REJECTION_MIN_ACCEPT = 0.01
_MIN_MASS = 1e-12


@dataclass(frozen=True)
class BeliefModel:
    """Normal beliefs (percent) truncated to [0, 100] by rejection.

    When less than 1% of the parent mass lies in the interval the draw
    switches to inverse-CDF sampling, which targets the same distribution.

    Parameters are given for the first and the final supergame; the ones in
    between are linearly interpolated unless ``per_supergame`` overrides them.
    """

    mean_first: float
    sd_first: float
    mean_final: float
    sd_final: float
    per_supergame: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        for v in (self.sd_first, self.sd_final):
            if v < 0:
                raise ValueError("belief sd must be non-negative")

    @classmethod
    def constant(cls, mean: float, sd: float = 0.0) -> "BeliefModel":
        return cls(mean, sd, mean, sd)

    def params(self, supergame: int, n_supergames: int) -> tuple[float, float]:
        """(mean, sd) for a 1-based supergame."""
        if self.per_supergame is not None:
            return self.per_supergame[supergame - 1]
        w = 0.0 if n_supergames == 1 else (supergame - 1) / (n_supergames - 1)
        return (
            (1 - w) * self.mean_first + w * self.mean_final,
            (1 - w) * self.sd_first + w * self.sd_final,
        )

    def draw(self, supergame: int, n_supergames: int, size: int, rng) -> np.ndarray:
        mean, sd = self.params(supergame, n_supergames)
        if sd == 0.0:
            return np.full(size, min(max(mean, 0.0), 100.0))
        parent = NormalDist(mean, sd)
        lo, hi = parent.cdf(0.0), parent.cdf(100.0)
        if hi - lo < _MIN_MASS:
            raise ValueError(f"N({mean:g}, {sd:g}) puts almost no mass on [0, 100]")
        if hi - lo < _REJECTION_MIN_ACCEPT:
            # rejection would stall; invert the CDF on the admissible slice,
            # mirrored so the slice sits in the lower tail where cdf is precise
            flip = mean > 50.0
            mirror = NormalDist(100.0 - mean, sd) if flip else parent
            lo, hi = mirror.cdf(0.0), mirror.cdf(100.0)
            u = lo + (hi - lo) * rng.random(size)
            x = np.clip([mirror.inv_cdf(min(max(v, 1e-300), 1.0 - 1e-16)) for v in u],
                        0.0, 100.0)
            return 100.0 - x if flip else x
        out = rng.normal(mean, sd, size)
        bad = (out < 0.0) | (out > 100.0)
        while bad.any():
            out[bad] = rng.normal(mean, sd, int(bad.sum()))
            bad = (out < 0.0) | (out > 100.0)
        return out


# Means and sds of the beliefs elicited in the lab sessions (first, final supergame).
LAB_BELIEFS = {
    "NoComm70": BeliefModel(54.59, 31.16, 40.56, 28.08),
    "NoComm0": BeliefModel(35.42, 29.37, 15.88, 25.51),
    "Comm70": BeliefModel(81.51, 23.83, 81.80, 23.25),
    "Comm0": BeliefModel(84.99, 17.45, 68.33, 37.76),
}
# 30 subjects in three treatments, 42 in NoComm0
LAB_GRAPHS = {"NoComm70": 5, "NoComm0": 7, "Comm70": 5, "Comm0": 5}


@dataclass(frozen=True)
class TreatmentConfig:
    name: str
    payoffs: StagePayoffs
    communication: bool
    belief_model: BeliefModel
    delta: float = 0.75
    n_graphs: int = 5
    rng_seed: int | tuple[int, ...] = 0
    n_subjects: int = 6
    n_supergames: int = 5
    strategies: tuple[StrategyKind, ...] = (StrategyKind.GRIM, StrategyKind.ALWAYS_DEFECT)
    elicit_supergames: tuple[int, ...] | None = None

    def validate(self) -> None:
        check = validate_pd(self.payoffs)
        if not check:
            raise ValueError(f"{self.name}: payoffs are not a prisoner's dilemma "
                             f"(violated: {', '.join(check.violations)})")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"{self.name}: delta must lie in (0, 1)")
        if self.n_graphs < 1:
            raise ValueError(f"{self.name}: need at least one matching graph")
        if self.name in TREATMENT_DESIGN:
            comm, s = TREATMENT_DESIGN[self.name]
            if comm != self.communication or s != self.payoffs.S:
                raise ValueError(
                    f"{self.name}: expected communication={comm}, S={s:g}; got "
                    f"communication={self.communication}, S={self.payoffs.S:g}"
                )
        # raises for odd subject counts or too many supergames
        build_schedule(self.n_subjects, self.n_supergames)

    @property
    def elicited(self) -> tuple[int, ...]:
        if self.elicit_supergames is not None:
            return self.elicit_supergames
        return tuple(sorted({1, self.n_supergames}))

    @property
    def treatment_index(self) -> int:
        if self.name in CANONICAL_TREATMENTS:
            return CANONICAL_TREATMENTS.index(self.name)
        return 1000 + zlib.crc32(self.name.encode("utf-8"))


def canonical_config(name: str, *, n_graphs: int | None = None, seed: int = 0,
                     delta: float = 0.75) -> TreatmentConfig:
    comm, s = TREATMENT_DESIGN[name]
    return TreatmentConfig(
        name=name,
        payoffs=StagePayoffs(100.0, 90.0, 80.0, s),
        communication=comm,
        belief_model=LAB_BELIEFS[name],
        delta=delta,
        n_graphs=LAB_GRAPHS[name] if n_graphs is None else n_graphs,
        rng_seed=seed,
    )


def canonical_suite(seed: int = 0, n_graphs: int | None = None) -> list[TreatmentConfig]:
    return [canonical_config(n, n_graphs=n_graphs, seed=seed) for n in CANONICAL_TREATMENTS]


def graph_rng(seed, treatment_index: int, graph_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(treatment_index, graph_index))
    return np.random.Generator(np.random.PCG64(ss))


def _simulate_graph(config: TreatmentConfig, graph: int, threshold_pct: float) -> dict:
    rng = graph_rng(config.rng_seed, config.treatment_index, graph)
    n, n_sg = config.n_subjects, config.n_supergames
    schedule = build_schedule(n, n_sg, rng)
    pay = config.payoffs
    coop_kind = (StrategyKind.GRIM if StrategyKind.GRIM in config.strategies
                 else StrategyKind.TIT_FOR_TAT)
    cols = {k: [] for k in ("supergame", "round", "subject", "partner",
                            "action", "partner_action", "payoff", "belief")}
    subjects = np.arange(n)
    for sg in range(1, n_sg + 1):
        beliefs = config.belief_model.draw(sg, n_sg, n, rng)
        length = supergame_length(config.delta, rng)
        # belief >= 100 p*  <=>  grim (weak inequality picks grim)
        kinds = np.where(beliefs >= threshold_pct, coop_kind, StrategyKind.ALWAYS_DEFECT)
        partners = schedule.partners(sg - 1)
        acts = kernels.play_supergame(kinds.astype(np.int64), partners, length)
        other = acts[partners]
        payoff = np.where(acts == 1,
                          np.where(other == 1, pay.R, pay.S),
                          np.where(other == 1, pay.T, pay.P))
        elicited = sg in config.elicited
        for r in range(length):
            cols["supergame"].append(np.full(n, sg))
            cols["round"].append(np.full(n, r + 1))
            cols["subject"].append(subjects)
            cols["partner"].append(partners)
            cols["action"].append(acts[:, r])
            cols["partner_action"].append(other[:, r])
            cols["payoff"].append(payoff[:, r])
            cols["belief"].append(beliefs if (elicited and r == 0) else np.full(n, np.nan))
    out = {k: np.concatenate(v) for k, v in cols.items()}
    out["graph"] = np.full(out["subject"].shape, graph)
    return out


def run_session(config: TreatmentConfig, session: int = 1) -> pd.DataFrame:
    """Simulate every matching graph of one treatment.

    Returns one row per subject and round with the columns of
    :data:`CSV_COLUMNS`; ``action``/``partner_action`` are 1 for cooperate.
    Subject ids are unique within a treatment (``graph * n_subjects + i``).
    """
    config.validate()
    if StrategyKind.GRIM not in config.strategies and StrategyKind.TIT_FOR_TAT not in config.strategies:
        raise ValueError(f"{config.name}: strategy set needs a cooperative strategy")
    p_star = cooperation_threshold(normalize(config.payoffs), config.delta)
    threshold_pct = 100.0 * p_star
    frames = []
    for graph in range(1, config.n_graphs + 1):
        cols = _simulate_graph(config, graph, threshold_pct)
        offset = (graph - 1) * config.n_subjects + 1
        cols["subject"] = cols["subject"] + offset
        cols["partner"] = cols["partner"] + offset
        frames.append(pd.DataFrame(cols))
    df = pd.concat(frames, ignore_index=True)
    df.insert(0, "session", session)
    df.insert(1, "treatment", config.name)
    return sort_dataset(df[CSV_COLUMNS])


def sort_dataset(df: pd.DataFrame) -> pd.DataFrame:
    keys = ["session", "graph", "supergame", "round", "subject"]
    return df.sort_values(keys, kind="mergesort").reset_index(drop=True)


def run_treatment_suite(configs: list[TreatmentConfig]) -> pd.DataFrame:
    """Run each config as its own session (numbered from 1) and stack them."""
    names = [c.name for c in configs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"duplicate treatment names: {', '.join(dupes)}")
    frames = [run_session(c, session=i) for i, c in enumerate(configs, start=1)]
    if not frames:
        return pd.DataFrame(columns=CSV_COLUMNS)
    return sort_dataset(pd.concat(frames, ignore_index=True))


def with_seed(configs: list[TreatmentConfig], seed: int) -> list[TreatmentConfig]:
    return [replace(c, rng_seed=seed) for c in configs]
