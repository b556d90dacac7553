"""Summary tables and rank tests over simulated or lab-format datasets.

A dataset is a :class:`pandas.DataFrame` with the simulator's CSV columns;
``action`` is 1 for cooperate. Tests take samples that the caller has
already aggregated to the chosen unit (matching graph by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import kernels

KNOWN_TREATMENTS = ("NoComm70", "NoComm0", "Comm70", "Comm0")


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    statistic: float
    p_value: float
    n_a: int
    n_b: int
    alternative: str
    unit: str = "graph"
    degenerate: bool = False
    z: float = float("nan")


def _check_treatments(data: pd.DataFrame, allowed) -> None:
    if allowed is None:
        return
    unknown = sorted(set(data["treatment"]) - set(allowed))
    if unknown:
        raise ValueError(f"unknown treatment labels: {', '.join(map(str, unknown))}")


def _unit_keys(unit: str) -> list[str]:
    if unit == "graph":
        return ["treatment", "graph"]
    if unit == "subject":
        return ["treatment", "graph", "subject"]
    raise ValueError(f"aggregation unit must be 'graph' or 'subject', got {unit!r}")


def unit_cooperation(data: pd.DataFrame, rounds: str = "first", unit: str = "graph",
                     supergames=None) -> pd.DataFrame:
    """Cooperation rate per unit and supergame.

    ``supergames=None`` keeps every supergame as its own column group;
    passing a collection pools those supergames into one rate per unit.
    """
    if rounds not in ("first", "all"):
        raise ValueError("rounds must be 'first' or 'all'")
    d = data if rounds == "all" else data[data["round"] == 1]
    keys = _unit_keys(unit)
    if supergames is None:
        return d.groupby(keys + ["supergame"], sort=True)["action"].mean().reset_index()
    d = d[d["supergame"].isin(list(supergames))]
    return d.groupby(keys, sort=True)["action"].mean().reset_index()


def cooperation_table(data: pd.DataFrame, rounds: str = "first",
                      treatments=KNOWN_TREATMENTS) -> pd.DataFrame:
    """Mean and sd across matching graphs of graph-level cooperation rates.

    One row per (treatment, supergame) plus a ``supergame == "all"`` row
    per treatment that averages each graph over its supergames first.
    """
    if data.empty:
        raise ValueError("dataset is empty")
    _check_treatments(data, treatments)
    per_graph = unit_cooperation(data, rounds, "graph")
    rows = []
    for (treat, sg), grp in per_graph.groupby(["treatment", "supergame"], sort=True):
        rows.append(_mean_sd(treat, sg, grp["action"].to_numpy()))
    overall = per_graph.groupby(["treatment", "graph"])["action"].mean().reset_index()
    for treat, grp in overall.groupby("treatment", sort=True):
        rows.append(_mean_sd(treat, "all", grp["action"].to_numpy()))
    table = pd.DataFrame(rows, columns=["treatment", "supergame", "mean", "sd", "n_graphs"])
    return _order_treatments(table)


def _mean_sd(treat, sg, values: np.ndarray):
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return treat, sg, float(np.mean(values)), sd, int(values.size)


def _order_treatments(table: pd.DataFrame) -> pd.DataFrame:
    order = {t: i for i, t in enumerate(KNOWN_TREATMENTS)}
    key = table["treatment"].map(lambda t: order.get(t, len(order)))
    sg_key = table["supergame"].map(lambda s: 10**9 if s == "all" else int(s))
    return (table.assign(_k=key, _s=sg_key)
            .sort_values(["_k", "treatment", "_s"], kind="mergesort")
            .drop(columns=["_k", "_s"]).reset_index(drop=True))


def first_round_beliefs(data: pd.DataFrame) -> pd.DataFrame:
    """Round-1 rows that carry an elicited belief."""
    return data[(data["round"] == 1) & data["belief"].notna()]


def belief_summary(data: pd.DataFrame) -> pd.DataFrame:
    """Per treatment and elicitation supergame: belief mean/sd/median and the
    round-1 action counts strictly above and strictly below the median.

    Beliefs equal to the median fall on neither side and are counted in
    ``at_median``.
    """
    b = first_round_beliefs(data)
    if b.empty:
        raise ValueError("dataset contains no elicited beliefs")
    rows = []
    for (treat, sg), grp in b.groupby(["treatment", "supergame"], sort=True):
        beliefs = grp["belief"].to_numpy(dtype=float)
        coop = grp["action"].to_numpy() == 1
        med = float(np.median(beliefs))
        above, below = beliefs > med, beliefs < med
        rows.append(dict(
            treatment=treat, supergame=int(sg), n=int(beliefs.size),
            mean=float(beliefs.mean()),
            sd=float(np.std(beliefs, ddof=1)) if beliefs.size > 1 else 0.0,
            median=med,
            above_coop=int((above & coop).sum()), above_defect=int((above & ~coop).sum()),
            below_coop=int((below & coop).sum()), below_defect=int((below & ~coop).sum()),
            at_median=int((beliefs == med).sum()),
        ))
    return _order_treatments(pd.DataFrame(rows))


def unit_beliefs(data: pd.DataFrame, supergame: int, unit: str = "graph") -> pd.DataFrame:
    b = first_round_beliefs(data)
    b = b[b["supergame"] == supergame]
    return b.groupby(_unit_keys(unit), sort=True)["belief"].mean().reset_index()


def midranks(values) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _check_alternative(alternative: str) -> None:
    if alternative not in ("greater", "less"):
        raise ValueError("alternative must be 'greater' (a > b) or 'less' (a < b)")


def wmw_one_sided(sample_a, sample_b, alternative: str = "greater",
                  unit: str = "graph") -> TestResult:
    """One-sided Wilcoxon-Mann-Whitney test, normal approximation.

    ``U`` counts pairs with ``a > b`` (ties count one half). The variance is
    tie-corrected and a continuity correction of 0.5 is applied towards the
    null. ``alternative='greater'`` tests ``a`` stochastically larger.
    """
    _check_alternative(alternative)
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    ranks = midranks(np.concatenate([a, b]))
    u = float(ranks[:n].sum() - n * (n + 1) / 2.0)
    big_n = n + m
    _, ties = np.unique(ranks, return_counts=True)
    tie_term = float((ties ** 3 - ties).sum()) / (big_n * (big_n - 1)) if big_n > 1 else 0.0
    var = n * m / 12.0 * ((big_n + 1) - tie_term)
    if var <= 0.0:
        return TestResult(u, 1.0, n, m, alternative, unit, degenerate=True)
    mu = n * m / 2.0
    if alternative == "greater":
        z = (u - mu - 0.5) / math.sqrt(var)
    else:
        z = (mu - u - 0.5) / math.sqrt(var)
    p = min(1.0, max(0.0, _norm_sf(z)))
    return TestResult(u, p, n, m, alternative, unit, degenerate=False, z=z)


def wmw_exact(sample_a, sample_b, alternative: str = "greater") -> float:
    """Permutation p-value by full enumeration of the pooled midranks.

    Meant as an oracle for small samples (``n + m <= 20``).
    """
    _check_alternative(alternative)
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    n = a.size
    if n == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if n + b.size > 20:
        raise ValueError("exact enumeration is limited to n + m <= 20")
    ranks = midranks(np.concatenate([a, b]))
    n_ge, n_le, total = kernels.mwu_exact_counts(ranks, n, float(ranks[:n].sum()))
    return (n_ge if alternative == "greater" else n_le) / total


def cohens_kappa(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two raters over the same items."""
    a, b = list(labels_a), list(labels_b)
    if len(a) != len(b):
        raise ValueError("label vectors must have equal length")
    if not a:
        raise ValueError("label vectors are empty")
    n = len(a)
    cats = sorted(set(a) | set(b), key=repr)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    p_e = sum((a.count(c) / n) * (b.count(c) / n) for c in cats)
    if p_e == 1.0:
        # both raters used one and the same label throughout
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def confusion_to_labels(matrix) -> tuple[list[int], list[int]]:
    """Expand a square confusion matrix (rows: rater A) into label vectors."""
    mat = np.asarray(matrix, dtype=int)
    a, b = [], []
    for i, j in np.ndindex(mat.shape):
        a += [i] * int(mat[i, j])
        b += [j] * int(mat[i, j])
    return a, b


# (higher, lower) under the alternative
COMPARISONS = (
    ("Comm70", "Comm0"),
    ("NoComm70", "NoComm0"),
    ("Comm70", "NoComm70"),
    ("Comm0", "NoComm0"),
)
BELIEF_COMPARISONS = (("Comm70", "NoComm70"), ("Comm0", "NoComm0"))


def _samples(frame: pd.DataFrame, column: str, treat: str) -> np.ndarray:
    return frame.loc[frame["treatment"] == treat, column].to_numpy(dtype=float)


def hypothesis_tests(data: pd.DataFrame, unit: str = "graph") -> pd.DataFrame:
    """One-sided WMW tests for the treatment comparisons.

    Cooperation (first round and all rounds) is tested in the first, the
    final and pooled over all supergames; beliefs in every elicited
    supergame. Comparisons with a missing treatment are skipped.
    """
    present = set(data["treatment"])
    sgs = sorted(data["supergame"].unique())
    first, final = int(sgs[0]), int(sgs[-1])
    scopes = {"first": [first], "final": [final], "all": sgs}
    rows = []
    for rounds in ("first", "all"):
        for scope, sg_list in scopes.items():
            agg = unit_cooperation(data, rounds, unit, supergames=sg_list)
            for hi, lo in COMPARISONS:
                if hi in present and lo in present:
                    res = wmw_one_sided(_samples(agg, "action", hi), _samples(agg, "action", lo),
                                        "greater", unit)
                    rows.append(_test_row(f"cooperation_{rounds}_round" if rounds == "first"
                                          else "cooperation_all_rounds", scope, hi, lo, res))
    elicited = sorted(first_round_beliefs(data)["supergame"].unique())
    for sg in elicited:
        scope = "first" if sg == first else "final" if sg == final else f"supergame_{sg}"
        agg = unit_beliefs(data, int(sg), unit)
        for hi, lo in BELIEF_COMPARISONS:
            if hi in present and lo in present:
                res = wmw_one_sided(_samples(agg, "belief", hi), _samples(agg, "belief", lo),
                                    "greater", unit)
                rows.append(_test_row("belief", scope, hi, lo, res))
    return pd.DataFrame(rows)


def _test_row(measure, scope, hi, lo, res: TestResult) -> dict:
    return dict(measure=measure, supergames=scope, higher=hi, lower=lo,
                U=res.statistic, p_value=res.p_value, n_higher=res.n_a, n_lower=res.n_b,
                unit=res.unit, degenerate=res.degenerate)

