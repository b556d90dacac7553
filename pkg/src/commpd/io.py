"""Dataset CSV, treatment config files and run manifests."""

from __future__ import annotations

import configparser
import hashlib
import io
import os
import platform
import re
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .game_theory import StagePayoffs
from .sim_engine import CSV_COLUMNS, BeliefModel, StrategyKind, TreatmentConfig


class ConfigError(ValueError):
    """Invalid configuration or input data (CLI exit code 2)."""


# ---------------------------------------------------------------- dataset CSV

def dataset_to_csv(df: pd.DataFrame) -> str:
    out = df[CSV_COLUMNS].copy()
    out["action"] = np.where(out["action"] == 1, "A", "B")
    out["partner_action"] = np.where(out["partner_action"] == 1, "A", "B")
    out["belief"] = [("" if np.isnan(b) else repr(float(b))) for b in out["belief"]]
    out["payoff"] = [repr(float(p)) for p in out["payoff"]]
    buf = io.StringIO()
    out.to_csv(buf, index=False, lineterminator="\n")
    return buf.getvalue()


_INT_COLS = ("session", "graph", "supergame", "round", "subject", "partner")


def read_dataset(path) -> pd.DataFrame:
    """Parse and validate a dataset CSV; errors name the offending row
    (1-based, header is row 1)."""
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise ConfigError(f"{path}: file is empty") from None
    missing = [c for c in CSV_COLUMNS if c not in raw.columns]
    if missing:
        raise ConfigError(f"{path}: missing columns: {', '.join(missing)}")
    df = pd.DataFrame({"treatment": raw["treatment"]})
    for col in _INT_COLS:
        vals = pd.to_numeric(raw[col], errors="coerce")
        bad = vals.isna() | (vals != vals.round())
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0]) + 2
            raise ConfigError(f"{path}: row {row}: column {col!r} must be an integer, "
                              f"got {raw[col].iloc[row - 2]!r}")
        df[col] = vals.astype(np.int64)
    for col in ("action", "partner_action"):
        ok = raw[col].isin(["A", "B"])
        if not ok.all():
            row = int(np.flatnonzero(~ok.to_numpy())[0]) + 2
            raise ConfigError(f"{path}: row {row}: column {col!r} must be A or B, "
                              f"got {raw[col].iloc[row - 2]!r}")
        df[col] = (raw[col] == "A").astype(np.int8)
    pay = pd.to_numeric(raw["payoff"], errors="coerce")
    if pay.isna().any():
        row = int(np.flatnonzero(pay.isna().to_numpy())[0]) + 2
        raise ConfigError(f"{path}: row {row}: payoff must be numeric")
    df["payoff"] = pay.astype(float)
    blank = raw["belief"].str.strip() == ""
    bel = pd.to_numeric(raw["belief"].where(~blank), errors="coerce")
    bad = (~blank & bel.isna()) | (bel < 0) | (bel > 100)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        raise ConfigError(f"{path}: row {row}: belief must be empty or a number in [0, 100]")
    df["belief"] = bel.astype(float)
    return df[CSV_COLUMNS]


# ---------------------------------------------------------------- config files

_REQUIRED = ("T", "R", "P", "S", "delta", "communication", "graphs",
             "belief_mean_sg1", "belief_sd_sg1", "belief_mean_sg5", "belief_sd_sg5")
_OPTIONAL = ("name", "seed", "subjects", "supergames", "tit_for_tat")


def _key_line(text: str, section: str, key: str) -> int | None:
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"^{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return lineno
    return None


def parse_config(text: str, source: str = "<config>", master_seed: int | None = None
                 ) -> list[TreatmentConfig]:
    """One ``[section]`` per treatment with ``key = value`` lines.

    A section-level ``seed`` is mixed with ``master_seed`` as extra entropy,
    so one treatment can be re-drawn without touching the others.
    """
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    configs = []
    for section in cp.sections():
        sec = cp[section]

        def where(key, section=section):
            line = _key_line(text, section, key)
            return f"{source}:{line}" if line else f"{source}[{section}]"

        for key in sec:
            if key not in _REQUIRED and key not in _OPTIONAL:
                raise ConfigError(f"{where(key)}: unknown key {key!r}")
        for key in _REQUIRED:
            if key not in sec:
                raise ConfigError(f"{source}[{section}]: missing key {key!r}")

        def num(key, cast=float, section=section):
            try:
                return cast(sec[key])
            except ValueError:
                raise ConfigError(f"{where(key)}: {key} = {sec[key]!r} is not a valid "
                                  f"{cast.__name__}") from None

        def flag(key, default=False):
            if key not in sec:
                return default
            try:
                return sec.getboolean(key)
            except ValueError:
                raise ConfigError(f"{where(key)}: {key} must be true/false") from None

        if "seed" in sec:
            seed = num("seed", int) if master_seed is None else (master_seed, num("seed", int))
        elif master_seed is not None:
            seed = master_seed
        else:
            raise ConfigError(f"{source}[{section}]: no seed given (use --seed or a seed key)")
        strategies = (StrategyKind.GRIM, StrategyKind.ALWAYS_DEFECT)
        if flag("tit_for_tat"):
            strategies = (StrategyKind.TIT_FOR_TAT, StrategyKind.ALWAYS_DEFECT)
        try:
            cfg = TreatmentConfig(
                name=sec.get("name", section).strip(),
                payoffs=StagePayoffs(num("T"), num("R"), num("P"), num("S")),
                communication=flag("communication"),
                belief_model=BeliefModel(num("belief_mean_sg1"), num("belief_sd_sg1"),
                                         num("belief_mean_sg5"), num("belief_sd_sg5")),
                delta=num("delta"),
                n_graphs=num("graphs", int),
                rng_seed=seed,
                n_subjects=num("subjects", int) if "subjects" in sec else 6,
                n_supergames=num("supergames", int) if "supergames" in sec else 5,
                strategies=strategies,
            )
            cfg.validate()
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}[{section}]: {exc}") from None
        configs.append(cfg)
    if not configs:
        raise ConfigError(f"{source}: no treatment sections")
    return configs


def load_config(path, master_seed: int | None = None) -> list[TreatmentConfig]:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path), master_seed)


def format_config(configs: list[TreatmentConfig]) -> str:
    lines = []
    for c in configs:
        bm = c.belief_model
        lines += [
            f"[{c.name}]",
            f"T = {c.payoffs.T:g}", f"R = {c.payoffs.R:g}",
            f"P = {c.payoffs.P:g}", f"S = {c.payoffs.S:g}",
            f"delta = {c.delta:g}",
            f"communication = {'true' if c.communication else 'false'}",
            f"graphs = {c.n_graphs}",
            f"belief_mean_sg1 = {bm.mean_first:g}", f"belief_sd_sg1 = {bm.sd_first:g}",
            f"belief_mean_sg5 = {bm.mean_final:g}", f"belief_sd_sg5 = {bm.sd_final:g}",
            "",
        ]
    return "\n".join(lines)


# ---------------------------------------------------------------- outputs

def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_outputs_atomically(files: dict[Path, bytes]) -> None:
    """Write every file via a temp sibling and rename only once all of them
    are on disk, so a failure leaves no partial outputs behind."""
    staged = []
    try:
        for path, data in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            Path(tmp).unlink(missing_ok=True)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def manifest_text(command: str, seed, config_hash: str, rng: str, outputs: dict[str, str],
                  started: datetime, extra: dict | None = None) -> str:
    from . import __version__, kernels

    entries = {
        "command": command,
        "config_hash": config_hash,
        "master_seed": seed,
        "rng_algorithm": rng,
        "commpd_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "numpy_version": np.__version__,
        "pandas_version": pd.__version__,
        "python_version": platform.python_version(),
    }
    entries.update(extra or {})
    for name, digest in sorted(outputs.items()):
        entries[f"output.{name}"] = f"sha256:{digest}"
    entries["started_utc"] = started.isoformat(timespec="seconds")
    entries["finished_utc"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return "".join(f"{k} = {v}\n" for k, v in entries.items())


def read_manifest(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def format_table(df: pd.DataFrame, decimals: int = 4) -> str:
    """Aligned plain-text rendering with fixed decimals for floats."""
    cols = list(df.columns)
    cells = [[str(c) for c in cols]]
    for row in df.itertuples(index=False):
        out = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                out.append(f"{v:.{decimals}f}")
            else:
                out.append(str(v))
        cells.append(out)
    widths = [max(len(r[i]) for r in cells) for i in range(len(cols))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)
