"""Scenario files: TOML in, TOML out.

Schema (angles in radians)::

    M = 64                   # BS antennas
    K = 2                    # UTs
    N = 4                    # UT antennas, scalar or one entry per UT
    NP = 3                   # paths per UT
    spacing_ratio = 0.5      # optional, d / wavelength
    snr_db = 20.0            # optional
    seed = 0                 # optional
    aoa = [[...], [...]]     # K x NP arrival angles at the UTs
    aod = [[...], [...]]     # K x NP departure angles at the BS
    gain_var = [[...], ...]  # optional, K x NP; defaults to 1/NP per path
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .channel import Scenario, ScenarioError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

REQUIRED = ("M", "K", "N", "NP", "aoa", "aod")
OPTIONAL = ("spacing_ratio", "snr_db", "seed", "gain_var")


def scenario_from_dict(data: dict) -> Scenario:
    problems = [f"{name}: required field is missing" for name in REQUIRED if name not in data]
    unknown = sorted(set(data) - set(REQUIRED) - set(OPTIONAL))
    problems += [f"{name}: unknown field" for name in unknown]
    for name in ("M", "K", "NP", "seed"):
        if name in data and (isinstance(data[name], bool) or not isinstance(data[name], int)):
            problems.append(f"{name}: must be an integer (got {data[name]!r})")
    N = data.get("N")
    if N is not None and not (
        isinstance(N, int) or (isinstance(N, list) and all(isinstance(n, int) for n in N))
    ):
        problems.append(f"N: must be an integer or a list of integers (got {N!r})")
    for name in ("aoa", "aod", "gain_var"):
        if name in data:
            try:
                np.asarray(data[name], dtype=float)
            except (TypeError, ValueError):
                problems.append(f"{name}: must be a K x NP array of numbers")
    if problems:
        raise ScenarioError(problems)
    K, NP = data["K"], data["NP"]
    gain_var = data.get("gain_var")
    if gain_var is None and NP >= 1 and K >= 1:
        gain_var = np.full((K, NP), 1.0 / NP)
    kwargs = {name: data[name] for name in OPTIONAL if name in data}
    kwargs["gain_var"] = gain_var if gain_var is not None else []
    return Scenario(M=data["M"], K=K, N=data["N"], NP=NP,
                    aoa=data["aoa"], aod=data["aod"], **kwargs)


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file.

    Raises
    ------
    ScenarioError
        On syntax errors (with the parser's line/column context) and on
        every violated field constraint.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError([f"{path}: cannot read file ({exc.strerror})"]) from exc
    except UnicodeDecodeError as exc:
        raise ScenarioError([f"{path}: file is not valid UTF-8"]) from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"{path}: parse error: {exc}"]) from exc
    return scenario_from_dict(data)


def _fmt_array(a: np.ndarray) -> str:
    rows = ",\n    ".join("[" + ", ".join(repr(float(x)) for x in row) + "]" for row in a)
    return "[\n    " + rows + ",\n]"


def dump_scenario(s: Scenario) -> str:
    """TOML text that :func:`load_scenario` reads back to an equal scenario."""
    N = s.N[0] if len(set(s.N)) == 1 else list(s.N)
    lines = [
        f"M = {s.M}",
        f"K = {s.K}",
        f"N = {N}",
        f"NP = {s.NP}",
        f"spacing_ratio = {float(s.spacing_ratio)!r}",
        f"snr_db = {float(s.snr_db)!r}",
        f"seed = {int(s.seed)}",
        f"aoa = {_fmt_array(s.aoa)}",
        f"aod = {_fmt_array(s.aod)}",
        f"gain_var = {_fmt_array(s.gain_var)}",
    ]
    return "\n".join(lines) + "\n"


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(dump_scenario(s), encoding="utf-8")
