"""Run configuration in a flat dotted-key text format.

One assignment per line, ``section.key = value``; ``#`` starts a comment.
Values are Python literals (numbers, quoted strings, lists, True/False,
None); an unquoted word is read as a string.  All violations are collected
and reported together.
"""
from __future__ import annotations

import ast
import difflib
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .field import CutoffSpec
from .params import ModelParams
from .potentials import KINDS, PotentialSpec, load_user_table
from .stochastic import PathConfig

SEED_ENV = "SRPFMC_SEED"
NON_RESULT_KEYS = ("sampling.workers",)

_num = (int, float)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v):
    return isinstance(v, _num) and not isinstance(v, bool) and math.isfinite(v)


def _pos(v):
    return _is_real(v) and v > 0


def _nonneg(v):
    return _is_real(v) and v >= 0


def _pos_int(v):
    return _is_int(v) and v >= 1


def _real_list(v):
    return isinstance(v, (list, tuple)) and len(v) > 0 and all(_is_real(x) for x in v)


def _opt(check):
    return lambda v: v is None or check(v)


# key -> (default, check, description of a valid value)
SCHEMA = {
    "model.d": (3, _pos_int, "a positive integer"),
    "model.m": (1.0, _nonneg, "a real >= 0"),
    "model.alpha": (0.0, _is_real, "a real number"),
    "paths.t": (1.0, _pos, "a positive real"),
    "paths.n_slabs": (32, _pos_int, "a positive integer"),
    "paths.n_substeps": (8, _pos_int, "a positive integer"),
    "paths.brownian_time_cap": (None, _opt(_pos), "a positive real or None"),
    "potential.kind": ("zero", lambda v: v in KINDS, "one of " + ", ".join(KINDS)),
    "potential.omega0": (1.0, _is_real, "a real number"),
    "potential.g": (0.0, _is_real, "a real number"),
    "potential.a": (1.0, _pos, "a positive real"),
    "potential.depth": (0.0, _is_real, "a real number"),
    "potential.width": (1.0, _pos, "a positive real"),
    "potential.floor": (1e6, _pos, "a positive real"),
    "potential.table": (None, _opt(lambda v: isinstance(v, str)), "a file path"),
    "cutoff.profile": ("sharp", lambda v: v in ("sharp", "gaussian"), "sharp or gaussian"),
    "cutoff.lambda": (1.0, _pos, "a positive real"),
    "cutoff.sigma": (1.0, _pos, "a positive real"),
    "cutoff.norm": ((2.0 * math.pi) ** -1.5, _pos, "a positive real"),
    "sampling.n_samples": (10000, lambda v: _is_int(v) and v >= 2, "an integer >= 2"),
    "sampling.master_seed": (None, _opt(lambda v: _is_int(v) and 0 <= v < 2 ** 64), "an integer in [0, 2^64)"),
    "sampling.workers": (1, _pos_int, "a positive integer"),
    "output.format": ("json", lambda v: v in ("json", "csv"), "json or csv"),
    "output.path": (None, _opt(lambda v: isinstance(v, str)), "a file path"),
    "output.plot_dir": (None, _opt(lambda v: isinstance(v, str)), "a directory path"),
    # per-subcommand knobs; each subcommand documents which ones it reads
    "run.t_grid": (None, _opt(_real_list), "a list of reals"),
    "run.u_grid": (None, _opt(_real_list), "a list of reals"),
    "run.x_grid": (None, _opt(_real_list), "a list of reals"),
    "run.x": (None, _opt(_real_list), "a point as a list of reals"),
    "run.p": (None, _opt(_real_list), "a momentum as a list of reals"),
    "run.beta": (None, _opt(_is_real), "a real number"),
    "run.betas": (None, _opt(_real_list), "a list of reals"),
    "run.tau": (None, _opt(_nonneg), "a real >= 0"),
    "run.r": (None, _opt(_real_list), "a list of radii"),
    "run.dt": (None, _opt(_pos), "a positive real"),
    "run.split": (None, _opt(lambda v: _real_list(v) and len(v) == 2), "a pair [s, t]"),
    "run.R": (None, _opt(_pos), "a positive real"),
    "run.energy": (None, _opt(_is_real), "a real number"),
    "run.xi_shell": (None, _opt(lambda v: _real_list(v) and len(v) == 2 and 0 <= v[0] < v[1]), "a pair [k_in, k_out]"),
    "run.xi_component": (0, lambda v: v in (0, 1, 2), "0, 1 or 2"),
    "run.L": (None, _opt(_pos), "a positive real"),
    "run.n_grid": (None, _opt(lambda v: _is_int(v) and v >= 8 and not v & (v - 1)), "a power of two >= 8"),
    "run.k_eigs": (1, _pos_int, "a positive integer"),
    "run.tau_max": (None, _opt(_pos), "a positive real"),
    "run.r_max": (None, _opt(_pos), "a positive real"),
    "run.table_path": (None, _opt(lambda v: isinstance(v, str)), "a file path"),
    "run.window_scale": (1.0, _pos, "a positive real"),
    "run.times": (None, _opt(lambda v: _real_list(v) and len(v) == 2 and v[0] < v[1]), "a pair [t0, tn]"),
    "run.event": (None, _opt(lambda v: isinstance(v, (list, tuple)) and all(
        isinstance(e, (list, tuple)) and len(e) == 3 and all(_is_real(x) for x in e) for e in v)),
        "a list of [time, lo, hi] triples"),
    "run.moments": (False, lambda v: isinstance(v, bool), "True or False"),
    "run.scale": ("full", lambda v: v in ("full", "quick"), "full or quick"),
}

_SYNONYMS = {"mass": "m", "dim": "d", "dimension": "d", "coupling": "alpha", "seed": "master_seed",
             "lam": "lambda", "cap": "brownian_time_cap", "samples": "n_samples", "n": "n_samples"}


def suggest(key: str):
    """Closest known key for a misspelt one, or None."""
    hit = difflib.get_close_matches(key, SCHEMA, n=1, cutoff=0.75)
    if hit:
        return hit[0]
    section, _, name = key.partition(".")
    sections = sorted({k.split(".")[0] for k in SCHEMA})
    sec = difflib.get_close_matches(section, sections, n=1, cutoff=0.5)
    if not sec:
        return None
    names = [k.split(".", 1)[1] for k in SCHEMA if k.startswith(sec[0] + ".")]
    name = _SYNONYMS.get(name, name)
    cand = difflib.get_close_matches(name, names, n=1, cutoff=0.5)
    return f"{sec[0]}.{cand[0]}" if cand else None


def _parse_value(text: str):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_text(text: str) -> dict:
    """Raw ``{key: value}`` from the dotted-key format (no validation beyond syntax)."""
    out, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or not key:
            problems.append((f"line {lineno}", "expected 'section.key = value'"))
            continue
        if key in out:
            problems.append((key, f"assigned twice (line {lineno})"))
        out[key] = _parse_value(value)
    if problems:
        raise ConfigError(problems)
    return out


@dataclass(frozen=True)
class RunConfig:
    values: dict
    model: ModelParams
    paths: PathConfig
    seed: int
    workers: int
    n_samples: int
    output: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def digest(self) -> str:
        """Short hash of every value that can change a result (including the seed).

        Worker count and output settings are left out, so the digest, like the
        numbers, does not depend on them.
        """
        kept = {k: v for k, v in self.values.items() if k not in NON_RESULT_KEYS and not k.startswith("output.")}
        blob = json.dumps(kept, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_values(self, **updates) -> "RunConfig":
        merged = {k: v for k, v in self.values.items()}
        merged.update(updates)
        return build_config(merged)


def build_config(raw: dict, env=None) -> RunConfig:
    """Validate a ``{dotted key: value}`` mapping and resolve defaults."""
    env = os.environ if env is None else env
    problems = []
    for key in raw:
        if key not in SCHEMA:
            hint = suggest(key)
            problems.append((key, "unknown key" + (f"; did you mean {hint}?" if hint else "")))
    values = {k: d for k, (d, _, _) in SCHEMA.items()}
    for key, val in raw.items():
        if key not in SCHEMA:
            continue
        if isinstance(val, int) and not isinstance(val, bool) and isinstance(SCHEMA[key][0], float):
            val = float(val)
        if not SCHEMA[key][1](val):
            problems.append((key, f"must be {SCHEMA[key][2]}, got {val!r}"))
        values[key] = val
    if values["sampling.master_seed"] is None and not problems:
        env_seed = env.get(SEED_ENV)
        if env_seed is not None:
            try:
                values["sampling.master_seed"] = int(env_seed)
            except ValueError:
                problems.append((SEED_ENV, f"must be an integer, got {env_seed!r}"))
    if values["sampling.master_seed"] is None:
        values["sampling.master_seed"] = 1
    if problems:
        raise ConfigError(problems)

    # cross-field checks owned by the modules
    if values["model.m"] == 0 and values["paths.brownian_time_cap"] is None:
        problems.append(("paths.brownian_time_cap", "a finite cap is required when model.m = 0"))
    if values["model.alpha"] != 0 and values["model.d"] != 3:
        problems.append(("model.d", "the field coupling (model.alpha != 0) needs d = 3"))
    if values["potential.kind"] == "user_table" and values["potential.table"] is None:
        problems.append(("potential.table", "required when potential.kind = user_table"))
    if problems:
        raise ConfigError(problems)

    table_x = table_v = None
    if values["potential.kind"] == "user_table":
        try:
            loaded = load_user_table(values["potential.table"])
            table_x, table_v = loaded.table_x, loaded.table_v
        except (OSError, ValueError) as exc:
            raise ConfigError([("potential.table", str(exc))]) from None
    try:
        potential = PotentialSpec(kind=values["potential.kind"], omega0=values["potential.omega0"],
                                  g=values["potential.g"], a=values["potential.a"], depth=values["potential.depth"],
                                  width=values["potential.width"], floor=values["potential.floor"],
                                  table_x=None if table_x is None else tuple(table_x),
                                  table_v=None if table_v is None else tuple(table_v))
        cutoff = CutoffSpec(profile=values["cutoff.profile"], lam=values["cutoff.lambda"],
                            sigma=values["cutoff.sigma"], norm=values["cutoff.norm"])
        model = ModelParams(d=values["model.d"], m=values["model.m"], alpha=values["model.alpha"],
                            cutoff=cutoff, potential=potential)
        paths = PathConfig(t=values["paths.t"], n_slabs=values["paths.n_slabs"], n_substeps=values["paths.n_substeps"],
                           m=values["model.m"], d=values["model.d"],
                           brownian_time_cap=values["paths.brownian_time_cap"])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError([("config", str(exc))]) from None
    return RunConfig(values, model, paths, values["sampling.master_seed"], values["sampling.workers"],
                     values["sampling.n_samples"],
                     {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("output.")},
                     {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("run.")})


def parse_config(text: str, env=None) -> RunConfig:
    return build_config(parse_text(text), env)


def load_config(path, env=None) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), env)


def defaults_text() -> str:
    """The schema with its defaults, in the config format itself."""
    lines = []
    for key, (default, _, desc) in SCHEMA.items():
        lines.append(f"# {desc}")
        lines.append(f"{key} = {default!r}")
    return "\n".join(lines) + "\n"
