"""Scenario files and the built-in experiment presets.

A scenario file is INI text.  An optional ``[defaults]`` section supplies
values for every other section; each remaining section describes one
scenario, or a small grid when ``structure``, ``learn_prob`` or ``tau`` hold
comma-separated lists::

    [defaults]
    replications = 200

    [main]
    structure = decomposed, interdependent
    learn_prob = 0, 0.25, 0.5
    tau = none, 10, 1

Keys mirror the fields of :class:`~multilevel_adaptation.engine.Scenario`;
``matrix_file`` loads a custom interdependence pattern relative to the file.
"""
from __future__ import annotations

import configparser
import itertools
from dataclasses import fields, replace
from pathlib import Path

from .engine import Scenario
from .landscape import InterdependenceMatrix

PRESETS = ("paper-main", "paper-roll", "paper-individualism", "paper-collectivism", "custom")
LEARNING_LEVELS = (0.0, 0.25, 0.5)
LIFETIMES = (None, 10, 1)

_LIST_KEYS = ("structure", "learn_prob", "tau")
_INT_KEYS = ("k", "n_decisions", "m_subtasks", "p_total", "horizon", "replications", "master_seed")
_FLOAT_KEYS = ("learn_prob", "alpha", "beta")
_STR_KEYS = ("structure", "learning_scope", "event_order")
KNOWN_KEYS = frozenset(_INT_KEYS + _FLOAT_KEYS + _STR_KEYS + ("tau", "matrix_file"))


class ConfigError(ValueError):
    """Invalid scenario file or preset."""


def _grid(structures, alpha: float = 0.5):
    return [
        Scenario(structure=s, k=k, learn_prob=p, tau=tau, alpha=alpha, beta=1.0 - alpha)
        for s, k in structures for tau in LIFETIMES for p in LEARNING_LEVELS
    ]


def preset(name: str) -> list[Scenario]:
    """Expand a named preset into its scenario grid."""
    main = [("decomposed", 3), ("interdependent", 5)]
    if name == "paper-main":
        return _grid(main)
    if name == "paper-roll":
        return _grid([("roll", 3), ("roll", 5)])
    if name == "paper-individualism":
        return _grid(main, alpha=0.75)
    if name == "paper-collectivism":
        return _grid(main, alpha=0.25)
    if name == "custom":
        raise ConfigError("the custom preset needs --config")
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def _convert(section: str, key: str, raw: str, base: Path):
    where = f"[{section}] {key}"
    text = raw.strip()
    try:
        if key == "tau":
            return None if text.lower() in ("none", "") else int(text)
        if key in _INT_KEYS:
            return None if key == "k" and text.lower() == "auto" else int(text, 0)
        if key in _FLOAT_KEYS:
            return float(text)
        if key == "matrix_file":
            return Path(text) if Path(text).is_absolute() else base / text
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from None
    return text


def _section_values(parser, section: str, defaults: dict, base: Path) -> dict:
    values = dict(defaults)
    for key, raw in parser.items(section, raw=True):
        if key not in KNOWN_KEYS:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        if key in _LIST_KEYS:
            values[key] = [_convert(section, key, part, base) for part in raw.split(",")]
        else:
            values[key] = _convert(section, key, raw, base)
    return values


def _expand(section: str, values: dict, m_default: int) -> list[Scenario]:
    values = dict(values)
    matrix_file = values.pop("matrix_file", None)
    if matrix_file is not None:
        try:
            values["matrix"] = InterdependenceMatrix.load(matrix_file, values.get("m_subtasks", m_default))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"[{section}] matrix_file: {exc}") from None
        values.pop("structure", None)
        values.pop("k", None)
    if "alpha" in values and "beta" not in values:
        values["beta"] = 1.0 - values["alpha"]
    elif "beta" in values and "alpha" not in values:
        values["alpha"] = 1.0 - values["beta"]
    lists = {k: values.pop(k) for k in _LIST_KEYS if isinstance(values.get(k), list)}
    out = []
    for combo in itertools.product(*lists.values()):
        try:
            out.append(Scenario(**values, **dict(zip(lists, combo))))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {exc}") from None
    return out


def parse_config(path) -> list[Scenario]:
    """Read a scenario file; errors carry the section and key at fault."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config_text(text, base=path.parent)


def parse_config_text(text: str, base=Path(".")) -> list[Scenario]:
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    base = Path(base)
    defaults = {}
    if parser.has_section("defaults"):
        defaults = _section_values(parser, "defaults", {}, base)
    m_default = next(f.default for f in fields(Scenario) if f.name == "m_subtasks")
    scenarios = []
    for section in parser.sections():
        if section == "defaults":
            continue
        scenarios.extend(_expand(section, _section_values(parser, section, defaults, base), m_default))
    if not scenarios:
        raise ConfigError("no scenarios")
    labels = [s.label for s in scenarios]
    dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
    if dupes:
        raise ConfigError(f"duplicate scenarios: {', '.join(dupes)}")
    return scenarios


def apply_overrides(scenarios, *, seed=None, matrix=None, event_order=None, learning_scope=None):
    """Command-line overrides applied on top of a preset or file."""
    changes = {}
    if seed is not None:
        changes["master_seed"] = seed
    if event_order is not None:
        changes["event_order"] = event_order
    if learning_scope is not None:
        changes["learning_scope"] = learning_scope
    out = []
    for sc in scenarios:
        extra = dict(changes)
        if matrix is not None:
            extra.update(matrix=matrix, structure="custom", k=matrix.k)
        try:
            out.append(replace(sc, **extra))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if matrix is not None:
        # the structure axis collapses onto the file's pattern
        seen, unique = set(), []
        for sc in out:
            if sc.label not in seen:
                seen.add(sc.label)
                unique.append(sc)
        out = unique
    return out
