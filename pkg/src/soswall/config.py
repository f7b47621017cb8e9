"""Run configuration: flat ``key = value`` text with section headers.

Example::

    [model]
    beta = 0.85
    L = 256, 512
    floor = yes

    [run]
    seeds = 1-8
    burn_in = 20L

Command-line ``--set section.key=value`` overrides file values.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .field import VERSION


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    beta: float = 1.0
    L: list = field(default_factory=lambda: [256])
    seeds: list = field(default_factory=lambda: [0])
    sweeps: int = 0
    burn_in: str = "20L"
    init: str = "flatH"           # flat0 | flatH | file:<path>
    boundary: int = 0
    floor: bool = True
    schedule: str = "checkerboard"
    workers: int = 1
    n_max: int = 1
    pairing: str = "NE"
    svg_min_length: int = 100
    output: str = "out"
    tau: str = "directed-walk"    # or a path to a two-column table
    c_inf: str = "estimate"       # a number or "estimate"
    c_inf_samples: int = 20000
    lam: float | None = None      # override lambda(L) directly
    relaxed: float = 0.8
    max_window: float = 3.0
    mu: float | None = None
    interface_d: list = field(default_factory=lambda: [512, 1024, 2048])
    interface_L: list = field(default_factory=lambda: [512, 1024, 2048, 4096, 8192])
    interface_paths: int = 1000
    source: str = "<defaults>"
    text: str = ""

    def burn_in_sweeps(self, L):
        s = str(self.burn_in).strip()
        m = re.fullmatch(r"(\d+)\s*L", s)
        if m:
            return int(m.group(1)) * L
        return int(s)

    def total_sweeps(self, L):
        return self.burn_in_sweeps(L) + self.sweeps

    def digest(self):
        """Hash of the settings that determine results; worker count and output location are excluded."""
        d = asdict(self)
        for k in ("source", "text", "workers", "output"):
            d.pop(k)
        return hashlib.sha256(repr(sorted(d.items())).encode()).hexdigest()

    def provenance(self):
        return {"config_sha256": self.digest(), "code_version": VERSION}


# key -> (section, attribute, parser)
def _int_list(s):
    out = []
    for part in str(s).replace(",", " ").split():
        if "-" in part.strip("-"):
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    return None if str(s).strip().lower() in ("", "none") else float(s)


KEYS = {
    ("model", "beta"): ("beta", float),
    ("model", "l"): ("L", _int_list),
    ("model", "floor"): ("floor", _bool),
    ("model", "boundary"): ("boundary", int),
    ("model", "c_inf"): ("c_inf", str),
    ("model", "c_inf_samples"): ("c_inf_samples", int),
    ("model", "lambda"): ("lam", _opt_float),
    ("model", "tau"): ("tau", str),
    ("run", "seeds"): ("seeds", _int_list),
    ("run", "sweeps"): ("sweeps", int),
    ("run", "burn_in"): ("burn_in", str),
    ("run", "init"): ("init", str),
    ("run", "schedule"): ("schedule", str),
    ("run", "workers"): ("workers", int),
    ("contours", "n_max"): ("n_max", int),
    ("contours", "pairing"): ("pairing", str),
    ("contours", "svg_min_length"): ("svg_min_length", int),
    ("analysis", "relaxed"): ("relaxed", float),
    ("analysis", "max_window"): ("max_window", float),
    ("interface", "mu"): ("mu", _opt_float),
    ("interface", "d"): ("interface_d", _int_list),
    ("interface", "l"): ("interface_L", _int_list),
    ("interface", "paths"): ("interface_paths", int),
    ("output", "dir"): ("output", str),
}


def _line_of(text, section, key):
    cur = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.fullmatch(r"\[(.+)\]", s)
        if m:
            cur = m.group(1).strip().lower()
        elif cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return n
    return None


def _apply(cfg, section, key, value, where):
    spec = KEYS.get((section.lower(), key.lower()))
    if spec is None:
        raise ConfigError(f"{where}: unknown key [{section}] {key}")
    attr, parse = spec
    try:
        setattr(cfg, attr, parse(value))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad value for [{section}] {key}: {exc}") from None
    return attr


def parse_config(text, source="<string>", overrides=()):
    cfg = RunConfig(source=source, text=text)
    origin = {}
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for sec in cp.sections():
        for key, value in cp.items(sec):
            line = _line_of(text, sec.lower(), key)
            where = f"{source}:{line}" if line else source
            origin[_apply(cfg, sec, key, value, where)] = where
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        k, v = item.split("=", 1)
        sec, key = k.split(".", 1)
        origin[_apply(cfg, sec.strip(), key.strip(), v.strip(), f"--set {item}")] = f"--set {item}"
    try:
        validate(cfg)
    except ConfigError as exc:
        where = origin.get(getattr(exc, "attr", None))
        raise ConfigError(f"{where}: {exc}" if where else str(exc)) from None
    return cfg


def load_config(path=None, overrides=()):
    if path is None:
        return parse_config("", "<defaults>", overrides)
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(), str(p), overrides)


def _fail(attr, message):
    exc = ConfigError(message)
    exc.attr = attr
    raise exc


def validate(cfg):
    """Check value ranges and referenced files; errors name the offending field."""
    if not cfg.beta > 0:
        _fail("beta", "beta must be positive")
    if not cfg.L:
        _fail("L", "empty L list")
    if any(v < 1 for v in cfg.L):
        _fail("L", "L values must be positive")
    if len(cfg.L) > 1 and sorted(set(cfg.L)) != list(cfg.L):
        _fail("L", "L list must be strictly increasing")
    if not cfg.seeds:
        _fail("seeds", "empty seed list")
    if cfg.init not in ("flat0", "flatH") and not cfg.init.startswith("file:") and not cfg.init.lstrip("-").isdigit():
        _fail("init", f"init must be flat0, flatH, an integer or file:<path>, got {cfg.init!r}")
    if cfg.init.startswith("file:") and not Path(cfg.init[5:]).exists():
        _fail("init", f"init file not found: {cfg.init[5:]}")
    if cfg.tau != "directed-walk" and not Path(cfg.tau).exists():
        _fail("tau", f"tension table not found: {cfg.tau}")
    if cfg.schedule not in ("checkerboard", "raster"):
        _fail("schedule", "schedule must be checkerboard or raster")
    if cfg.pairing not in ("NE", "NW"):
        _fail("pairing", "pairing must be NE or NW")
    if cfg.c_inf != "estimate":
        try:
            ok = float(cfg.c_inf) > 0
        except ValueError:
            ok = False
        if not ok:
            _fail("c_inf", "c_inf must be a positive number or 'estimate'")
    try:
        cfg.burn_in_sweeps(1)
    except ValueError:
        _fail("burn_in", f"burn_in must be an integer or '<k>L', got {cfg.burn_in!r}")
    return cfg
