"""Declarative experiment configs (INI files) for the command-line studies.

Example::

    [circuit]
    device = default        ; default | reference | path to a circuit JSON
    probe = two             ; single | two (default device only)

    [noise]
    visibility = 1.0        ; lists sweep, e.g. 0.6, 0.8
    phase_noise = 0
    overlap = 1.0

    [phases]
    triplets = paper:s1..s10

    [run]
    seed = 0
    repetitions = 30

Unknown sections or keys and out-of-range values are rejected with the
file name and line number of the offending entry.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import CircuitSpec, NoiseConfig, default_device, reference_device
from .experiments import THETA_MODES, PriorConfig
from .optimizer import NMConfig
from .triplets import PREFIX, expand, resolve


class ConfigError(ValueError):
    pass


SCHEMA: dict[str, dict[str, object]] = {
    "circuit": {"device": "default", "probe": "single"},
    "noise": {"visibility": "1.0", "phase_noise": "0.0", "overlap": "1.0"},
    "phases": {"triplets": "", "random": "0", "random_lower": "0", "random_upper": str(math.pi)},
    "run": {"seed": "0", "repetitions": "30", "events": "5000", "probes": "50",
            "analytic": "false", "out": ""},
    "optimizer": {"max_fev": "20", "restarts": "3", "reflect": "1.0", "expand": "2.0",
                  "contract": "0.5", "shrink": "0.5", "init_spread": "1.0", "start": ""},
    "fisher": {"events": "1000, 10000, 100000, 1000000", "theta": ""},
    "estimate": {"modes": "null, variational", "theta": "", "estimator": "mean",
                 "prior": "window", "prior_points": "40", "prior_halfwidth": str(math.pi / 4),
                 "guess_fraction": "0.5", "marginals": "false"},
    "hom": {"overlaps": "1.0, 0.75, 0.5, 0.25, 0.0"},
}


@dataclass(frozen=True)
class Triplet:
    label: str
    phi: tuple[float, ...]


@dataclass(frozen=True)
class ExperimentConfig:
    spec: CircuitSpec
    device: str
    noises: tuple[NoiseConfig, ...]
    triplets: tuple[Triplet, ...]
    seed: int
    repetitions: int
    events: int
    probes: int
    analytic: bool
    out: str
    optimizer: NMConfig
    fisher_events: tuple[int, ...]
    fisher_theta: tuple[float, ...] | None
    modes: tuple[str, ...]
    explicit_theta: dict[str, tuple[float, ...]] | None
    estimator: str
    prior: PriorConfig
    marginals: bool
    overlaps: tuple[float, ...]
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, seed=seed)

    def config_hash(self) -> str:
        """Short digest of the resolved settings (seed and output dir excluded)."""
        payload = {k: v for k, v in self.source.items() if k != "run"}
        payload["run"] = {k: v for k, v in self.source.get("run", {}).items()
                          if k not in ("seed", "out")}
        text = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    lines, section = {}, None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            lines[(section, "")] = n
        elif section and line and line[0] not in "#;":
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            lines.setdefault((section, key), n)
    return lines


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, path: str, lines: dict):
        self.parser = parser
        self.path = path
        self.lines = lines

    def error(self, section: str, key: str, message: str) -> ConfigError:
        n = self.lines.get((section, key)) or self.lines.get((section, ""))
        where = f"{self.path}:{n}" if n else self.path
        return ConfigError(f"{where}: [{section}] {key}: {message}")

    def raw(self, section: str, key: str) -> str:
        default = SCHEMA[section][key]
        if self.parser.has_section(section):
            return self.parser.get(section, key, fallback=default).strip()
        return str(default)

    def parse(self, section: str, key: str, convert, check=None, why: str = ""):
        text = self.raw(section, key)
        try:
            value = convert(text)
        except (ValueError, KeyError) as exc:
            raise self.error(section, key, f"cannot parse {text!r} ({exc})") from None
        if check is not None and not check(value):
            raise self.error(section, key, f"{text!r} out of range; {why}")
        return value


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", text) if p]
    values = tuple(float(p) for p in parts)
    if not all(math.isfinite(v) for v in values):
        raise ValueError("values must be finite")
    return values


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(float(p)) for p in re.split(r"[,\s]+", text) if p)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _words(text: str) -> tuple[str, ...]:
    return tuple(w.strip() for w in text.split(",") if w.strip())


def _device(text: str, probe: str, base: Path) -> CircuitSpec:
    if text == "default":
        return default_device(probe)
    if text == "reference":
        return reference_device()
    path = Path(text)
    if not path.is_absolute():
        path = base / path
    return CircuitSpec.load(path)


def _triplet_items(text: str, p: int) -> list[Triplet]:
    out = []
    for item in (s.strip() for s in text.split(",")):
        if not item:
            continue
        if item.startswith(PREFIX):
            for ref in expand(item):
                out.append(Triplet(ref[len(PREFIX):], tuple(resolve(ref))))
        else:
            phi = _floats(item)
            if len(phi) != p:
                raise ValueError(f"triplet {item!r} needs {p} phases")
            out.append(Triplet("phi" + str(len(out) + 1), phi))
    return out


def _explicit_theta(text: str, p: int, base: Path) -> dict[str, tuple[float, ...]] | None:
    """``theta`` is a list of numbers (shared) or ``file:<theta_opt.csv>`` (per label)."""
    if not text:
        return None
    if text.startswith("file:"):
        from .io import read_csv

        path = Path(text[len("file:"):].strip())
        if not path.is_absolute():
            path = base / path
        _, rows = read_csv(path)
        table = {}
        for row in rows:
            table[row["label"]] = tuple(float(row[f"theta_{i + 1}"]) for i in range(p))
        return table
    theta = _floats(text)
    if len(theta) != p:
        raise ValueError(f"theta needs {p} entries")
    return {"*": theta}


def load_config(path: str | Path | None = None, text: str | None = None) -> ExperimentConfig:
    """Parse and validate a config file (or ``text``); missing keys take defaults."""
    if text is None:
        if path is None:
            text, name, base = "", "<defaults>", Path.cwd()
        else:
            p = Path(path)
            try:
                text = p.read_text()
            except OSError as exc:
                raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from None
            name, base = str(p), p.parent
    else:
        name, base = str(path or "<string>"), Path.cwd()

    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        raise ConfigError(f"{name}: {exc}") from None
    r = _Reader(parser, name, _line_numbers(text))

    for section in parser.sections():
        if section not in SCHEMA:
            raise r.error(section, "", f"unknown section; expected one of {', '.join(SCHEMA)}")
        for key in parser.options(section):
            if key not in SCHEMA[section]:
                raise r.error(section, key, f"unknown key; expected one of {', '.join(SCHEMA[section])}")

    device_name = r.raw("circuit", "device")
    probe = r.parse("circuit", "probe", str, lambda v: v in ("single", "two"), "use single or two")
    try:
        spec = _device(device_name, probe, base)
    except (OSError, ValueError, KeyError) as exc:
        raise r.error("circuit", "device", str(exc)) from None
    p = spec.parameter_count

    unit = lambda vs: len(vs) > 0 and all(0 <= v <= 1 for v in vs)  # noqa: E731
    vis = r.parse("noise", "visibility", _floats, unit, "values must lie in [0, 1]")
    phn = r.parse("noise", "phase_noise", _floats, lambda vs: len(vs) > 0 and all(v >= 0 for v in vs),
                  "values must be >= 0")
    ovl = r.parse("noise", "overlap", _floats, unit, "values must lie in [0, 1]")
    noises = tuple(NoiseConfig(v, ph, ov) for v in vis for ph in phn for ov in ovl)

    seed = r.parse("run", "seed", int, lambda v: 0 <= v < 2 ** 64, "seed must be an unsigned 64-bit integer")
    triplets = r.parse("phases", "triplets", lambda t: _triplet_items(t, p))
    n_random = r.parse("phases", "random", int, lambda v: v >= 0, "must be >= 0")
    lo = r.parse("phases", "random_lower", float)
    hi = r.parse("phases", "random_upper", float, lambda v: v > lo, "must exceed random_lower")
    if n_random:
        draws = np.random.default_rng(np.random.SeedSequence([seed, 7])).uniform(lo, hi, (n_random, p))
        triplets += [Triplet(f"rand{k + 1}", tuple(float(x) for x in row)) for k, row in enumerate(draws)]
    if not triplets:
        raise r.error("phases", "triplets", "no phase configurations given (set triplets or random)")
    labels = [t.label for t in triplets]
    if len(set(labels)) != len(labels):
        raise r.error("phases", "triplets", "duplicate triplet labels")

    positive = lambda v: v >= 1  # noqa: E731
    repetitions = r.parse("run", "repetitions", int, positive, "must be >= 1")
    events = r.parse("run", "events", int, positive, "must be >= 1")
    probes = r.parse("run", "probes", int, lambda v: v >= 0, "must be >= 0")
    analytic = r.parse("run", "analytic", _bool)
    out = r.raw("run", "out")

    opt = {}
    for key in ("max_fev", "restarts"):
        opt[key] = r.parse("optimizer", key, int)
    for key in ("reflect", "expand", "contract", "shrink", "init_spread"):
        opt[key] = r.parse("optimizer", key, float)
    start = r.parse("optimizer", "start", _floats)
    opt["start"] = start or (math.pi / 2,) * p
    if len(opt["start"]) != p:
        raise r.error("optimizer", "start", f"needs {p} entries")
    try:
        nm = NMConfig(**opt)
    except ValueError as exc:
        raise r.error("optimizer", "", str(exc)) from None

    fisher_events = r.parse("fisher", "events", _ints, lambda v: len(v) > 0 and min(v) >= 1,
                            "event counts must be >= 1")
    fisher_theta = r.parse("fisher", "theta", _floats, lambda v: len(v) in (0, p), f"needs {p} entries")

    modes = r.parse("estimate", "modes", _words,
                    lambda v: len(v) > 0 and all(m in THETA_MODES for m in v),
                    f"modes must be among {', '.join(THETA_MODES)}")
    explicit = r.parse("estimate", "theta", lambda t: _explicit_theta(t, p, base))
    if "explicit" in modes and explicit is None:
        raise r.error("estimate", "modes", "explicit mode needs [estimate] theta")
    if explicit is not None and "*" not in explicit:
        missing = [t.label for t in triplets if t.label not in explicit]
        if missing:
            raise r.error("estimate", "theta", f"no theta for {', '.join(missing)}")
    estimator = r.parse("estimate", "estimator", str, lambda v: v in ("mean", "mode"), "use mean or mode")
    try:
        prior = PriorConfig(
            kind=r.raw("estimate", "prior"),
            points=r.parse("estimate", "prior_points", int),
            halfwidth=r.parse("estimate", "prior_halfwidth", float),
            guess_fraction=r.parse("estimate", "guess_fraction", float),
        )
    except ValueError as exc:
        raise r.error("estimate", "prior", str(exc)) from None
    marginals = r.parse("estimate", "marginals", _bool)
    overlaps = r.parse("hom", "overlaps", _floats, unit, "values must lie in [0, 1]")

    source = {s: {k: r.raw(s, k) for k in keys} for s, keys in SCHEMA.items()}
    return ExperimentConfig(
        spec=spec, device=device_name, noises=noises, triplets=tuple(triplets), seed=seed,
        repetitions=repetitions, events=events, probes=probes, analytic=analytic, out=out,
        optimizer=nm, fisher_events=fisher_events, fisher_theta=fisher_theta or None,
        modes=modes, explicit_theta=explicit, estimator=estimator, prior=prior,
        marginals=marginals, overlaps=overlaps, source=source,
    )
