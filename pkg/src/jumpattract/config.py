"""YAML run configuration: schema validation with line-precise diagnostics.

Schema (version 1)::

    version: 1
    model:
      domain: {dimension: 1, length: 20.0, resolution: 128}
      alpha:  {family: gaussian, sigma: 1.0, mass: 1.0}
      kappa1: {family: gaussian, sigma: 0.5}
      kappa2: {family: gaussian, sigma: 1.0}       # or {family: zero}
    stability: {sample_budget: 2000, max_config_size: 20, seed: 0}
    simulate:  {density: 0.5, t_end: 1.0, replicas: 64, seed: 1,
                sample_times: [0.5, 1.0], bins: 32, r_max: 10.0,
                initial: poisson, max_events: 10000000}
    hierarchy: {order: 2, dt: 1.0e-3, t_end: 0.1, closure: zero-tail,
                layout: reduced, thetas: [0.3], record_every: 10,
                initial: {density: 0.5}, picard_terms: 8, substeps: 256}
    bounds:    {theta0: auto, omega: auto, mean_b: auto, sup_b: auto,
                theta_pp: auto, ladder_l: 3, delta: auto, majorant_terms: 20}

Profile families and their width key: ``gaussian`` (sigma), ``exponential``
(length), ``tophat`` (radius), ``tabulated`` (values, FFT order), ``zero``.
``simulate`` takes either ``density`` or ``particles``. ``hierarchy.t_end``
may be replaced by ``tau_fraction`` (a multiple of the optimal horizon).
``hierarchy.initial`` is ``{density: rho}`` or ``{rho: .., g: [..]}``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .kernels import KernelModel, RadialProfile, TorusDomain, tabulated, zero_profile

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "build_model", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

WIDTH_KEY = {"gaussian": "sigma", "exponential": "length", "tophat": "radius"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


def _marks(node, path=(), out=None) -> dict[tuple, int]:
    """Map every key path of a composed YAML tree to its 1-based line."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            _marks(value, path + (key.value,), out)
            out[path + (key.value,)] = key.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _marks(item, path + (i,), out)
    return out


class _Section:
    """Typed accessors over one mapping, raising ConfigError with line numbers."""

    def __init__(self, data: dict, path: tuple, lines: dict, source: str):
        self.data = data if data is not None else {}
        self.path = path
        self.lines = lines
        self.source = source
        if not isinstance(self.data, dict):
            self.fail("must be a mapping")

    def line(self, key=None) -> int | None:
        p = self.path + ((key,) if key is not None else ())
        while p not in self.lines and p:
            p = p[:-1]
        return self.lines.get(p)

    def fail(self, message: str, key=None):
        name = ".".join(str(p) for p in self.path + ((key,) if key is not None else ()))
        raise ConfigError(f"{name or 'config'}: {message}", self.line(key), self.source)

    def has(self, key) -> bool:
        return key in self.data

    def sub(self, key, required=False) -> "_Section":
        if key not in self.data:
            if required:
                self.fail(f"missing required section '{key}'")
            return _Section({}, self.path + (key,), self.lines, self.source)
        return _Section(self.data[key], self.path + (key,), self.lines, self.source)

    def number(self, key, default=None, required=False, positive=False, nonneg=False, integer=False,
               allow_auto=False):
        if key not in self.data:
            if required:
                self.fail(f"missing required field '{key}'")
            return default
        v = self.data[key]
        if allow_auto and v == "auto":
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"expected a number, got {v!r}", key)
        if integer and int(v) != v:
            self.fail(f"expected an integer, got {v!r}", key)
        if not np.isfinite(v):
            self.fail("must be finite", key)
        if positive and not v > 0:
            self.fail(f"must be positive, got {v}", key)
        if nonneg and v < 0:
            self.fail(f"must be nonnegative, got {v}", key)
        return int(v) if integer else float(v)

    def choice(self, key, options, default):
        v = self.data.get(key, default)
        if v not in options:
            self.fail(f"must be one of {list(options)}, got {v!r}", key)
        return v

    def numbers(self, key, default=None, nonneg=False):
        if key not in self.data:
            return default
        v = self.data[key]
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            self.fail("expected a list of numbers", key)
        if nonneg and any(x < 0 for x in v):
            self.fail("entries must be nonnegative", key)
        return [float(x) for x in v]

    def unknown(self, allowed):
        for key in self.data:
            if key not in allowed:
                self.fail(f"unknown field '{key}' (allowed: {', '.join(sorted(allowed))})", key)


@dataclass
class RunConfig:
    raw: dict
    text: str
    source: str
    domain: dict | None
    profiles: dict | None
    stability: dict
    simulate: dict
    hierarchy: dict
    bounds: dict

    @property
    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @property
    def has_model(self) -> bool:
        return self.domain is not None


def _profile(sec: _Section, domain: TorusDomain | None) -> dict:
    if not sec.has("family"):
        sec.fail("missing required field 'family'")
    fam = sec.choice("family", ("gaussian", "exponential", "tophat", "tabulated", "zero"), None)
    if fam == "zero":
        sec.unknown({"family"})
        return {"family": "zero"}
    if fam == "tabulated":
        sec.unknown({"family", "values"})
        vals = sec.numbers("values", nonneg=True)
        if vals is None:
            sec.fail("missing required field 'values'")
        if domain is not None and len(vals) != int(np.prod(domain.shape)):
            sec.fail(f"needs {int(np.prod(domain.shape))} values, got {len(vals)}", "values")
        return {"family": "tabulated", "values": vals}
    key = WIDTH_KEY[fam]
    sec.unknown({"family", key, "mass"})
    width = sec.number(key, required=True, positive=True)
    mass = sec.number("mass", default=1.0, nonneg=True)
    return {"family": fam, "width": width, "mass": mass}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    if raw is None:
        raise ConfigError("empty configuration", 1, source)
    lines = _marks(node)
    top = _Section(raw, (), lines, source)
    top.unknown({"version", "model", "stability", "simulate", "hierarchy", "bounds"})
    version = top.number("version", default=SCHEMA_VERSION, integer=True)
    if version != SCHEMA_VERSION:
        top.fail(f"unsupported schema version {version}", "version")

    domain_spec, profiles = None, None
    if top.has("model"):
        model = top.sub("model")
        model.unknown({"domain", "alpha", "kappa1", "kappa2"})
        dsec = model.sub("domain", required=True)
        dsec.unknown({"dimension", "length", "resolution"})
        dim = dsec.number("dimension", default=1, integer=True)
        if dim not in (1, 2):
            dsec.fail("must be 1 or 2", "dimension")
        length = dsec.number("length", required=True, positive=True)
        res = dsec.number("resolution", required=True, integer=True, positive=True)
        try:
            domain = TorusDomain(dim, length, res)
        except ValueError as exc:
            dsec.fail(str(exc), "resolution")
        domain_spec = {"dimension": dim, "length": length, "resolution": res}
        profiles = {"alpha": _profile(model.sub("alpha", required=True), domain)}
        for name in ("kappa1", "kappa2"):
            profiles[name] = _profile(model.sub(name), domain) if model.has(name) else {"family": "zero"}
        if profiles["alpha"]["family"] == "zero" or profiles["alpha"].get("mass", 1.0) == 0:
            model.fail("alpha must have positive mass", "alpha")

    st = top.sub("stability")
    st.unknown({"sample_budget", "max_config_size", "seed"})
    stability = {"sample_budget": st.number("sample_budget", 2000, integer=True, positive=True),
                 "max_config_size": st.number("max_config_size", 20, integer=True, positive=True),
                 "seed": st.number("seed", 0, integer=True, nonneg=True)}

    sm = top.sub("simulate")
    sm.unknown({"density", "particles", "t_end", "replicas", "seed", "sample_times", "bins", "r_max",
                "initial", "max_events"})
    if sm.has("density") and sm.has("particles"):
        sm.fail("give either 'density' or 'particles', not both", "particles")
    simulate = {
        "density": sm.number("density", positive=True),
        "particles": sm.number("particles", integer=True, nonneg=True),
        "t_end": sm.number("t_end", 1.0, positive=True),
        "replicas": sm.number("replicas", 16, integer=True, positive=True),
        "seed": sm.number("seed", 0, integer=True, nonneg=True),
        "sample_times": sm.numbers("sample_times", nonneg=True),
        "bins": sm.number("bins", 32, integer=True, positive=True),
        "r_max": sm.number("r_max", positive=True),
        "initial": sm.choice("initial", ("poisson", "binomial"), "poisson"),
        "max_events": sm.number("max_events", 10_000_000, integer=True, positive=True),
    }
    if simulate["sample_times"] and max(simulate["sample_times"]) > simulate["t_end"]:
        sm.fail("sample times must not exceed t_end", "sample_times")

    hs = top.sub("hierarchy")
    hs.unknown({"order", "dt", "t_end", "tau_fraction", "closure", "layout", "thetas", "record_every",
                "initial", "picard_terms", "substeps"})
    if hs.has("t_end") and hs.has("tau_fraction"):
        hs.fail("give either 't_end' or 'tau_fraction', not both", "tau_fraction")
    hierarchy = {
        "order": hs.number("order", 2, integer=True, positive=True),
        "dt": hs.number("dt", 1e-3, positive=True),
        "t_end": hs.number("t_end", positive=True),
        "tau_fraction": hs.number("tau_fraction", 0.5, positive=True),
        "closure": hs.choice("closure", ("zero-tail", "mean-field"), "zero-tail"),
        "layout": hs.choice("layout", ("reduced", "full"), "reduced"),
        "thetas": hs.numbers("thetas"),
        "record_every": hs.number("record_every", 10, integer=True, positive=True),
        "picard_terms": hs.number("picard_terms", 8, integer=True, nonneg=True),
        "substeps": hs.number("substeps", 256, integer=True, positive=True),
    }
    ini = hs.sub("initial")
    ini.unknown({"density", "rho", "g"})
    if ini.has("density"):
        hierarchy["initial"] = {"density": ini.number("density", positive=True)}
    elif ini.has("rho"):
        g = ini.numbers("g", nonneg=False)
        if g is None:
            ini.fail("a tabulated initial state needs 'g'")
        hierarchy["initial"] = {"rho": ini.number("rho", nonneg=True), "g": g}
    else:
        hierarchy["initial"] = {"density": simulate["density"] or 0.5}

    bs = top.sub("bounds")
    bs.unknown({"theta0", "theta", "omega", "mean_b", "sup_b", "theta_pp", "ladder_l", "delta",
                "majorant_terms"})
    bounds = {
        "theta0": bs.number("theta0", allow_auto=True),
        "theta": bs.number("theta", allow_auto=True),
        "omega": bs.number("omega", allow_auto=True, nonneg=True),
        "mean_b": bs.number("mean_b", allow_auto=True, nonneg=True),
        "sup_b": bs.number("sup_b", allow_auto=True, nonneg=True),
        "theta_pp": bs.number("theta_pp", allow_auto=True),
        "ladder_l": bs.number("ladder_l", 3, integer=True, positive=True),
        "delta": bs.number("delta", allow_auto=True, positive=True),
        "majorant_terms": bs.number("majorant_terms", 20, integer=True, positive=True),
    }
    return RunConfig(raw, text, source, domain_spec, profiles, stability, simulate, hierarchy, bounds)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def _build_profile(spec: dict, domain: TorusDomain) -> RadialProfile:
    if spec["family"] == "zero":
        return zero_profile()
    if spec["family"] == "tabulated":
        return tabulated(np.asarray(spec["values"]).reshape(domain.shape), domain)
    return RadialProfile(spec["family"], spec["width"], spec["mass"])


def build_model(cfg: RunConfig) -> KernelModel:
    if not cfg.has_model:
        raise ConfigError("this command needs a 'model' section", None, cfg.source)
    dom = TorusDomain(**cfg.domain)
    return KernelModel(dom, *(_build_profile(cfg.profiles[n], dom) for n in ("alpha", "kappa1", "kappa2")))
