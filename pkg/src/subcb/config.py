"""Experiment configuration files and the builders that turn them into objects.

Configs are YAML documents. Nested specs (matroids, contexts, models,
oracles) are tagged mappings with a ``kind`` key; numeric matrices are
written inline as lists of rows. Every error raised while loading or
building carries the dotted path of the offending entry and, when the
config came from text, its line number.

Minimal example::

    horizon: 100
    ground_size: 4
    rank: 2
    model: {kind: modular, weights: [0.4, 0.3, 0.2, 0.1]}
    oracle: {kind: finite, experts: [{kind: modular, weights: [0.4, 0.3, 0.2, 0.1]}]}
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .bandit import (BallContexts, Environment, FixedContexts, MatroidSchedule,
                     Schedules)
from .errors import ConfigError, SubcbError
from .matroid import DEFAULT_ENUMERATION_BUDGET, Matroid
from .oracle import (DoublingOracle, FiniteClassOracle, GlmOracle, MultiGlmOracle,
                     TruthOracle, default_eta)
from .set_function import (ConcaveModularModel, CoverageModel, GlmModel, ModularModel,
                           RankingModel, RestrictedModel, SumGlmModel, WidthModel,
                           block_selectors)
from .t_operator import CONVENTIONS, compute_weights
from .testkit import context_coverage_family, sphere_points

ALGORITHMS = ("squarecb", "epsgreedy", "uniform-baseline", "oracle-truth-baseline")
ORACLE_KINDS = ("finite", "glm", "multiglm", "truth")

SCHEDULE_DEFAULTS = {"c_gamma": 1.0, "c_rho": 1.0, "mu": 1.0, "delta": 0.05,
                     "reg_sq": None, "rho_min": 0.01}
REWARD_DEFAULTS = {"law": "bernoulli", "noise_sd": 0.1}
WEIGHT_DEFAULTS = {"convention": "filmus-ward", "quad_points": 64}
SEARCH_DEFAULTS = {"tol": 1e-9, "max_iters": 1000, "mc_draws": 2000}
BENCH_DEFAULTS = {"horizons": None, "sizes": "exact"}


def _fmt_path(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _err(msg, path=()):
    return ConfigError(msg, path=_fmt_path(path) or None)


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment.

    ``families`` holds named generated model families that ``model`` and
    ``oracle`` specs may reference with ``{kind: member, family, index}``
    or ``{family: name}``.
    """

    horizon: int
    ground_size: int
    rank: int
    model: dict
    oracle: dict = field(default_factory=lambda: {"kind": "truth"})
    algorithm: str = "squarecb"
    matroids: dict = field(default_factory=dict)
    contexts: dict = field(default_factory=lambda: {"kind": "none"})
    families: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    reward: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    local_search: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    output: str = "runs"
    name: str = "experiment"
    budget: int = DEFAULT_ENUMERATION_BUDGET
    workers: int = 1
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        self.matroids = self.matroids or {"order": "cycle",
                                          "list": [{"kind": "uniform", "k": self.rank}]}
        self.schedule = {**SCHEDULE_DEFAULTS, **self.schedule}
        self.reward = {**REWARD_DEFAULTS, **self.reward}
        self.weights = {**WEIGHT_DEFAULTS, **self.weights}
        self.local_search = {**SEARCH_DEFAULTS, **self.local_search}
        self.bench = {**BENCH_DEFAULTS, **self.bench}
        self.validate()

    # -- validation ------------------------------------------------------------

    def validate(self):
        for key in ("horizon", "ground_size", "rank", "budget", "workers"):
            val = getattr(self, key)
            if isinstance(val, bool) or not isinstance(val, int):
                raise _err(f"must be an integer, got {val!r}", (key,))
        if self.horizon < 1:
            raise _err("horizon must be >= 1", ("horizon",))
        if self.ground_size < 1:
            raise _err("ground_size must be >= 1", ("ground_size",))
        if not 0 <= self.rank <= self.ground_size:
            raise _err(f"rank must lie in [0, ground_size = {self.ground_size}]", ("rank",))
        if self.algorithm not in ALGORITHMS:
            raise _err(f"unknown algorithm {self.algorithm!r}; choose from {list(ALGORITHMS)}",
                       ("algorithm",))
        if not isinstance(self.seeds, list) or not self.seeds or \
                not all(isinstance(s, int) and not isinstance(s, bool) for s in self.seeds):
            raise _err("seeds must be a nonempty list of integers", ("seeds",))
        if self.workers < 1:
            raise _err("workers must be >= 1", ("workers",))
        for key in ("model", "oracle", "contexts", "matroids", "families"):
            if not isinstance(getattr(self, key), dict):
                raise _err("must be a mapping", (key,))
        if self.oracle.get("kind") not in ORACLE_KINDS:
            raise _err(f"unknown oracle kind {self.oracle.get('kind')!r}; "
                       f"choose from {list(ORACLE_KINDS)}", ("oracle", "kind"))
        if self.weights["convention"] not in CONVENTIONS:
            raise _err(f"unknown weight convention {self.weights['convention']!r}",
                       ("weights", "convention"))
        if self.reward["law"] not in ("bernoulli", "gaussian"):
            raise _err(f"unknown reward law {self.reward['law']!r}", ("reward", "law"))
        for key in SCHEDULE_DEFAULTS:
            val = self.schedule[key]
            if val is not None and not isinstance(val, (int, float)):
                raise _err(f"must be a number, got {val!r}", ("schedule", key))
        unknown = set(self.schedule) - set(SCHEDULE_DEFAULTS)
        if unknown:
            raise _err(f"unknown schedule keys {sorted(unknown)}", ("schedule",))

    # -- (de)serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {f.name: copy.deepcopy(getattr(self, f.name))
                for f in fields(self) if f.name != "base_dir"}

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise _err("config must be a mapping at the top level")
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(data) - known
        if unknown:
            key = sorted(unknown)[0]
            raise _err(f"unknown key {key!r}", (key,))
        for key in ("horizon", "ground_size", "rank", "model"):
            if key not in data:
                raise _err(f"missing required key {key!r}")
        return cls(**copy.deepcopy(data), base_dir=base_dir)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


# -- loading with line numbers -----------------------------------------------------

def _line_map(node, path=(), out=None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _line_map(v, path + (k.value,), out)
            out[path + (k.value,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


def _split_path(text: str) -> tuple:
    out = []
    for part in text.replace("[", ".[").split("."):
        if not part:
            continue
        out.append(int(part[1:-1]) if part.startswith("[") else part)
    return tuple(out)


def _anchor(exc: ConfigError, lines: dict, source: str | None) -> ConfigError:
    path = _split_path(exc.path) if exc.path else ()
    while path and path not in lines:
        path = path[:-1]
    msg = str(exc)
    if msg.startswith("["):
        msg = msg.split("] ", 1)[1]
    where = exc.path or None
    if source:
        where = f"{source}: {where}" if where else source
    return ConfigError(msg, path=where, line=lines.get(path))


def loads(text: str, base_dir: str = ".", source: str | None = None) -> ExperimentConfig:
    """Parse YAML text into a validated config; errors carry line numbers."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          path=source, line=None if mark is None else mark.line + 1) from None
    lines = _line_map(root) if root is not None else {}
    try:
        cfg = ExperimentConfig.from_dict(data, base_dir)
        check_references(cfg)
    except ConfigError as exc:
        raise _anchor(exc, lines, source) from None
    cfg._lines = lines
    cfg._source = source
    return cfg


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    return loads(text, str(path.parent), str(path))


def check_references(cfg: ExperimentConfig):
    """Build every spec once so that bad references fail at load time."""
    build_experiment(cfg, cfg.seeds[0])


# -- spec helpers ---------------------------------------------------------------------

def _get(spec: dict, key: str, path, default=...):
    if key in spec:
        return spec[key]
    if default is ...:
        raise _err(f"missing required key {key!r}", path)
    return default


def _array(value, path, ndim=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise _err("expected a numeric array", path) from None
    if ndim is not None and arr.ndim != ndim:
        raise _err(f"expected a {ndim}-d numeric array, got shape {arr.shape}", path)
    if not np.all(np.isfinite(arr)):
        raise _err("array entries must be finite", path)
    return arr


def _read_matrix(fname: str, base_dir: str, path) -> np.ndarray:
    p = Path(fname)
    if not p.is_absolute():
        p = Path(base_dir) / p
    try:
        return np.loadtxt(p, ndmin=2)
    except (OSError, ValueError) as exc:
        raise _err(f"cannot read matrix file {str(p)!r}: {exc}", path) from None


class Builder:
    """Resolves tagged specs of one config into models, oracles and environments."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._families = {}

    # families ------------------------------------------------------------------------

    def family(self, name: str, path) -> list:
        if name not in self._families:
            if name not in self.cfg.families:
                raise _err(f"unknown family {name!r}", path)
            spec = self.cfg.families[name]
            fpath = ("families", name)
            kind = _get(spec, "kind", fpath)
            if kind == "context_coverage":
                rng = np.random.default_rng(int(_get(spec, "seed", fpath, 0)))
                self._families[name] = context_coverage_family(
                    self.cfg.ground_size, int(_get(spec, "count", fpath)), rng,
                    n_items=_get(spec, "n_items", fpath, None),
                    dim=int(_get(spec, "dim", fpath, 3)),
                    scale=float(_get(spec, "scale", fpath, 6.0)),
                    bias=float(_get(spec, "bias", fpath, -3.0)),
                    density=float(_get(spec, "density", fpath, 0.25)))
            elif kind == "list":
                members = _get(spec, "members", fpath)
                self._families[name] = [self.model(m, fpath + ("members", i))
                                        for i, m in enumerate(members)]
            else:
                raise _err(f"unknown family kind {kind!r}", fpath + ("kind",))
        return self._families[name]

    # models ----------------------------------------------------------------------------

    def model(self, spec, path, ground: int | None = None):
        """Build a model spec; ``ground`` overrides the element count (ranking items)."""
        if not isinstance(spec, dict):
            raise _err("model spec must be a mapping", path)
        kind = _get(spec, "kind", path)
        try:
            return self._model(kind, spec, path, ground or self.cfg.ground_size)
        except ConfigError:
            raise
        except (SubcbError, ValueError, TypeError, KeyError, IndexError) as exc:
            raise _err(f"invalid {kind} model: {exc}", path) from None

    def _model(self, kind, spec, path, A):
        if kind == "modular":
            w = _array(_get(spec, "weights", path), path + ("weights",), 1)
            self._check_len(w, A, path + ("weights",))
            return ModularModel(w, spec.get("u_max"))
        if kind == "concave_modular":
            w = _array(_get(spec, "weights", path), path + ("weights",), 1)
            self._check_len(w, A, path + ("weights",))
            return ConcaveModularModel(w, spec.get("phi", "sqrt"))
        if kind == "coverage":
            cov = _array(_get(spec, "covers", path), path + ("covers",), 2)
            self._check_len(cov, A, path + ("covers",))
            opt = {k: _array(spec[k], path + (k,)) for k in
                   ("item_weights", "item_thetas", "item_bias") if spec.get(k) is not None}
            return CoverageModel(cov > 0.5, **opt)
        if kind == "width":
            if "vectors_file" in spec:
                V = _read_matrix(spec["vectors_file"], self.cfg.base_dir,
                                 path + ("vectors_file",))
            else:
                V = _array(_get(spec, "vectors", path), path + ("vectors",), 2)
            self._check_len(V, A, path)
            sigma = spec.get("sigma")
            return WidthModel(V, k_mc=int(spec.get("k_mc", 400)), seed=int(spec.get("seed", 0)),
                              sigma=None if sigma is None else _array(sigma, path + ("sigma",), 2),
                              baseline=bool(spec.get("baseline", True)))
        if kind == "restricted":
            return RestrictedModel(self.model(_get(spec, "base", path), path + ("base",), A),
                                   _get(spec, "subset", path))
        if kind == "glm":
            base = self.model(_get(spec, "base", path), path + ("base",), A)
            theta = _array(_get(spec, "theta", path), path + ("theta",), 1)
            return GlmModel(base, theta, spec.get("link", "logistic"))
        if kind == "sum_glm":
            bases = [self.model(b, path + ("bases", i), A)
                     for i, b in enumerate(_get(spec, "bases", path))]
            theta = _array(_get(spec, "theta", path), path + ("theta",), 1)
            P = self._selectors(spec, len(theta), path)
            return SumGlmModel(bases, P, theta, spec.get("link", "relu"),
                               float(spec.get("u_max", 1.0)))
        if kind == "ranking":
            items = int(_get(spec, "items", path))
            f = [self.model(s, path + ("f", i), items)
                 for i, s in enumerate(_get(spec, "f", path))]
            lam = _array(_get(spec, "lambdas", path), path + ("lambdas",), 1)
            return RankingModel(items, f, lam)
        if kind == "member":
            fam = self.family(_get(spec, "family", path), path + ("family",))
            idx = int(_get(spec, "index", path))
            if not 0 <= idx < len(fam):
                raise _err(f"index {idx} outside family of size {len(fam)}", path + ("index",))
            return fam[idx]
        raise _err(f"unknown model kind {kind!r}", path + ("kind",))

    def _selectors(self, spec, dim, path):
        if "P" in spec:
            return _array(spec["P"], path + ("P",), 3)
        return block_selectors(dim, _get(spec, "blocks", path))

    @staticmethod
    def _check_len(arr, A, path):
        if arr.shape[0] != A:
            raise _err(f"expected {A} rows (one per element), got {arr.shape[0]}", path)

    # oracles -------------------------------------------------------------------------------

    def experts(self, spec, path) -> list:
        if "family" in spec:
            return list(self.family(spec["family"], path + ("family",)))
        return [self.model(m, path + ("experts", i))
                for i, m in enumerate(_get(spec, "experts", path))]

    def oracle(self, n: int):
        spec, path = self.cfg.oracle, ("oracle",)
        kind = spec["kind"]
        if kind == "truth":
            return TruthOracle(self.model(self.cfg.model, ("model",)))
        if kind == "finite":
            return FiniteClassOracle(self.experts(spec, path), float(spec.get("eta_agg", 0.5)))
        eta = spec.get("eta")
        if kind == "glm":
            base = self.model(_get(spec, "base", path), path + ("base",))
            dim, link = int(_get(spec, "dim", path)), spec.get("link", "logistic")
            factory = lambda m: GlmOracle(base, dim, eta or default_eta(m), link)
        else:
            bases = [self.model(b, path + ("bases", i))
                     for i, b in enumerate(_get(spec, "bases", path))]
            P = self._selectors(spec, int(_get(spec, "dim", path)), path)
            factory = lambda m: MultiGlmOracle(bases, P, eta or default_eta(m))
        try:
            return DoublingOracle(factory) if spec.get("doubling") else factory(n)
        except SubcbError as exc:
            raise _err(str(exc), path) from None

    def reg_sq(self, n: int) -> float:
        """Configured Reg_sq estimate, else ``ln|F|`` (floor 1) or ``sqrt(n)``."""
        if self.cfg.schedule.get("reg_sq") is not None:
            return float(self.cfg.schedule["reg_sq"])
        kind = self.cfg.oracle["kind"]
        if kind == "finite":
            return max(math.log(len(self.experts(self.cfg.oracle, ("oracle",)))), 1.0)
        if kind in ("glm", "multiglm"):
            return math.sqrt(n)
        return 1.0

    # environment -----------------------------------------------------------------------

    def contexts(self):
        spec, path = self.cfg.contexts, ("contexts",)
        kind = _get(spec, "kind", path)
        order = spec.get("order", "iid")
        if kind == "none":
            return FixedContexts(np.zeros((1, 1)), "cycle")
        if kind == "list":
            if "vectors_file" in spec:
                V = _read_matrix(spec["vectors_file"], self.cfg.base_dir, path)
            else:
                V = _array(_get(spec, "vectors", path), path + ("vectors",), 2)
            return FixedContexts(V, order)
        if kind == "sphere_points":
            rng = np.random.default_rng(int(spec.get("seed", 0)))
            V = sphere_points(int(_get(spec, "count", path)), int(_get(spec, "dim", path)), rng)
            return FixedContexts(V, order)
        if kind in ("ball", "sphere"):
            return BallContexts(int(_get(spec, "dim", path)), sphere=kind == "sphere")
        raise _err(f"unknown context kind {kind!r}", path + ("kind",))

    def matroids(self) -> MatroidSchedule:
        spec, path = self.cfg.matroids, ("matroids",)
        items = _get(spec, "list", path)
        if not isinstance(items, list) or not items:
            raise _err("matroid list must be nonempty", path + ("list",))
        ms = []
        for i, m in enumerate(items):
            try:
                mat = Matroid.from_dict(self.cfg.ground_size, m)
            except (SubcbError, ValueError, TypeError, KeyError) as exc:
                raise _err(f"invalid matroid: {exc}", path + ("list", i)) from None
            if mat.rank != self.cfg.rank:
                raise _err(f"matroid rank {mat.rank} differs from rank = {self.cfg.rank}",
                           path + ("list", i))
            ms.append(mat)
        order = spec.get("order", "cycle")
        if order not in ("cycle", "iid"):
            raise _err(f"unknown matroid order {order!r}", path + ("order",))
        return MatroidSchedule(ms, order)

    def environment(self) -> Environment:
        r = self.cfg.reward
        return Environment(self.model(self.cfg.model, ("model",)), self.contexts(),
                           self.matroids(), r["law"], float(r["noise_sd"]), self.cfg.budget)

    def schedules(self) -> Schedules:
        s = self.cfg.schedule
        return Schedules(float(s["c_gamma"]), float(s["c_rho"]), float(s["mu"]),
                         float(s["delta"]), s["reg_sq"], float(s["rho_min"]))

    def weight_table(self):
        w = self.cfg.weights
        return compute_weights(max(self.cfg.rank, 1), int(w["quad_points"]), w["convention"])


@dataclass
class Experiment:
    env: Environment
    oracle: object
    sched: Schedules
    reg_sq: float
    builder: Builder


def build_experiment(cfg: ExperimentConfig, seed: int) -> Experiment:
    """Fresh environment, oracle and schedules for one replication."""
    b = Builder(cfg)
    env = b.environment()
    oracle = b.oracle(cfg.horizon)
    return Experiment(env, oracle, b.schedules(), b.reg_sq(cfg.horizon), b)
