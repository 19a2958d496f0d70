"""Flat ``section.key = value`` experiment configuration.

Every key, its type and default is listed in ``KEYS``; ``docs/config_reference.md``
describes them for humans. Validation collects all problems before raising.
"""

import configparser
from dataclasses import dataclass

from .aggregation import DelayProfile
from .cluster import ClusterSpec
from .data import GenSpec
from .delay import DelayConfig
from .errors import ConfigError, WPSGDError
from .objective import LossParams
from .trainer import TrainConfig

ALGORITHMS = ("sequential", "simuparallel", "wpsgd", "direct-avg", "periodic-avg", "delay-wpsgd")


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s):
    return tuple(int(p) for p in s.replace(",", " ").split())


def _floats(s):
    return tuple(float(p) for p in s.replace(",", " ").split())


# key -> (parser, default); a default of None means "absent"
KEYS = {
    "experiment.algorithm": (str, "wpsgd"),
    "experiment.output": (str, None),
    "data.train": (str, None),
    "data.test": (str, None),
    "data.dim": (int, None),
    "gen.n_train": (int, None),
    "gen.n_test": (int, None),
    "gen.dim": (int, None),
    "gen.nnz_min": (int, 5),
    "gen.nnz_max": (int, 10),
    "gen.seed": (int, 0),
    "gen.normalize": (_bool, True),
    "cluster.k": (int, 1),
    "cluster.delays": (_ints, None),
    "cluster.shares": (_floats, None),
    "cluster.partition_seed": (int, 0),
    "train.eta": (float, None),
    "train.lam": (float, None),
    "train.iterations": (int, None),
    "train.seed": (int, 0),
    "train.init": (float, 0.0),
    "train.checkpoint_every": (int, 0),
    "train.rate": (float, None),
    "train.span": (int, None),
    "delay.max_delay": (int, 1),
    "delay.c_star": (float, 1.0),
    "delay.history_len": (int, None),
    "theory.G": (float, 1.0),
    "theory.grad_lip": (float, None),
    "theory.residual": (float, 0.0),
    "theory.beta_sq_max": (float, None),
    "theory.wasserstein_1": (float, None),
    "theory.wasserstein_2": (float, None),
    "theory.sigma_star": (float, None),
}
_LOWER = {k.lower(): k for k in KEYS}


@dataclass
class ExperimentConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    @property
    def algorithm(self):
        return self["experiment.algorithm"]

    def loss(self):
        return LossParams(self["train.lam"], self["train.eta"])

    def delay_profile(self):
        d = self["cluster.delays"]
        return DelayProfile(d) if d is not None else DelayProfile.zeros(self["cluster.k"])

    def cluster(self):
        return ClusterSpec(
            self["cluster.k"], self.delay_profile(), self["cluster.partition_seed"], self["cluster.shares"]
        )

    def train_config(self):
        return TrainConfig(
            self.loss(), self["train.iterations"], self["train.seed"],
            self["train.init"], self["train.checkpoint_every"],
        )

    def delay_config(self):
        return DelayConfig(self["delay.max_delay"], self["delay.c_star"], self["delay.history_len"])

    def gen_spec(self):
        return GenSpec(
            self["gen.n_train"], self["gen.n_test"], self["gen.dim"], self["gen.nnz_min"],
            self["gen.nnz_max"], self["gen.seed"], self["gen.normalize"],
        )

    @property
    def has_gen(self):
        return self.values["gen.n_train"] is not None


def parse_config(text, source="<config>", purpose="train"):
    """Parse config text into typed values; raises ConfigError listing every problem.

    ``purpose`` is the subcommand the config is for (generate, train, check or
    evaluate) and decides which keys are required.
    """
    cp = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
        interpolation=None, strict=False,
    )
    problems, failed = [], set()
    try:
        cp.read_string("[root]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"unparseable config: {exc}"]) from None
    values = {k: default for k, (_, default) in KEYS.items()}
    for raw, sval in cp["root"].items():
        key = _LOWER.get(raw)
        if key is None:
            problems.append(f"unknown key {raw!r}")
            continue
        parser = KEYS[key][0]
        try:
            values[key] = parser(sval.strip())
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
            failed.add(key)
    problems.extend(_semantic_problems(values, purpose, failed))
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(values)


def load_config(path, purpose="train"):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path), purpose)


_REQUIRED = {
    "generate": ("gen.n_train", "gen.n_test", "gen.dim", "data.train", "data.test"),
    "train": ("train.eta", "train.lam", "train.iterations"),
    "check": ("train.eta", "train.lam", "train.iterations"),
    "evaluate": ("train.lam",),
}


def _semantic_problems(v, purpose, failed=()):
    out = []
    algo = v["experiment.algorithm"]
    if algo not in ALGORITHMS:
        out.append(f"experiment.algorithm must be one of {', '.join(ALGORITHMS)}, got {algo!r}")
    for key in _REQUIRED.get(purpose, ()):
        if v[key] is None and key not in failed:
            out.append(f"{key} is required")
    if purpose in ("train", "evaluate") and v["gen.n_train"] is None:
        if v["data.test"] is None:
            out.append("data.test (or a gen.* section) is required")
        if purpose == "train" and v["data.train"] is None:
            out.append("data.train (or a gen.* section) is required")
    if v["train.eta"] is not None and v["train.lam"] is not None:
        try:
            LossParams(v["train.lam"], v["train.eta"])
        except WPSGDError as exc:
            out.append(f"train.eta/train.lam: {exc}")
    if v["train.iterations"] is not None and v["train.iterations"] < 1:
        out.append("train.iterations must be >= 1")
    if v["train.checkpoint_every"] < 0:
        out.append("train.checkpoint_every must be >= 0")
    if v["train.rate"] is not None and not 0 < v["train.rate"] <= 1:
        out.append("train.rate must lie in (0, 1]")
    k = v["cluster.k"]
    if k < 1:
        out.append("cluster.k must be >= 1")
    delays = v["cluster.delays"]
    if delays is not None:
        if len(delays) != k:
            out.append(f"cluster.delays has {len(delays)} entries, cluster.k is {k}")
        elif min(delays) != 0:
            out.append("cluster.delays must be non-negative with minimum 0")
        elif v["train.iterations"] is not None and max(delays) >= v["train.iterations"]:
            out.append("every delay must be smaller than train.iterations")
    shares = v["cluster.shares"]
    if shares is not None and (len(shares) != k or any(s <= 0 for s in shares)):
        out.append(f"cluster.shares must list {k} positive numbers")
    if algo == "sequential" and k != 1:
        out.append("sequential needs cluster.k = 1")
    if algo == "simuparallel" and delays is not None and any(delays):
        out.append("simuparallel needs all delays to be 0")
    if algo == "periodic-avg":
        span = v["train.span"]
        if span is None:
            out.append("train.span is required for periodic-avg")
        elif span < 1 or (v["train.iterations"] and v["train.iterations"] % span):
            out.append("train.span must be >= 1 and divide train.iterations")
    if v["delay.max_delay"] < 1:
        out.append("delay.max_delay must be >= 1")
    if v["delay.c_star"] <= 0:
        out.append("delay.c_star must be positive")
    if v["gen.n_train"] is not None:
        for key in ("gen.n_test", "gen.dim"):
            if v[key] is None:
                out.append(f"{key} is required with gen.n_train")
        if v["gen.dim"] is not None and not 1 <= v["gen.nnz_min"] <= v["gen.nnz_max"] <= v["gen.dim"]:
            out.append("need 1 <= gen.nnz_min <= gen.nnz_max <= gen.dim")
    return out
