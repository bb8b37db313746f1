"""Run configuration in flat ``key = value`` text.

Precedence, lowest first: field defaults, the config file, command-line
flags. ``#`` starts a comment; blank lines are ignored.
"""

from dataclasses import dataclass, fields, replace

from .embed import TrainConfig
from .errors import ConfigError
from .graph import DEFAULT_TAU

PROVIDERS = ("file", "tfidf", "trained")


@dataclass(frozen=True)
class RunConfig:
    catalog: str = ""
    log: str = ""
    vectors: str = ""
    splits: str = ""
    model: str = ""
    out_dir: str = "out"
    tau: float = DEFAULT_TAU
    provider: str = "tfidf"
    dim: int = 64
    seed: int = 0
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 10
    temperature: float = 1.0
    ks: tuple = (10, 20)
    exclude_last: bool = True
    mask_history: bool = False
    filter: bool = True
    min_count: int = 5
    split: str = "test"
    task_name: str = "synthetic"
    resamples: int = 10000

    def validate(self):
        if not -1.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must lie in [-1, 1], got {self.tau}")
        if self.provider not in PROVIDERS:
            raise ConfigError(f"provider must be one of {PROVIDERS}, got {self.provider!r}")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigError("ks must be a nonempty list of positive integers")
        if self.split not in ("train", "dev", "test"):
            raise ConfigError(f"unknown split {self.split!r}")
        if self.min_count < 1 or self.resamples < 1:
            raise ConfigError("min_count and resamples must be positive")
        try:
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def train_config(self):
        return TrainConfig(dim=self.dim, lr=self.lr, batch_size=self.batch_size, epochs=self.epochs,
                           temperature=self.temperature, seed=self.seed)

    def to_text(self):
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def override(self, **values):
        values = {k: v for k, v in values.items() if v is not None}
        return replace(self, **values)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _coerce(name, kind, raw):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is tuple:
            return tuple(int(x) for x in raw.split(",") if x.strip())
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


_TYPES = {"catalog": str, "log": str, "vectors": str, "splits": str, "model": str,
          "out_dir": str, "tau": float, "provider": str, "dim": int, "seed": int,
          "lr": float, "batch_size": int, "epochs": int, "temperature": float, "ks": tuple,
          "exclude_last": bool, "mask_history": bool, "filter": bool, "min_count": int,
          "split": str, "task_name": str, "resamples": int}


def parse_config(text, base=None):
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        values[key] = _coerce(key, _TYPES[key], raw)
    return replace(base or RunConfig(), **values)


def load_config(path, base=None):
    try:
        with open(path, encoding="utf-8") as f:
            return parse_config(f.read(), base)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
