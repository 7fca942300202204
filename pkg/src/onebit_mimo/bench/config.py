"""Experiment configuration: ``key = value`` files plus ``--set`` overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ..linear import KINDS as LINEAR_KINDS
from ..model import canonical_modulation, constellation
from ..nn_search import default_gamma

RECEIVERS = LINEAR_KINDS + ("OBMNET", "ML_CONVENTIONAL", "ML_ROBUST")
HARD_RECEIVERS = frozenset({"ML_CONVENTIONAL", "ML_ROBUST"})


class ConfigError(ValueError):
    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif source is not None:
            where = f"{source}: "
        super().__init__(where + message)


@dataclass
class ExperimentConfig:
    K: int = 0
    N: int = 0
    modulation: str = "QPSK"
    snr_db: tuple = ()
    receivers: tuple = ()
    M: tuple = ()
    gamma: float | None = None
    csi: str = "perfect"
    tau: float = 0.0
    trials: int = 10_000
    seed: int = 0
    obmnet_params: str | None = None
    block_len: int = 1
    record_timing: bool = False
    batch_sizes: tuple = (1, 10, 100, 250)
    repetitions: int = 10
    layers: int = 10
    batch_size: int = 1000
    learning_rate: float = 1e-2
    num_batches: int = 10_000
    snr_low: float | None = None
    snr_high: float | None = None

    @property
    def constellation(self):
        return constellation(self.modulation)

    @property
    def gamma_value(self) -> float:
        return default_gamma(self.constellation) if self.gamma is None else self.gamma

    @property
    def stage2(self) -> bool:
        return len(self.M) > 0


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise
        return int(value)


def _float(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("NaN")
    return value


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _split(text: str) -> list:
    return [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]


def _float_list(text: str) -> tuple:
    out = []
    for tok in _split(text):
        if ":" in tok:
            # start:step:stop, inclusive of stop
            parts = [float(p) for p in tok.split(":")]
            if len(parts) != 3 or parts[1] == 0:
                raise ValueError(f"bad range {tok!r}; use start:step:stop")
            start, step, stop = parts
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            out.extend(float(start + i * step) for i in range(max(count, 0)))
        else:
            out.append(_float(tok))
    return tuple(out)


def _int_list(text: str) -> tuple:
    return tuple(_int(t) for t in _split(text))


def _receivers(text: str) -> tuple:
    out = []
    for tok in _split(text):
        name = tok.upper().replace("-", "_")
        if name not in RECEIVERS:
            raise ValueError(f"unknown receiver {tok!r}; options: {', '.join(RECEIVERS)}")
        out.append(name)
    return tuple(out)


def _modulation(text: str) -> str:
    return canonical_modulation(text)


def _csi(text: str) -> str:
    low = text.strip().lower()
    if low not in ("perfect", "perturbed"):
        raise ValueError(f"unknown csi mode {text!r}; options: perfect, perturbed")
    return low


def _seed(text: str) -> int:
    value = _int(text)
    if not 0 <= value < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return value


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "none", "default") else _float(text)


def _path(text: str):
    return text.strip() or None


_PARSERS = {
    "K": _int,
    "N": _int,
    "modulation": _modulation,
    "snr_db": _float_list,
    "receivers": _receivers,
    "M": _int_list,
    "gamma": _optional_float,
    "csi": _csi,
    "tau": _float,
    "trials": _int,
    "seed": _seed,
    "obmnet_params": _path,
    "block_len": _int,
    "record_timing": _bool,
    "batch_sizes": _int_list,
    "repetitions": _int,
    "layers": _int,
    "batch_size": _int,
    "learning_rate": _float,
    "num_batches": _int,
    "snr_low": _optional_float,
    "snr_high": _optional_float,
}

_ALIASES = {"receiver": "receivers", "snr": "snr_db", "k": "K", "n": "N", "stage2_m": "M", "m": "M"}

# keys every subcommand needs, and those specific to one
_REQUIRED = {
    "ber": ("K", "N", "snr_db", "receivers"),
    "timing": ("K", "N", "receivers"),
    "train": ("K", "N"),
}


def _canonical_key(key: str) -> str:
    key = key.strip()
    if key in _PARSERS:
        return key
    return _ALIASES.get(key.lower(), key)


def _assign(values: dict, where: dict, key: str, raw: str, source: str, line):
    name = _canonical_key(key)
    if name not in _PARSERS:
        raise ConfigError(
            f"unknown key {key.strip()!r}; known keys: {', '.join(sorted(_PARSERS))}", source, line
        )
    try:
        values[name] = _PARSERS[name](raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name!r}: {exc}", source, line) from None
    where[name] = (source, line)


def read_config_lines(text: str, source: str = "<config>"):
    """Yield ``(line_number, key, value)`` from ``key = value`` text."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", source, lineno)
        key, value = line.split("=", 1)
        if not key.strip():
            raise ConfigError("missing key before '='", source, lineno)
        yield lineno, key, value.strip()


def parse_config(path=None, overrides=(), command: str = "ber", text: str | None = None,
                 seed: int | None = None) -> ExperimentConfig:
    """Build a validated :class:`ExperimentConfig`.

    ``path`` (or literal ``text``) supplies ``key = value`` lines; each entry
    of ``overrides`` is a ``key=value`` string applied afterwards; ``seed``
    wins over both.
    """
    values: dict = {}
    where: dict = {}
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", source) from None
    else:
        source = "<config>"
    where["_source"] = source
    if text is not None:
        for lineno, key, value in read_config_lines(text, source):
            _assign(values, where, key, value, source, lineno)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}", "--set")
        key, value = item.split("=", 1)
        _assign(values, where, key, value.strip(), f"--set {item}", None)
    if seed is not None:
        values["seed"] = seed
        where["seed"] = ("--seed", None)
    return validate(values, where, command)


def validate(values: dict, where: dict | None = None, command: str = "ber") -> ExperimentConfig:
    where = where or {}

    def fail(key, msg):
        src, line = where.get(key, ("<config>", None))
        raise ConfigError(msg, src, line)

    for key in _REQUIRED.get(command, ()):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", where.get("_source", "<config>"))
    cfg = ExperimentConfig(**{k: v for k, v in values.items() if k in {f.name for f in fields(ExperimentConfig)}})

    if cfg.K < 1 and "K" in values:
        fail("K", "K must be >= 1")
    if cfg.N < cfg.K and "N" in values:
        fail("N", f"N must be >= K (got N={cfg.N}, K={cfg.K})")
    if command == "ber" and not cfg.snr_db:
        fail("snr_db", "snr_db must list at least one SNR point")
    if cfg.trials < 1:
        fail("trials", "trials must be >= 1")
    if not 0.0 <= cfg.tau < 1.0:
        fail("tau", f"tau must lie in [0, 1), got {cfg.tau}")
    if cfg.csi == "perfect" and cfg.tau != 0.0:
        fail("tau", "tau requires csi = perturbed")
    if cfg.gamma is not None and cfg.gamma <= 0:
        fail("gamma", "gamma must be positive")
    if any(m < 1 for m in cfg.M):
        fail("M", "every M must be >= 1")
    if cfg.block_len < 1:
        fail("block_len", "block_len must be >= 1")
    if any(b < 1 for b in cfg.batch_sizes) or not cfg.batch_sizes:
        fail("batch_sizes", "batch sizes must be >= 1")
    if cfg.repetitions < 1:
        fail("repetitions", "repetitions must be >= 1")
    if cfg.layers < 1:
        fail("layers", "layers must be >= 1")
    if cfg.batch_size < 1:
        fail("batch_size", "batch_size must be >= 1")
    if cfg.learning_rate <= 0:
        fail("learning_rate", "learning_rate must be positive")
    if cfg.num_batches < 1:
        fail("num_batches", "num_batches must be >= 1")
    if cfg.snr_low is not None and cfg.snr_high is not None and cfg.snr_low > cfg.snr_high:
        fail("snr_low", "snr_low exceeds snr_high")
    if cfg.stage2:
        hard = [r for r in cfg.receivers if r in HARD_RECEIVERS]
        if hard and len(hard) == len(cfg.receivers):
            fail("M", f"second stage needs a soft first-stage estimate; {', '.join(hard)} gives none")
    return cfg


def train_config(cfg: ExperimentConfig):
    from ..obmnet import TrainConfig

    snr_range = None
    if cfg.snr_low is not None or cfg.snr_high is not None:
        default = TrainConfig(K=cfg.K, N=cfg.N, modulation=cfg.modulation).snr_range_db
        snr_range = (
            default[0] if cfg.snr_low is None else cfg.snr_low,
            default[1] if cfg.snr_high is None else cfg.snr_high,
        )
    return TrainConfig(
        K=cfg.K, N=cfg.N, modulation=cfg.modulation, L=cfg.layers,
        batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
        num_batches=cfg.num_batches, snr_range_db=snr_range, seed=cfg.seed,
    )


def snr_grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.asarray(cfg.snr_db, dtype=float)
