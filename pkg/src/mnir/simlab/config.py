"""Simulation settings and the flat ``key = value`` config file format."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CorpusFormatError, InputError
from ..seeding import rng_for

COLLAPSED = "collapsed-multinomial"
RANDOM_EFFECTS = "poisson-random-effects"
MODELS = (COLLAPSED, RANDOM_EFFECTS)
CONDITIONING = ("fixed", "full")

# stream identifiers for seed derivation
STREAM_PARAMS = 1
STREAM_PROP1 = 2
STREAM_PROP2_DESIGN = 3
STREAM_PROP2_REPLICATE = 4
STREAM_PROP2_FULL = 5
STREAM_EFFICIENCY = 6


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce a Monte Carlo run except the worker count.

    ``alpha_true`` defaults to zeros (uniform word use at y=0). When
    ``phi_true`` is omitted it is drawn once, uniform on
    ``[-phi_scale, phi_scale]``, from a stream derived from ``seed``, with
    the baseline entry set to zero.

    For the random-effects model ``m`` is the expected document length at
    y=0: ``mu_j = log(m) + log q0_j - u_sd**2 / 2``.

    ``probe_z`` values are in units of the training projection standard
    deviation, so ``(0, 1)`` probes the centre and one sd out.
    """

    p: int = 20
    n: int = 200
    m: int = 100
    pi: float = 0.5
    alpha_true: tuple | None = None
    phi_true: tuple | None = None
    phi_scale: float = 1.0
    baseline: int = 0
    model: str = COLLAPSED
    u_sd: float = 1.0
    forward_alpha: float = 0.0
    forward_beta: float = 1.0
    sigma: float = 0.5
    gamma: float = 0.0
    replicates: int = 500
    seed: int = 0
    m_ladder: tuple = (25, 100, 400)
    probe_z: tuple = (0.0, 1.0)
    conditioning: str = "fixed"
    n_test: int | None = None
    bound: float = 30.0

    def __post_init__(self):
        if self.p < 2:
            raise InputError("p must be at least 2")
        if self.n < 1:
            raise InputError("n must be at least 1")
        if self.m < 1 or any(int(m) < 1 for m in self.m_ladder):
            raise InputError("m must be at least 1")
        if not 0 < self.pi < 1:
            raise InputError("pi must lie in (0, 1)")
        if self.replicates < 1:
            raise InputError("replicates must be at least 1")
        if self.model not in MODELS:
            raise InputError(f"model must be one of {MODELS}")
        if self.conditioning not in CONDITIONING:
            raise InputError(f"conditioning must be one of {CONDITIONING}")
        if not 0 <= self.baseline < self.p:
            raise InputError("baseline out of range")
        if self.sigma < 0 or self.u_sd < 0:
            raise InputError("sigma and u_sd must be nonnegative")
        for name in ("alpha_true", "phi_true"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(float(a) for a in v)
                if len(v) != self.p or not all(math.isfinite(a) for a in v):
                    raise InputError(f"{name} must have {self.p} finite entries")
                object.__setattr__(self, name, v)
        if self.phi_true is not None and self.phi_true[self.baseline] != 0:
            raise InputError("phi_true must be zero at the baseline word")
        object.__setattr__(self, "m_ladder", tuple(int(m) for m in self.m_ladder))
        object.__setattr__(self, "probe_z", tuple(float(z) for z in self.probe_z))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def test_docs(self) -> int:
        return self.n if self.n_test is None else int(self.n_test)

    def true_parameters(self):
        """``(alpha, phi)`` with the baseline entries pinned to zero."""
        if self.alpha_true is None:
            alpha = np.zeros(self.p)
        else:
            alpha = np.asarray(self.alpha_true, dtype=float)
            alpha = alpha - alpha[self.baseline]
        if self.phi_true is None:
            rng = rng_for(self.seed, STREAM_PARAMS, self.p)
            phi = rng.uniform(-self.phi_scale, self.phi_scale, size=self.p)
            phi[self.baseline] = 0.0
        else:
            phi = np.asarray(self.phi_true, dtype=float)
        return alpha, phi

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}
_TUPLE_KEYS = {"alpha_true", "phi_true", "m_ladder", "probe_z"}
_INT_KEYS = {"p", "n", "m", "baseline", "replicates", "n_test"}
_STR_KEYS = {"model", "conditioning"}


def parse_config(text, source="<config>", **overrides) -> SimConfig:
    """Parse ``key = value`` lines; lists are comma separated, ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CorpusFormatError("expected 'key = value'", source, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "seed":
            raise CorpusFormatError("seed is set with --seed, not in the config file", source, lineno)
        if key not in _FIELDS:
            raise CorpusFormatError(f"unknown key {key!r}", source, lineno)
        if key in values:
            raise CorpusFormatError(f"duplicate key {key!r}", source, lineno)
        try:
            if key in _TUPLE_KEYS:
                items = [s.strip() for s in value.split(",") if s.strip()]
                conv = int if key == "m_ladder" else float
                values[key] = tuple(conv(s) for s in items)
            elif key in _INT_KEYS:
                values[key] = int(value)
            elif key in _STR_KEYS:
                values[key] = value
            else:
                values[key] = float(value)
        except ValueError:
            raise CorpusFormatError(f"bad value {value!r} for {key}", source, lineno) from None
    values.update(overrides)
    return SimConfig(**values)


def load_config(path, **overrides) -> SimConfig:
    path = Path(path)
    if not path.is_file():
        raise CorpusFormatError("config file not found", path)
    return parse_config(path.read_text(encoding="utf-8"), source=str(path), **overrides)
