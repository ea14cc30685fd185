"""Run configuration: ingestion, cross-field validation, quick scaling.

Configs are JSON objects or an equivalent flat key=value text format
(`model.mu = 1.0`, one dotted path per line, JSON-parsed right-hand sides,
'#' comments). All cross-field checks run before any work starts.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .solver import ModelConfig


@dataclass(frozen=True)
class NumericsConfig:
    T: float = 10.0
    T_ergodic: float = 400.0
    seeds: tuple[int, ...] = (0,)
    horizons: tuple[float, ...] = (2.0, 4.0, 8.0)
    n_initial: int = 32
    n_pairs: int = 50
    forward: float | None = None
    burn_in: float = 20.0


@dataclass(frozen=True)
class BoundParams:
    alpha: float = 1.0
    t0: float = 1.0
    cutoff_index: int = 2
    c: float | None = None
    K_override: float | None = None
    M_override: float | None = None
    samples: int = 200
    n_branches: int = 8
    n_tau_estimate: int = 128


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    bound_params: BoundParams = field(default_factory=BoundParams)
    output_dir: str = "out"

    def __post_init__(self):
        num, bp, m = self.numerics, self.bound_params, self.model
        if not (0.0 < bp.alpha < 2.0):
            raise ConfigError(f"bound_params.alpha must lie in (0, 2), got {bp.alpha}")
        if bp.t0 <= 0:
            raise ConfigError(f"bound_params.t0 must be positive, got {bp.t0}")
        if bp.cutoff_index < 1:
            raise ConfigError(f"bound_params.cutoff_index must be >= 1, got {bp.cutoff_index}")
        if bp.samples < 1:
            raise ConfigError(f"bound_params.samples must be >= 1, got {bp.samples}")
        if len(num.seeds) == 0:
            raise ConfigError("numerics.seeds must be nonempty")
        if len(num.horizons) == 0:
            raise ConfigError("numerics.horizons must be nonempty")
        if any(T <= 0 for T in num.horizons) or any(
            b <= a for a, b in zip(num.horizons, num.horizons[1:])
        ):
            raise ConfigError("numerics.horizons must be positive and strictly increasing")
        for name, t in (("numerics.T", num.T), ("bound_params.t0", bp.t0)) + tuple(
            (f"numerics.horizons[{i}]", T) for i, T in enumerate(num.horizons)
        ):
            steps = t / m.h
            if abs(steps - round(steps)) > 1e-9:
                raise ConfigError(f"{name}={t} must be an integer multiple of model.h={m.h}")
        if num.n_initial < 2:
            raise ConfigError(f"numerics.n_initial must be >= 2, got {num.n_initial}")
        if num.n_pairs < 1:
            raise ConfigError(f"numerics.n_pairs must be >= 1, got {num.n_pairs}")
        if num.T_ergodic <= num.burn_in:
            raise ConfigError("numerics.T_ergodic must exceed numerics.burn_in")
        fwd = num.forward if num.forward is not None else 5.0 * m.tau
        if bp.t0 > fwd + 1e-9:
            raise ConfigError(
                f"bound_params.t0={bp.t0} exceeds the forward noise window {fwd}"
            )

    @property
    def forward_window(self) -> float:
        return (
            self.numerics.forward
            if self.numerics.forward is not None
            else 5.0 * self.model.tau
        )

    def quick(self) -> "RunConfig":
        """Scale Monte-Carlo sizes down 10x for CI smoke runs.

        n_initial keeps a floor of 100 so the box-counting stage retains its
        minimum cloud size; ensemble evolution is batched and cheap compared
        to the path-length and sampling knobs this scales down.
        """
        num = self.numerics
        return replace(
            self,
            numerics=replace(
                num,
                T_ergodic=max(num.T_ergodic / 10.0, 40.0 * self.model.h),
                n_initial=max(num.n_initial // 10, 100),
                n_pairs=max(num.n_pairs // 10, 5),
            ),
            bound_params=replace(
                self.bound_params, samples=max(self.bound_params.samples // 10, 10)
            ),
        )

    def to_dict(self) -> dict:
        d = {
            "model": self.model.to_dict(),
            "numerics": asdict(self.numerics),
            "bound_params": asdict(self.bound_params),
            "output_dir": self.output_dir,
        }
        d["numerics"]["seeds"] = list(self.numerics.seeds)
        d["numerics"]["horizons"] = list(self.numerics.horizons)
        return d


def _parse_keyvalue(text: str) -> dict:
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'dotted.path = json-value'")
        path, value = line.split("=", 1)
        keys = [k.strip() for k in path.strip().split(".")]
        try:
            parsed = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {lineno}: invalid JSON value ({exc})") from None
        node = out
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"line {lineno}: path conflict at {k!r}")
        node[keys[-1]] = parsed
    return out


def config_from_dict(d: dict) -> RunConfig:
    if "model" not in d:
        raise ConfigError("config missing 'model' section")
    known_num = set(NumericsConfig.__dataclass_fields__)
    known_bp = set(BoundParams.__dataclass_fields__)
    num_d = dict(d.get("numerics", {}))
    bp_d = dict(d.get("bound_params", {}))
    for name, given, known in (("numerics", num_d, known_num), ("bound_params", bp_d, known_bp)):
        unknown = set(given) - known
        if unknown:
            raise ConfigError(f"unknown {name} fields: {sorted(unknown)}")
    if "seeds" in num_d:
        num_d["seeds"] = tuple(int(s) for s in num_d["seeds"])
    if "horizons" in num_d:
        num_d["horizons"] = tuple(float(T) for T in num_d["horizons"])
    return RunConfig(
        model=ModelConfig.from_dict(d["model"]),
        numerics=NumericsConfig(**num_d),
        bound_params=BoundParams(**bp_d),
        output_dir=str(d.get("output_dir", "out")),
    )


def load_config(path) -> RunConfig:
    """Load a JSON or key=value config file."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from None
    else:
        data = _parse_keyvalue(text)
    return config_from_dict(data)
