"""Experiment configuration: a small versioned JSON schema, parsed fail-closed.

Unknown keys are rejected anywhere in the document and every complaint names
the offending field, so a typo cannot silently fall back to a default.
"""

import hashlib
import json
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

ALGORITHMS = (
    "mmi_pair",
    "mm",
    "ml_oracle",
    "sequential_degraded",
    "epsilon_like",
    "k_info",
    "thresholded",
    "hierarchical",
    "map_oracle",
    "blockwise_register",
    "blockwise_cluster",
)


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _check_keys(obj: dict, path: str, required: tuple, optional: tuple = ()):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "missing required key")


def _number(obj, path, kind=float, positive=False, minimum=None):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(path, f"expected a {kind.__name__}")
    value = kind(obj)
    if kind is int and obj != value:
        raise ConfigError(path, "expected an integer")
    if positive and value <= 0:
        raise ConfigError(path, "must be positive")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return value


@dataclass(frozen=True)
class ChannelConfig:
    kind: str
    alpha: float | None = None
    matrix: tuple | None = None
    channels: tuple = ()


@dataclass(frozen=True)
class ModelConfig:
    r: int
    scene_count: int
    prior: tuple | None
    scene_pmf: tuple | None
    channel: ChannelConfig


@dataclass(frozen=True)
class GroupConfig:
    kind: str
    order: int | None = None
    dims: tuple | None = None


@dataclass(frozen=True)
class AlgorithmConfig:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SweepConfig:
    variable: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    schema: int
    model: ModelConfig
    group: GroupConfig
    algorithm: AlgorithmConfig
    sweep: SweepConfig
    m: int | None
    n: int | None
    trials: int
    seed: int


def _parse_channel(doc, path, nested=True) -> ChannelConfig:
    _check_keys(doc, path, ("kind",), ("alpha", "matrix", "channels"))
    kind = doc["kind"]
    if kind in ("bsc", "uniform_flip"):
        if "alpha" not in doc:
            raise ConfigError(f"{path}.alpha", "missing required key")
        alpha = _number(doc["alpha"], f"{path}.alpha")
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"{path}.alpha", "must lie in [0, 1]")
        return ChannelConfig(kind=kind, alpha=alpha)
    if kind == "explicit":
        if "matrix" not in doc:
            raise ConfigError(f"{path}.matrix", "missing required key")
        matrix = doc["matrix"]
        if not isinstance(matrix, list) or not all(isinstance(r, list) for r in matrix):
            raise ConfigError(f"{path}.matrix", "expected a list of rows")
        return ChannelConfig(kind=kind, matrix=tuple(tuple(r) for r in matrix))
    if kind in ("product", "degraded"):
        if not nested:
            raise ConfigError(f"{path}.kind", "nested joint channels not supported")
        if "channels" not in doc or not isinstance(doc["channels"], list) or not doc["channels"]:
            raise ConfigError(f"{path}.channels", "expected a nonempty list")
        subs = tuple(
            _parse_channel(c, f"{path}.channels[{i}]", nested=False)
            for i, c in enumerate(doc["channels"])
        )
        return ChannelConfig(kind=kind, channels=subs)
    raise ConfigError(f"{path}.kind", f"unknown channel kind {kind!r}")


def _parse_pmf(doc, path, length) -> tuple | None:
    if doc is None:
        return None
    if not isinstance(doc, list) or len(doc) != length:
        raise ConfigError(path, f"expected a list of {length} probabilities")
    vals = tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(doc))
    if any(v < 0 for v in vals) or abs(sum(vals) - 1.0) > 1e-9:
        raise ConfigError(path, "must be a pmf (nonnegative, sum 1)")
    return vals


def _parse_model(doc, path) -> ModelConfig:
    _check_keys(doc, path, ("r", "scene_count", "channel"), ("prior", "scene_pmf"))
    r = _number(doc["r"], f"{path}.r", int, minimum=2)
    scenes = _number(doc["scene_count"], f"{path}.scene_count", int, minimum=1)
    return ModelConfig(
        r=r,
        scene_count=scenes,
        prior=_parse_pmf(doc.get("prior"), f"{path}.prior", r),
        scene_pmf=_parse_pmf(doc.get("scene_pmf"), f"{path}.scene_pmf", scenes),
        channel=_parse_channel(doc["channel"], f"{path}.channel"),
    )


def _parse_group(doc, path) -> GroupConfig:
    _check_keys(doc, path, ("kind",), ("order", "dims"))
    kind = doc["kind"]
    if kind == "ring":
        order = doc.get("order")
        if order is not None:
            order = _number(order, f"{path}.order", int, minimum=1)
        return GroupConfig(kind="ring", order=order)
    if kind == "torus":
        dims = doc.get("dims")
        if (
            not isinstance(dims, list)
            or len(dims) != 2
            or any(_number(d, f"{path}.dims", int, minimum=1) < 1 for d in dims)
        ):
            raise ConfigError(f"{path}.dims", "torus needs [height, width]")
        return GroupConfig(kind="torus", dims=tuple(int(d) for d in dims))
    raise ConfigError(f"{path}.kind", f"unknown group kind {kind!r}")


_ALGORITHM_PARAMS = {
    "mmi_pair": ((), ()),
    "mm": ((), ()),
    "ml_oracle": ((), ()),
    "sequential_degraded": ((), ()),
    "epsilon_like": (("epsilon",), ()),
    "k_info": (("k",), ()),
    "thresholded": ((), ("c1", "alpha")),
    "hierarchical": (("level",), ()),
    "map_oracle": ((), ("mode",)),
    "blockwise_register": ((), ("k", "c")),
    "blockwise_cluster": (("k", "method"), ("epsilon", "level_k", "c1", "alpha")),
}


def _parse_algorithm(doc, path) -> AlgorithmConfig:
    _check_keys(doc, path, ("name",), ("params",))
    name = doc["name"]
    if name not in ALGORITHMS:
        raise ConfigError(f"{path}.name", f"unknown algorithm {name!r}")
    params = doc.get("params", {})
    required, optional = _ALGORITHM_PARAMS[name]
    _check_keys(params, f"{path}.params", required, optional)
    checked = {}
    for key, value in params.items():
        p = f"{path}.params.{key}"
        if key in ("epsilon", "c1", "alpha", "c"):
            checked[key] = _number(value, p, float, positive=True)
        elif key in ("k", "level", "level_k"):
            checked[key] = _number(value, p, int, minimum=1)
        elif key == "mode":
            if value not in ("ml", "map"):
                raise ConfigError(p, "must be 'ml' or 'map'")
            checked[key] = value
        elif key == "method":
            if value not in ("epsilon_like", "k_info", "thresholded"):
                raise ConfigError(p, f"unknown block-level method {value!r}")
            checked[key] = value
        else:
            raise ConfigError(p, "unknown key")
    return AlgorithmConfig(name=name, params=checked)


def _parse_sweep(doc, path) -> SweepConfig:
    _check_keys(doc, path, ("variable", "values"))
    if doc["variable"] not in ("n", "m"):
        raise ConfigError(f"{path}.variable", "must be 'n' or 'm'")
    values = doc["values"]
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{path}.values", "expected a nonempty list")
    vals = tuple(_number(v, f"{path}.values[{i}]", int, minimum=1) for i, v in enumerate(values))
    return SweepConfig(variable=doc["variable"], values=vals)


def parse_config(doc) -> ExperimentConfig:
    _check_keys(
        doc,
        "config",
        ("schema", "model", "group", "algorithm", "sweep", "trials", "seed"),
        ("m", "n"),
    )
    schema = _number(doc["schema"], "config.schema", int)
    if schema != SCHEMA_VERSION:
        raise ConfigError("config.schema", f"unsupported schema {schema}")
    sweep = _parse_sweep(doc["sweep"], "config.sweep")
    m = doc.get("m")
    n = doc.get("n")
    if m is not None:
        m = _number(m, "config.m", int, minimum=1)
    if n is not None:
        n = _number(n, "config.n", int, minimum=1)
    if sweep.variable == "n" and m is None:
        raise ConfigError("config.m", "required when sweeping n")
    if sweep.variable == "m" and n is None:
        raise ConfigError("config.n", "required when sweeping m")
    return ExperimentConfig(
        schema=schema,
        model=_parse_model(doc["model"], "config.model"),
        group=_parse_group(doc["group"], "config.group"),
        algorithm=_parse_algorithm(doc["algorithm"], "config.algorithm"),
        sweep=sweep,
        m=m,
        n=n,
        trials=_number(doc["trials"], "config.trials", int, minimum=1),
        seed=_number(doc["seed"], "config.seed", int, minimum=0),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return parse_config(doc)


def config_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
