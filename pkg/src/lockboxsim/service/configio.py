"""Configuration persistence: the full module/plant state as one YAML tree.

``save`` serializes every configuration register in its python-domain
value (volts, hertz, enum names); ``load`` writes them back through the
same field setters, so a save/load cycle reproduces the register codes bit
for bit.  Unknown keys are rejected with their location; duplicate keys
are a parse error.
"""

from __future__ import annotations

import io
from dataclasses import asdict, fields

import yaml

from lockboxsim.engine import Engine
from lockboxsim.lockbox.sequence import InputChain, LockboxConfig, LockStage
from lockboxsim.plants import CavityPlant, LaserPairPlant, LoopbackPlant, PiezoMode

CONFIG_VERSION = 1

PLANT_KINDS = {
    "fabry_perot": CavityPlant,
    "laser_pair": LaserPairPlant,
    "loopback": LoopbackPlant,
}


class ConfigError(ValueError):
    pass


class _StrictLoader(yaml.SafeLoader):
    pass


def _no_duplicates(loader, node, deep=False):
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            raise ConfigError(
                f"duplicate key {key!r} at line {key_node.start_mark.line + 1}, "
                f"column {key_node.start_mark.column + 1}")
        seen.add(key)
    return loader.construct_mapping(node, deep)


_StrictLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _no_duplicates)


def parse_yaml(text: str) -> dict:
    try:
        doc = yaml.load(text, Loader=_StrictLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"YAML parse error{where}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a mapping")
    return doc


def save_config(engine: Engine, lockbox_cfg: LockboxConfig | None = None) -> str:
    doc: dict = {"version": CONFIG_VERSION, "seed": engine.seed}
    plant = engine.plant
    if plant is None:
        doc["plant"] = {"kind": "none"}
    else:
        params = asdict(plant)
        doc["plant"] = {"kind": plant.kind, "params": params}
    doc["modules"] = engine.state_dict()
    if lockbox_cfg is not None:
        doc["lockbox"] = _lockbox_to_doc(lockbox_cfg)
    buf = io.StringIO()
    yaml.safe_dump(doc, buf, sort_keys=False, default_flow_style=False)
    return buf.getvalue()


def load_config(text: str) -> tuple[Engine, LockboxConfig | None]:
    doc = parse_yaml(text)
    allowed = {"version", "seed", "plant", "modules", "lockbox"}
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown top-level key {key!r}")
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    engine = Engine(seed=int(doc.get("seed", 1)))
    plant_doc = doc.get("plant", {"kind": "none"})
    kind = plant_doc.get("kind", "none")
    if kind != "none":
        if kind not in PLANT_KINDS:
            raise ConfigError(f"unknown plant kind {kind!r}")
        cls = PLANT_KINDS[kind]
        params = dict(plant_doc.get("params", {}))
        if kind == "fabry_perot" and "modes" in params:
            params["modes"] = [PiezoMode(**m) for m in params["modes"]]
        valid = {f.name for f in fields(cls)}
        for key in params:
            if key not in valid:
                raise ConfigError(f"plant.params: unknown key {key!r}")
        engine.set_plant(cls(**params))
    modules = doc.get("modules", {})
    try:
        engine.load_state(modules)
    except KeyError as exc:
        raise ConfigError(f"modules: {exc.args[0]}") from exc
    lockbox_cfg = None
    if "lockbox" in doc:
        lockbox_cfg = _lockbox_from_doc(doc["lockbox"])
    return engine, lockbox_cfg


def _lockbox_to_doc(cfg: LockboxConfig) -> dict:
    doc = asdict(cfg)
    doc["inputs"] = {k: asdict(v) if not isinstance(v, dict) else v
                     for k, v in cfg.inputs.items()}
    doc["stages"] = [asdict(s) if not isinstance(s, dict) else s
                     for s in cfg.stages]
    return doc


def _lockbox_from_doc(doc: dict) -> LockboxConfig:
    valid = {f.name for f in fields(LockboxConfig)}
    for key in doc:
        if key not in valid:
            raise ConfigError(f"lockbox: unknown key {key!r}")
    params = dict(doc)
    params["inputs"] = {k: InputChain(**v) for k, v in doc.get("inputs", {}).items()}
    params["stages"] = [LockStage(**s) for s in doc.get("stages", [])]
    return LockboxConfig(**params)
