"""Run configuration: YAML loading, presets, overrides and resolution to typed objects."""

import copy
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .lindblad import CoolingParams
from .rotor import MoleculeSpec, RotorError, find_level
from .trap import IonChainSpec, Particle, TrapError

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


DEFAULTS = {
    "chain": {
        "atom_mass": 172.0,
        "layout": ["atom", "molecule", "atom"],
        "axial_freq": 1.0,
        "radial_freq": 8.87,
        "ref_species": "atom",
        "scaling": "pseudopotential",
    },
    "levels": {"Jmax": 3},
    "scan": {
        "molecules": None,
        "mass_min": 70.0,
        "mass_max": 270.0,
        "n_mass": 200,
        "wz_min": 0.1,
        "wz_max": 20.0,
        "n_wz": 200,
        "Jmax": 8,
        "tolerance_khz": 0.001,
    },
    "cooling": {
        "transition": None,
        "rabi": 0.2,
        "gamma": 0.1,
        "eta": 0.012,
        "b": [1.0, 1.0],
        "mode_freq": "auto",
        "detuning": None,
        "phases": "auto",
        "wavelength_nm": 411.0,
        "duration": 8.0,
        "record_every": 0.1,
        "couplings": {},
        "M_values": None,
    },
    "numerics": {
        "n_max": 2,
        "secular": False,
        "jump": "independent",
        "normalization": "rate",
        "polarization_mixing": "intensity",
        "rtol": 1e-12,
        "atol": 1e-14,
    },
    "drive": {"levels": None, "initial": "uniform", "pulses": []},
    "protocol": {
        "kind": "depletion",
        "levels": ["2_21", "3_31", "3_30"],
        "iterations": 10,
        "eps": 0.0,
        "every": 3,
        "rabi": 10.0,
        "threshold": 0.01,
    },
    "output": {"dir": "out"},
}


class _Loader(yaml.SafeLoader):
    """Safe loader that keeps level labels such as ``3_31`` as strings.

    YAML 1.1 reads digit groups joined by underscores as integers.
    """


_Loader.yaml_implicit_resolvers = {
    ch: [(tag, rx) for tag, rx in rs if tag not in ("tag:yaml.org,2002:int", "tag:yaml.org,2002:float")]
    for ch, rs in yaml.SafeLoader.yaml_implicit_resolvers.items()
}
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:int", re.compile(r"^[-+]?(?:0|[1-9][0-9]*)$"), list("-+0123456789"))
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)(?:[eE][-+]?[0-9]+)?$|^[-+]?\.(?:inf|Inf|INF)$|^\.(?:nan|NaN|NAN)$"),
    list("-+0123456789."))


def load_yaml(text):
    return yaml.load(text, Loader=_Loader)


def _load_yaml_resource(name):
    return load_yaml(resources.files("rotcool").joinpath("data", name).read_text())


def bundled_molecules():
    """Bundled molecule table as ``{key: MoleculeSpec}``."""
    return {k: MoleculeSpec(**v) for k, v in _load_yaml_resource("molecules.yaml").items()}


def presets():
    return _load_yaml_resource("presets.yaml")


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text):
    """``"a.b.c=value"`` -> (["a", "b", "c"], parsed value)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key=value")
    key, val = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = load_yaml(val)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value in override {text!r}: {exc}") from None
    return path, value


def apply_override(tree, path, value):
    node = tree
    for p in path[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[path[-1]] = value


def read_tree(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        tree = load_yaml(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"parse error in {path}{where}: {getattr(exc, 'problem', exc)}") from None
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return tree


@dataclass
class RunConfig:
    tree: dict  # fully resolved key-value tree
    molecule: MoleculeSpec
    chain: IonChainSpec
    cooling: CoolingParams | None
    couplings: dict = field(default_factory=dict)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.tree == other.tree

    def section(self, name):
        return self.tree[name]

    def dump(self):
        return yaml.safe_dump(self.tree, sort_keys=True)

    def conventions(self):
        n = self.tree["numerics"]
        c = self.tree["chain"]
        return {
            "mass_scaling": c["scaling"],
            "reference_species": c["ref_species"],
            "jump": n["jump"],
            "jump_normalization": n["normalization"],
            "polarization_mixing": n["polarization_mixing"],
            "secular": n["secular"],
            "coupling_units": "kHz ordinary frequency (E0*mu/h)",
        }


def build_tree(path=None, preset=None, overrides=()):
    """Merge defaults, preset, file and ``--set`` overrides (in that order)."""
    tree = {}
    file_tree = read_tree(path) if path else {}
    name = preset or file_tree.pop("preset", None)
    if name:
        table = presets()
        if name not in table:
            raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(table))}")
        tree = _merge(tree, table[name])
    tree = _merge(tree, file_tree)
    for o in overrides:
        apply_override(tree, *parse_override(o))
    tree.pop("preset", None)
    return tree


def resolve(tree):
    """Fill defaults, expand molecule references and validate; returns a :class:`RunConfig`."""
    if "molecule" not in tree or tree["molecule"] in (None, {}):
        raise ConfigError("missing required block 'molecule'")
    t = {k: _merge(v, tree.get(k)) for k, v in DEFAULTS.items()}
    extra = set(tree) - set(DEFAULTS) - {"molecule", "version"}
    if extra:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(extra))}")
    mols = bundled_molecules()
    mol = tree["molecule"]
    if isinstance(mol, str):
        if mol not in mols:
            raise ConfigError(f"molecule: unknown molecule {mol!r}; bundled: {', '.join(mols)}")
        key = mol
        spec = mols[mol]
    elif isinstance(mol, dict):
        key = None
        try:
            spec = MoleculeSpec(**mol)
        except (TypeError, RotorError) as exc:
            raise ConfigError(f"molecule: {exc}") from None
    else:
        raise ConfigError("molecule: expected a bundled name or a mapping")
    t["molecule"] = key if key else {k: v for k, v in vars(spec).items() if v is not None}
    t["version"] = CONFIG_VERSION

    c = t["chain"]
    try:
        parts = []
        for kind in c["layout"]:
            if kind == "molecule":
                parts.append(Particle(float(spec.mass), 1.0, "molecule"))
            elif kind == "atom":
                parts.append(Particle(float(c["atom_mass"]), 1.0, "atom"))
            else:
                raise ConfigError(f"chain.layout: unknown particle kind {kind!r}")
        chain = IonChainSpec(parts, float(c["axial_freq"]), float(c["radial_freq"]),
                             c["ref_species"], c["scaling"])
    except (TrapError, TypeError, ValueError) as exc:
        raise ConfigError(f"chain: {exc}") from None

    if t["scan"]["molecules"] is None:
        t["scan"]["molecules"] = [key] if key else []
    for m in t["scan"]["molecules"]:
        if m not in mols:
            raise ConfigError(f"scan.molecules: unknown molecule {m!r}")

    cool = t["cooling"]
    n = t["numerics"]
    params = None
    couplings = {int(k): float(v) for k, v in (cool["couplings"] or {}).items()}
    cool["couplings"] = couplings
    if cool["transition"] is not None:
        try:
            j1, _ = find_level(spec, cool["transition"][0])
            j2, _ = find_level(spec, cool["transition"][1])
        except (RotorError, IndexError, TypeError) as exc:
            raise ConfigError(f"cooling.transition: {exc}") from None
        if j2.energy <= j1.energy:
            raise ConfigError("cooling.transition: give the pair as [lower, upper]")
        if cool["mode_freq"] == "auto":
            cool["mode_freq"] = float(j2.energy - j1.energy)
        if cool["phases"] == "auto":
            from .lindblad import laser_phases
            from .trap import equilibrium_positions
            pos = equilibrium_positions(chain)
            atoms = [x for x, p in zip(pos, chain.particles) if p.kind == "atom"]
            cool["phases"] = list(laser_phases(atoms, cool["wavelength_nm"]))
        if cool["M_values"] is None:
            cool["M_values"] = list(range(0, min(j1.J, j2.J) + 1))
        try:
            params = CoolingParams(
                rabi=float(cool["rabi"]), gamma=float(cool["gamma"]), eta=float(cool["eta"]),
                b=tuple(cool["b"]), coupling=0.0, mode_freq=float(cool["mode_freq"]),
                detuning=None if cool["detuning"] is None else float(cool["detuning"]),
                phases=tuple(cool["phases"]), duration=float(cool["duration"]),
                jump=n["jump"], normalization=n["normalization"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cooling: {exc}") from None
    if n["polarization_mixing"] not in ("intensity", "amplitude"):
        raise ConfigError("numerics.polarization_mixing: expected 'intensity' or 'amplitude'")
    if t["protocol"]["kind"] not in ("depletion", "single_state"):
        raise ConfigError("protocol.kind: expected 'depletion' or 'single_state'")
    return RunConfig(t, spec, chain, params, couplings)


def load_config(path=None, preset=None, overrides=(), echo_dir=None):
    """Load, resolve and optionally echo the resolved configuration.

    The echo (``resolved_config.yaml`` in ``echo_dir``) reloads to an equal
    :class:`RunConfig`.
    """
    cfg = resolve(build_tree(path, preset, overrides))
    if echo_dir is not None:
        out = Path(echo_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved_config.yaml").write_text(cfg.dump())
    return cfg
