"""Scenario files: INI-style text describing one reproducible run.

Sections are ``[graph]``, ``[params]``, one ``[seed.<k>]`` per seeded node,
``[integrator]`` and ``[outputs]``. Relative graph paths are resolved against
the scenario file's directory; the output directory is left as written.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .equilibria import format_value
from .errors import ParseError
from .model import PARAM_NAMES, StateField, SvirsParams
from .simulation import IntegratorConfig

ARTIFACTS = ("timeseries", "snapshots", "lyapunov", "equilibria_report")
MONITORS = ("auto", "dfe", "endemic", "none")


def data_file(name: str) -> Path:
    """Path of a file shipped in the package's ``data`` directory."""
    return Path(str(resources.files("netepi") / "data" / name))


@dataclass(frozen=True)
class Seed:
    """Initial state override at one node (1-based index)."""

    node: int
    S: float
    V: float
    I: float
    R: float


@dataclass
class Scenario:
    graph_path: Path
    params: SvirsParams
    coords_path: Optional[Path] = None
    seeding: list = field(default_factory=list)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output_dir: str = "out"
    artifacts: tuple = ("timeseries", "snapshots", "lyapunov", "equilibria_report")
    snapshot_times: tuple = ()
    lyapunov: str = "auto"
    name: str = ""

    def initial_state(self, n: int) -> StateField:
        """Everyone susceptible except at the seeded nodes."""
        N = self.params.N
        state = StateField.uniform(n, N, 0.0, 0.0, 0.0)
        for seed in self.seeding:
            if not 1 <= seed.node <= n:
                raise ParseError(f"seeded node {seed.node} outside [1, {n}]")
            k = seed.node - 1
            state.S[k], state.V[k], state.I[k], state.R[k] = seed.S, seed.V, seed.I, seed.R
        return state

    @property
    def source_node(self) -> Optional[int]:
        return self.seeding[0].node if self.seeding else None

    def with_source_node(self, node: int) -> "Scenario":
        if not self.seeding:
            raise ParseError("scenario has no seeded node to move")
        seeds = [dataclasses.replace(self.seeding[0], node=int(node))] + list(self.seeding[1:])
        return dataclasses.replace(self, seeding=seeds)


def _float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"[{section}] {key}: not a number: {raw!r}") from None


def _float_list(section, key, raw):
    return tuple(_float(section, key, item) for item in raw.replace(",", " ").split())


def parse_scenario_text(text: str, base_dir=".", name: str = "") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(f"scenario: {exc}") from exc
    base_dir = Path(base_dir)

    if not cp.has_section("graph") or "path" not in cp["graph"]:
        raise ParseError("scenario: [graph] path is required")
    graph_path = (base_dir / cp["graph"]["path"]).resolve()
    coords = cp["graph"].get("coords")
    coords_path = (base_dir / coords).resolve() if coords else None

    if not cp.has_section("params"):
        raise ParseError("scenario: [params] section is required")
    raw = dict(cp["params"])
    values = {}
    for key, value in raw.items():
        if key not in PARAM_NAMES and key != "beta_over_N":
            raise ParseError(f"[params] unknown key {key!r}")
        values[key] = _float("params", key, value)
    if "beta_over_N" in values:
        if "beta" in values:
            raise ParseError("[params] give either beta or beta_over_N, not both")
        if "N" not in values:
            raise ParseError("[params] beta_over_N needs N")
        values["beta"] = values.pop("beta_over_N") / values["N"]
    missing = [k for k in PARAM_NAMES if k not in values]
    if missing:
        raise ParseError(f"[params] missing {', '.join(missing)}")
    params = SvirsParams(**values)

    seeds = []
    seed_sections = [s for s in cp.sections() if s.startswith("seed.")]
    for sec in sorted(seed_sections, key=lambda s: int(s.split(".", 1)[1])
                      if s.split(".", 1)[1].isdigit() else 10**9):
        body = cp[sec]
        if "node" not in body:
            raise ParseError(f"[{sec}] node is required")
        try:
            node = int(body["node"])
        except ValueError:
            raise ParseError(f"[{sec}] node must be an integer") from None
        comp = {c: _float(sec, c, body[c]) for c in ("S", "V", "I", "R") if c in body}
        unknown = set(body) - {"node", "S", "V", "I", "R"}
        if unknown:
            raise ParseError(f"[{sec}] unknown keys {sorted(unknown)}")
        for c in ("V", "I", "R"):
            comp.setdefault(c, 0.0)
        comp.setdefault("S", params.N - comp["V"] - comp["I"] - comp["R"])
        if min(comp.values()) < 0:
            raise ParseError(f"[{sec}] compartments must be non-negative")
        total = sum(comp.values())
        if abs(total - params.N) > 1e-9 * params.N:
            raise ParseError(f"[{sec}] S+V+I+R = {total:g}, must equal N = {params.N:g}")
        seeds.append(Seed(node, comp["S"], comp["V"], comp["I"], comp["R"]))
    if len({s.node for s in seeds}) != len(seeds):
        raise ParseError("a node is seeded twice")

    icfg = {}
    if cp.has_section("integrator"):
        fields_ = {f.name: f.type for f in dataclasses.fields(IntegratorConfig)}
        for key, value in cp["integrator"].items():
            if key not in fields_:
                raise ParseError(f"[integrator] unknown key {key!r}")
            if key in ("method", "convergence_target"):
                icfg[key] = value.strip()
            elif key == "keep_snapshots":
                icfg[key] = cp["integrator"].getboolean(key)
            else:
                icfg[key] = _float("integrator", key, value)
    try:
        integrator = IntegratorConfig(**icfg)
    except ValueError as exc:
        raise ParseError(f"[integrator] {exc}") from exc

    out = cp["outputs"] if cp.has_section("outputs") else {}
    output_dir = out.get("dir", "out")
    artifacts = tuple(a.strip() for a in out.get("artifacts", ", ".join(ARTIFACTS)).split(",")
                      if a.strip())
    for a in artifacts:
        if a not in ARTIFACTS:
            raise ParseError(f"[outputs] unknown artifact {a!r}")
    snapshot_times = _float_list("outputs", "snapshot_times", out.get("snapshot_times", ""))
    lyapunov = out.get("lyapunov", "auto").strip()
    if lyapunov not in MONITORS:
        raise ParseError(f"[outputs] lyapunov must be one of {MONITORS}")

    return Scenario(graph_path=graph_path, params=params, coords_path=coords_path,
                    seeding=seeds, integrator=integrator, output_dir=output_dir,
                    artifacts=artifacts, snapshot_times=snapshot_times, lyapunov=lyapunov,
                    name=name)


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario_text(path.read_text(), base_dir=path.parent, name=path.stem)


def serialize_scenario(sc: Scenario) -> str:
    """Inverse of :func:`parse_scenario_text` (paths written absolute)."""
    lines = ["[graph]", f"path = {sc.graph_path}"]
    if sc.coords_path is not None:
        lines.append(f"coords = {sc.coords_path}")
    lines += ["", "[params]"]
    lines += [f"{k} = {format_value(getattr(sc.params, k))}" for k in PARAM_NAMES]
    for k, seed in enumerate(sc.seeding, start=1):
        lines += ["", f"[seed.{k}]", f"node = {seed.node}"]
        lines += [f"{c} = {format_value(getattr(seed, c))}" for c in ("S", "V", "I", "R")]
    lines += ["", "[integrator]"]
    for f in dataclasses.fields(IntegratorConfig):
        lines.append(f"{f.name} = {format_value(getattr(sc.integrator, f.name))}")
    lines += ["", "[outputs]", f"dir = {sc.output_dir}",
              f"artifacts = {', '.join(sc.artifacts)}",
              "snapshot_times = " + ", ".join(format_value(t) for t in sc.snapshot_times),
              f"lyapunov = {sc.lyapunov}", ""]
    return "\n".join(lines)
