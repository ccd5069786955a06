"""Scenario configuration: loading, schema validation and defaults."""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .kernels import Params

UNIT_TOL = 1e-12

DEFAULT_TOLERANCES = {
    "constraint": 1e-10,
    "residual_analytic_t0": 1e-10,
    "residual_analytic_traj": 1e-8,
    "residual_spectral": 1e-6,
    "norm": 1e-10,
    "pairing": 1e-9,
    "energy_drift": 1e-8,
    "spin_sum_drift": 1e-8,
    "total_spin_drift": 1e-8,
    "total_spin_quadrature": 1e-6,
    "energy_quadrature": 1e-6,
    "hamiltonian_closed": 1e-8,
    "hamiltonian_double": 1e-8,
    "lax_adjoint": 1e-8,
    "i2_identity": 1e-3,
    "isospectral": 1e-3,
    "trace_drift": 1e-3,
}


@dataclass
class Scenario:
    name: str
    params: Params
    n0: np.ndarray
    poles: np.ndarray
    axes: np.ndarray
    t0: float = 0.0
    t_start: float = 0.0
    t_end: float = 1.0
    n_outputs: int = 11
    snapshot_times: list = field(default_factory=list)
    diagnose_times: list = field(default_factory=list)
    window: float = 40.0
    n_points: int = 4096
    lax_n_points: int = 512
    lax_times: list = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    perturbation: dict = None
    out_dir: str = None
    fmt: str = "csv"
    source: str = ""

    def tol(self, key):
        return self.tolerances[key]


def bundled_configs():
    root = resources.files("ncihf") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def _resolve(path):
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    name = p.name if p.name.endswith(".json") else p.name + ".json"
    res = resources.files("ncihf") / "configs" / name
    if res.is_file():
        return res.read_text(), f"<bundled>/{name}"
    raise ConfigError(f"{path}: no such file or bundled config (bundled: {', '.join(bundled_configs())})")


def _schema():
    return json.loads((resources.files("ncihf") / "schema" / "scenario.schema.json").read_text())


def _locate(text, path):
    """Best-effort line number of the JSON node addressed by ``path``."""
    pos = 0
    for key in path:
        if isinstance(key, str):
            hit = text.find(f'"{key}"', pos)
            if hit < 0:
                break
            pos = hit
        else:
            # skip to the key-th element of the array that follows
            start = text.find("[", pos)
            if start < 0:
                break
            pos, depth, count = start + 1, 0, 0
            while pos < len(text) and count < key:
                ch = text[pos]
                if ch in "[{":
                    depth += 1
                elif ch in "]}":
                    depth -= 1
                elif ch == "," and depth == 0:
                    count += 1
                pos += 1
    return text.count("\n", 0, pos) + 1


def _fail(src, text, path, msg):
    loc = "/".join(str(p) for p in path) or "<root>"
    raise ConfigError(f"{src}:{_locate(text, path)}: {loc}: {msg}")


def load_config(path, tol_scale=1.0):
    """Read, validate and normalise a scenario config (file path or bundled name)."""
    text, src = _resolve(path)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{src}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft7Validator(_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        _fail(src, text, list(e.absolute_path), e.message)

    n0 = np.array(raw["n0"], dtype=float)
    if abs(np.linalg.norm(n0) - 1) > UNIT_TOL:
        _fail(src, text, ["n0"], f"not a unit vector (|n0| = {float(np.linalg.norm(n0))!r})")
    axes = []
    for j, sol in enumerate(raw["solitons"]):
        n3 = np.array(sol["n3"], dtype=float)
        if abs(np.linalg.norm(n3) - 1) > UNIT_TOL:
            _fail(src, text, ["solitons", j, "n3"], f"not a unit vector (|n3| = {float(np.linalg.norm(n3))!r})")
        axes.append(n3)
    params = Params(float(raw.get("delta", 1.0)))
    d = params.delta
    poles = np.array([(s["re_a"] + 1j * s["im_a"]) * d for s in raw["solitons"]], dtype=complex)
    if raw.get("perturbation") and raw["perturbation"]["soliton"] >= len(poles):
        _fail(src, text, ["perturbation", "soliton"], "index out of range")

    time = raw.get("time", {})
    grid = raw.get("grid", {})
    outputs = raw.get("outputs", {})
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(raw.get("tolerances", {}))
    unknown = set(tol) - set(DEFAULT_TOLERANCES)
    if unknown:
        _fail(src, text, ["tolerances", sorted(unknown)[0]], "unknown tolerance key")
    tol = {k: v * tol_scale for k, v in tol.items()}
    t0 = float(time.get("t0", 0.0)) * d
    sc = Scenario(
        name=raw.get("name", Path(src).stem),
        params=params,
        n0=n0,
        poles=poles,
        axes=np.array(axes).reshape(-1, 3),
        t0=t0,
        t_start=float(time.get("t_start", 0.0)) * d,
        t_end=float(time.get("t_end", 1.0)) * d,
        n_outputs=int(time.get("n_outputs", 11)),
        snapshot_times=[float(t) * d for t in raw.get("snapshot_times", [])],
        diagnose_times=[float(t) * d for t in raw.get("diagnose_times", [])],
        window=float(grid.get("window_multiple_of_delta", 40.0)) * d,
        n_points=int(grid.get("n_points", 4096)),
        lax_n_points=int(grid.get("lax_n_points", 512)),
        lax_times=[float(t) * d for t in grid.get("lax_times", [])],
        tolerances=tol,
        perturbation=raw.get("perturbation"),
        out_dir=outputs.get("directory"),
        fmt=outputs.get("format", "csv"),
        source=src,
    )
    if not sc.t_start <= sc.t0 <= sc.t_end:
        _fail(src, text, ["time"], "need t_start <= t0 <= t_end")
    return sc
