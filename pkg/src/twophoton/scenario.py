"""Declarative scenarios: JSON pipelines of elements run on an initial state.

A scenario names a grid, the modes, an initial-state builder, an ordered
element list, the outputs to write, and optional analytic reference checks.
``SCENARIO_SCHEMA`` is the published JSON schema (also shipped as
``scenario.schema.json``); semantic checks such as undeclared modes run after
schema validation.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .coupling import CouplingMatrix, n_mode_coupler, two_mode_coupler
from .grid import TimeGrid
from .imaging import ImagingSystem, predict_image, relative_l2, run_imaging_system
from .linear import (
    DispersionOp,
    PhaseModOp,
    aperture_window,
    apply_dispersion,
    apply_phase_mod,
    time_lens,
)
from .nonlinear import (
    NonlinearParams,
    SolitonSpec,
    fwm_split_step,
    soliton_amplitude,
    soliton_mean_time_spread,
)
from .observables import MomentReport, moments, overlap, schmidt_number
from .state import (
    BiphotonAmplitude,
    ModeParams,
    TwoPhotonState,
    correlated_gaussian,
    exchange_asymmetry,
    product_gaussian,
)

# ------------------------------------------------------------------ schema

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_LABEL = {"type": "string", "minLength": 1}
_PAIR = {"type": "array", "items": _LABEL, "minItems": 2, "maxItems": 2}
_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_BANDWIDTH = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {"type": "string", "enum": ["grid"]},
        {
            "type": "object",
            "properties": {"nyquist_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
            "required": ["nyquist_fraction"],
            "additionalProperties": False,
        },
    ]
}
_APERTURE = {
    "type": "object",
    "properties": {
        "shape": {"enum": ["ideal", "rect", "gaussian"]},
        "width": _POS,
    },
    "required": ["shape"],
    "additionalProperties": False,
}


def _obj(props: dict, required=(), type_name: str | None = None) -> dict:
    props = dict(props)
    req = list(required)
    if type_name is not None:
        props["type"] = {"const": type_name}
        req = ["type"] + req
    return {"type": "object", "properties": props, "required": req, "additionalProperties": False}


_ELEMENTS = {
    "dispersion": _obj(
        {"mode": _LABEL, "z": _NONNEG, "alpha": _NONNEG, "beta1": _NUM, "beta2": _NUM},
        ["mode"],
        "dispersion",
    ),
    "phase_mod": _obj(
        {
            "mode": _LABEL,
            "length": _NONNEG,
            "modulation": _obj(
                {
                    "kind": {"enum": ["quadratic", "linear", "sinusoidal"]},
                    "strength": _NUM,
                    "t0": _NUM,
                    "omega": _NUM,
                    "phase": _NUM,
                },
                ["kind", "strength"],
            ),
            "aperture": _APERTURE,
        },
        ["mode", "modulation"],
        "phase_mod",
    ),
    "time_lens": _obj(
        {"mode": _LABEL, "focal": _NUM, "t0": _NUM, "aperture": _APERTURE},
        ["mode", "focal"],
        "time_lens",
    ),
    "imaging_system": _obj(
        {
            "mode": _LABEL,
            "beta2L_in": _NUM,
            "focal": _NUM,
            "beta2L_out": _NUM,
            "beta1L_in": _NUM,
            "beta1L_out": _NUM,
            "t0": _NUM,
            "aperture": _APERTURE,
        },
        ["mode", "beta2L_in", "focal"],
        "imaging_system",
    ),
    "coupler": _obj({"modes": _PAIR, "kappaL": _NUM}, ["modes", "kappaL"], "coupler"),
    "n_mode_coupler": _obj(
        {
            "modes": {"type": "array", "items": _LABEL, "minItems": 2},
            "kappa": {"type": "array", "items": {"type": "array", "items": _COMPLEX}},
            "length": _NONNEG,
        },
        ["modes", "kappa"],
        "n_mode_coupler",
    ),
    "xpm": _obj(
        {"pair": _PAIR, "eta": _NUM, "L": _NONNEG, "bandwidth": _BANDWIDTH},
        ["pair", "eta", "L"],
        "xpm",
    ),
    "fwm_split_step": _obj(
        {
            "modes": _PAIR,
            "L": _NONNEG,
            "dz": _POS,
            "gamma": _NUM,
            "eta": _NUM,
            "chi": _COMPLEX,
            "kappa": _COMPLEX,
            "bandwidth": _BANDWIDTH,
        },
        ["modes", "L"],
        "fwm_split_step",
    ),
    "soliton_init": _obj(
        {
            "pair": _PAIR,
            "eta": _NUM,
            "beta2": _NUM,
            "delta": _NUM,
            "width": _POS,
            "z": _NUM,
        },
        ["pair", "eta", "beta2"],
        "soliton_init",
    ),
}

_INITIAL = {
    "correlated_gaussian": _obj(
        {"pair": _PAIR, "sigma_plus": _POS, "sigma_minus": _POS, "t_center_pair": _NUM},
        ["pair", "sigma_plus", "sigma_minus"],
    ),
    "product_gaussian": _obj(
        {"pair": _PAIR, "sigma1": _POS, "sigma2": _POS, "t1": _NUM, "t2": _NUM},
        ["pair", "sigma1"],
    ),
    "soliton": _obj(
        {"pair": _PAIR, "eta": _NUM, "beta2": _NUM, "delta": _NUM, "width": _POS, "z": _NUM},
        ["pair", "eta", "beta2"],
    ),
    "file": _obj({"pair": _PAIR, "path": {"type": "string", "minLength": 1}}, ["pair", "path"]),
}

_REFERENCES = {
    "tau_minus_restored": _obj({"pair": _PAIR, "tolerance": _POS}, ["pair"]),
    "coincidence_null": _obj({"pair": _PAIR, "tolerance": _POS}, ["pair"]),
    "image": _obj({"pair": _PAIR, "element": {"type": "integer", "minimum": 0}, "tolerance": _POS}, ["pair", "element"]),
    "correlation_flip": _obj({"pair": _PAIR, "max_correlation": _NUM}, ["pair"]),
    "clock_sync": _obj({"pair": _PAIR, "tolerance": _POS}, ["pair"]),
    "singlet": _obj(
        {
            "source": _PAIR,
            "expected": {
                "type": "array",
                "minItems": 1,
                "items": _obj({"pair": _PAIR, "coef": _COMPLEX}, ["pair", "coef"]),
            },
            "tolerance": _POS,
        },
        ["source", "expected"],
    ),
    "schmidt_above": _obj({"pair": _PAIR, "threshold": _POS}, ["pair", "threshold"]),
    "soliton_profile": _obj(
        {"pair": _PAIR, "drift": _POS, "min_overlap": _POS, "spread_tolerance": _POS},
        ["pair"],
    ),
}


def _tagged(table: dict, tag: str) -> list[dict]:
    out = []
    for name, sch in table.items():
        s = copy.deepcopy(sch)
        s["properties"][tag] = {"const": name}
        s["required"] = [tag] + [r for r in s["required"] if r != tag]
        out.append({"if": {"properties": {tag: {"const": name}}, "required": [tag]}, "then": s})
    return out


SCENARIO_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "twophoton scenario",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "grid": _obj(
            {"n": {"type": "integer", "minimum": 8}, "dt": _POS, "t_center": _NUM},
            ["n", "dt"],
        ),
        "modes": {
            "type": "array",
            "minItems": 1,
            "items": _obj(
                {"label": _LABEL, "alpha": _NONNEG, "beta1": _NUM, "beta2": _NUM},
                ["label"],
            ),
        },
        "initial": {
            "type": "object",
            "properties": {"builder": {"enum": sorted(_INITIAL)}},
            "required": ["builder"],
            "allOf": _tagged(_INITIAL, "builder"),
        },
        "elements": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"type": {"enum": sorted(_ELEMENTS)}},
                "required": ["type"],
                "allOf": [
                    {"if": {"properties": {"type": {"const": k}}, "required": ["type"]}, "then": v}
                    for k, v in _ELEMENTS.items()
                ],
            },
        },
        "outputs": _obj(
            {
                "pairs": {"type": "array", "items": _PAIR},
                "grids": {"enum": ["none", "final", "all"]},
                "metrics": {
                    "type": "array",
                    "items": {"enum": ["probability", "moments", "schmidt"]},
                },
            }
        ),
        "references": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"check": {"enum": sorted(_REFERENCES)}},
                "required": ["check"],
                "allOf": _tagged(_REFERENCES, "check"),
            },
        },
    },
    "required": ["grid", "modes", "initial"],
    "additionalProperties": False,
}

BUILTINS = (
    "franson",
    "hom",
    "imaging_timereversal",
    "clock_sync",
    "singlet",
    "xpm_entangle",
    "soliton",
)


# ------------------------------------------------------------------ errors

class ScenarioError(Exception):
    """Validation failure with a field path and, when known, a JSON line/column."""

    def __init__(self, message: str, path: str = "", line: int | None = None, column: int | None = None):
        self.message = message
        self.path = path
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if path:
            where.append(path)
        super().__init__(f"{' | '.join(where)}: {message}" if where else message)


class ElementError(RuntimeError):
    """An element failed while the pipeline ran."""

    def __init__(self, index: int, kind: str, cause: Exception):
        self.index = index
        self.kind = kind
        self.cause = cause
        super().__init__(f"element {index} ({kind}): {cause}")


# ------------------------------------------------------- position lookup

def _positions(text: str) -> dict[tuple, int]:
    """Character offset of every value in a JSON document, keyed by its path."""
    dec = json.JSONDecoder()
    pos: dict[tuple, int] = {}
    ws = " \t\r\n"

    def skip(i):
        while i < len(text) and text[i] in ws:
            i += 1
        return i

    def value(i, path):
        i = skip(i)
        pos[path] = i
        c = text[i]
        if c == "{":
            i = skip(i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = dec.raw_decode(text, skip(i))
                i = skip(i)
                i = value(i + 1, path + (key,))  # past ':'
                i = skip(i)
                if text[i] == ",":
                    i += 1
                    continue
                return i + 1
        if c == "[":
            i = skip(i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = skip(value(i, path + (k,)))
                k += 1
                if text[i] == ",":
                    i += 1
                    continue
                return i + 1
        _, i = dec.raw_decode(text, i)
        return i

    value(0, ())
    return pos


def _line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _path_str(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


# ------------------------------------------------------------- dataclass

@dataclass(frozen=True)
class Element:
    index: int
    type: str
    params: dict

    def mode_refs(self) -> list[str]:
        p = self.params
        refs = []
        for key in ("mode",):
            if key in p:
                refs.append(p[key])
        for key in ("modes", "pair"):
            if key in p:
                refs.extend(p[key])
        return refs


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: TimeGrid
    modes: dict
    initial: dict
    elements: tuple[Element, ...]
    outputs: dict
    references: tuple[dict, ...] = ()
    description: str = ""
    base_dir: Path | None = field(default=None, compare=False)
    raw: dict = field(default_factory=dict, compare=False)


def _is_pow2(n: int) -> bool:
    return n >= 8 and n & (n - 1) == 0


def _complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def from_dict(doc: dict, text: str | None = None, base_dir: Path | None = None) -> Scenario:
    """Validate a decoded scenario document and build a ``Scenario``."""
    where = _positions(text) if text is not None else {}

    def fail(msg, path=()):
        path = tuple(path)
        line = col = None
        probe = path
        while probe not in where and probe:
            probe = probe[:-1]
        if probe in where and text is not None:
            line, col = _line_col(text, where[probe])
        raise ScenarioError(msg, _path_str(path), line, col)

    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        # Report the deepest error; it names the offending field.
        e = max(errors, key=lambda e: len(e.absolute_path))
        fail(e.message, e.absolute_path)

    g = doc["grid"]
    if not _is_pow2(g["n"]):
        fail(f"grid size {g['n']} is not a power of two >= 8", ("grid", "n"))
    grid = TimeGrid(g["n"], float(g["dt"]), float(g.get("t_center", 0.0)))

    modes = {}
    for i, m in enumerate(doc["modes"]):
        if m["label"] in modes:
            fail(f"mode {m['label']!r} declared twice", ("modes", i, "label"))
        modes[m["label"]] = ModeParams(
            alpha=float(m.get("alpha", 0.0)),
            beta1=float(m.get("beta1", 0.0)),
            beta2=float(m.get("beta2", 0.0)),
        )

    def check_modes(labels, path, what):
        for lab in labels:
            if lab not in modes:
                fail(f"{what} references undeclared mode {lab!r}", path)

    init = dict(doc["initial"])
    check_modes(init["pair"], ("initial", "pair"), "initial state")
    elements = []
    for i, e in enumerate(doc.get("elements", [])):
        el = Element(i, e["type"], {k: v for k, v in e.items() if k != "type"})
        check_modes(el.mode_refs(), ("elements", i), f"element {i} ({el.type})")
        if el.type in ("coupler", "fwm_split_step", "xpm"):
            key = "pair" if el.type == "xpm" else "modes"
            if el.params[key][0] == el.params[key][1]:
                fail(f"element {i} ({el.type}) needs two distinct modes", ("elements", i, key))
        if el.type == "n_mode_coupler":
            k = el.params["kappa"]
            N = len(el.params["modes"])
            if len(k) != N or any(len(r) != N for r in k):
                fail(f"element {i}: kappa must be {N}x{N}", ("elements", i, "kappa"))
            if len(set(el.params["modes"])) != N:
                fail(f"element {i}: coupled modes must be distinct", ("elements", i, "modes"))
        if el.type == "fwm_split_step" and "dz" in el.params:
            r = el.params["L"] / el.params["dz"]
            if el.params["L"] > 0 and abs(r - round(r)) > 1e-9 * max(1.0, r):
                fail(f"element {i}: dz does not divide L", ("elements", i, "dz"))
        elements.append(el)

    outputs = {"pairs": [list(init["pair"])], "grids": "final", "metrics": ["probability", "moments"]}
    outputs.update(doc.get("outputs", {}))
    for i, p in enumerate(outputs["pairs"]):
        check_modes(p, ("outputs", "pairs", i), "outputs")
    refs = tuple(dict(r) for r in doc.get("references", []))
    for i, r in enumerate(refs):
        labels = list(r.get("pair", [])) + list(r.get("source", []))
        labels += [lab for x in r.get("expected", []) for lab in x["pair"]]
        check_modes(labels, ("references", i), f"reference {i} ({r['check']})")
        if r["check"] == "image":
            k = r["element"]
            if k >= len(elements) or elements[k].type != "imaging_system":
                fail(f"reference {i}: element {k} is not an imaging_system", ("references", i, "element"))
        if r["check"] == "soliton_profile" and init["builder"] != "soliton":
            fail(f"reference {i}: soliton_profile needs a soliton initial state", ("references", i))

    return Scenario(
        name=doc.get("name", "scenario"),
        grid=grid,
        modes=modes,
        initial=init,
        elements=tuple(elements),
        outputs=outputs,
        references=refs,
        description=doc.get("description", ""),
        base_dir=base_dir,
        raw=doc,
    )


def parse_scenario(text: str, base_dir: Path | str | None = None) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, "", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object", "", 1, 1)
    return from_dict(doc, text, Path(base_dir) if base_dir is not None else None)


def builtin_text(name: str) -> str:
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
    return resources.files("twophoton").joinpath("builtins", f"{name}.json").read_text()


def load_scenario(source: str) -> Scenario:
    """Parse a scenario file path, or a builtin name when no such file exists."""
    p = Path(source)
    if p.is_file():
        return parse_scenario(p.read_text(), p.parent)
    if source in BUILTINS:
        return parse_scenario(builtin_text(source))
    raise ScenarioError(f"no scenario file or builtin named {source!r}")


def apply_override(doc: dict, assignment: str) -> dict:
    """Set a dotted path (``elements.0.z=2``) to a JSON value (or bare string)."""
    if "=" not in assignment:
        raise ScenarioError(f"override {assignment!r} must look like key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    doc = copy.deepcopy(doc)
    parts = key.split(".")
    node: Any = doc
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(node, list):
            try:
                idx = int(part)
                node[idx]
            except (ValueError, IndexError):
                raise ScenarioError(f"override path {key!r}: bad list index {part!r}") from None
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[part] = value
            else:
                if part not in node:
                    node[part] = {}
                node = node[part]
        else:
            raise ScenarioError(f"override path {key!r} descends into a scalar")
    return doc


# -------------------------------------------------------------- execution

def _bandwidth(spec, grid: TimeGrid) -> float:
    if spec is None or spec == "grid":
        return math.inf
    if isinstance(spec, dict):
        return spec["nyquist_fraction"] * grid.omega_nyquist
    return float(spec)


def _aperture(p: dict):
    ap = p.get("aperture") or {"shape": "ideal"}
    return ap["shape"], ap.get("width")


def _soliton_spec(p: dict) -> SolitonSpec:
    return SolitonSpec(
        eta=float(p["eta"]),
        beta2=float(p["beta2"]),
        delta=float(p.get("delta", 0.0)),
        width=float(p.get("width", 1.0)),
        z=float(p.get("z", 0.0)),
    )


def read_grid(path: str | Path) -> BiphotonAmplitude:
    """Load an amplitude written by ``export_grid``."""
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = int(round(math.sqrt(arr.shape[0])))
    if n * n != arr.shape[0]:
        raise ValueError(f"{path}: row count {arr.shape[0]} is not a square")
    t = arr[::n, 0]
    # Round off the last-digit noise that the printed sample times carry.
    dt = float(f"{(t[-1] - t[0]) / (n - 1):.15g}")
    grid = TimeGrid(n, dt, float(t[n // 2]))
    data = (arr[:, 2] + 1j * arr[:, 3]).reshape(n, n)
    return BiphotonAmplitude(grid, data)


def build_initial(s: Scenario) -> TwoPhotonState:
    p = s.initial
    b = p["builder"]
    if b == "correlated_gaussian":
        amp = correlated_gaussian(s.grid, p["sigma_plus"], p["sigma_minus"], p.get("t_center_pair", 0.0))
    elif b == "product_gaussian":
        amp = product_gaussian(
            s.grid, p["sigma1"], p.get("sigma2"), p.get("t1", 0.0), p.get("t2", 0.0)
        )
    elif b == "soliton":
        amp = soliton_amplitude(_soliton_spec(p), s.grid)
    elif b == "file":
        path = Path(p["path"])
        if not path.is_absolute() and s.base_dir is not None:
            path = s.base_dir / path
        amp = read_grid(path)
        g = amp.grid
        if g.n != s.grid.n or not math.isclose(g.dt, s.grid.dt, rel_tol=1e-9) or not math.isclose(
            g.t_center, s.grid.t_center, rel_tol=1e-9, abs_tol=1e-9 * g.dt
        ):
            raise ValueError(f"grid in {path} does not match the scenario grid")
        amp = BiphotonAmplitude(s.grid, amp.data)
    else:  # pragma: no cover - schema rejects
        raise ValueError(f"unknown builder {b!r}")
    return TwoPhotonState(s.modes, {tuple(p["pair"]): amp})


def apply_element(state: TwoPhotonState, el: Element, grid: TimeGrid) -> TwoPhotonState:
    p = el.params
    t = el.type
    if t == "dispersion":
        base = state.modes[p["mode"]]
        params = ModeParams(
            alpha=float(p.get("alpha", base.alpha)),
            beta1=float(p.get("beta1", base.beta1)),
            beta2=float(p.get("beta2", base.beta2)),
        )
        return apply_dispersion(state, DispersionOp(p["mode"], float(p.get("z", 1.0)), params))
    if t == "phase_mod":
        m = p["modulation"]
        x = grid.t - m.get("t0", 0.0)
        if m["kind"] == "quadratic":
            prof = m["strength"] * x**2 / 2
        elif m["kind"] == "linear":
            prof = m["strength"] * x
        else:
            prof = m["strength"] * np.sin(m.get("omega", 1.0) * x + m.get("phase", 0.0))
        shape, width = _aperture(p)
        ap = aperture_window(grid, shape, width, m.get("t0", 0.0))
        return apply_phase_mod(state, PhaseModOp(p["mode"], prof, float(p.get("length", 1.0)), ap))
    if t == "time_lens":
        shape, width = _aperture(p)
        return apply_phase_mod(state, time_lens(grid, p["mode"], p["focal"], p.get("t0", 0.0), width, shape))
    if t == "imaging_system":
        return run_imaging_system(state, imaging_system_of(el), p["mode"])
    if t == "coupler":
        return two_mode_coupler(state, float(p["kappaL"]), tuple(p["modes"]))
    if t == "n_mode_coupler":
        k = np.array([[_complex(v) for v in row] for row in p["kappa"]])
        return n_mode_coupler(state, CouplingMatrix(k, float(p.get("length", 1.0))), p["modes"])
    if t == "xpm":
        from .nonlinear import xpm_propagate

        return xpm_propagate(state, p["eta"], p["L"], _bandwidth(p.get("bandwidth"), grid), tuple(p["pair"]))
    if t == "fwm_split_step":
        params = NonlinearParams(
            gamma=float(p.get("gamma", 0.0)),
            eta=float(p.get("eta", 0.0)),
            chi=_complex(p.get("chi", 0.0)),
            kappa=_complex(p.get("kappa", 0.0)),
            bandwidth=_bandwidth(p.get("bandwidth"), grid),
        )
        return fwm_split_step(state, params, None, float(p["L"]), p.get("dz"), tuple(p["modes"]))
    if t == "soliton_init":
        amp = soliton_amplitude(_soliton_spec(p), grid)
        return TwoPhotonState(state.modes, {tuple(p["pair"]): amp})
    raise ValueError(f"unknown element type {t!r}")  # pragma: no cover


def imaging_system_of(el: Element) -> ImagingSystem:
    p = el.params
    shape, width = _aperture(p)
    if "beta2L_out" in p:
        return ImagingSystem(
            (p.get("beta1L_in", 0.0), p["beta2L_in"]),
            p["focal"],
            (p.get("beta1L_out", 0.0), p["beta2L_out"]),
            p.get("t0", 0.0),
            width,
            shape,
        )
    return ImagingSystem.from_lens_law(
        p["beta2L_in"], p["focal"], p.get("beta1L_in", 0.0), p.get("beta1L_out", 0.0),
        p.get("t0", 0.0), width, shape,
    )


@dataclass
class RunReport:
    """Everything a run produced; ``metrics`` is what lands in metrics.json."""

    scenario: Scenario
    stages: list[tuple[str, TwoPhotonState]]
    metrics: dict
    checks: list[dict]

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    @property
    def final(self) -> TwoPhotonState:
        return self.stages[-1][1]


def pair_name(pair) -> str:
    return f"{pair[0]}-{pair[1]}"


def _moment_dict(r: MomentReport) -> dict:
    return {k: float(v) for k, v in r.as_dict().items()}


def stage_metrics(state: TwoPhotonState, outputs: dict) -> dict:
    out = {
        "total_probability": state.total_probability(),
        "exchange_asymmetry": exchange_asymmetry(state),
        "pairs": {},
    }
    for pair in outputs["pairs"]:
        amp = state.amplitude(*pair)
        entry: dict = {}
        prob = amp.norm_sq()
        if "probability" in outputs["metrics"]:
            entry["probability"] = prob
        if prob > 0:
            if "moments" in outputs["metrics"]:
                entry["moments"] = _moment_dict(moments(amp))
            if "schmidt" in outputs["metrics"]:
                entry["schmidt_number"] = schmidt_number(amp)
        out["pairs"][pair_name(pair)] = entry
    return out


def _check(name, value, limit, passed, **extra) -> dict:
    d = {"check": name, "value": float(value), "limit": float(limit), "passed": bool(passed)}
    d.update(extra)
    return d


def evaluate_reference(ref: dict, s: Scenario, stages) -> dict:
    first, last = stages[0][1], stages[-1][1]
    c = ref["check"]
    pair = ref.get("pair")
    if c == "tau_minus_restored":
        tol = ref.get("tolerance", 0.01)
        a, b = moments(first.amplitude(*pair)), moments(last.amplitude(*pair))
        v = abs(b.std_time_diff / a.std_time_diff - 1)
        return _check(c, v, tol, v < tol)
    if c == "coincidence_null":
        tol = ref.get("tolerance", 1e-10)
        v = last.pair_probability(*pair)
        return _check(c, v, tol, v < tol)
    if c == "image":
        tol = ref.get("tolerance", 1e-2)
        k = ref["element"]
        el = s.elements[k]
        before, after = stages[k][1], stages[k + 1][1]
        sys = imaging_system_of(el)
        mode = el.params["mode"]
        axis = 0 if pair[0] == mode else 1
        pred = predict_image(before.amplitude(*pair), sys, axis)
        v = relative_l2(np.abs(after.amplitude(*pair).data), np.abs(pred.data))
        return _check(c, v, tol, v < tol, M=sys.M, t_d=sys.t_d)
    if c == "correlation_flip":
        lim = ref.get("max_correlation", -0.96)
        v = moments(last.amplitude(*pair)).correlation
        return _check(c, v, lim, v <= lim)
    if c == "clock_sync":
        tol = ref.get("tolerance", 0.05)
        a, b = moments(first.amplitude(*pair)), moments(last.amplitude(*pair))
        v = abs(b.std_mean_time / a.std_time_diff - 1)
        return _check(c, v, tol, v < tol)
    if c == "singlet":
        tol = ref.get("tolerance", 1e-12)
        src = first.amplitude(*ref["source"]).data
        worst = 0.0
        for e in ref["expected"]:
            got = last.amplitude(*e["pair"]).data
            worst = max(worst, float(np.max(np.abs(got - _complex(e["coef"]) * src))))
        return _check(c, worst, tol, worst < tol)
    if c == "schmidt_above":
        v = schmidt_number(last.amplitude(*pair))
        return _check(c, v, ref["threshold"], v > ref["threshold"])
    if c == "soliton_profile":
        spec = _soliton_spec(s.initial)
        z = spec.z + sum(el.params["L"] for el in s.elements if el.type == "fwm_split_step")
        spec_z = SolitonSpec(spec.eta, spec.beta2, spec.delta, spec.width, z)
        a0, b = first.amplitude(*pair), last.amplitude(*pair)
        ref_amp = soliton_amplitude(spec_z, s.grid)
        drift = tau_minus_drift(a0, b)
        ov = abs(overlap(ref_amp, b))
        spread = soliton_mean_time_spread(spec_z)
        spread_err = abs(moments(b).var_mean_time / spread - 1)
        lim_d = ref.get("drift", 0.01)
        lim_o = ref.get("min_overlap", 0.99)
        lim_s = ref.get("spread_tolerance", 0.02)
        ok = drift < lim_d and ov > lim_o and spread_err < lim_s
        return _check(c, drift, lim_d, ok, overlap=ov, spread_error=spread_err)
    raise ValueError(f"unknown reference {c!r}")  # pragma: no cover


def tau_minus_profile(amp: BiphotonAmplitude) -> np.ndarray:
    """Marginal of |psi|^2 along t - t' (one bin per grid offset), unit L2 norm."""
    n = amp.grid.n
    idx = np.subtract.outer(np.arange(n), np.arange(n)) + (n - 1)
    prof = np.bincount(idx.ravel(), (np.abs(amp.data) ** 2).ravel(), minlength=2 * n - 1)
    return prof / np.linalg.norm(prof)


def tau_minus_drift(a: BiphotonAmplitude, b: BiphotonAmplitude) -> float:
    """Relative L2 change of the relative-time marginal between two amplitudes."""
    return float(np.linalg.norm(tau_minus_profile(b) - tau_minus_profile(a)))


def run_scenario(s: Scenario, out_dir: str | Path | None = None) -> RunReport:
    state = build_initial(s)
    stages = [("initial", state)]
    for el in s.elements:
        try:
            state = apply_element(state, el, s.grid)
        except Exception as exc:
            raise ElementError(el.index, el.type, exc) from exc
        stages.append((f"{el.index:02d}_{el.type}", state))
    stages[-1] = ("final", stages[-1][1]) if len(stages) > 1 else stages[-1]

    metrics = {
        "scenario": s.name,
        "grid": {"n": s.grid.n, "dt": s.grid.dt, "t_center": s.grid.t_center},
        "stages": {name: stage_metrics(st, s.outputs) for name, st in stages},
    }
    checks = [evaluate_reference(r, s, stages) for r in s.references]
    metrics["references"] = checks
    report = RunReport(s, stages, metrics, checks)
    if out_dir is not None:
        write_outputs(report, out_dir)
    return report


# ---------------------------------------------------------------- output

def export_grid(amp: BiphotonAmplitude, path: str | Path) -> None:
    """CSV with header t,tprime,re,im,absq; rows t-major, %.17g precision."""
    g = amp.grid
    tt, tp = np.meshgrid(g.t, g.t, indexing="ij")
    d = amp.data
    table = np.column_stack([tt.ravel(), tp.ravel(), d.real.ravel(), d.imag.ravel(), (np.abs(d) ** 2).ravel()])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header="t,tprime,re,im,absq", comments="")


def export_metrics(report: RunReport | dict, path: str | Path) -> None:
    metrics = report.metrics if isinstance(report, RunReport) else report
    Path(path).write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")


def format_report(report: RunReport) -> str:
    s = report.scenario
    lines = [f"scenario: {s.name}", f"grid: n={s.grid.n} dt={s.grid.dt!r} t_center={s.grid.t_center!r}"]
    for name, sm in report.metrics["stages"].items():
        lines.append(f"[{name}] total_probability={sm['total_probability']:.15g}")
        for pname, entry in sm["pairs"].items():
            parts = [f"  {pname}:"]
            if "probability" in entry:
                parts.append(f"P={entry['probability']:.12g}")
            if "moments" in entry:
                m = entry["moments"]
                parts.append(f"rho={m['correlation']:.6g}")
                parts.append(f"var_mean_time={m['var_mean_time']:.6g}")
                parts.append(f"var_time_diff={m['var_time_diff']:.6g}")
            if "schmidt_number" in entry:
                parts.append(f"K={entry['schmidt_number']:.9g}")
            lines.append(" ".join(parts))
    for c in report.checks:
        mark = "PASS" if c["passed"] else "FAIL"
        lines.append(f"{mark} {c['check']}: value={c['value']:.6g} limit={c['limit']:.6g}")
    return "\n".join(lines) + "\n"


def write_outputs(report: RunReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    (out / "grids").mkdir(parents=True, exist_ok=True)
    mode = report.scenario.outputs["grids"]
    if mode != "none":
        chosen = report.stages if mode == "all" else report.stages[-1:]
        for name, st in chosen:
            for pair in report.scenario.outputs["pairs"]:
                export_grid(st.amplitude(*pair), out / "grids" / f"{pair_name(pair)}_{name}.csv")
    export_metrics(report, out / "metrics.json")
    (out / "report.txt").write_text(format_report(report))


def write_schema(path: str | Path) -> None:
    Path(path).write_text(json.dumps(SCENARIO_SCHEMA, indent=2) + "\n")
