"""YAML experiment configurations with line-aware validation."""
from __future__ import annotations

import copy
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.integrate import trapezoid

from .model import DriveEnvelope, SystemParams
from .propagate import TOP_LEVELS

ANALYSES = ("fidelity", "leakage", "oscillation", "shear", "squeeze", "reduced", "entangle")
TOP_KEYS = {"name", "params", "drive", "tuning", "initial", "t_end", "dt_out", "tol",
            "outputs", "options", "out_dir", "sweep"}
DRIVE_KEYS = {"kind", "eps", "phase", "ramp_ns", "table"}
TUNING_KEYS = {"mode", "k", "n0", "f_d", "offset"}
INITIAL_KEYS = {"state", "k"}
PARAM_AXES = {f.name for f in dataclasses.fields(SystemParams)} - {"n_tr"}
DRIVE_AXES = {"eps", "phase", "ramp_ns"}
OTHER_AXES = {"offset", "t_end"}
HEADROOM_SIGMAS = 6.0


class ConfigError(ValueError):
    """One or more configuration problems; ``messages`` lists them all."""

    def __init__(self, messages: list[str]):
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))


@dataclass(frozen=True)
class Tuning:
    mode: str = "resonant"  # or "explicit"
    k: int = 0
    n0: int = 0
    f_d: float | None = None
    offset: float = 0.0  # GHz added to the resonant frequency


@dataclass(frozen=True)
class Initial:
    state: str = "bare"  # bare |0,k> or eigen bar|0,k>
    k: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    params: SystemParams
    envelope: DriveEnvelope
    tuning: Tuning = Tuning()
    initial: Initial = Initial()
    t_end: float = 200.0
    dt_out: float = 1.0
    tol: float = 1e-10
    outputs: tuple = ("fidelity",)
    options: dict = field(default_factory=dict)
    out_dir: str = "results"
    sweep: dict | None = None
    source: str = "<config>"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def needs_dynamics(self) -> bool:
        return any(o != "entangle" for o in self.outputs)

    def override(self, axis: str, value) -> "ExperimentConfig":
        """Copy with one sweepable field replaced."""
        raw = copy.deepcopy(self.raw)
        if axis in PARAM_AXES:
            raw.setdefault("params", {})[axis] = value
            if axis == "f_d":
                raw["tuning"] = {"mode": "explicit", "f_d": value}
        elif axis in DRIVE_AXES:
            raw.setdefault("drive", {})[axis] = value
        elif axis == "offset":
            raw.setdefault("tuning", {})["offset"] = value
        elif axis == "t_end":
            raw["t_end"] = value
        else:
            raise ConfigError([f"sweep axis {axis!r} is not a parameter or drive field; "
                               f"choose from {sorted(PARAM_AXES | DRIVE_AXES | OTHER_AXES)}"])
        return from_dict(raw, source=self.source)


# --------------------------------------------------------------------- loading

def _line_map(node, path=(), out=None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
            out[path + (key,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Reporter:
    def __init__(self, source: str, lines: dict):
        self.source, self.lines, self.errors = source, lines, []

    def __call__(self, path: tuple, msg: str):
        line = None
        p = tuple(path)
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p)
        where = f"{self.source}:{line}" if line else self.source
        self.errors.append(f"{where}: {'.'.join(map(str, path)) or '<root>'}: {msg}")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from exc
    return loads(text, source=str(path))


def loads(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError([f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError([f"{source}:1: top level must be a mapping"])
    return from_dict(data, source=source, lines=_line_map(node) if node is not None else {})


def _num(rep, path, value, kind=float, positive=False, nonneg=False):
    if isinstance(value, str):
        # YAML 1.1 reads "1e-10" (no dot) as a string
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        rep(path, f"expected a number, got {value!r}")
        return None
    if kind is int and int(value) != value:
        rep(path, f"expected an integer, got {value!r}")
        return None
    if positive and not value > 0:
        rep(path, f"must be positive (got {value})")
        return None
    if nonneg and value < 0:
        rep(path, f"must be non-negative (got {value})")
        return None
    return kind(value)


def from_dict(data: dict, source: str = "<config>", lines: dict | None = None) -> ExperimentConfig:
    """Build and validate a config; raises ConfigError listing every problem."""
    rep = _Reporter(source, lines or {})
    data = copy.deepcopy(data)
    for key in sorted(set(data) - TOP_KEYS):
        rep((key,), "unknown key")

    name = data.get("name")
    if not isinstance(name, str) or not name:
        rep(("name",), "a non-empty scenario name is required")
        name = "unnamed"

    pdata = data.get("params", {}) or {}
    params = None
    if not isinstance(pdata, dict):
        rep(("params",), "must be a mapping")
    else:
        for key in sorted(set(pdata) - PARAM_AXES):
            rep(("params", key), "unknown parameter")
        good = {}
        for k, v in pdata.items():
            if k not in PARAM_AXES:
                continue
            good[k] = _num(rep, ("params", k), v, int if k == "n_res" else float)
        if any(v is None for v in good.values()):
            good = None
        if good is not None:
            probs = SystemParams.check(**good)
            for msg in probs:
                key = msg.split()[0]
                rep(("params", key) if key in pdata else ("params",), msg)
            if not probs:
                params = SystemParams(**good)

    ddata = data.get("drive", {}) or {}
    envelope = None
    if not isinstance(ddata, dict):
        rep(("drive",), "must be a mapping")
    else:
        for key in sorted(set(ddata) - DRIVE_KEYS):
            rep(("drive", key), "unknown drive field")
        eps = _num(rep, ("drive", "eps"), ddata.get("eps", 0.01))
        phase = _num(rep, ("drive", "phase"), ddata.get("phase", 0.0))
        ramp = _num(rep, ("drive", "ramp_ns"), ddata.get("ramp_ns", 0.0), nonneg=True)
        if eps is not None and phase is not None and ramp is not None:
            try:
                table = tuple(tuple(float(x) for x in row) for row in ddata.get("table", ()))
                envelope = DriveEnvelope(kind=ddata.get("kind", "constant"), eps=eps * np.exp(1j * phase),
                                         ramp_ns=ramp, table=table)
            except (TypeError, ValueError) as exc:
                rep(("drive", "kind"), str(exc))

    tdata = data.get("tuning", {}) or {}
    tuning = Tuning()
    if not isinstance(tdata, dict):
        rep(("tuning",), "must be a mapping")
    else:
        for key in sorted(set(tdata) - TUNING_KEYS):
            rep(("tuning", key), "unknown tuning field")
        mode = tdata.get("mode", "resonant")
        if mode not in ("resonant", "explicit"):
            rep(("tuning", "mode"), f"must be 'resonant' or 'explicit' (got {mode!r})")
        elif mode == "explicit" and "f_d" not in tdata:
            rep(("tuning",), "explicit tuning needs f_d")
        else:
            k = _num(rep, ("tuning", "k"), tdata.get("k", 0), int, nonneg=True)
            n0 = _num(rep, ("tuning", "n0"), tdata.get("n0", 0), int, nonneg=True)
            off = _num(rep, ("tuning", "offset"), tdata.get("offset", 0.0))
            fd = _num(rep, ("tuning", "f_d"), tdata["f_d"], positive=True) if "f_d" in tdata else None
            if k is not None and k > 5:
                rep(("tuning", "k"), "ladder index must be at most 5")
            elif None not in (k, n0, off):
                tuning = Tuning(mode=mode, k=k, n0=n0, f_d=fd, offset=off)

    idata = data.get("initial", {}) or {}
    initial = Initial()
    if not isinstance(idata, dict):
        rep(("initial",), "must be a mapping")
    else:
        for key in sorted(set(idata) - INITIAL_KEYS):
            rep(("initial", key), "unknown field")
        st = idata.get("state", "bare")
        k = _num(rep, ("initial", "k"), idata.get("k", 0), int, nonneg=True)
        if st not in ("bare", "eigen"):
            rep(("initial", "state"), f"must be 'bare' or 'eigen' (got {st!r})")
        elif k is not None:
            if k > 5:
                rep(("initial", "k"), "transmon index must be at most 5")
            else:
                initial = Initial(state=st, k=k)

    t_end = _num(rep, ("t_end",), data.get("t_end", 200.0), positive=True)
    dt_out = _num(rep, ("dt_out",), data.get("dt_out", 1.0), positive=True)
    tol = _num(rep, ("tol",), data.get("tol", 1e-10), positive=True)
    if tol is not None and not 1e-12 <= tol <= 1e-6:
        rep(("tol",), f"must lie in [1e-12, 1e-6] (got {tol:g})")

    outputs = data.get("outputs", ["fidelity"])
    if isinstance(outputs, str):
        outputs = [outputs]
    if not isinstance(outputs, list) or not outputs:
        rep(("outputs",), "must be a non-empty list")
        outputs = []
    for i, o in enumerate(outputs):
        if o not in ANALYSES:
            rep(("outputs", i), f"unknown analysis {o!r}; expected one of {ANALYSES}")

    options = data.get("options", {}) or {}
    if not isinstance(options, dict):
        rep(("options",), "must be a mapping")
        options = {}

    sweep = data.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or "axis" not in sweep or "values" not in sweep:
            rep(("sweep",), "needs 'axis' and 'values'")
        elif sweep["axis"] not in PARAM_AXES | DRIVE_AXES | OTHER_AXES:
            rep(("sweep", "axis"), f"unknown axis {sweep['axis']!r}")
        elif not isinstance(sweep["values"], list) or not sweep["values"]:
            rep(("sweep", "values"), "must be a non-empty list")

    out_dir = str(data.get("out_dir", "results"))

    if "leakage" in outputs and initial.k > 1:
        rep(("initial", "k"), "leakage model covers initial ladders 0 and 1 only")
    if "leakage" in outputs and dt_out is not None and dt_out > 0.05:
        rep(("dt_out",), f"leakage analysis needs dt_out <= 0.05 ns to resolve GHz oscillations (got {dt_out})")

    if rep.errors:
        raise ConfigError(rep.errors)
    return ExperimentConfig(
        name=name, params=params, envelope=envelope, tuning=tuning, initial=initial,
        t_end=t_end, dt_out=dt_out, tol=tol, outputs=tuple(outputs), options=dict(options),
        out_dir=out_dir, sweep=sweep, source=source, raw=data,
    )


# --------------------------------------------------------------------- checks

def expected_max_nbar(envelope: DriveEnvelope, t_end: float) -> float:
    """Upper bound (int |eps| dt)^2 on the photon number of a driven linear mode."""
    ts = np.linspace(0.0, t_end, 2001)
    mags = np.array([abs(envelope(t)) for t in ts])
    return float(trapezoid(mags, ts) ** 2)


def validate(cfg: ExperimentConfig, check_dir: bool = True) -> list[str]:
    """Run-time checks that need a parsed config; returns messages (empty = ok)."""
    errs = []
    if cfg.needs_dynamics:
        nbar = expected_max_nbar(cfg.envelope, cfg.t_end)
        need = nbar + HEADROOM_SIGMAS * np.sqrt(nbar) + TOP_LEVELS + cfg.initial.k + 1
        if cfg.params.n_res < need:
            errs.append(
                f"{cfg.source}: params.n_res: truncation headroom too small: n_res={cfg.params.n_res} but "
                f"expected max nbar={nbar:.0f} needs at least {int(np.ceil(need))} levels"
            )
    if check_dir:
        out = Path(cfg.out_dir)
        probe = out if out.exists() else next((p for p in out.parents if p.exists()), Path("."))
        if not os.access(probe, os.W_OK):
            errs.append(f"{cfg.source}: out_dir: {cfg.out_dir} is not writable")
    return errs

