"""Command-line surface: subcommands, key=value configs and run manifests.

Exit codes: 0 success, 2 usage error, 3 numeric or closure failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .atlas import BoundaryTriple, alpha_from_params, find_extension_params, is_admissible
from .energy import TAIL_WARN, energy_compact, energy_full
from .errors import DomainError, NumericError, UsageError
from .evolve import (CFL_DEFAULT, CONSTRAINT_TOL, PROBE_NOISE, evolve, friedrichs_evolve,
                     make_geometry)
from .fields import CutoffSpec, RadialGridField, VCoords, extract_vcoords, grid_z, sample
from .spectrum import negative_eigenvalues, select_variant, selected_variant

log = logging.getLogger("adsdyn")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("check-alpha", "derive-params", "spectrum", "energy", "evolve", "friedrichs",
            "synth", "graviton", "sel-test")


class ConfigError(UsageError):
    pass


# ---------------------------------------------------------------- config

def _int(v: str) -> int:
    return int(v)


def _float(v: str) -> float:
    return float(v)


# config key -> (record field, converter)
CONFIG_KEYS = {
    "alpha": ("alpha", BoundaryTriple.parse),
    "m": ("m", _float),
    "T": ("T", _float),
    "dt": ("dt", _float),
    "grid.n": ("n", _int),
    "grid.L": ("L", _float),
    "variant": ("variant", str),
    "sample_every": ("sample_every", _int),
    "snapshot_every": ("snapshot_every", _int),
    "seed": ("seed", _int),
    "closure": ("closure", str),
    "right": ("right", str),
    "init": ("init", str),
    "trials": ("trials", _int),
}


@dataclass
class RunConfig:
    alpha: Optional[BoundaryTriple] = None
    m: float = 0.0
    T: float = 10.0
    dt: Optional[float] = None
    n: int = 2000
    L: float = 20.0
    variant: Optional[str] = None
    sample_every: int = 10
    snapshot_every: Optional[int] = None
    seed: int = 0
    closure: str = "joint"
    right: str = "dirichlet"
    init: str = "bump"
    trials: int = 200

    def resolved_dt(self) -> float:
        return self.dt if self.dt is not None else 0.5 * self.L / self.n

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v.as_tuple()) if isinstance(v, BoundaryTriple) else v
        return out


def load_config(path) -> Dict[str, Any]:
    """Parse key=value lines; '#' starts a comment; the last duplicate wins."""
    out: Dict[str, Any] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}")
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        name, conv = CONFIG_KEYS[key]
        try:
            value = conv(val)
        except (ValueError, UsageError) as exc:
            raise ConfigError(f"{path}:{no}: bad value for {key}: {exc}")
        if name in out:
            log.warning("%s:%d: duplicate key %s, last value wins", path, no, key)
        out[name] = value
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    """Config file values, overridden by explicit flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        for k, v in load_config(args.config).items():
            setattr(cfg, k, v)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    return cfg


# ---------------------------------------------------------------- io helpers

def _alpha_arg(text: str) -> BoundaryTriple:
    try:
        return BoundaryTriple.parse(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _need_alpha(cfg: RunConfig) -> BoundaryTriple:
    if cfg.alpha is None:
        raise UsageError("--alpha is required")
    return cfg.alpha


def read_state_csv(path) -> Tuple[RadialGridField, RadialGridField]:
    """'# L=.. n=..' header, then rows z,f[,g]."""
    try:
        with open(path) as fh:
            head = fh.readline().strip()
            if not head.startswith("#"):
                raise UsageError(f"{path}: missing '# L=.. n=..' header")
            kv = dict(tok.split("=", 1) for tok in head[1:].split())
            L, n = float(kv["L"]), int(kv["n"])
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}")
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{path}: malformed state file ({exc})")
    if data.shape[0] != n or data.shape[1] < 2:
        raise UsageError(f"{path}: expected {n} rows of z,f[,g]")
    if not np.allclose(data[:, 0], grid_z(L, n), rtol=1e-9, atol=1e-12):
        raise UsageError(f"{path}: z column is not the cell-centred grid")
    g = data[:, 2] if data.shape[1] > 2 else np.zeros(n)
    return RadialGridField(L, n, data[:, 1]), RadialGridField(L, n, g)


def write_state_csv(path, f: RadialGridField, g: Optional[RadialGridField] = None) -> None:
    cols = [f.z, f.values] + ([g.values] if g is not None else [])
    np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g",
               header=f"L={float(f.L)!r} n={f.n}", comments="# ")


def smooth_bump(L: float, n: int, centre: float = 3.0, width: float = 1.0) -> RadialGridField:
    """(1 - s^2)^4 with s = (z - centre)/width."""
    return sample(lambda z: np.clip(1.0 - ((z - centre) / width) ** 2, 0.0, None) ** 4, L, n)


def initial_data(spec: str, L: float, n: int, cutoff: Optional[CutoffSpec] = None):
    """'bump', 'bump:centre,width', 'graviton', 'zero' or a state CSV path (f only)."""
    from .synth import graviton_data, zero_data
    if spec == "bump" or spec.startswith("bump:"):
        c, w = 3.0, 1.0
        if ":" in spec:
            try:
                c, w = (float(x) for x in spec.split(":", 1)[1].split(","))
            except ValueError:
                raise UsageError(f"bad bump spec {spec!r} (want bump:centre,width)")
        return smooth_bump(L, n, c, w)
    if spec == "graviton":
        return graviton_data(L, n, cutoff=cutoff)
    if spec == "zero":
        return zero_data(L, n, cutoff)
    f, _ = read_state_csv(spec)
    if f.n != n or abs(f.L - L) > 1e-12 * L:
        raise UsageError(f"{spec}: grid (L={f.L}, n={f.n}) differs from the run grid")
    return f


def _initial_pair(cfg: RunConfig):
    if cfg.init in ("bump", "graviton", "zero") or cfg.init.startswith("bump:"):
        from .synth import zero_data
        f = initial_data(cfg.init, cfg.L, cfg.n)
        g = zero_data(cfg.L, cfg.n) if isinstance(f, VCoords) else f.like(np.zeros(cfg.n))
        return f, g
    f, g = read_state_csv(cfg.init)
    cfg.L, cfg.n = f.L, f.n
    return f, g


def manifest(command: str, cfg: RunConfig, extra: Optional[dict] = None,
             started: Optional[float] = None, argv: Optional[Sequence[str]] = None) -> dict:
    out = {
        "command": command,
        "argv": list(argv) if argv is not None else None,
        "parameters": cfg.to_dict(),
        "variant": cfg.variant or selected_variant(),
        "tolerances": {"constraint": CONSTRAINT_TOL, "cfl": CFL_DEFAULT,
                       "probe_noise": PROBE_NOISE, "profile_tail_warn": TAIL_WARN},
        "seed": cfg.seed,
        "version": __version__,
        "threads": os.environ.get("ADSDYN_THREADS"),
    }
    if started is not None:
        out["wall_clock_s"] = time.time() - started
        out["started"] = time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started))
    if extra:
        out.update(extra)
    return out


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _out_dir(args) -> Path:
    if not getattr(args, "out", None):
        raise UsageError("--out is required")
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _fmt_t(t: float) -> str:
    return f"{t:.6f}"


# ---------------------------------------------------------------- commands

def cmd_check_alpha(args, cfg: RunConfig) -> int:
    a = _need_alpha(cfg)
    out = is_admissible(a).to_dict()
    out["alpha"] = list(a.as_tuple())
    _emit(out)
    return EXIT_OK


def cmd_derive_params(args, cfg: RunConfig) -> int:
    a = _need_alpha(cfg)
    p = find_extension_params(a)
    back = alpha_from_params(p)
    _emit({"alpha": list(a.as_tuple()), "params": p.to_dict(),
           "round_trip": list(back.as_tuple())})
    return EXIT_OK


def cmd_spectrum(args, cfg: RunConfig) -> int:
    a = _need_alpha(cfg)
    rep = negative_eigenvalues(a, cfg.variant)
    _emit(rep.to_dict())
    return EXIT_OK


def cmd_energy(args, cfg: RunConfig) -> int:
    a = _need_alpha(cfg)
    if not args.state:
        raise UsageError("--state is required")
    f, g = read_state_csv(args.state)
    p = find_extension_params(a)
    if args.compact:
        _emit({"total": energy_compact(f, g, p, cfg.m), "compact": True})
        return EXIT_OK
    cut = CutoffSpec.default(f.L)
    window = None
    if args.window:
        try:
            window = tuple(float(x) for x in args.window.split(","))
        except ValueError:
            raise UsageError(f"bad --window {args.window!r} (want lo,hi)")
        if len(window) != 2:
            raise UsageError("--window needs two numbers")
    rep = energy_full(extract_vcoords(f, cut, window), extract_vcoords(g, cut, window), p, cfg.m,
                      printed_form=True)
    _emit(rep.to_dict())
    return EXIT_OK


def cmd_evolve(args, cfg: RunConfig) -> int:
    started = time.time()
    a = _need_alpha(cfg)
    out = _out_dir(args)
    f, g = _initial_pair(cfg)
    dt = cfg.resolved_dt()
    geo = make_geometry(cfg.L, cfg.n, f.cutoff if isinstance(f, VCoords) else None,
                        right=cfg.right)
    tr = evolve(f, g, a, cfg.m, cfg.T, dt, cfg.sample_every, snapshot_every=cfg.snapshot_every,
                geo=geo, closure_mode=cfg.closure)
    E = tr.energy_totals()
    rows = np.column_stack([tr.times, E, tr.v_m1, tr.phi0, tr.phi1, tr.phi2])
    np.savetxt(out / "trace.csv", rows, delimiter=",", fmt="%.17g",
               header="t,energy,v_m1,phi0,phi1,phi2", comments="")
    z = grid_z(cfg.L, cfg.n)
    for t, snap in sorted(tr.snapshots.items()):
        np.savetxt(out / f"snap_{_fmt_t(t)}.csv", np.column_stack([z, snap]), delimiter=",",
                   fmt="%.17g", header="z,psi", comments="")
    drift = float(np.max(np.abs(E - E[0])) / abs(E[0])) if E[0] != 0 else float("nan")
    _write_json(out / "run.json", manifest("evolve", cfg, {
        "dt": dt, "growing": tr.growing, "energy_drift": drift}, started, args.argv))
    return EXIT_OK


def cmd_friedrichs(args, cfg: RunConfig) -> int:
    started = time.time()
    out = _out_dir(args)
    f, g = _initial_pair(cfg)
    if isinstance(f, VCoords):
        raise UsageError("the Friedrichs baseline takes grid data (bump or CSV)")
    dt = cfg.resolved_dt()
    tr = friedrichs_evolve(f, g, cfg.m, cfg.T, dt, cfg.sample_every,
                           snapshot_every=cfg.snapshot_every)
    rows = np.column_stack([tr.times, tr.energy, tr.norm, tr.l2, tr.v2])
    np.savetxt(out / "trace.csv", rows, delimiter=",", fmt="%.17g",
               header="t,energy,norm,l2,v2", comments="")
    z = grid_z(cfg.L, cfg.n)
    for t, snap in sorted(tr.snapshots.items()):
        np.savetxt(out / f"snap_{_fmt_t(t)}.csv", np.column_stack([z, snap]), delimiter=",",
                   fmt="%.17g", header="z,psi", comments="")
    E = np.array(tr.energy)
    _write_json(out / "run.json", manifest("friedrichs", cfg, {
        "dt": dt, "energy_drift": float(np.max(np.abs(E - E[0])) / E[0]) if E[0] else None},
        started, args.argv))
    return EXIT_OK


def cmd_graviton(args, cfg: RunConfig) -> int:
    from .synth import graviton_split
    started = time.time()
    a = _need_alpha(cfg)
    out = _out_dir(args)
    if args.init is None and cfg.init == "bump":
        cfg.init = "graviton"
    f, g = _initial_pair(cfg)
    cut = f.cutoff if isinstance(f, VCoords) else CutoffSpec.default(cfg.L)
    if not isinstance(f, VCoords):
        f = VCoords(0.0, 0.0, 0.0, 0.0, f, cut)
        g = VCoords(0.0, 0.0, 0.0, 0.0, g, cut) if isinstance(g, RadialGridField) else g
    dt = cfg.resolved_dt()
    geo = make_geometry(cfg.L, cfg.n, cut, right="graviton")
    tr = evolve(f, g, a, cfg.m, cfg.T, dt, cfg.sample_every, geo=geo, keep_states=True,
                with_energy=False)
    sp = graviton_split(tr)
    rows = np.column_stack([sp.times, sp.closed_form_amplitude, sp.projected_amplitude,
                            sp.residual])
    np.savetxt(out / "graviton.csv", rows, delimiter=",", fmt="%.17g",
               header="t,closed_form,projected,residual", comments="")
    scale = float(np.max(np.abs(sp.closed_form_amplitude))) or 1.0
    _write_json(out / "run.json", manifest("graviton", cfg, {
        "dt": dt, "norm_sq": sp.norm_sq,
        "max_rel_projection_error": float(np.max(np.abs(sp.projected_amplitude
                                                        - sp.closed_form_amplitude)) / scale)},
        started, args.argv))
    return EXIT_OK


def load_synth_spec(path, L_default: float, n_default: int):
    """JSON: {L, n, alpha, x_grid: [[x1,x2,x3],..], modes: [{xi, amplitude: [re, im], f, g}]}."""
    from .synth import Mode, PlaneWaveSpec
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})")
    L = float(doc.get("L", L_default))
    n = int(doc.get("n", n_default))
    cut = CutoffSpec.default(L)
    cache: Dict[str, Any] = {}

    def data(ref):
        if ref not in cache:
            d = initial_data(ref, L, n, cut)
            cache[ref] = d if isinstance(d, VCoords) else VCoords(0.0, 0.0, 0.0, 0.0, d, cut)
        return cache[ref]

    modes = []
    for k, md in enumerate(doc.get("modes", [])):
        try:
            xi = tuple(float(x) for x in md["xi"])
            re, im = (float(x) for x in md.get("amplitude", [1.0, 0.0]))
        except (KeyError, ValueError, TypeError):
            raise UsageError(f"{path}: mode {k} needs xi (3 reals) and amplitude (2 reals)")
        if len(xi) != 3:
            raise UsageError(f"{path}: mode {k}: xi must have 3 components")
        modes.append(Mode(xi, complex(re, im), data(md.get("f", "zero")), data(md.get("g", "zero")),
                          float(md.get("weight", 1.0))))
    x_grid = doc.get("x_grid", [[0.0, 0.0, 0.0]])
    alpha = BoundaryTriple(*doc["alpha"]) if "alpha" in doc else None
    return PlaneWaveSpec(modes, np.asarray(x_grid, dtype=float)), alpha


def cmd_synth(args, cfg: RunConfig) -> int:
    from .synth import ads_energy, assemble, evolve_modes, kappa_threshold
    started = time.time()
    if not args.spec:
        raise UsageError("--spec is required")
    out = _out_dir(args)
    spec, a_doc = load_synth_spec(args.spec, cfg.L, cfg.n)
    a = cfg.alpha or a_doc
    if a is None:
        raise UsageError("alpha missing (flag or spec.json)")
    cfg.alpha, cfg.L, cfg.n = a, spec.L, spec.n
    dt = cfg.resolved_dt()
    snap_every = cfg.snapshot_every or max(1, int(round(1.0 / dt)))
    p = find_extension_params(a)
    trs = evolve_modes(spec, a, cfg.T, dt, cfg.sample_every, snapshot_every=snap_every,
                       params=p, right=cfg.right)
    for k, tr in enumerate(trs):
        rows = np.column_stack([tr.times, tr.energy_totals(), tr.v_m1, tr.phi0, tr.phi1, tr.phi2])
        np.savetxt(out / f"mode_{k}.csv", rows, delimiter=",", fmt="%.17g",
                   header="t,energy,v_m1,phi0,phi1,phi2", comments="")
    z = grid_z(spec.L, spec.n)
    x = spec.x_grid
    for t in sorted(trs[0].snapshots):
        Phi = assemble(spec, trs, t)
        X = np.repeat(x, len(z), axis=0)
        Z = np.tile(z, x.shape[0])
        vals = Phi.reshape(-1)
        cols = [X[:, 0], X[:, 1], X[:, 2], Z]
        if np.iscomplexobj(vals):
            cols += [vals.real, vals.imag]
            head = "x1,x2,x3,z,value_re,value_im"
        else:
            cols += [vals]
            head = "x1,x2,x3,z,value"
        np.savetxt(out / f"snap_{_fmt_t(t)}.csv", np.column_stack(cols), delimiter=",",
                   fmt="%.17g", header=head, comments="")
    E = ads_energy(spec, trs, p)
    np.savetxt(out / "energy.csv", np.column_stack([trs[0].times, E]), delimiter=",",
               fmt="%.17g", header="t,ads_energy", comments="")
    M = kappa_threshold(a, p, trials=cfg.trials, seed=cfg.seed)
    _write_json(out / "run.json", manifest("synth", cfg, {
        "dt": dt, "modes": len(spec.modes), "kappa_zero_threshold": M,
        "energy_drift": float(np.max(np.abs(E - E[0])) / abs(E[0])) if E[0] else None},
        started, args.argv))
    return EXIT_OK


def cmd_sel_test(args, cfg: RunConfig) -> int:
    sel = select_variant(samples=args.samples, seed=cfg.seed or 20240611)
    _emit({"chosen": sel.chosen, "max_oracle": sel.max_oracle, "roots_checked": sel.roots_checked})
    return EXIT_OK


HANDLERS = {
    "check-alpha": cmd_check_alpha, "derive-params": cmd_derive_params,
    "spectrum": cmd_spectrum, "energy": cmd_energy, "evolve": cmd_evolve,
    "friedrichs": cmd_friedrichs, "synth": cmd_synth, "graviton": cmd_graviton,
    "sel-test": cmd_sel_test,
}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adsdyn", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, alpha=True, grid=False, run=False):
        p.add_argument("--config", help="key=value file; flags override it")
        if alpha:
            p.add_argument("--alpha", type=_alpha_arg, help="a0,a1,a2")
        if grid:
            p.add_argument("--n", type=int)
            p.add_argument("--L", type=float)
        if run:
            p.add_argument("--m", type=float)
            p.add_argument("--T", type=float)
            p.add_argument("--dt", type=float)
            p.add_argument("--sample-every", dest="sample_every", type=int)
            p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
            p.add_argument("--init", help="bump | bump:c,w | graviton | zero | state CSV")
            p.add_argument("--out", help="output directory")
        return p

    common(sub.add_parser("check-alpha", help="admissibility and branch of alpha"))
    common(sub.add_parser("derive-params", help="extension parameters for alpha"))
    p = common(sub.add_parser("spectrum", help="negative eigenvalues"))
    p.add_argument("--variant", choices=("printed", "shifted"))
    p = common(sub.add_parser("energy", help="energy of a state CSV (z,f[,g])"))
    p.add_argument("--state")
    p.add_argument("--m", type=float)
    p.add_argument("--compact", action="store_true", help="data carry no singular content")
    p.add_argument("--window", help="lo,hi fit window for the singular expansion")
    p = common(sub.add_parser("evolve", help="evolve one mode"), grid=True, run=True)
    p.add_argument("--closure", choices=("joint", "explicit"))
    p.add_argument("--right", choices=("dirichlet", "graviton"))
    common(sub.add_parser("friedrichs", help="Friedrichs baseline"), alpha=False, grid=True,
           run=True)
    common(sub.add_parser("graviton", help="graviton split of one mode"), grid=True, run=True)
    p = common(sub.add_parser("synth", help="assemble a plane-wave spec"), grid=True)
    p.add_argument("--spec")
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--sample-every", dest="sample_every", type=int)
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--right", choices=("dirichlet", "graviton"))
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p = common(sub.add_parser("sel-test", help="run the eigenvalue-variant oracle"), alpha=False)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return HANDLERS[args.command](args, cfg)
    except (UsageError, DomainError) as exc:
        sys.stderr.write(f"adsdyn {args.command}: {exc}\n")
        return EXIT_USAGE
    except NumericError as exc:
        sys.stderr.write(f"adsdyn {args.command}: numeric failure: {exc}\n")
        return EXIT_NUMERIC


def replay(manifest_path, out_dir) -> int:
    """Re-run the command recorded in a run.json into another directory."""
    doc = json.loads(Path(manifest_path).read_text())
    argv = doc.get("argv")
    if not argv:
        raise UsageError(f"{manifest_path}: no argv recorded")
    argv = list(argv)
    if "--out" in argv:
        argv[argv.index("--out") + 1] = str(out_dir)
    else:
        argv = [a if not a.startswith("--out=") else f"--out={out_dir}" for a in argv]
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
