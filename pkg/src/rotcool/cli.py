"""Command-line entry point: ``rotcool {levels,modes,scan,cool,drive,protocol}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, bundled_molecules, load_config
from .coupling import CouplingError, scan_resonances
from .lindblad import CompositeSpace, PropagationError, propagate
from .microwave import (PulseError, RotorSubspace, design_pi_pulse, imperfect_polarization,
                        propagate_pulse)
from .protocol import ProtocolError, depletion_plan, plan_validator, run_protocol, single_state_plan
from .rotor import RotorError, build_rotor_block, transition_table
from .trap import ConvergenceError, StructuralInstabilityError, TrapError, normal_modes

log = logging.getLogger("rotcool")

CSV_SCHEMA = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def write_csv(path, header, rows, meta):
    """CSV with ``#`` metadata lines and 12 significant digits for floats."""
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v if isinstance(v, str) else json.dumps(v, sort_keys=True)}\n")
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt(x) for x in r) + "\n")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _column(label):
    return str(label).replace(",", ":")


def _meta(cfg, command, schema=CSV_SCHEMA):
    return {"rotcool_version": __version__, "schema": schema, "command": command,
            "molecule": cfg.molecule.name, "conventions": cfg.conventions()}


def cmd_levels(cfg, out, jobs):
    spec = cfg.molecule
    Jmax = int(cfg.tree["levels"]["Jmax"])
    rows = []
    for J in range(Jmax + 1):
        for lev in build_rotor_block(spec, J).levels:
            rows.append((lev.J, lev.Ka, lev.Kc, lev.label, lev.energy))
    write_csv(out / "levels.csv", ["J", "Ka", "Kc", "label", "energy_MHz"], rows, _meta(cfg, "levels"))
    trs = transition_table(spec, max(Jmax, 1), per_debye=not spec.has_dipole)
    write_csv(out / "transitions.csv",
              ["lower", "upper", "frequency_MHz", "strength_x_D2", "strength_y_D2", "strength_z_D2"],
              [(t.lower.label, t.upper.label, t.frequency, t.strength["x"], t.strength["y"],
                t.strength["z"]) for t in trs], _meta(cfg, "levels"))
    return {"levels": len(rows), "transitions": len(trs)}


def cmd_modes(cfg, out, jobs):
    ms = normal_modes(cfg.chain)
    n = len(cfg.chain.particles)
    meta = _meta(cfg, "modes")
    write_csv(out / "equilibria.csv", ["index", "kind", "mass_u", "position_um"],
              [(i, p.kind, p.mass, x) for i, (p, x) in enumerate(zip(cfg.chain.particles, ms.equilibria))],
              meta)
    write_csv(out / "modes.csv", ["label", "axis", "frequency_MHz"] + [f"b_{i}" for i in range(n)],
              [(m.label, m.axis, m.frequency, *m.vector) for m in ms.modes], meta)
    return {"modes": len(ms.modes)}


def cmd_scan(cfg, out, jobs):
    s = cfg.tree["scan"]
    mols = bundled_molecules()
    specs = [mols[k] for k in s["molecules"]] or [cfg.molecule]
    masses = np.linspace(s["mass_min"], s["mass_max"], int(s["n_mass"]))
    wz = np.linspace(s["wz_min"], s["wz_max"], int(s["n_wz"]))
    res = scan_resonances(specs, cfg.chain, wz, masses, int(s["Jmax"]), float(s["tolerance_khz"]), jobs)
    meta = _meta(cfg, "scan")
    rows = []
    for i, m in enumerate(masses):
        for k, w in enumerate(wz):
            rows.append((m, w, res.mode_freq[i, k], res.b_m[i, k], res.prefactor[i, k], res.stable[i, k]))
    write_csv(out / "scan_grid.csv",
              ["mass_u", "omega_z_MHz", "zigzag_MHz", "b_m", "prefactor_kHz_per_D", "stable"], rows, meta)
    write_csv(out / "resonances.csv",
              ["molecule", "mass_u", "omega_z_MHz", "J_lower", "Ka_lower", "Kc_lower", "J_upper",
               "Ka_upper", "Kc_upper", "transition_MHz", "zigzag_MHz", "b_m", "prefactor_kHz_per_D",
               "max_coupling_kHz"],
              [(r.molecule, r.mass, r.omega_z, *r.lower.key, *r.upper.key, r.transition_freq,
                r.mode_freq, r.b_m, r.prefactor, r.max_coupling) for r in res.resonances], meta)
    stable = res.stable_prefactors()
    summary = {
        "grid_points": int(res.stable.size),
        "stable_points": int(res.stable.sum()),
        "prefactor_median_kHz_per_D": float(np.median(stable)) if stable.size else None,
        "resonances_per_molecule": {sp.name: sum(r.molecule == sp.name for r in res.resonances)
                                    for sp in specs},
    }
    write_json(out / "scan_summary.json", summary)
    return summary


def cmd_cool(cfg, out, jobs):
    if cfg.cooling is None:
        raise ConfigError("cooling.transition is required for 'cool'")
    c = cfg.tree["cooling"]
    num = cfg.tree["numerics"]
    space = CompositeSpace(cfg.cooling.atom_count, int(num["n_max"]))
    meta = _meta(cfg, "cool")
    Ms = [int(M) for M in c["M_values"]]

    def run(M):
        p = cfg.cooling.replace(coupling=float(cfg.couplings.get(abs(M), 0.0)))
        rho0 = space.product_state(np.full(space.n_max + 1, 1 / (space.n_max + 1)), [0.5, 0.5])
        return M, propagate(rho0, p, space, float(c["record_every"]), bool(num["secular"]),
                            rtol=float(num["rtol"]), atol=float(num["atol"]))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run, Ms))
    else:
        results = [run(M) for M in Ms]
    names = ["".join(map(str, a)) + f"_n{n}_{'j1' if j == 0 else 'j2'}" for a, n, j in space.labels()]
    summary = {}
    for M, tr in results:
        write_csv(out / f"trajectory_M{M}.csv", ["t_ms"] + names + ["trace", "purity"],
                  [(t, *p, tr_, pu) for t, p, tr_, pu in zip(tr.times, tr.populations, tr.trace, tr.purity)],
                  {**meta, "M": M})
        rot = tr.rotor_populations()
        summary[str(M)] = {"j2_initial": float(rot[0, 1]), "j2_final": float(rot[-1, 1]),
                           "j2_remaining_fraction": float(rot[-1, 1] / rot[0, 1])}
    write_json(out / "cool_summary.json", summary)
    return summary


def _pulse_from_entry(sub, e, mixing):
    pol = e.get("polarization", "x")
    if "admix" in e:
        pol = imperfect_polarization(pol, float(e["admix"]["fraction"]), e["admix"]["with"], mixing)
    return design_pi_pulse(sub, tuple(e["lower"]), tuple(e["upper"]), pol, float(e.get("rabi", 10.0)),
                           e.get("envelope", "flattop"), float(e.get("ramp_fraction", 0.1)),
                           float(e.get("area", np.pi)), e.get("label", ""))


def cmd_drive(cfg, out, jobs):
    d = cfg.tree["drive"]
    levels = d["levels"] or cfg.tree["protocol"]["levels"]
    sub = RotorSubspace(cfg.molecule, list(levels))
    if d["initial"] == "uniform":
        pop = np.full(sub.dim, 1.0 / sub.dim)
    else:
        pop = np.zeros(sub.dim)
        for k, v in d["initial"].items():
            lab, _, M = str(k).partition(",")
            if M:
                pop[sub.index(lab, int(M))] = float(v)
            else:
                idx = sub.level_indices(lab)
                pop[idx] = float(v) / len(idx)
    before = pop.copy()
    mixing = cfg.tree["numerics"]["polarization_mixing"]
    for entry in d["pulses"]:
        tones = entry if isinstance(entry, list) else [entry]
        pop = propagate_pulse(pop, [_pulse_from_entry(sub, e, mixing) for e in tones], sub)
    write_csv(out / "populations.csv", ["state", "before", "after"],
              [(_column(lab), b, a) for lab, b, a in zip(sub.labels(), before, pop)], _meta(cfg, "drive"))
    return {"pulses": len(d["pulses"]), "total": float(pop.sum())}


def cmd_protocol(cfg, out, jobs):
    if cfg.cooling is None:
        raise ConfigError("cooling.transition is required for 'protocol'")
    p = cfg.tree["protocol"]
    num = cfg.tree["numerics"]
    kw = dict(iterations=int(p["iterations"]), rabi=float(p["rabi"]), levels=tuple(p["levels"]),
              cooled=tuple(cfg.tree["cooling"]["transition"]), mixing=num["polarization_mixing"],
              n_max=int(num["n_max"]), secular=bool(num["secular"]))
    if p["kind"] == "depletion":
        plan = depletion_plan(cfg.molecule, cfg.cooling, cfg.couplings, float(p["eps"]), **kw)
    else:
        plan = single_state_plan(cfg.molecule, cfg.cooling, cfg.couplings, float(p["eps"]),
                                 every=int(p["every"]), **kw)
    report = plan_validator(plan)
    for s in report.suggestions:
        log.warning("stranded %s", s)
    trace = run_protocol(plan)
    write_csv(out / "protocol.csv", ["iteration", "error"] + [_column(x) for x in trace.labels],
              [(i, e, *pop) for i, (e, pop) in enumerate(zip(trace.errors, trace.populations))],
              _meta(cfg, "protocol"))
    thr = float(p["threshold"])
    summary = {"kind": p["kind"], "eps": float(p["eps"]), "final_error": trace.final_error,
               "threshold": thr, "iterations_to_threshold": trace.iterations_to(thr),
               "converged": bool(trace.final_error < thr),
               "stranded": [f"{l},{M}" for l, M in report.stranded]}
    write_json(out / "protocol_summary.json", summary)
    return summary


COMMANDS = {"levels": cmd_levels, "modes": cmd_modes, "scan": cmd_scan, "cool": cmd_cool,
            "drive": cmd_drive, "protocol": cmd_protocol}

CONFIG_ERRORS = (ConfigError, RotorError, TrapError, PulseError, CouplingError, KeyError)
NUMERIC_ERRORS = (PropagationError, ConvergenceError, StructuralInstabilityError, ProtocolError,
                  FloatingPointError, np.linalg.LinAlgError)


def build_parser():
    ap = argparse.ArgumentParser(prog="rotcool", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--out", help="output directory (default: output.dir)")
        sp.add_argument("--preset", help="named preset")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (dotted path); repeatable")
        sp.add_argument("--jobs", type=int, default=1, help="parallel workers")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.preset, args.overrides)
        out = Path(args.out or cfg.tree["output"]["dir"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved_config.yaml").write_text(cfg.dump())
        summary = COMMANDS[args.command](cfg, out, max(1, args.jobs))
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(summary, sort_keys=True, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
