"""Repeated cycles of sideband cooling and microwave population transfer.

A protocol acts on the rotor density matrix of a :class:`RotorSubspace`
together with the population distribution of the resonant phonon mode.
Cooling steps act per M block on the cooled pair ``(j1, j2)``; coherences
between the block and the rest of the subspace are dropped on hand-off, and
the phonon distribution is carried to the next step as a marginal.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .lindblad import CompositeSpace, CoolingParams, cool_block
from .microwave import RotorSubspace, design_pi_pulse, imperfect_polarization
from .rotor import find_level

log = logging.getLogger(__name__)


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class Cool:
    pass


@dataclass(frozen=True)
class Pulse:
    pulses: tuple  # simultaneous tones

    def __init__(self, *pulses):
        object.__setattr__(self, "pulses", tuple(pulses))


@dataclass(frozen=True)
class Stage:
    steps: tuple
    every: int = 1  # used on iterations divisible by ``every``


@dataclass
class ProtocolPlan:
    """Cooling/pulse sequence over a rotor subspace.

    ``couplings`` maps ``|M|`` to the total dipole-phonon coupling (kHz) of
    the cooled pair.  Each iteration runs the steps of the last stage whose
    ``every`` divides the (1-based) iteration number.
    """

    subspace: RotorSubspace
    cooled: tuple  # (j1, j2) level labels, j1 lower
    cooling: CoolingParams
    couplings: dict
    stages: tuple
    iterations: int = 10
    n_max: int = 2
    secular: bool = False
    initial: np.ndarray | None = None  # populations over the subspace
    initial_phonons: np.ndarray | None = None
    resonance_tolerance_khz: float = 1.0
    target: tuple | None = None  # (level, M) for single-state error; None means level j1

    def __post_init__(self):
        self.stages = tuple(self.stages)
        if not self.stages:
            raise ProtocolError("plan needs at least one stage")
        j1, j2 = (find_level(self.subspace.spec, l)[0] for l in self.cooled)
        if j2.energy <= j1.energy:
            raise ProtocolError("cooled pair must be given as (lower, upper)")
        self.cooled = (j1, j2)
        if self.initial is None:
            self.initial = np.full(self.subspace.dim, 1.0 / self.subspace.dim)
        if self.initial_phonons is None:
            self.initial_phonons = np.full(self.n_max + 1, 1.0 / (self.n_max + 1))
        detune = abs(j2.energy - j1.energy - self.cooling.mode_freq) * 1e3
        if detune > self.resonance_tolerance_khz:
            log.warning("cooled transition detuned from the mode by %.3g kHz", detune)

    def steps_for(self, iteration):
        chosen = self.stages[0]
        for st in self.stages:
            if iteration % st.every == 0:
                chosen = st
        return chosen.steps

    def coupling(self, M):
        return float(self.couplings.get(abs(M), 0.0))


@dataclass
class ProtocolTrace:
    labels: list
    populations: np.ndarray  # (iterations+1, dim), row 0 is the initial state
    errors: np.ndarray
    snapshots: list = field(default_factory=list)  # (iteration, step name, populations)

    @property
    def final_error(self):
        return float(self.errors[-1])

    def iterations_to(self, threshold):
        hit = np.nonzero(self.errors < threshold)[0]
        return int(hit[0]) if len(hit) else None


def cooling_error(populations, subspace, target, M=None):
    """1 minus the population of ``target`` (all M, or only sublevel ``M``)."""
    p = np.asarray(populations)
    p = np.real(np.diag(p)) if p.ndim == 2 else np.real(p)
    if M is None:
        idx = subspace.level_indices(target)
    else:
        idx = [subspace.index(target, M)]
    return float(min(1.0, max(0.0, 1.0 - p[idx].sum())))


def _cool_step(plan, rho, phonons):
    sub = plan.subspace
    j1, j2 = plan.cooled
    space = CompositeSpace(plan.cooling.atom_count, plan.n_max)
    new = np.diag(np.diag(rho)).astype(complex)
    ph_out = np.zeros(plan.n_max + 1)
    weight_left = np.real(np.trace(rho))
    for M in range(-min(j1.J, j2.J), min(j1.J, j2.J) + 1):
        E = plan.coupling(M)
        if E == 0.0:
            continue
        try:
            i1, i2 = sub.index(j1, M), sub.index(j2, M)
        except Exception:
            continue
        blk = rho[np.ix_([i1, i2], [i1, i2])]
        w = np.real(np.trace(blk))
        if w <= 0:
            continue
        ph, r = cool_block(space, plan.cooling.replace(coupling=E), phonons, blk, plan.secular)
        new[np.ix_([i1, i2], [i1, i2])] = r
        ph_out += ph
        weight_left -= w
    if weight_left > 0:
        # phonons of uncoupled population still see sideband cooling
        ph, _ = cool_block(space, plan.cooling.replace(coupling=0.0), phonons,
                           np.diag([weight_left, 0.0]), plan.secular)
        ph_out += ph
    total = ph_out.sum()
    return new, (ph_out / total if total > 0 else phonons)


def run_protocol(plan, keep_snapshots=False):
    """Run ``plan.iterations`` iterations and return a :class:`ProtocolTrace`."""
    sub = plan.subspace
    rho = np.diag(np.asarray(plan.initial, dtype=complex))
    phonons = np.asarray(plan.initial_phonons, dtype=float)

    def err(r):
        if plan.target is None:
            return cooling_error(r, sub, plan.cooled[0])
        return cooling_error(r, sub, plan.target[0], plan.target[1])

    pops = [np.real(np.diag(rho)).copy()]
    errors = [err(rho)]
    snaps = []
    for it in range(1, plan.iterations + 1):
        for step in plan.steps_for(it):
            try:
                if isinstance(step, Cool):
                    rho, phonons = _cool_step(plan, rho, phonons)
                    name = "cool"
                else:
                    U = sub.unitary(list(step.pulses))
                    rho = U @ rho @ U.conj().T
                    name = "pulse:" + "+".join(p.label or f"{p.carrier:.4f}MHz" for p in step.pulses)
            except Exception as exc:
                raise ProtocolError(f"iteration {it}: {exc}") from exc
            tr = np.real(np.trace(rho))
            if abs(tr - 1) > 1e-8:
                raise ProtocolError(f"iteration {it}: population not conserved (sum {tr:.12g})")
            if keep_snapshots:
                snaps.append((it, name, np.real(np.diag(rho)).copy()))
        pops.append(np.real(np.diag(rho)).copy())
        errors.append(err(rho))
    return ProtocolTrace(sub.labels(), np.array(pops), np.array(errors), snaps)


# -- reference protocols ---------------------------------------------------------

def depletion_plan(spec, cooling, couplings, eps_z=0.0, iterations=10, rabi=10.0,
                   levels=("2_21", "3_31", "3_30"), cooled=("3_31", "3_30"),
                   pulse_pair=(("2_21", 0), ("3_30", 1)), mixing="intensity", **kw):
    """Cooling followed by an x-polarized pulse on the 2_21 <-> 3_30 manifold.

    ``eps_z`` admixes z polarization (intensity fraction by default).
    """
    sub = kw.pop("subspace", None) or RotorSubspace(spec, list(levels))
    pol = imperfect_polarization("x", eps_z, "z", mixing)
    ref = design_pi_pulse(sub, pulse_pair[0], pulse_pair[1], "x", rabi, label="x")
    pulse = _with_polarization(ref, pol, "x" if eps_z == 0 else f"x+{eps_z:g}z")
    return ProtocolPlan(sub, cooled, cooling, couplings, (Stage((Cool(), Pulse(pulse))),),
                        iterations, **kw)


def single_state_plan(spec, cooling, couplings, eps_minus=0.0, iterations=30, every=3, rabi=10.0,
                      levels=("2_21", "3_31", "3_30"), cooled=("3_31", "3_30"), target_M=3,
                      mixing="intensity", **kw):
    """Two-stage preparation of ``|j1, target_M>``.

    Stage 1: sigma+ pulse on ``j1 -> j2`` then cooling.  Every ``every``-th
    iteration the stage-1 pulse is followed by a z pulse and a sigma+ pulse on
    the ``2_21 <-> j2`` carrier (moving ``|j2, 0>`` via ``|2_21, 0>`` to
    ``|j2, 1>``) before cooling.  Without the leading stage-1 pulse the
    population shuttled between ``|j1, -1>`` and ``|j2, 0>`` by consecutive
    stage-1 pulses could be out of phase with the transfer forever.
    ``eps_minus`` admixes sigma- into every sigma+ pulse.
    """
    sub = kw.pop("subspace", None) or RotorSubspace(spec, list(levels))
    j1, j2 = cooled
    aux = levels[0]
    pol = imperfect_polarization("sigma+", eps_minus, "sigma-", mixing)
    s1 = _with_polarization(design_pi_pulse(sub, (j1, 0), (j2, 1), "sigma+", rabi), pol, "sigma+ j1-j2")
    z = design_pi_pulse(sub, (aux, 0), (j2, 0), "z", rabi, label="z aux-j2")
    s2 = _with_polarization(design_pi_pulse(sub, (aux, 0), (j2, 1), "sigma+", rabi), pol, "sigma+ aux-j2")
    init = kw.pop("initial", None)
    if init is None:
        init = np.zeros(sub.dim)
        init[sub.level_indices(j1)] = 1.0 / len(sub.level_indices(j1))
    stages = (Stage((Pulse(s1), Cool()), 1), Stage((Pulse(s1), Pulse(z), Pulse(s2), Cool()), every))
    return ProtocolPlan(sub, cooled, cooling, couplings, stages, iterations, initial=init,
                        target=(j1, target_M), **kw)


def _with_polarization(p, pol, label):
    from .microwave import PulseSpec
    return PulseSpec(p.carrier, tuple(pol), p.rabi, p.envelope, p.duration, p.ramp_fraction, p.area, label)


def run_depletion_protocol(spec, cooling, couplings, eps_z=0.0, **kw):
    return run_protocol(depletion_plan(spec, cooling, couplings, eps_z, **kw))


def run_single_state_protocol(spec, cooling, couplings, eps_minus=0.0, **kw):
    return run_protocol(single_state_plan(spec, cooling, couplings, eps_minus, **kw))


# -- validation ------------------------------------------------------------------

@dataclass
class PlanReport:
    stranded: list  # (level label, M)
    suggestions: list
    coolable: list

    @property
    def ok(self):
        return not self.stranded


def plan_validator(plan, threshold=1e-9):
    """Check that every subspace state can reach a cooled sublevel.

    A state is fine if it belongs to ``j1`` or is connected by pulse links to
    a ``j2`` sublevel with nonzero coupling.  Pulse links are undirected.
    """
    sub = plan.subspace
    j1, j2 = plan.cooled
    n = sub.dim
    adj = [set() for _ in range(n)]
    for st in plan.stages:
        for step in st.steps:
            if not isinstance(step, Pulse):
                continue
            for p in step.pulses:
                C, _ = sub.drive_operator(p)
                for j, i in zip(*np.nonzero(np.abs(C) > threshold)):
                    adj[i].add(j)
                    adj[j].add(i)
    coolable = [i for i, (l, M) in enumerate(sub.states) if l.key == j2.key and plan.coupling(M) > 0]
    good = set(coolable)
    q = deque(coolable)
    while q:
        i = q.popleft()
        for j in adj[i]:
            if j not in good:
                good.add(j)
                q.append(j)
    stranded = [i for i, (l, _) in enumerate(sub.states) if i not in good and l.key != j1.key]
    suggestions = []
    for i in stranded:
        li, Mi = sub.states[i]
        for k in sorted(good):
            lk, Mk = sub.states[k]
            if lk.key == j1.key or abs(li.J - lk.J) > 1 or abs(Mi - Mk) != 1:
                continue
            d = sub.dipoles["x"][k, i]
            if abs(d) > threshold:
                suggestions.append(f"({li.label},{Mi}): add a dM={Mk - Mi:+d} link to ({lk.label},{Mk}) "
                                   f"at {abs(lk.energy - li.energy):.6g} MHz")
                break
        else:
            suggestions.append(f"({li.label},{Mi}): no single dM=+-1 link to a coolable state")
    return PlanReport([(sub.states[i][0].label, sub.states[i][1]) for i in stranded], suggestions,
                      [(sub.states[i][0].label, sub.states[i][1]) for i in coolable])
