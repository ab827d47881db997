"""Manufactured solutions, error measurement, convergence studies and lemma oracles."""
import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import forms, mesh as meshmod, solver
from .forms import ModelParams
from .space import build_space, cell_values, l2_project
from .stepper import Operators, Problem, TimeScheme, run, stability_constant, stencils

log = logging.getLogger(__name__)


# ------------------------------------------------------------ manufactured cases

@dataclass(frozen=True)
class ManufacturedCase:
    id: str
    domain: str
    u: Callable             # (points, t) -> complex
    grad: Callable          # (points, t) -> complex (P, 2)
    u_t: Callable
    laplacian: Callable

    def source(self, params):
        """f = u_t - (ν+iα)Δu + (κ+iβ)|u|²u - γu."""
        def f(p, t):
            u = self.u(p, t)
            return (self.u_t(p, t) - params.diffusion * self.laplacian(p, t)
                    + params.reaction * np.abs(u) ** 2 * u - params.gamma * u)
        return f

    def exact_and_source(self, params, p, t):
        p = np.atleast_2d(p)
        return self.u(p, t), self.grad(p, t), self.source(params)(p, t)


def _s(x):
    return np.sin(x) * (1 - x)


def _ds(x):
    return np.cos(x) * (1 - x) - np.sin(x)


def _d2s(x):
    return -np.sin(x) * (1 - x) - 2 * np.cos(x)


def _ex1_u(p, t):
    return np.exp(1j * t) * _s(p[:, 0]) * _s(p[:, 1])


def _ex1_grad(p, t):
    x, y = p[:, 0], p[:, 1]
    return np.exp(1j * t) * np.column_stack([_ds(x) * _s(y), _s(x) * _ds(y)])


def _ex1_ut(p, t):
    return 1j * _ex1_u(p, t)


def _ex1_lap(p, t):
    x, y = p[:, 0], p[:, 1]
    return np.exp(1j * t) * (_d2s(x) * _s(y) + _s(x) * _d2s(y))


def _ex2_u(p, t):
    rho = p[:, 0] ** 2 + p[:, 1] ** 2
    return 1j * np.sin(rho - 1) * np.exp(-t)


def _ex2_grad(p, t):
    rho = p[:, 0] ** 2 + p[:, 1] ** 2
    c = 2j * np.cos(rho - 1) * np.exp(-t)
    return np.column_stack([c * p[:, 0], c * p[:, 1]])


def _ex2_ut(p, t):
    return -_ex2_u(p, t)


def _ex2_lap(p, t):
    rho = p[:, 0] ** 2 + p[:, 1] ** 2
    return 1j * np.exp(-t) * (4 * np.cos(rho - 1) - 4 * rho * np.sin(rho - 1))


EXAMPLE1 = ManufacturedCase("example1", "square", _ex1_u, _ex1_grad, _ex1_ut, _ex1_lap)
EXAMPLE2 = ManufacturedCase("example2", "disk", _ex2_u, _ex2_grad, _ex2_ut, _ex2_lap)
CASES = {"example1": EXAMPLE1, "example2": EXAMPLE2, "1": EXAMPLE1, "2": EXAMPLE2}


def fd_source_check(case, params, n=100, seed=0, h=1e-4):
    """Max deviation of the closed-form source from finite differences of u."""
    rng = np.random.default_rng(seed)
    if case.domain == "square":
        p = rng.uniform(0.05, 0.95, size=(n, 2))
    else:
        r = 0.9 * np.sqrt(rng.uniform(size=n))
        a = rng.uniform(0, 2 * np.pi, size=n)
        p = np.column_stack([r * np.cos(a), r * np.sin(a)])
    t = rng.uniform(0.0, 1.0, size=n)
    worst = 0.0
    f = case.source(params)
    for pi, ti in zip(p, t):
        P = pi[None, :]
        u = case.u(P, ti)
        ut = (case.u(P, ti + h) - case.u(P, ti - h)) / (2 * h)
        ex, ey = np.array([[h, 0.0]]), np.array([[0.0, h]])
        lap = (case.u(P + ex, ti) + case.u(P - ex, ti) + case.u(P + ey, ti)
               + case.u(P - ey, ti) - 4 * u) / h ** 2
        fd = ut - params.diffusion * lap + params.reaction * np.abs(u) ** 2 * u - params.gamma * u
        worst = max(worst, float(np.abs(fd - f(P, ti))[0]))
    return worst


# ------------------------------------------------------------ errors and tables

def final_errors(space, u_final, case, T):
    """(L2 error, broken H1 error) against ``case`` at time ``T`` over the mesh cells."""
    v = u_final.values if hasattr(u_final, "values") else u_final
    val, grad = cell_values(space, v)
    du = case.u(space.qpts, T) - val
    dg = case.grad(space.qpts, T) - grad
    l2 = math.sqrt(float(np.sum(space.qwts * np.abs(du) ** 2)))
    h1 = math.sqrt(float(np.sum(space.qwts * np.sum(np.abs(dg) ** 2, axis=1))))
    return l2, h1


def orders(errors):
    e = np.asarray(errors, dtype=float)
    return list(np.log2(e[:-1] / e[1:]))


def fitted_order(hs, errors):
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


@dataclass
class ConvergenceTable:
    variable: str                   # "h" or "tau"
    steps: list
    l2: list
    h1: list
    meta: dict = field(default_factory=dict)

    @property
    def l2_orders(self):
        return [None] + orders(self.l2) if len(self.l2) > 1 else [None]

    @property
    def h1_orders(self):
        return [None] + orders(self.h1) if len(self.h1) > 1 else [None]

    def rows(self):
        return list(zip(self.steps, self.l2, self.l2_orders, self.h1, self.h1_orders))

    def finest_orders(self):
        return self.l2_orders[-1], self.h1_orders[-1]

    def is_monotone(self):
        return all(a > b for a, b in zip(self.l2[:-1], self.l2[1:]))

    @staticmethod
    def _label(x):
        inv = 1.0 / x
        return f"1/{int(round(inv))}" if abs(inv - round(inv)) < 1e-9 else f"{x:.6g}"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow([self.variable, "L2_error", "L2_order", "H1_error", "H1_order"])
        for s, e, o, g, og in self.rows():
            w.writerow([self._label(s), f"{e:.5e}", "" if o is None else f"{o:.4f}",
                        f"{g:.5e}", "" if og is None else f"{og:.4f}"])
        return buf.getvalue()

    def to_markdown(self):
        lines = [f"| {self.variable} | L2-error | Order | H1-error | Order |",
                 "|---|---|---|---|---|"]
        for s, e, o, g, og in self.rows():
            lines.append(f"| {self._label(s)} | {e:.5e} | {'--' if o is None else f'{o:.4f}'} "
                         f"| {g:.5e} | {'--' if og is None else f'{og:.4f}'} |")
        return "\n".join(lines) + "\n"


def default_tau(h_finest, k):
    return h_finest ** ((k + 1) / 2.0) / 4.0


def solve_case(case, mesh, k, theta, tau, T=1.0, params=None, lam=None, tol=solver.DEFAULT_TOL,
               zero_source=False):
    """Run ``case`` on ``mesh`` and return (space, RunResult)."""
    params = params or ModelParams()
    space = build_space(mesh, k)
    scheme = TimeScheme.from_final_time(theta, T, tau)
    problem = Problem(space, params, scheme, case.u, case.grad,
                      source=None if zero_source else case.source(params),
                      boundary=None if zero_source else case.u,
                      lam=lam, tol=tol)
    return space, run(problem)


def spatial_convergence(case, family, k, theta, hs, tau=None, T=1.0, params=None, lam=None,
                        tol=solver.DEFAULT_TOL, seed=0, lloyd_iters=20, check_tau=False):
    """Errors at T on successively refined meshes of ``family`` with a fixed fine τ."""
    hs = list(hs)
    tau = default_tau(min(hs), k) if tau is None else tau
    l2, h1, hmax = [], [], []
    for h in hs:
        m = meshmod.family_for_h(family, h, seed=seed, lloyd_iters=lloyd_iters)
        space, res = solve_case(case, m, k, theta, tau, T, params, lam, tol)
        e = final_errors(space, res.final, case, res.times[-1])
        log.info("%s k=%d h=%s: L2 %.4e H1 %.4e", family, k, h, *e)
        l2.append(e[0])
        h1.append(e[1])
        hmax.append(m.h)
    meta = {"case": case.id, "family": family, "k": k, "theta": theta, "tau": tau, "T": T,
            "h_max": hmax, "seed": seed}
    if check_tau:
        m = meshmod.family_for_h(family, hs[-1], seed=seed, lloyd_iters=lloyd_iters)
        space, res = solve_case(case, m, k, theta, tau / 2, T, params, lam, tol)
        e2 = final_errors(space, res.final, case, res.times[-1])[0]
        meta["tau_halving_change"] = abs(e2 - l2[-1]) / l2[-1]
    table = ConvergenceTable("h", hs, l2, h1, meta)
    if not table.is_monotone():
        warnings.warn(f"errors do not decrease monotonically: {l2}")
    return table


def temporal_convergence(case, mesh, k, theta, taus, T=1.0, params=None, lam=None,
                         tol=solver.DEFAULT_TOL):
    l2, h1 = [], []
    space = build_space(mesh, k)
    params = params or ModelParams()
    ops = Operators(space, lam)
    for tau in taus:
        scheme = TimeScheme.from_final_time(theta, T, tau)
        problem = Problem(space, params, scheme, case.u, case.grad, case.source(params), case.u,
                          lam=lam, tol=tol)
        res = run(problem, operators=ops)
        e = final_errors(space, res.final, case, res.times[-1])
        l2.append(e[0])
        h1.append(e[1])
    return ConvergenceTable("tau", list(taus), l2, h1,
                            {"case": case.id, "k": k, "theta": theta, "T": T, "h": mesh.h})


def projection_errors(case, family, k, hs, lam=None, seed=0, lloyd_iters=20):
    """L2 errors of the L2 and Ritz projections of ``case.u(., 0)``."""
    el2, eritz = [], []
    u = lambda p, t=0.0: case.u(p, 0.0)
    g = lambda p, t=0.0: case.grad(p, 0.0)
    for h in hs:
        space = build_space(meshmod.family_for_h(family, h, seed=seed, lloyd_iters=lloyd_iters), k)
        A = forms.assemble_sipg(space, lam)
        P = l2_project(space, u)
        R = forms.ritz_project(space, A, u, g, lam)
        el2.append(final_errors(space, P, case, 0.0)[0])
        eritz.append(final_errors(space, R, case, 0.0)[0])
    return el2, eritz


def stability_run(mesh, k=1, theta=0.25, tau=0.01, T=1.0, params=None, case=EXAMPLE2, lam=None):
    """Zero-source run from the case's initial datum; returns (result, C1, bound_ok)."""
    params = params or ModelParams()
    space, res = solve_case(case, mesh, k, theta, tau, T, params, lam, zero_source=True)
    C1 = stability_constant(params.gamma, T)
    ok = max(res.l2_history) <= C1 * res.l2_history[0]
    return res, C1, ok


# ------------------------------------------------------------ lemma oracles

def energy_functional(theta, v_now, v_prev):
    a = np.vdot(v_now, v_now).real
    b = np.vdot(v_prev, v_prev).real
    d = v_now - v_prev
    return (3 - 2 * theta) * a - (1 - 2 * theta) * b + (2 - theta) * (1 - 2 * theta) * np.vdot(d, d).real


def energy_margins(v, theta, tau):
    """Margins of the energy inequality for every admissible n (>= 0 means it holds).

    Returns two arrays: Re(D v, v^{n-θ}) - (E^n - E^{n-1})/(4τ) for n >= 2,
    and E^n - ||v^n||²/(1-θ) for n >= 1.
    """
    st = stencils(theta)
    m1, m2 = [], []
    for n in range(2, len(v)):
        D = st.derivative(v[n], v[n - 1], v[n - 2], tau)
        mean = st.average(v[n], v[n - 1])
        lhs = np.vdot(mean, D).real
        rhs = (energy_functional(theta, v[n], v[n - 1]) - energy_functional(theta, v[n - 1], v[n - 2])) / (4 * tau)
        m1.append(lhs - rhs)
    for n in range(1, len(v)):
        m2.append(energy_functional(theta, v[n], v[n - 1]) - np.vdot(v[n], v[n]).real / (1 - theta))
    return np.array(m1), np.array(m2)


def transfer_margins(v, theta):
    """(1+2θ) Σ_{m<=n} ||v^{m-θ}|| + 2θ||v^0|| - ||v^n|| for n >= 1."""
    st = stencils(theta)
    out = []
    acc = 0.0
    for n in range(1, len(v)):
        acc += np.linalg.norm(st.average(v[n], v[n - 1]))
        out.append((1 + 2 * theta) * acc + 2 * theta * np.linalg.norm(v[0]) - np.linalg.norm(v[n]))
    return np.array(out)


def random_dg_ratios(space, n_fields=100, seed=0, D=None):
    """max over random fields of ||v||_DG h / ||v|| and ||v||_{0,4} / (||v||_DG ||v||)^{1/2}."""
    rng = np.random.default_rng(seed)
    D = forms.assemble_dg_norm_matrix(space) if D is None else D
    h = space.mesh.h
    inv, lady = 0.0, 0.0
    for _ in range(n_fields):
        v = rng.normal(size=space.ndofs) + 1j * rng.normal(size=space.ndofs)
        l2, _, dg = forms.norms(space, v, D)
        inv = max(inv, dg * h / l2)
        lady = max(lady, forms.lp_norm(space, v, 4) / math.sqrt(dg * l2))
    return inv, lady


@dataclass
class PropertyReport:
    trials: int
    seed: int
    results: dict = field(default_factory=dict)
    counterexamples: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r["passed"] for r in self.results.values())

    def to_json(self):
        return {"seed": self.seed, "trials": self.trials, "passed": self.passed,
                "results": self.results, "counterexamples": self.counterexamples}


def lemma_property_suite(seed=0, trials=1000, m=4, levels=5, flip=False, inverse_meshes=None,
                         inverse_tol=0.15):
    """Execute the energy, transfer and DG-inverse oracles.

    ``flip`` reverses the energy inequality as a negative control and must
    then produce counterexamples.
    """
    rng = np.random.default_rng(seed)
    rep = PropertyReport(trials, seed)
    bad1, bad5 = [], []
    for trial in range(trials):
        theta = rng.uniform(0.0, 0.5)
        tau = 10.0 ** rng.uniform(-3, 0)
        v = rng.normal(size=(levels + 1, m)) + 1j * rng.normal(size=(levels + 1, m))
        scale = max(1.0, float(np.abs(v).max()) ** 2 / tau)
        m1, m2 = energy_margins(v, theta, tau)
        if flip:
            m1 = -m1
        if (m1 < -1e-12 * scale).any() or (m2 < -1e-12 * scale).any():
            bad1.append({"trial": trial, "theta": theta, "tau": tau,
                         "margins": [float(x) for x in np.concatenate([m1, m2])],
                         "v": [[[z.real, z.imag] for z in row] for row in v]})
        m5 = transfer_margins(v, theta)
        if (m5 < -1e-12 * np.abs(v).max()).any():
            bad5.append({"trial": trial, "theta": theta, "margins": m5.tolist()})
    rep.results["energy"] = {"passed": not bad1, "failures": len(bad1)}
    rep.results["transfer"] = {"passed": not bad5, "failures": len(bad5)}
    if bad1:
        rep.counterexamples["energy"] = bad1[:5]
    if bad5:
        rep.counterexamples["transfer"] = bad5[:5]

    if inverse_meshes is None:
        inverse_meshes = [meshmod.generate_structured_nonconvex(n) for n in (8, 16, 32)]
    ratios, lady = [], []
    for i, msh in enumerate(inverse_meshes):
        space = build_space(msh, 1)
        r, l4 = random_dg_ratios(space, 100, seed + i)
        ratios.append(r)
        lady.append(l4)
    spread = (max(ratios) - min(ratios)) / min(ratios)
    rep.results["dg_inverse"] = {"passed": spread < inverse_tol, "ratios": ratios,
                                 "spread": spread}
    rep.results["ladyzhenskaya"] = {
        "passed": all(b <= 1.1 * a for a, b in zip(lady[:-1], lady[1:])), "ratios": lady}
    return rep
