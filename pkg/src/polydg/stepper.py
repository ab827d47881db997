"""Weighted IMEX theta-scheme for the complex Ginzburg-Landau equation.

Level 0 is the Ritz projection of the initial datum, level 1 comes from a
linearized backward Euler step, and every later level solves

    [ (3-2θ)/(2τ) M + (1-θ) L ] u^n
        = (4-4θ)/(2τ) M u^{n-1} - (1-2θ)/(2τ) M u^{n-2} - θ L u^{n-1} + F(t_{n-θ})

with L = (ν+iα) A + (κ+iβ) W(û) - γ M and the weight W built from the
extrapolation û = (2-θ) u^{n-1} - (1-θ) u^{n-2}.
"""
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import forms, solver
from .space import FieldCoefficients, mass_blocks

log = logging.getLogger(__name__)


class Stencils(NamedTuple):
    """Weights of the three-level stencils for a given θ.

    ``dt`` multiplies (v^n, v^{n-1}, v^{n-2}) and is divided by 2τ;
    ``mean`` multiplies (v^n, v^{n-1}); ``extrap`` multiplies (v^{n-1}, v^{n-2}).
    """
    dt: tuple
    mean: tuple
    extrap: tuple

    def derivative(self, v0, v1, v2, tau):
        a, b, c = self.dt
        return (a * v0 + b * v1 + c * v2) / (2 * tau)

    def average(self, v0, v1):
        return self.mean[0] * v0 + self.mean[1] * v1

    def extrapolate(self, v1, v2):
        return self.extrap[0] * v1 + self.extrap[1] * v2


def check_theta(theta):
    if not 0.0 <= theta <= 0.5:
        raise ValueError(f"theta must lie in [0, 1/2], got {theta}")


def stencils(theta):
    check_theta(theta)
    return Stencils(dt=(3 - 2 * theta, -(4 - 4 * theta), 1 - 2 * theta),
                    mean=(1 - theta, theta),
                    extrap=(2 - theta, -(1 - theta)))


def stability_constant(gamma, T):
    """C1 = sqrt(exp(32 g T) (24 + 128/7 g)) with g = max(gamma, 0)."""
    if T <= 0:
        raise ValueError("T must be positive")
    g = max(gamma, 0.0)
    return math.sqrt(math.exp(32.0 * g * T) * (24.0 + 128.0 / 7.0 * g))


@dataclass(frozen=True)
class TimeScheme:
    theta: float
    tau: float
    N: int

    def __post_init__(self):
        check_theta(self.theta)
        if self.tau <= 0 or self.N < 1:
            raise ValueError("tau must be positive and N >= 1")

    @classmethod
    def from_final_time(cls, theta, T, tau):
        N = max(1, int(math.ceil(T / tau - 1e-9)))
        return cls(theta, T / N, N)

    @property
    def T(self):
        return self.N * self.tau

    def time(self, n):
        return n * self.tau

    def check_step_condition(self, gamma):
        ok = max(gamma, 0.0) * self.tau <= 1.0 / 16.0
        if not ok:
            warnings.warn(f"max(gamma,0)*tau = {max(gamma, 0) * self.tau:.3g} exceeds 1/16; "
                          "the stability bound is not guaranteed")
        return ok


@dataclass
class StepperState:
    u_prev2: Optional[FieldCoefficients]
    u_prev1: FieldCoefficients
    n: int
    l2_history: list = field(default_factory=list)
    u_prev3: Optional[FieldCoefficients] = None     # only seeds the Krylov solver


class Operators:
    """Time-independent matrices of one discretization, assembled once."""

    def __init__(self, space, lam=None):
        self.space = space
        self.lam = forms.default_penalty(space.k) if lam is None else lam
        self.M = forms.assemble_mass(space)
        self.A = forms.assemble_sipg(space, self.lam)
        self.M_blocks = mass_blocks(space)
        self.A_blocks = solver.diagonal_blocks(self.A, space.nb)


def _operators(space, M, A, lam):
    if isinstance(M, Operators):
        return M
    if M is None:
        return Operators(space, lam)
    ops = Operators.__new__(Operators)
    ops.space, ops.lam = space, forms.default_penalty(space.k) if lam is None else lam
    ops.M, ops.A = M, A
    ops.M_blocks = solver.diagonal_blocks(M, space.nb)
    ops.A_blocks = solver.diagonal_blocks(A, space.nb)
    return ops


def _l2(ops, v):
    return float(np.sqrt(np.real(np.vdot(v, ops.M @ v))))


def source_vector(space, params, f, g, t, lam):
    F = np.zeros(space.ndofs, dtype=complex)
    if f is not None:
        F += forms.assemble_load(space, f, t)
    if g is not None:
        F += params.diffusion * forms.assemble_boundary_lift(space, g, t, lam)
    return F


def _solve_linearized(ops, params, c_mass, c_op, Wb, rhs, x0, tol):
    """Solve [c_mass M + c_op ((ν+iα)A + (κ+iβ)W - γM)] x = rhs for block weights Wb."""
    cm = c_mass - c_op * params.gamma
    S = solver.linear_combination([cm, c_op * params.diffusion, c_op * params.reaction],
                                  [ops.M, ops.A, forms.block_diagonal(Wb)])
    blocks = cm * ops.M_blocks + c_op * params.diffusion * ops.A_blocks + c_op * params.reaction * Wb
    return solver.solve(S, rhs, tol=tol, x0=x0, block_size=ops.space.nb, blocks=blocks)


def initial_field(space, A, u0, grad_u0, lam=None, tol=solver.DEFAULT_TOL):
    """u_h^0 = R_h u^0."""
    return forms.ritz_project(space, A, u0, grad_u0, lam, 0.0, tol)


def first_step(space, params, scheme, u0, f=None, g=None, M=None, A=None, lam=None,
               tol=solver.DEFAULT_TOL):
    """Linearized backward Euler step with the weight |u_h^0|^2."""
    ops = _operators(space, M, A, lam)
    tau = scheme.tau
    rhs = (ops.M @ u0.values) / tau + source_vector(space, params, f, g, scheme.time(1), ops.lam)
    Wb = forms.weighted_mass_blocks(space, u0.values)
    x, rep = _solve_linearized(ops, params, 1.0 / tau, 1.0, Wb, rhs, u0.values, tol)
    log.debug("step 1: %d iterations, residual %.2e", rep.iterations, rep.residual)
    return FieldCoefficients(x, scheme.time(1))


def theta_step(state, space, params, scheme, M, A, f=None, g=None, lam=None,
               tol=solver.DEFAULT_TOL):
    """Advance ``state`` by one θ-step and return u^n (state is updated in place)."""
    if state.u_prev2 is None:
        raise ValueError("theta_step needs two previous levels")
    ops = _operators(space, M, A, lam)
    st = stencils(scheme.theta)
    theta, tau = scheme.theta, scheme.tau
    n = state.n + 1
    u1, u2 = state.u_prev1.values, state.u_prev2.values
    uhat = st.extrapolate(u1, u2)
    Wb = forms.weighted_mass_blocks(space, uhat)
    W = forms.block_diagonal(Wb)
    L_u1 = (params.diffusion * (ops.A @ u1) + params.reaction * (W @ u1)
            - params.gamma * (ops.M @ u1))
    t_mid = (n - theta) * tau
    rhs = (-(st.dt[1] * (ops.M @ u1) + st.dt[2] * (ops.M @ u2)) / (2 * tau)
           - theta * L_u1 + source_vector(space, params, f, g, t_mid, ops.lam))
    if state.u_prev3 is None:
        guess = 2 * u1 - u2
    else:
        guess = 3 * (u1 - u2) + state.u_prev3.values
    try:
        x, rep = _solve_linearized(ops, params, st.dt[0] / (2 * tau), 1.0 - theta, Wb, rhs,
                                   guess, tol)
    except solver.SolverError as exc:
        raise solver.SolverError(f"step {n}: {exc}", exc.report) from exc
    un = FieldCoefficients(x, scheme.time(n))
    state.u_prev3, state.u_prev2, state.u_prev1, state.n = state.u_prev2, state.u_prev1, un, n
    state.l2_history.append(_l2(ops, x))
    return un


@dataclass
class Problem:
    space: object
    params: forms.ModelParams
    scheme: TimeScheme
    u0: Callable
    grad_u0: Callable
    source: Optional[Callable] = None
    boundary: Optional[Callable] = None
    lam: Optional[float] = None
    tol: float = solver.DEFAULT_TOL
    initial: str = "ritz"


@dataclass
class RunResult:
    final: FieldCoefficients
    l2_history: list
    times: list
    timings: dict
    u0: FieldCoefficients


def run(problem, operators=None, callback=None):
    """Ritz initial field, backward Euler first step, then θ-steps up to T."""
    timings = {}
    t0 = time.perf_counter()
    sp_ = problem.space
    ops = operators or Operators(sp_, problem.lam)
    timings["assemble"] = time.perf_counter() - t0
    problem.scheme.check_step_condition(problem.params.gamma)
    t0 = time.perf_counter()
    if problem.initial == "ritz":
        try:
            u0 = initial_field(sp_, ops.A, problem.u0, problem.grad_u0, ops.lam, problem.tol)
        except solver.SolverError as exc:
            raise solver.SolverError(f"step 0 (Ritz projection): {exc}", exc.report) from exc
    else:
        from .space import l2_project
        u0 = l2_project(sp_, lambda p: problem.u0(p, 0.0))
    timings["initial"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    try:
        u1 = first_step(sp_, problem.params, problem.scheme, u0, problem.source, problem.boundary,
                        M=ops, lam=ops.lam, tol=problem.tol)
    except solver.SolverError as exc:
        raise solver.SolverError(f"step 1: {exc}", exc.report) from exc
    state = StepperState(u0, u1, 1, [_l2(ops, u0.values), _l2(ops, u1.values)])
    if callback:
        callback(state)
    for _ in range(2, problem.scheme.N + 1):
        theta_step(state, sp_, problem.params, problem.scheme, ops, ops.A, problem.source,
                   problem.boundary, ops.lam, problem.tol)
        if callback:
            callback(state)
    timings["steps"] = time.perf_counter() - t0
    times = [problem.scheme.time(n) for n in range(state.n + 1)]
    return RunResult(state.u_prev1, state.l2_history, times, timings, u0)


def write_history_csv(path, result):
    with open(path, "w", newline="") as fh:
        fh.write("n,t,l2_norm\n")
        for n, (t, v) in enumerate(zip(result.times, result.l2_history)):
            fh.write(f"{n},{t:.12g},{v:.12e}\n")
