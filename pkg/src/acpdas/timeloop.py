"""Adaptive time stepping driven by the PDAS iteration count."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .fem import FemMatrices
from .linalg import GmresConfig, GmresError, SingularMatrixError
from .mesh import Mesh
from .model import ModelParams, PhaseState, energy, mean_values
from .pdas import PdasError, kkt_report, pdas_solve_timestep
from .precond import PreconditionerKind, SaddleSolver

log = logging.getLogger(__name__)

FAILED_SWEEPS = 11


class StepFailure(RuntimeError):
    """Time step fell below ``tau_min``; partial results are attached."""

    def __init__(self, message, state=None, stats=None):
        super().__init__(message)
        self.state = state
        self.stats = stats or []


@dataclass
class SolveStats:
    step_index: int
    time: float
    tau: float
    pdas_iters: int
    gmres_counts: list
    active_fraction: float
    energy: float
    retries: int = 0
    kkt: dict = field(default_factory=dict)
    mass_drift: float = 0.0

    @property
    def max_gmres(self) -> int:
        return max(self.gmres_counts, default=0)

    @property
    def avg_gmres(self) -> float:
        return float(np.mean(self.gmres_counts)) if self.gmres_counts else 0.0


def adapt_tau(pdas_iters: int, tau: float, tau_min: float = 1e-10,
              tau_max: float = 1.0) -> tuple[float, bool]:
    """Next step size and whether the current step must be recomputed.

    Fewer than 5 sweeps grows the step by 10%, 5 to 10 keeps it, more than
    10 halves it and asks for a redo.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    if pdas_iters > 10:
        new = 0.5 * tau
        if new < tau_min:
            raise StepFailure(f"time step {new:.3e} below tau_min = {tau_min:.3e}")
        return new, True
    if pdas_iters < 5:
        return min(1.1 * tau, tau_max), False
    return min(tau, tau_max), False


def conserving_params(params: ModelParams, initial: PhaseState, fem: FemMatrices) -> ModelParams:
    """Copy of ``params`` whose mean-value target is the initial data's mean."""
    if not params.mass_constraint:
        return params
    q = mean_values(initial.u, fem)
    return replace(params, Q=q / q.sum())


def run_simulation(params: ModelParams, mesh: Mesh, fem: FemMatrices, initial: PhaseState,
                   T: float, precond: PreconditionerKind = PreconditionerKind(),
                   gmres: GmresConfig = GmresConfig(), max_pdas: int = 50,
                   max_steps: int | None = None, tau_min: float = 1e-10, tau_max: float = 1.0,
                   conserve_initial_mass: bool = True, callback=None, solver=None):
    """Integrate from ``initial.t`` until ``t >= T`` (or ``max_steps`` accepted steps).

    With ``conserve_initial_mass`` the mean-value constraint targets the
    initial data's discrete means rather than ``params.Q``.
    Returns ``(final_state, stats)``; ``callback(state, stats)`` runs after each
    accepted step. ``solver`` replaces the GMRES solver built from ``precond``
    and ``gmres``; it is called as ``solver(system) -> (x, iterations, residual)``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if conserve_initial_mass:
        params = conserving_params(params, initial, fem)
    mass0 = initial.u @ fem.M
    if solver is None:
        solver = SaddleSolver(precond, gmres)
    state = initial.copy()
    tau = state.tau if state.tau > 0 else params.epsilon**2
    stats: list[SolveStats] = []
    step = 0

    while state.t < T and (max_steps is None or step < max_steps):
        retries = 0
        while True:
            trial = state.copy()
            trial.tau = tau
            try:
                new, k, sweeps, sets = pdas_solve_timestep(trial, fem, params, solver,
                                                           max_iter=max_pdas)
            except (PdasError, GmresError, SingularMatrixError) as exc:
                log.info("step %d failed at tau=%.3e: %s", step, tau, exc)
                k, new = None, None
            try:
                # a failed solve counts as "more than 10 sweeps"
                tau_next, redo = adapt_tau(FAILED_SWEEPS if k is None else k, tau, tau_min,
                                           tau_max)
            except StepFailure as exc:
                raise StepFailure(str(exc), state=state, stats=stats) from None
            if not redo:
                break
            tau = tau_next
            retries += 1

        new.t = state.t + tau
        new.tau = tau
        step += 1
        kkt = kkt_report(new, fem, params)
        drift = float(np.max(np.abs(new.u @ fem.M - mass0) / np.maximum(np.abs(mass0), 1e-300)))
        s = SolveStats(
            step_index=step, time=new.t, tau=tau, pdas_iters=k,
            gmres_counts=[sw.gmres_iterations for sw in sweeps],
            active_fraction=float(sets.active.sum()) / sets.active.size,
            energy=energy(new, fem, params), retries=retries, kkt=kkt, mass_drift=drift,
        )
        stats.append(s)
        log.debug("step %d t=%.4g tau=%.3g pdas=%d gmres=%s", step, new.t, tau, k,
                  s.gmres_counts)
        state = new
        if callback is not None:
            callback(state, s)
        tau = tau_next
    state.tau = tau
    return state, stats
