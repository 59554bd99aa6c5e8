"""
State containers handed between the transport, mechanics and phase-field
solvers. All arrays are nodal unless noted; every container is immutable and
a step returns a new instance.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class SpeciesState:
    """
    Dissolved iron species and precipitate.

    c_ii, c_iii : mol per m^3 of pore solution
    theta_p : precipitate volume fraction
    porosity : local initial porosity p_0(x)
    bulk_porosity : p_0 of the bulk concrete, used for S_p everywhere
    """
    c_ii: np.ndarray
    c_iii: np.ndarray
    theta_p: np.ndarray
    porosity: np.ndarray
    bulk_porosity: float

    @classmethod
    def initial(cls, porosity, bulk_porosity):
        porosity = np.asarray(porosity, dtype=float)
        zeros = np.zeros_like(porosity)
        return cls(zeros, zeros.copy(), zeros.copy(), porosity, float(bulk_porosity))

    @property
    def theta_l(self):
        return np.maximum(self.porosity - self.theta_p, 0.0)

    @property
    def saturation(self):
        """S_p = theta_p / p_0,bulk."""
        return self.theta_p / self.bulk_porosity

    def evolve(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class MechanicalState:
    """
    displacement : (n_nodes, 2) m
    strain : (n_elements, 3) total strain (xx, yy, 2xy)
    effective_stress : (n_elements, 3) undegraded stress C:(eps - eps*)
    eigenstrain : (n_elements,) mean isotropic eigenstrain
    history : (n_elements,) crack driving force history H, J/m^3
    """
    displacement: np.ndarray
    strain: np.ndarray
    effective_stress: np.ndarray
    eigenstrain: np.ndarray
    history: np.ndarray

    @classmethod
    def initial(cls, n_nodes, n_elements, history):
        return cls(
            displacement=np.zeros((n_nodes, 2)),
            strain=np.zeros((n_elements, 3)),
            effective_stress=np.zeros((n_elements, 3)),
            eigenstrain=np.zeros(n_elements),
            history=np.array(history, dtype=float),
        )

    def evolve(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class StepDiagnostics:
    newton_iterations: int = 0
    newton_residual: float = 0.0
    staggered_iterations: int = 0
    staggered_change: float = 0.0
    dt_halvings: int = 0


@dataclass(frozen=True, eq=False)
class SimulationState:
    time: float
    species: SpeciesState
    mechanics: MechanicalState
    phi: np.ndarray
    injected_iron: float = 0.0
    step: int = 0
    diagnostics: StepDiagnostics = field(default_factory=StepDiagnostics)

    def evolve(self, **changes):
        return replace(self, **changes)


@dataclass
class FirstDamage:
    time: float
    max_phi: float
    radius: float
    rebar_radius: float

    @property
    def offset(self):
        return self.radius - self.rebar_radius


@dataclass
class RunOutput:
    """What a finished (or aborted) run hands back to the CLI and tests."""
    run_id: str
    directory: Optional[str]
    time_series: list
    snapshot_times: list
    final_state: Optional[SimulationState]
    first_damage: Optional[FirstDamage] = None
    abort_reason: Optional[str] = None
    surface_crack_time: Optional[float] = None
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def completed(self):
        return self.abort_reason is None

    def width_at(self, days):
        """Crack width (m) at ``days`` by linear interpolation of the time series."""
        if not self.time_series:
            return float('nan')
        t = np.array([row['time_days'] for row in self.time_series])
        w = np.array([row['crack_width'] for row in self.time_series])
        if days > t[-1] + 1e-9:
            return float('nan')
        return float(np.interp(days, t, w))
