"""
Parameter models for a simulation run.

Every section validates its own invariants and converts unit strings to SI
on the way in. Instances are frozen so a loaded configuration can be shared
between concurrent runs.
"""
from enum import Enum
from typing import Annotated, List, Literal, Optional

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator

from rustcrack.config import constants
from rustcrack.config.units import quantity_parser

Length = Annotated[float, BeforeValidator(quantity_parser('length'))]
Duration = Annotated[float, BeforeValidator(quantity_parser('time'))]
Pressure = Annotated[float, BeforeValidator(quantity_parser('pressure'))]
CurrentDensity = Annotated[float, BeforeValidator(quantity_parser('current_density'))]
EnergyPerArea = Annotated[float, BeforeValidator(quantity_parser('energy_per_area'))]
MolarMass = Annotated[float, BeforeValidator(quantity_parser('molar_mass'))]
Density = Annotated[float, BeforeValidator(quantity_parser('density'))]
Concentration = Annotated[float, BeforeValidator(quantity_parser('concentration'))]
Diffusivity = Annotated[float, BeforeValidator(quantity_parser('diffusivity'))]
SecondOrderRate = Annotated[float, BeforeValidator(quantity_parser('second_order_rate'))]
FirstOrderRate = Annotated[float, BeforeValidator(quantity_parser('first_order_rate'))]
ChargePerMole = Annotated[float, BeforeValidator(quantity_parser('charge_per_mole'))]
Fraction = Annotated[float, BeforeValidator(quantity_parser('dimensionless'))]


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


def _with_defaults(data, defaults, presets=None):
    """Merge user data over table defaults; strings name a preset table."""
    if isinstance(data, BaseModel):
        return data
    if isinstance(data, str):
        if presets is None or data not in presets:
            raise ValueError(f'unknown preset {data!r}')
        data = {'preset': data}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        return data
    merged = dict(defaults)
    preset = data.get('preset')
    if preset is not None:
        if presets is None or preset not in presets:
            known = ', '.join(sorted(presets or {}))
            raise ValueError(f'unknown preset {preset!r} (known: {known})')
        merged.update(presets[preset])
    merged.update({k: v for k, v in data.items() if k != 'preset'})
    return merged


# ============================================================================
# MATERIALS
# ============================================================================

class ConcreteParams(_Section):
    young_modulus: Pressure = Field(gt=0)
    poisson_ratio: Fraction = Field(ge=0, lt=0.5)
    tensile_strength: Pressure = Field(gt=0)
    fracture_energy: EnergyPerArea = Field(gt=0)
    heterogeneity: Fraction = Field(default=0.0, ge=0, lt=0.5)

    @model_validator(mode='before')
    @classmethod
    def _expand_preset(cls, data):
        tables = {
            name: {k: v for k, v in table.items() if k in cls.model_fields}
            for name, table in constants.CONCRETE_TABLES.items()
        }
        return _with_defaults(data, tables[constants.DEFAULT_CONCRETE_PRESET], tables)


class SteelParams(_Section):
    young_modulus: Pressure = Field(default=constants.STEEL['young_modulus'], gt=0)
    poisson_ratio: Fraction = Field(default=constants.STEEL['poisson_ratio'], ge=0, lt=0.5)


class RustParams(_Section):
    young_modulus: Pressure = Field(default=constants.RUST['young_modulus'], gt=0)
    poisson_ratio: Fraction = Field(default=constants.RUST['poisson_ratio'], ge=0, lt=0.5)
    porosity: Fraction = Field(default=constants.RUST['porosity'], ge=0, lt=1)
    molar_mass: MolarMass = Field(default=constants.RUST['molar_mass'], gt=0)
    density: Density = Field(default=constants.RUST['density'], gt=0)


class IronParams(_Section):
    molar_mass: MolarMass = Field(default=constants.IRON['molar_mass'], gt=0)
    density: Density = Field(default=constants.IRON['density'], gt=0)


class TransportParams(_Section):
    bulk_porosity: Fraction = Field(default=constants.TRANSPORT['bulk_porosity'], gt=0, lt=1)
    sci_porosity: Fraction = Field(default=constants.TRANSPORT['sci_porosity'], gt=0, lt=1)
    sci_thickness: Length = Field(default=constants.TRANSPORT['sci_thickness'], ge=0)
    # Products theta_l * D_m at the initial state
    diffusivity_ii: Diffusivity = Field(default=constants.TRANSPORT['diffusivity_ii'], ge=0)
    diffusivity_iii: Diffusivity = Field(default=constants.TRANSPORT['diffusivity_iii'], ge=0)
    cracked_diffusivity_ii: Diffusivity = Field(default=constants.TRANSPORT['cracked_diffusivity_ii'], ge=0)
    cracked_diffusivity_iii: Diffusivity = Field(default=constants.TRANSPORT['cracked_diffusivity_iii'], ge=0)
    rate_ii_to_iii: SecondOrderRate = Field(default=constants.TRANSPORT['rate_ii_to_iii'], ge=0)
    rate_iii_to_p: FirstOrderRate = Field(default=constants.TRANSPORT['rate_iii_to_p'], ge=0)
    oxygen_concentration: Concentration = Field(default=constants.TRANSPORT['oxygen_concentration'], ge=0)
    current_density: CurrentDensity = Field(default=constants.TRANSPORT['current_density'], ge=0)
    faraday_constant: ChargePerMole = Field(default=constants.TRANSPORT['faraday_constant'], gt=0)
    electrons_exchanged: Literal[2] = constants.ELECTRONS_EXCHANGED
    diffusivity_reference: Literal['local', 'bulk'] = 'local'


# ============================================================================
# PHASE FIELD
# ============================================================================

class SofteningLaw(str, Enum):
    CORNELISSEN = 'cornelissen'
    LINEAR = 'linear'


class ModelVariant(str, Enum):
    PFCZM = 'pfczm'
    AT2 = 'at2'
    STRESS_BASED = 'stress_based'

    @classmethod
    def parse(cls, value):
        aliases = {'stress': cls.STRESS_BASED, 'stressbased': cls.STRESS_BASED}
        text = str(getattr(value, 'value', value)).strip().lower()
        return aliases.get(text) or cls(text)


class PhaseFieldParams(_Section):
    length_scale: Length = Field(default=constants.PHASE_FIELD['length_scale'], gt=0)
    softening_law: SofteningLaw = SofteningLaw.CORNELISSEN
    model_variant: ModelVariant = ModelVariant.PFCZM
    stress_based_xi: float = Field(default=constants.PHASE_FIELD['stress_based_xi'])
    at2_length: Optional[Length] = None
    residual_stiffness: float = Field(default=constants.PHASE_FIELD['residual_stiffness'], ge=0, lt=1e-2)

    @field_validator('model_variant', mode='before')
    @classmethod
    def _variant_alias(cls, value):
        return ModelVariant.parse(value)

    @model_validator(mode='after')
    def _check_xi(self):
        if self.model_variant == ModelVariant.STRESS_BASED and not self.stress_based_xi > 0:
            raise ValueError('stress_based_xi must be positive for the stress-based variant')
        if self.at2_length is not None and self.at2_length <= 0:
            raise ValueError('at2_length must be positive')
        return self


# ============================================================================
# GEOMETRY AND MESH
# ============================================================================

CONSTRAINT_LOCATIONS = (
    'bottom', 'top', 'left', 'right',
    'bottom_left', 'bottom_right', 'top_left', 'top_right',
)


class RebarSpec(_Section):
    x: Length
    y: Length
    diameter: Length = Field(gt=0)

    @property
    def radius(self):
        return 0.5 * self.diameter


class ConstraintSpec(_Section):
    where: Literal[CONSTRAINT_LOCATIONS]
    components: Literal['x', 'y', 'xy']
    value: Length = 0.0

    @property
    def is_edge(self):
        return '_' not in self.where


def _default_constraints():
    return [
        ConstraintSpec(where='bottom', components='y'),
        ConstraintSpec(where='bottom_left', components='x'),
    ]


class GeometrySpec(_Section):
    width: Length = Field(gt=0)
    height: Length = Field(gt=0)
    rebars: List[RebarSpec] = Field(default_factory=list)
    constraints: List[ConstraintSpec] = Field(default_factory=_default_constraints)
    top_surface: bool = True

    @model_validator(mode='after')
    def _check_layout(self):
        for index, bar in enumerate(self.rebars):
            r = bar.radius
            clearance = min(bar.x - r, self.width - bar.x - r, bar.y - r, self.height - bar.y - r)
            if clearance <= 0:
                raise ValueError(f'rebar {index} does not fit inside the section with positive clearance')
        if not self.constraints:
            raise ValueError('at least one displacement constraint is required')
        constrained = {'x': 0, 'y': 0}
        edge = False
        for spec in self.constraints:
            edge = edge or spec.is_edge
            for component in spec.components:
                constrained[component] += 1
        if not (constrained['x'] and constrained['y'] and (edge or sum(constrained.values()) >= 3)):
            raise ValueError('constraints do not prevent rigid-body motion')
        return self

    def cover(self, index=0):
        bar = self.rebars[index]
        return self.height - bar.y - bar.radius


class MeshSpec(_Section):
    h_sci: Length = Field(default=constants.MESH['h_sci'], gt=0)
    h_bulk: Length = Field(default=constants.MESH['h_bulk'], gt=0)
    h_far: Optional[Length] = None
    refinement_radius: Length = Field(default=constants.MESH['refinement_radius'], ge=0)
    grading: float = Field(default=constants.MESH['grading'], gt=1.0, le=2.0)
    msh_path: Optional[str] = None

    @model_validator(mode='after')
    def _check_sizes(self):
        if self.h_sci > self.h_bulk:
            raise ValueError('h_sci must not exceed h_bulk')
        if self.h_far is not None and self.h_far < self.h_bulk:
            raise ValueError('h_far must not be smaller than h_bulk')
        return self

    @property
    def coarse_size(self):
        return self.h_far if self.h_far is not None else self.h_bulk


# ============================================================================
# TIME CONTROL AND OUTPUT
# ============================================================================

class TimeControl(_Section):
    total_duration: Duration = Field(default=constants.TIME_CONTROL['total_duration'], ge=0)
    step_size: Duration = Field(default=constants.TIME_CONTROL['step_size'], gt=0)
    staggered_iterations: int = Field(default=constants.TIME_CONTROL['staggered_iterations'], ge=1)
    staggered_tolerance: float = Field(default=constants.SOLVER['STAGGERED_TOLERANCE'], gt=0)
    output_interval: Duration = Field(default=constants.TIME_CONTROL['output_interval'], gt=0)
    max_dt_halvings: int = Field(default=constants.SOLVER['MAX_DT_HALVINGS'], ge=0)

    @model_validator(mode='after')
    def _check_step(self):
        if self.total_duration > 0 and self.step_size > self.total_duration:
            raise ValueError('step_size must not exceed total_duration')
        return self


class OutputPlan(_Section):
    run_id: Optional[str] = None
    directory: Optional[str] = None
    write_vtk: bool = True
    relative_width_reference: Length = Field(default=constants.OUTPUT['RELATIVE_WIDTH_REFERENCE'], gt=0)
    report_days: List[float] = Field(default_factory=lambda: list(constants.OUTPUT['REPORT_DAYS']))
    probe_angles: List[float] = Field(default_factory=lambda: [0.0, 90.0])
    probe_length: Length = Field(default=constants.OUTPUT['PROBE_LENGTH'], gt=0)
    probe_samples: int = Field(default=constants.OUTPUT['PROBE_SAMPLES'], ge=2)
    circumferential_offset: Length = Field(default=0.1e-3, ge=0)
    damage_onset_threshold: float = Field(default=constants.OUTPUT['DAMAGE_ONSET_THRESHOLD'], gt=0, lt=1)


# ============================================================================
# FULL RUN
# ============================================================================

class SimulationConfig(_Section):
    name: str = 'simulation'
    seed: int = Field(default=0, ge=0)
    concrete: ConcreteParams = Field(default_factory=lambda: ConcreteParams.model_validate({}))
    steel: SteelParams = Field(default_factory=SteelParams)
    rust: RustParams = Field(default_factory=RustParams)
    iron: IronParams = Field(default_factory=IronParams)
    transport: TransportParams = Field(default_factory=TransportParams)
    phase_field: PhaseFieldParams = Field(default_factory=PhaseFieldParams)
    geometry: GeometrySpec
    mesh: MeshSpec = Field(default_factory=MeshSpec)
    time: TimeControl = Field(default_factory=TimeControl)
    output: OutputPlan = Field(default_factory=OutputPlan)

    @field_validator('phase_field')
    @classmethod
    def _coupled_runs_use_pfczm(cls, value):
        if value.model_variant != ModelVariant.PFCZM:
            raise ValueError(
                f'model_variant {value.model_variant.value!r} is only available in bench-bar; '
                'coupled runs use pfczm'
            )
        return value

    @model_validator(mode='after')
    def _check_sci_fits(self):
        for index, bar in enumerate(self.geometry.rebars):
            r = bar.radius + self.transport.sci_thickness
            clearance = min(bar.x - r, self.geometry.width - bar.x - r,
                            bar.y - r, self.geometry.height - bar.y - r)
            if clearance <= 0:
                raise ValueError(f'SCI layer of rebar {index} reaches the section boundary')
        return self
