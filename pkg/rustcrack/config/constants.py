"""
Configuration Constants for rustcrack
Centralizes material tables, numerical defaults and solver tolerances.
All values are SI base units (m, s, kg, mol, Pa, A).
"""

# ============================================================================
# CONCRETE MATERIAL TABLES
# ============================================================================

# Mechanical properties of the impressed-current specimens by curing age
CONCRETE_TABLES = {
    'cured_28d': {
        'young_modulus': 33.0e9,
        'poisson_ratio': 0.2,
        'tensile_strength': 2.2e6,
        'fracture_energy': 95.0,
        'cube_strength': 37.5e6,
    },
    'cured_147d': {
        'young_modulus': 36.0e9,
        'poisson_ratio': 0.2,
        'tensile_strength': 3.9e6,
        'fracture_energy': 114.0,
        'cube_strength': 54.7e6,
    },
}

DEFAULT_CONCRETE_PRESET = 'cured_147d'

# Mix assumptions used when deriving E_c and G_f from compressive strength
CONCRETE_MIX = {
    'MAX_AGGREGATE_SIZE_MM': 12.0,
    'WATER_CEMENT_RATIO': 0.55,
    'CRUSHED_AGGREGATE_FACTOR': 1.44,
    'CYLINDER_TO_CUBE': 0.8,
    'MEAN_STRENGTH_MARGIN_MPA': 8.0,
}

# ============================================================================
# STEEL, RUST AND IRON
# ============================================================================

STEEL = {
    'young_modulus': 205.0e9,
    'poisson_ratio': 0.28,
}

RUST = {
    'young_modulus': 440.0e6,
    'poisson_ratio': 0.4,
    'porosity': 0.16,
    'molar_mass': 106.85e-3,
    'density': 3560.0,
}

# Fe3+ carries the molar mass and density of elemental iron
IRON = {
    'molar_mass': 55.85e-3,
    'density': 7870.0,
}

# ============================================================================
# TRANSPORT AND CHEMISTRY
# ============================================================================

TRANSPORT = {
    'bulk_porosity': 0.26,
    'sci_porosity': 0.52,
    'sci_thickness': 0.2e-3,
    'diffusivity_ii': 1.0e-11,
    'diffusivity_iii': 1.0e-11,
    'cracked_diffusivity_ii': 7.0e-10,
    'cracked_diffusivity_iii': 7.0e-10,
    'rate_ii_to_iii': 0.1,
    'rate_iii_to_p': 2.0e-4,
    'oxygen_concentration': 0.28,
    'current_density': 0.1,
    'faraday_constant': 96485.33212,
}

ELECTRONS_EXCHANGED = 2

# Below this liquid fraction, precipitation and matrix diffusion stop
CLOGGING_FLOOR = 1.0e-6

# ============================================================================
# PHASE FIELD
# ============================================================================

# Hordijk-Cornelissen softening shape constants
CORNELISSEN = {
    'P': 2.0,
    'CRITICAL_OPENING_FACTOR': 5.1361,
    'INITIAL_SLOPE_FACTOR': 1.3546,
}

LINEAR_SOFTENING = {
    'P': 2.0,
    'CRITICAL_OPENING_FACTOR': 2.0,
    'INITIAL_SLOPE_FACTOR': 0.5,
}

PHASE_FIELD = {
    'length_scale': 3.0e-3,
    'residual_stiffness': 1.0e-7,
    'stress_based_xi': 1.0,
}

# ============================================================================
# SOLVER TOLERANCES
# ============================================================================

SOLVER = {
    'LINEAR_RELATIVE_RESIDUAL': 1.0e-10,
    'NEWTON_RELATIVE_RESIDUAL': 1.0e-8,
    'NEWTON_MAX_ITERATIONS': 50,
    'NEWTON_MAX_BACKTRACKS': 8,
    'STAGGERED_TOLERANCE': 1.0e-4,
    'MAX_DT_HALVINGS': 5,
    'NEGATIVE_CONCENTRATION_TOLERANCE': 1.0e-10,
    # Fixed point between the c_III sink and the precipitate update
    'PRECIPITATION_TOLERANCE': 1.0e-12,
    'PRECIPITATION_MAX_ITERATIONS': 20,
}

# ============================================================================
# TIME CONTROL AND OUTPUT
# ============================================================================

SECONDS_PER_DAY = 86400.0

TIME_CONTROL = {
    'total_duration': 60 * SECONDS_PER_DAY,
    'step_size': 0.1 * SECONDS_PER_DAY,
    'staggered_iterations': 1,
    'output_interval': 5 * SECONDS_PER_DAY,
}

OUTPUT = {
    'RELATIVE_WIDTH_REFERENCE': 0.25e-3,
    'REPORT_DAYS': (5.0, 20.0, 40.0, 60.0),
    'DAMAGE_ONSET_THRESHOLD': 0.05,
    # phi above which a band counts as an open crack path to a surface
    'CRACK_PATH_THRESHOLD': 0.95,
    'PROBE_SAMPLES': 101,
    'PROBE_LENGTH': 10.0e-3,
}

# ============================================================================
# MESHING
# ============================================================================

MESH = {
    'h_sci': 0.1e-3,
    'h_bulk': 0.6e-3,
    'grading': 1.15,
    'refinement_radius': 30.0e-3,
    # Chord error of rebar polygons relative to h_sci
    'CHORD_ERROR_FACTOR': 0.25,
}

# Displacement-controlled tension bar with a weakened mid-section
BAR_BENCHMARK = {
    'length': 100.0e-3,
    # AT2 damages the whole bar before peak; the band only breaks at fixed
    # displacement once the stored energy at peak exceeds about G_f
    'at2_bar_length': 400.0e-3,
    'height': 10.0e-3,
    'element_size': 1.0e-3,
    'weak_zone_length': 8.0e-3,
    'strength_reduction': 0.98,
    'increments': 300,
    'max_normalized_strain': 4.0,
    'at2_length_reported': 72.4e-3,
    # Staggered passes per load increment before moving on
    'staggered_passes': 300,
}

# ============================================================================
# ENVIRONMENT
# ============================================================================

ENV_WORKERS = 'RUSTCRACK_WORKERS'
ENV_OUTPUT_ROOT = 'RUSTCRACK_OUTPUT_ROOT'
ENV_LOG_LEVEL = 'RUSTCRACK_LOG_LEVEL'
ENV_SLOW_TESTS = 'RUSTCRACK_SLOW'

LOGGING = {
    'MAX_BYTES': 10 * 1024 * 1024,
    'BACKUP_COUNT': 5,
    'CONSOLE_FORMAT': '[%(asctime)s] [%(levelname)s] %(name)s: %(message)s',
}
