"""
Elastic moduli and concrete property relations.
"""
import math
from typing import NamedTuple

from rustcrack.config.constants import CONCRETE_MIX
from rustcrack.utils.error_handler import SingularityError


class ElasticModuli(NamedTuple):
    lame_lambda: float
    shear_modulus: float
    bulk_modulus: float
    elongation_modulus: float


def derive_lame_and_moduli(young_modulus: float, poisson_ratio: float) -> ElasticModuli:
    """
    Lamé constants, bulk modulus and elongation (oedometric) modulus.

    λ = Eν/((1+ν)(1−2ν)), µ = E/(2(1+ν)), K = E/(3(1−2ν)), Ẽ = λ + 2µ
    """
    if young_modulus <= 0:
        raise ValueError(f'Young modulus must be positive, got {young_modulus}')
    if poisson_ratio >= 0.5:
        raise SingularityError(
            f'Poisson ratio {poisson_ratio} makes the bulk modulus singular (incompressible limit)'
        )
    if poisson_ratio < 0:
        raise ValueError(f'Poisson ratio must be non-negative, got {poisson_ratio}')
    lam = young_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio))
    mu = young_modulus / (2.0 * (1.0 + poisson_ratio))
    bulk = young_modulus / (3.0 * (1.0 - 2.0 * poisson_ratio))
    return ElasticModuli(lam, mu, bulk, lam + 2.0 * mu)


# ============================================================================
# CONCRETE PROPERTY RELATIONS (strength-driven)
# ============================================================================

def cylinder_strength(cube_strength_mpa: float) -> float:
    return CONCRETE_MIX['CYLINDER_TO_CUBE'] * cube_strength_mpa


def eurocode_young_modulus(cylinder_mpa: float) -> float:
    """Secant modulus E_cm = 22 (f_cm/10)^0.3 GPa, returned in Pa."""
    fcm = cylinder_mpa + CONCRETE_MIX['MEAN_STRENGTH_MARGIN_MPA']
    return 22.0e9 * (fcm / 10.0) ** 0.3


def eurocode_tensile_strength(cylinder_mpa: float) -> float:
    """Mean tensile strength f_ctm in Pa."""
    if cylinder_mpa <= 50.0:
        return 0.30e6 * cylinder_mpa ** (2.0 / 3.0)
    fcm = cylinder_mpa + CONCRETE_MIX['MEAN_STRENGTH_MARGIN_MPA']
    return 2.12e6 * math.log(1.0 + fcm / 10.0)


def cylinder_from_tensile_strength(tensile_strength: float) -> float:
    """Invert :func:`eurocode_tensile_strength` (Pa in, MPa out)."""
    fct = tensile_strength / 1.0e6
    low = (fct / 0.30) ** 1.5
    if low <= 50.0:
        return low
    fcm = 10.0 * (math.exp(fct / 2.12) - 1.0)
    return fcm - CONCRETE_MIX['MEAN_STRENGTH_MARGIN_MPA']


def regression_fracture_energy(cylinder_mpa: float) -> float:
    """
    Total fracture energy from compressive strength (N/m).

    G_F = 2.5 α0 (f_c/0.051)^0.46 (1 + d_a/11.27)^0.22 (w/c)^-0.30
    """
    alpha0 = CONCRETE_MIX['CRUSHED_AGGREGATE_FACTOR']
    da = CONCRETE_MIX['MAX_AGGREGATE_SIZE_MM']
    wc = CONCRETE_MIX['WATER_CEMENT_RATIO']
    return (2.5 * alpha0 * (cylinder_mpa / 0.051) ** 0.46
            * (1.0 + da / 11.27) ** 0.22 * wc ** -0.30)


def concrete_from_tensile_strength(tensile_strength: float, poisson_ratio: float = 0.2) -> dict:
    """Jointly derive E_c and G_f for a tensile strength level (SI in and out)."""
    fc = cylinder_from_tensile_strength(tensile_strength)
    return {
        'young_modulus': eurocode_young_modulus(fc),
        'poisson_ratio': poisson_ratio,
        'tensile_strength': float(tensile_strength),
        'fracture_energy': regression_fracture_energy(fc),
    }
