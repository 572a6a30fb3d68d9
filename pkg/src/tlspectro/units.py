"""Fixed physical constants and unit helpers.

All energies cross module boundaries as frequencies (energy / h, in Hz);
dipole moments are handled in e*angstrom and converted to C*m only inside
formulas. Constants are CODATA (via scipy.constants) and must not be
overridden at runtime.
"""

from scipy.constants import e as E_CHARGE  # C
from scipy.constants import epsilon_0 as EPS0  # F/m
from scipy.constants import h as PLANCK_H  # J s
from scipy.constants import hbar as HBAR  # J s

ANGSTROM = 1e-10  # m


def dipole_si(p_z_ea: float) -> float:
    """Convert a dipole moment from e*angstrom to C*m."""
    return p_z_ea * E_CHARGE * ANGSTROM


def dipole_ea(p_si: float) -> float:
    """Convert a dipole moment from C*m to e*angstrom."""
    return p_si / (E_CHARGE * ANGSTROM)
