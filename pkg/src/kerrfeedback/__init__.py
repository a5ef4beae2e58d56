"""Kerr coherent-feedback circuits: SLH composition, mean-field bistability and photon statistics."""

from .fock import FockOperator, ModeSpace, annihilator, commutator, expectation, identity, number
from .slh import (CircuitParams, QubitParams, SlhTriple, build_circuit, direct_feedback,
                  kerr_from_qubit, rotating_frame_hamiltonian, series)
from .semiclassical import drive_sweep, hysteresis, steady_roots
from .quantum import build_liouvillian, circuit_g2, drive_strength_sweep, g2, k_sweep, steady_state
from .weak_drive import g2_closed_form, g2_from_occupations, occupations, solve_amplitudes

__version__ = "0.1.0"
