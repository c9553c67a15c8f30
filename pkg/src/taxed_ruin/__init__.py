"""Ruin identities for a spectrally negative Lévy risk process with loss-carry-forward taxation.

The surplus is ``U_t = X_t - int_0^t gamma(S_u) dS_u`` where ``S`` is the
running maximum of the pre-tax process ``X``. The package evaluates the
two-sided exit transform, the discounted value of tax paid until ruin and
the Gerber-Shiu density of ruin through the q-scale functions of ``X``, and
checks them against path simulation.
"""
from .errors import (AccuracyError, ConfigError, DivergenceError, DomainError, TaxedRuinError,
                     UnsupportedSmoothnessError)
from .identities import (constant_gamma_oracles, excursion_creep_term, excursion_overshoot_atom,
                         excursion_overshoot_density, excursion_overshoot_mass, gerber_shiu_atom,
                         gerber_shiu_creep, gerber_shiu_creep_mass, gerber_shiu_density,
                         gerber_shiu_mass, ruin_transform, tax_npv, two_sided_exit)
from .levy import (JumpMeasureView, LevyModel, laplace_exponent, laplace_exponent_derivative,
                   net_profit_drift, net_profit_sign, phi, tilt)
from .montecarlo import (Estimate, PathBatch, PathRecord, Region, SimConfig, estimate_exit,
                         estimate_gs_mass, estimate_npv, simulate, simulate_path)
from .scale import (CLOSED_FORM, LAPLACE_INVERSION, ScaleEngine, scale_engine, scale_eval,
                    scale_tilted_eval)
from .tax import TaxRule

__version__ = "0.1.0"
