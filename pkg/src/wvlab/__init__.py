"""wvlab: a numerical laboratory for weak-value-amplification metrology.

Modules
-------
qsys         states, observables, weak values (standard / high-order / orthogonal)
meter        Gaussian, grid, and Fock meters; Wigner maps; quadrature marginals
coupling     impulsive system-meter evolution, post-selection, shift formulas
infometrics  classical/quantum Fisher information and the post-selection budget
noise        correlated noise, beam jitter, pixelation, saturating detectors
schemes      the catalog of complete WVA measurement protocols
estimate     seeded sampling, AMR/MLE estimators, Cramér-Rao experiments
cli          scenario-driven command line emitting CSV/JSON artifacts
"""

from . import coupling, estimate, infometrics, meter, noise, qsys, schemes
from .coupling import (
    CouplingConfig,
    Generator,
    JointState,
    PostSelectedMeter,
    RegimeLabel,
    aav_shifts,
    classify_regime,
    evolve_joint,
    exact_shifts,
    postselect,
    trapped_ion_shift,
)
from .infometrics import (
    InfoBudget,
    ParamDistribution,
    classical_fisher,
    info_budget,
    qfi_joint,
    qfi_mixed,
    qfi_postselected,
    qfi_pure,
    scaling_bounds,
    snr,
)
from .meter import (
    FockMeter,
    GaussianMeter,
    GridMeter,
    WignerMap,
    fock_moments,
    gaussian_density,
    optimal_quadrature_angle,
    quadrature_marginal,
    to_grid,
    wigner,
)
from .qsys import (
    DensityState,
    Observable,
    SystemState,
    bloch_state,
    high_order_weak_value,
    optimal_postselection,
    orthogonal_weak_value,
    weak_value,
)

__version__ = "0.1.0"
