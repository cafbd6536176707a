"""Exact and numerical computation of Derrida-Retaux recursive systems."""
from .engine import (
    Dist,
    SupportOverflow,
    TailPolicy,
    convolve_power,
    dr_step,
    iterate,
    lower_window,
    sample_xn,
    total_variation,
)
from .model import (
    ModelSpec,
    Phase,
    SpecError,
    StarLaw,
    classify,
    critical_p,
    load_spec,
    mix_initial,
)
from .observables import (
    FreeEnergyBracket,
    PreconditionError,
    criticality_functional,
    free_energy_bracket,
    free_energy_brackets,
    hoeffding_tail_check,
    moments,
    sign_preservation_check,
)
from .polymode import (
    BudgetExceeded,
    PolyDist,
    RationalPoly,
    dkdp_p0,
    free_energy_partial_derivative,
    poly_initial,
    poly_iterate,
    poly_step,
)

from .mgfdelta import TruncatedLaw, delta, f_s, lemma45_checks, n2, solve_si, truncate
from .tree import LeafAssignment, eval_tree, lemma31_check, lemma33_34_check, lemma35_sum, nabla, theta

__version__ = "0.1.0"
