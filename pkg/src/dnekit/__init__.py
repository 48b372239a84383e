"""Co-optimization of power dispatch and do-not-exceed limits under moment ambiguity."""

__version__ = "0.1.0"

from .builder import (DneSolution, ModelError, ObjectiveBreakdown, SolveConfig,
                      SolveFailure, solve_drco, solve_nominal_ed)
from .cases import bundled_case, bundled_text
from .conic import (BackendCapabilityError, ConicError, ConicProgram, ProgramBuilder,
                    Solution, SolveSettings, solve, verify)
from .evaluation import (EvaluationReport, PenaltyConfig, evaluate,
                         solve_odne_baseline, verify_robust)
from .expected import (Cpla, build_cpla, overestimation_risk, scaled_shortfall_sum,
                       underestimation_risk, worst_shortfall, worst_shortfall_lp)
from .frontier import FrontierTable, reference_schedule, sweep
from .grid import (CaseError, CostCurve, GridCase, build_case, compute_shift_factors,
                   load_series, parse_case, serialize_case)
from .uncertainty import (AmbiguitySet, ScenarioSet, calibrate, gauss_worst_coverage,
                          preset_ambiguity, sample_gaussian, worst_coverage_oracle)

__all__ = [
    "AmbiguitySet", "BackendCapabilityError", "CaseError", "ConicError",
    "ConicProgram", "CostCurve", "Cpla", "DneSolution", "EvaluationReport",
    "FrontierTable", "GridCase", "ModelError", "ObjectiveBreakdown",
    "PenaltyConfig", "ProgramBuilder", "ScenarioSet", "Solution", "SolveConfig",
    "SolveFailure", "SolveSettings", "build_case", "build_cpla", "bundled_case",
    "bundled_text", "calibrate", "compute_shift_factors", "evaluate",
    "gauss_worst_coverage", "load_series", "overestimation_risk", "parse_case",
    "preset_ambiguity", "reference_schedule", "sample_gaussian",
    "scaled_shortfall_sum", "serialize_case", "solve", "solve_drco",
    "solve_nominal_ed", "solve_odne_baseline", "sweep", "underestimation_risk",
    "verify", "verify_robust", "worst_coverage_oracle", "worst_shortfall",
    "worst_shortfall_lp",
]
