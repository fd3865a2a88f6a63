"""Matrix-free HODLR(k) approximation by perforated-sketch peeling."""

from ._perfpeel import (
    ConfigError,
    DimensionError,
    FormatError,
    HodlrMatrix,
    PeelConfig,
    PeelReport,
    StructureViolation,
    best_hodlr,
    deserialize,
    exact_recover,
    expected_counts,
    experiment_names,
    load_hodlr,
    params_for_beta,
    peel,
    preset_config,
    random_hodlr,
    run_bound_checks,
    run_experiment,
    save_hodlr,
    serialize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
