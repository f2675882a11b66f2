"""Grid data model, network calculations, problem builders, profiles."""

from .builders import (
    InfeasibleBounds,
    build_dispatch,
    build_ed,
    build_redispatch,
    build_uc,
    uc_parameter_values,
)
from .model import (
    DisconnectedNetwork,
    GridModel,
    SchemaError,
    bundled_case,
    load_case,
    save_case,
)
from .network import (
    GSCR_EPS,
    DegenerateEigenvalue,
    NoOnlineGenerator,
    SingularPassiveBlock,
    SingularSusceptance,
    gscr,
    gscr_gradient,
    ptdf,
    reduce_admittance,
    susceptance_matrix,
)
from .profiles import Profile, generate_profiles, load_profile, save_profile

__all__ = [
    "GridModel", "load_case", "save_case", "bundled_case",
    "SchemaError", "DisconnectedNetwork",
    "ptdf", "susceptance_matrix", "reduce_admittance", "gscr",
    "gscr_gradient", "GSCR_EPS", "SingularSusceptance",
    "SingularPassiveBlock", "NoOnlineGenerator", "DegenerateEigenvalue",
    "build_uc", "build_dispatch", "build_redispatch", "build_ed",
    "uc_parameter_values", "InfeasibleBounds",
    "Profile", "generate_profiles", "save_profile", "load_profile",
]
