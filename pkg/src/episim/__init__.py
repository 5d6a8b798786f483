"""Scenario-based epidemic simulation and analytics."""

from .ensemble import (
    NATIONAL_ID,
    PERCENTILES,
    TOTAL_GROUP,
    ParameterRange,
    ScenarioDefinition,
    SimulationResult,
    Trend,
    classify_trend,
    percentile,
    run_ensemble,
    sample_parameters,
)
from .errors import (
    EpisimError,
    FormatError,
    IntegrationError,
    ValidationError,
    ZeroPopulationError,
)
from .graph import (
    MOBILE_COMPARTMENTS,
    District,
    GraphModel,
    GraphTrajectory,
    MobilityEdge,
    load_graph,
    mobility_exchange,
    save_graph,
    simulate_graph,
)
from .model import (
    DEFAULT_DT,
    LOCATIONS,
    AgeBand,
    AgeGroups,
    Compartment,
    CompartmentTensor,
    ContactMatrices,
    Damping,
    EpiParameters,
    effective_contacts,
    force_of_infection,
    rhs,
    simulate_node,
    step_rk4,
)
from .store import (
    CaseRecord,
    Store,
    initialize_from_cases,
    load_result,
    parse_case_csv,
    save_result,
    search_districts,
    validate_format,
)

__version__ = "0.1.0"

__all__ = [
    "AgeBand",
    "AgeGroups",
    "CaseRecord",
    "Compartment",
    "CompartmentTensor",
    "ContactMatrices",
    "Damping",
    "DEFAULT_DT",
    "District",
    "EpiParameters",
    "EpisimError",
    "FormatError",
    "GraphModel",
    "GraphTrajectory",
    "IntegrationError",
    "LOCATIONS",
    "MOBILE_COMPARTMENTS",
    "MobilityEdge",
    "NATIONAL_ID",
    "ParameterRange",
    "PERCENTILES",
    "ScenarioDefinition",
    "SimulationResult",
    "Store",
    "TOTAL_GROUP",
    "Trend",
    "ValidationError",
    "ZeroPopulationError",
    "classify_trend",
    "effective_contacts",
    "force_of_infection",
    "initialize_from_cases",
    "load_graph",
    "load_result",
    "mobility_exchange",
    "parse_case_csv",
    "percentile",
    "rhs",
    "run_ensemble",
    "sample_parameters",
    "save_graph",
    "save_result",
    "search_districts",
    "simulate_graph",
    "simulate_node",
    "step_rk4",
    "validate_format",
]
