"""Microgrid formation with spanning-forest radiality constraints."""
from .graph import (
    BranchRecord,
    EdgeSelection,
    EnumerationLimitError,
    GraphError,
    Network,
    NodeRecord,
    connected_components,
    count_spanning_trees,
    enumerate_spanning_forests,
    enumerate_spanning_trees,
    is_spanning_forest,
    is_spanning_tree,
    is_subgraph_of_some_tree,
    make_network,
)
from .milp import MilpModel, SolveOptions, SolveOutcome, solve
from .radiality import add_subgraph_coupling, build_radiality, merge_substations
from .scenario import FaultScenario, generate_scenario
from .mgform import ModelVariant, RestorationSolution, build_mg_formation, solve_restoration
from .data_io import load_network, load_scenario, bundled_network_path
from .harness import BatchConfig, run_batch

__version__ = "0.1.0"
