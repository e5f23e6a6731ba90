"""Travel-minimizing toolpath planning for fused-deposition printing."""
from .baselines import plan_exact, plan_greedy, plan_layerwise, plan_local_search
from .clustering import (Cluster, ClusteredGraph, DependencyClusterer, cluster_dependency_graph,
                         degree_of_connectedness, intra_cluster_sequence, is_highly_dependent)
from .depgraph import DependencyGraph, ExtruderGeometry, build_dependency_graph
from .geometry import Contour, LineSegment, Model, Point3, footprint_clearance, print_length, travel_distance, xy_footprint
from .mcts import SearchConfig, flatten, search
from .model_io import emit_gcode, emit_layer_svg, emit_native, load_model, parse_gcode, parse_native
from .objective import Toolpath, evaluate_toolpath, travel_upper_bound
from .planners import (ExactPlanner, GreedyPlanner, LayerwisePlanner, LocalSearchPlanner, MCTSPlanner,
                       get_planner)

__version__ = "0.1.0"
