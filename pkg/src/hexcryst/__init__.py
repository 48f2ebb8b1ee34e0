"""Block-copolymer particle energy: geometry, semi-discrete transport,
minimization, crystallization diagnostics, and proof-constant certificates."""

__version__ = "0.1.0"

from .geometry import (ConvexPolygon, HalfPlane, area, centroid, clip,
                       diameter, edge_count, min_second_moment,
                       regular_polygon, second_moment, unit_square)
from .tessellation import (CellPartition, CellTooLarge, DomainSpec,
                           WeightedSites, adjacency_graph,
                           commensurate_torus, power_diagram,
                           power_diagram_periodic)
from .transport import (AtomicMeasure, NonConvergence, TransportSolution,
                        brute_force_ot, solve_sdot, transport_cost)
# the energy() entry point stays under hexcryst.energy.energy; importing it
# here would shadow the submodule attribute
from .energy import (CONSTANTS, Constants, EnergyReport,
                     cell_lower_bound_sum, cn, f, partition_energy,
                     v_lambda)
from .optimize import (MinimizerConfig, MinimizerResult, hexagonal_trial,
                       lloyd_step, mass_update, minimize, scan_point_counts)
from .analysis import (DegenerateFit, StabilityReport, TriangularLattice,
                       euler_check, hexagon_closeness, lattice_fit,
                       stability_report)
from .certify import CertificateReport, fejes_toth_scaling

__all__ = [
    "ConvexPolygon", "HalfPlane", "area", "centroid", "clip", "diameter",
    "edge_count", "min_second_moment", "regular_polygon", "second_moment",
    "unit_square",
    "CellPartition", "CellTooLarge", "DomainSpec", "WeightedSites",
    "adjacency_graph", "commensurate_torus", "power_diagram",
    "power_diagram_periodic",
    "AtomicMeasure", "NonConvergence", "TransportSolution", "brute_force_ot",
    "solve_sdot", "transport_cost",
    "CONSTANTS", "Constants", "EnergyReport", "cell_lower_bound_sum", "cn",
    "f", "partition_energy", "v_lambda",
    "MinimizerConfig", "MinimizerResult", "hexagonal_trial", "lloyd_step",
    "mass_update", "minimize", "scan_point_counts",
    "DegenerateFit", "StabilityReport", "TriangularLattice", "euler_check",
    "hexagon_closeness", "lattice_fit", "stability_report",
    "CertificateReport", "fejes_toth_scaling",
    "__version__",
]
