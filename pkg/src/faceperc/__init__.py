"""Face and star percolation of Vietoris-Rips complexes on Poisson samples."""
__version__ = "0.1.0"

from .geometry import EPS_GEO, Ball, min_enclosing_ball, point_simplex_distance, simplex_simplex_distance
from .points import MarkedRealization, Realization, Region, SeedLineage, sample_poisson, with_origin
from .rips import (SimplexTable, boundary_mod2, enumerate_d_simplices, face_adjacency, is_cycle,
                   star_adjacency)
from .percolation import (Bracket, ContainmentViolation, CrossingSpec, ExperimentRecord, ThetaSpec,
                          WindowError, bracket_transition, crossing, crossing_face, crossing_star,
                          crossing_triple, cycle_crossing, cycle_search, decay_fit, theta_curve,
                          theta_estimate)
from .delaunay import (DelaunayComplex, cycle_candidate, delaunay, grow_K, outer_boundary, v_adjacent,
                       vacancy_flags)
from .osss import (InfluenceSpec, explore, influence_estimate, influence_pivot_audit, osss_check,
                   pivot_estimate, poisson_ratio_bound, revealment_estimate)
from .enhancement import (SpecialPointReport, ThinnedSet, ThinSpec, detect_special, enhancement_experiment,
                          gamma_thin, piv_events, theta_face_thin, theta_star_thin)
