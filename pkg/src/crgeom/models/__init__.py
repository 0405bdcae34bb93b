from .cc_distance import HorizontalGraph, Unreachable, cc_ball_contains, cc_distance, cc_distances
from .deformation import DeformationFamily, convergence_ratios, deform, deformation_family
from .heisenberg import (
    HeisenbergPoint,
    dilate,
    group_law,
    heisenberg,
    heisenberg_form,
    heisenberg_frame,
    heisenberg_norm,
    inverse,
)
from .nilmanifold import nilmanifold
from .normal_coords import NormalCoordinates, expansion_slopes, normal_coordinates, rho, theta_pair
from .sphere import sphere, sphere_hopf
