"""Exact computation over finite projective geometries PG(n-1, q) and their
linear matroids: colouring numbers, q-binomials, random restrictions,
dense-flat censuses and (b, c)-decompositions."""

from .colouring import Colouring, colouring_number, verify_colouring
from .decomp import (
    BudgetExhausted,
    counting_bound_report,
    find_violating_partial_transversal,
    naive_transversal_oracle,
    search_decomposition,
    threshold_n0,
    verify_decomposition,
)
from .gf import FieldSpec, arith, field_new, field_of_order
from .matroid import SubMatroid, edmonds_bruteforce, edmonds_exhaustive, is_independent, rank, restrict
from .projgeom import (
    Flat,
    GeometryCtx,
    closure,
    enumerate_flats,
    enumerate_points,
    flat_points,
    geometry,
    qbinom,
    rank_of,
)
from .randmodel import TrialConfig, claim1_check, dense_flat_census, sample_pgp, trial_rng

__version__ = "0.1.0"
