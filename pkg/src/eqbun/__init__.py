"""Equivariant vector bundles over involutive simplicial complexes.

Bundles are fields of projections on the vertices of a complex with an
involution, equivariant for a "real" or "quaternionic" structure.  The
package splits off trivial summands above the rank thresholds, turns
stable isomorphisms into isomorphisms, and translates isomorphisms of
projection images into conjugators in the observable algebra.
"""
from .bundles import (
    BundleMorphism,
    EquivariantProjectionField,
    MorphismReport,
    SampledSection,
    TrivialBundleSpec,
    direct_sum,
    identity_morphism,
    make_field,
    spectral_projection_bundle,
    trivial,
    trivial_bundle,
    verify_morphism,
)
from .config import Config
from .conjugacy import (
    AlgebraProjection,
    Conjugator,
    ObservableAlgebraElement,
    algebra_check,
    conjugator_from_isomorphisms,
    lemma_converse,
    projection_to_bundles,
    stabilize_projection,
    unitarize,
)
from .extension import (
    Thresholds,
    extend_nonvanishing_over_disk,
    extend_section_fixed_locus,
    split_trivial_summand,
    thresholds,
)
from .gallery import example_gallery
from .hamiltonian import FourierHamiltonian, ingest_hamiltonian
from .stabiso import StableIsoWitness, transport_isomorphism, unstabilize, validate_witness
from .symmetry import SymmetryType
from .z2complex import (
    DimensionProfile,
    InvolutiveComplex,
    build_torus,
    cylinder,
    dimensions,
    subdivide,
    validate_complex,
)

__all__ = [
    "Config",
    "AlgebraProjection", "BundleMorphism", "Conjugator", "DimensionProfile",
    "EquivariantProjectionField", "FourierHamiltonian", "InvolutiveComplex", "MorphismReport",
    "ObservableAlgebraElement", "SampledSection", "StableIsoWitness", "SymmetryType",
    "Thresholds", "TrivialBundleSpec", "algebra_check", "build_torus",
    "conjugator_from_isomorphisms", "cylinder", "dimensions", "direct_sum", "example_gallery",
    "extend_nonvanishing_over_disk", "extend_section_fixed_locus", "identity_morphism",
    "ingest_hamiltonian", "lemma_converse", "make_field", "projection_to_bundles",
    "spectral_projection_bundle", "split_trivial_summand", "stabilize_projection", "subdivide",
    "thresholds", "transport_isomorphism", "trivial", "trivial_bundle", "unitarize",
    "unstabilize", "validate_complex", "validate_witness", "verify_morphism",
]

__version__ = "0.1.0"
