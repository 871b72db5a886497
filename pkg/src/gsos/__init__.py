"""Operational-semantics workbench for positive rule formats.

Loads a rule specification, realises the free monad on generalized
labelled transition systems, and checks the categorical structure behind
congruence of bisimilarity: familial decomposition, cellularity
certificates, constructive lifting, cartesianness, and partition-refinement
bisimilarity itself.
"""

from importlib import resources

from .specdsl import GsosSpec, parse_spec

__all__ = ["GsosSpec", "parse_spec", "load_bundled_spec", "bundled_spec_path"]


def bundled_spec_path(name: str):
    """Filesystem path of a bundled .gsos spec ("ccs" or "toy")."""
    return resources.files(__name__) / "specs" / f"{name}.gsos"


def load_bundled_spec(name: str) -> GsosSpec:
    return parse_spec(bundled_spec_path(name).read_text())
