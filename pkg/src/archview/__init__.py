"""Layered architecture models of SCADA systems and security analyses over them."""

import logging

from .adl import load_model, parse_model, serialize_model
from .model import (
    ArchModel,
    AssetEntity,
    CommEntity,
    Composition,
    CrossLayerEdge,
    DataFlow,
    Layer,
    OrgEntity,
    ServiceEntity,
    ViewpointSpec,
    dependency_closure,
    validate_model,
)

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())


def fixture_path():
    """Path of the bundled power-grid SCADA example model."""
    from importlib.resources import files

    return files("archview") / "data" / "power_grid.salv"


__all__ = [
    "ArchModel", "AssetEntity", "CommEntity", "Composition", "CrossLayerEdge", "DataFlow", "Layer",
    "OrgEntity", "ServiceEntity", "ViewpointSpec", "dependency_closure", "validate_model",
    "load_model", "parse_model", "serialize_model", "fixture_path",
]
