"""
Surface mesh persistence: OBJ geometry plus a JSON sidecar with constraint tags
"""
from pathlib import Path
from typing import Union

import numpy as np
import trimesh
from loguru import logger

from ..errors import InvalidDomain
from ..schemas import MeshSidecar
from .surface import TriSurface

PathLike = Union[str, Path]


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".tags.json")


def save_surface(surface: TriSurface, path: PathLike) -> Path:
    """Write `path` (OBJ) and its tag sidecar; returns the OBJ path"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mesh = trimesh.Trimesh(vertices=surface.vertices, faces=surface.triangles, process=False)
    mesh.export(path, file_type="obj")
    sidecar = MeshSidecar(
        k=surface.k,
        tags=surface.tags.tolist(),
        owners=surface.owners.tolist(),
        metadata=surface.metadata,
    )
    sidecar_path(path).write_text(sidecar.to_json())
    logger.debug(f"Saved surface with {surface.n_vertices} vertices to {path}")
    return path


def load_surface(path: PathLike) -> TriSurface:
    """
    Read an OBJ surface and its tag sidecar

    Raises:
        InvalidDomain: the OBJ is not a triangle mesh or does not match the sidecar
    """
    path = Path(path)
    mesh = trimesh.load_mesh(path, force="mesh", process=False)
    if not isinstance(mesh, trimesh.Trimesh):
        raise InvalidDomain(f"Failed to load a triangle mesh from '{path}'")
    sidecar = MeshSidecar.from_json(sidecar_path(path).read_text())
    if len(sidecar.tags) != len(mesh.vertices):
        raise InvalidDomain(f"Sidecar has {len(sidecar.tags)} tags for {len(mesh.vertices)} vertices",
                            {"path": str(path)})
    return TriSurface(
        vertices=np.asarray(mesh.vertices, dtype=float),
        triangles=np.asarray(mesh.faces, dtype=np.int64),
        tags=np.asarray(sidecar.tags, dtype=np.int64),
        owners=np.asarray(sidecar.owners, dtype=np.int64),
        k=sidecar.k,
        metadata=dict(sidecar.metadata),
    )
