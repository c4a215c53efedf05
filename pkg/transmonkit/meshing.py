#!/usr/bin/env python
# coding=utf-8
# Filename: meshing.py

"""
Constrained Delaunay meshing of a Geometry2D with Triangle, and nested
uniform refinement of the result.
"""

import os
from dataclasses import dataclass, replace
import numpy as np
import shapely
import triangle
from scipy.spatial import cKDTree
from shapely.geometry import box
from shapely.ops import unary_union

from transmonkit.exceptions import MeshingError, ParameterError
from transmonkit.io import atomic_open

NODE_INTERIOR = 0
NODE_GROUND = 1
NODE_DRIVEN = 2
NODE_OUTER = 3

#: Maximum triangle area as a multiple of h^2 for a local element size h.
AREA_FACTOR = 0.75
#: Growth rate of the element size with the distance from the pad corners.
SIZE_GROWTH = 0.5
#: Node classification tolerance, relative to the airbox diagonal.
BOUNDARY_RTOL = 1e-9
ANGLE_SLACK = 1e-6


@dataclass(eq=False)
class Mesh2D:
    """
    Triangulation of a cross-section.

    Attributes
    ----------
    nodes : ndarray(ndim=2)
        Node coordinates in um, shape (n, 2).
    triangles : ndarray(ndim=2)
        Counter-clockwise node index triples, shape (m, 3).
    triangle_region : ndarray(ndim=1)
        Index into region_tags per triangle.
    region_tags : tuple of str
    boundary_markers : ndarray(ndim=1)
        NODE_GROUND / NODE_DRIVEN on the pad boundaries, NODE_OUTER on the
        airbox walls, NODE_INTERIOR elsewhere.
    airbox : tuple
        (xmin, ymin, xmax, ymax) in um.
    substrate_top : float or None
        y of the substrate surface in um.
    gap_corners : ndarray
        Pad corners facing the gap, shape (k, 2).
    target_h, grading, min_angle : float
        The meshing parameters.

    """
    nodes: np.ndarray
    triangles: np.ndarray
    triangle_region: np.ndarray
    region_tags: tuple
    boundary_markers: np.ndarray
    airbox: tuple
    substrate_top: float = None
    gap_corners: np.ndarray = None
    target_h: float = None
    grading: float = 1.0
    min_angle: float = 20.0

    @property
    def node_count(self):
        return self.nodes.shape[0]

    @property
    def triangle_count(self):
        return self.triangles.shape[0]

    @property
    def triangle_tags(self):
        return np.asarray(self.region_tags, dtype=object)[self.triangle_region]

    def region_mask(self, tag):
        if tag not in self.region_tags:
            return np.zeros(self.triangle_count, dtype=bool)
        return self.triangle_region == self.region_tags.index(tag)

    def signed_areas(self):
        """ Signed triangle areas in um^2, positive for counter-clockwise triangles. """
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def min_angles(self):
        """ Smallest interior angle of every triangle in degrees. """
        p = self.nodes[self.triangles]
        angles = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cos = np.einsum('ij,ij->i', u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
        return np.min(angles, axis=0)

    def edges(self):
        """ Unique edges as sorted node pairs, and the number of triangles sharing each. """
        all_edges = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(all_edges, axis=0, return_counts=True)

    def quality(self):
        areas = self.signed_areas()
        return {'nodes': int(self.node_count), 'triangles': int(self.triangle_count),
                'min_angle_deg': float(self.min_angles().min()) if self.triangle_count else None,
                'min_area_um2': float(areas.min()) if self.triangle_count else None,
                'max_area_um2': float(areas.max()) if self.triangle_count else None}

    def with_swapped_terminals(self):
        """ Copy with the ground and driven pad exchanged. """
        markers = self.boundary_markers.copy()
        markers[self.boundary_markers == NODE_GROUND] = NODE_DRIVEN
        markers[self.boundary_markers == NODE_DRIVEN] = NODE_GROUND
        return replace(self, boundary_markers=markers)

    def write_txt(self, path):
        """
        Write the mesh as plain text.

        The first line holds the node and element counts, followed by one
        ``id x y`` line per node and one ``id n1 n2 n3 region`` line per
        element. Ids are 0-based.

        """
        tags = self.triangle_tags
        with atomic_open(path) as fobj:
            fobj.write('{} {}\n'.format(self.node_count, self.triangle_count))
            for i, (x, y) in enumerate(self.nodes):
                fobj.write('{} {!r} {!r}\n'.format(i, float(x), float(y)))
            for i, (a, b, c) in enumerate(self.triangles):
                fobj.write('{} {} {} {} {}\n'.format(i, a, b, c, tags[i]))


def _planar_graph(geom):
    """ Vertices and segments of all region boundaries, noded at their intersections. """
    lines = [region.polygon.boundary for region in geom.regions]
    lines.append(box(*geom.airbox).boundary)
    noded = unary_union(lines)
    pieces = []
    for line in getattr(noded, 'geoms', [noded]):
        coords = np.asarray(line.coords)
        pieces.append(np.stack([coords[:-1], coords[1:]], axis=1))
    ends = np.round(np.concatenate(pieces).reshape(-1, 2), 9)
    vertices, inverse = np.unique(ends, axis=0, return_inverse=True)
    segments = np.sort(np.asarray(inverse).reshape(-1, 2), axis=1)
    segments = np.unique(segments[segments[:, 0] != segments[:, 1]], axis=0)
    return vertices, segments


def _seeds(geom):
    """ Region attribute points for the dielectrics and hole points for the conductors. """
    regions, holes = [], []
    for index, region in enumerate(geom.regions):
        for component in region.components:
            point = component.representative_point()
            if region.is_conductor:
                holes.append([point.x, point.y])
            else:
                regions.append([point.x, point.y, index, 0.0])
    return np.array(regions), np.array(holes)


def _areas(vertices, triangles):
    p = vertices[triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _classify_nodes(nodes, geom):
    xmin, ymin, xmax, ymax = geom.airbox
    tol = BOUNDARY_RTOL * np.hypot(xmax - xmin, ymax - ymin)
    markers = np.full(nodes.shape[0], NODE_INTERIOR, dtype=np.int8)
    on_wall = np.min(np.abs([nodes[:, 0] - xmin, nodes[:, 0] - xmax, nodes[:, 1] - ymin, nodes[:, 1] - ymax]),
                     axis=0) <= tol
    markers[on_wall] = NODE_OUTER
    points = shapely.points(nodes)
    for tag, code in ((geom.ground, NODE_GROUND), (geom.driven, NODE_DRIVEN)):
        if tag is not None:
            on_pad = shapely.distance(points, geom.region(tag).polygon.boundary) <= tol
            markers[on_pad] = code
    return markers


def triangulate(geom, target_h, grading=1.0, min_angle=20.0, corner_h=None, max_retries=12):
    """
    Quality triangulation of a geometry with a corner-graded sizing field.

    The element size is h(d) = min(target_h, h0 + SIZE_GROWTH * d) with d
    the distance to the nearest pad corner and h0 = target_h / grading, or
    corner_h if that is smaller. Triangles are refined until their area is
    below AREA_FACTOR * h^2 at their centroid.

    Parameters
    ----------
    geom : Geometry2D
    target_h : float
        Element size away from the pads in um.
    grading : float
        Refinement factor at the pad corners, >= 1.
    min_angle : float
        Minimum interior angle in degrees.
    corner_h : float or None
        Absolute upper bound of the element size at the pad corners in um.
    max_retries : int
        Number of refinement rounds before giving up.

    Returns
    -------
    mesh : Mesh2D

    Raises
    ------
    MeshingError
        If the size and quality targets are not met after max_retries rounds.

    """
    if not (np.isfinite(target_h) and target_h > 0):
        raise ParameterError('target_h must be > 0, got {}'.format(target_h))
    if not grading >= 1:
        raise ParameterError('grading must be >= 1, got {}'.format(grading))
    if corner_h is not None and not corner_h > 0:
        raise ParameterError('corner_h must be > 0, got {}'.format(corner_h))
    if not 0 < min_angle <= 34:
        raise ParameterError('min_angle must be in (0, 34] degrees, got {}'.format(min_angle))

    vertices, segments = _planar_graph(geom)
    regions, holes = _seeds(geom)
    mesh_input = {'vertices': vertices, 'segments': segments}
    if len(regions):
        mesh_input['regions'] = regions
    if len(holes):
        mesh_input['holes'] = holes
    raw = triangle.triangulate(mesh_input, 'pq{:.6f}a{:.12f}A'.format(min_angle, AREA_FACTOR * target_h ** 2))

    h0 = target_h / grading
    if corner_h is not None:
        h0 = min(h0, corner_h)
    corners = geom.corner_points()
    tree = cKDTree(corners) if len(corners) and h0 < target_h else None

    for _ in range(max_retries + 1):
        tris = raw['triangles']
        areas = _areas(raw['vertices'], tris)
        limit = np.full(areas.shape, AREA_FACTOR * target_h ** 2)
        if tree is not None:
            distance, _ = tree.query(raw['vertices'][tris].mean(axis=1))
            limit = AREA_FACTOR * np.minimum(target_h, h0 + SIZE_GROWTH * distance) ** 2
        too_big = areas > limit * (1 + 1e-9)
        candidate = _build_mesh(raw, geom, target_h, grading, min_angle)
        if not too_big.any() and candidate.min_angles().min() >= min_angle - ANGLE_SLACK:
            return candidate
        raw = triangle.triangulate(
            {'vertices': raw['vertices'], 'segments': raw['segments'], 'triangles': tris,
             'triangle_attributes': raw['triangle_attributes'].reshape(-1, 1),
             'triangle_max_area': np.where(too_big, limit, -1.0).reshape(-1, 1)},
            'rpq{:.6f}a'.format(min_angle))

    raise MeshingError('Could not reach the size and {} degree quality targets in {} rounds'
                       .format(min_angle, max_retries), candidate.quality())


def _build_mesh(raw, geom, target_h, grading, min_angle):
    triangles = raw['triangles']
    used = np.unique(triangles)
    remap = np.full(raw['vertices'].shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    nodes = raw['vertices'][used]
    triangles = remap[triangles]

    p = nodes[triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    clockwise = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    triangles[clockwise] = triangles[clockwise][:, [0, 2, 1]]

    return Mesh2D(nodes=nodes, triangles=triangles,
                  triangle_region=np.rint(raw['triangle_attributes'].ravel()).astype(np.int64),
                  region_tags=geom.tags, boundary_markers=_classify_nodes(nodes, geom), airbox=geom.airbox,
                  substrate_top=geom.substrate_top, gap_corners=geom.gap_corners, target_h=float(target_h),
                  grading=float(grading), min_angle=float(min_angle))


def refine_uniform(mesh):
    """
    Split every triangle into four at its edge midpoints.

    The refined mesh is nested in the input, so the P1 space grows and the
    discrete field energy can only decrease. Angles are preserved.

    """
    n_nodes = mesh.node_count
    edge_pairs = np.sort(mesh.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(edge_pairs, axis=0, return_inverse=True, return_counts=True)
    mid = n_nodes + np.asarray(inverse).reshape(-1, 3)

    nodes = np.vstack([mesh.nodes, 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])])
    a, b, c = mesh.triangles.T
    ab, bc, ca = mid.T
    triangles = np.vstack([np.stack([a, ab, ca], axis=1), np.stack([ab, b, bc], axis=1),
                           np.stack([ca, bc, c], axis=1), np.stack([ab, bc, ca], axis=1)])

    xmin, ymin, xmax, ymax = mesh.airbox
    tol = BOUNDARY_RTOL * np.hypot(xmax - xmin, ymax - ymin)
    markers = np.full(nodes.shape[0], NODE_INTERIOR, dtype=np.int8)
    on_wall = np.min(np.abs([nodes[:, 0] - xmin, nodes[:, 0] - xmax, nodes[:, 1] - ymin, nodes[:, 1] - ymax]),
                     axis=0) <= tol
    markers[on_wall] = NODE_OUTER
    markers[:n_nodes][mesh.boundary_markers != NODE_OUTER] = mesh.boundary_markers[mesh.boundary_markers != NODE_OUTER]
    first, second = mesh.boundary_markers[edges[:, 0]], mesh.boundary_markers[edges[:, 1]]
    # only edges on the domain boundary lie on a pad, chords through the air do not
    on_pad = (counts == 1) & (first == second) & ((first == NODE_GROUND) | (first == NODE_DRIVEN))
    markers[n_nodes:][on_pad] = first[on_pad]

    return replace(mesh, nodes=nodes, triangles=triangles, triangle_region=np.tile(mesh.triangle_region, 4),
                   boundary_markers=markers, target_h=mesh.target_h / 2 if mesh.target_h else None)


def read_txt(path):
    """ Nodes, triangles and region tag per triangle of a mesh text file. """
    with open(os.fspath(path)) as fobj:
        n_nodes, n_triangles = (int(v) for v in fobj.readline().split())
        nodes = np.array([[float(v) for v in fobj.readline().split()[1:3]] for _ in range(n_nodes)])
        elements = [fobj.readline().split() for _ in range(n_triangles)]
    triangles = np.array([[int(v) for v in row[1:4]] for row in elements], dtype=np.int64).reshape(-1, 3)
    return nodes, triangles, [row[4] for row in elements]
