#!/usr/bin/env python
# coding=utf-8
# Filename: geometry.py

"""
Cross-section geometry of a two-pad capacitor and the material tables.

All lengths are in micrometers, except for London penetration depths which
are given in nanometers. The coplanar layout is mirror symmetric about x = 0
with the substrate top surface at y = 0.

Region tags
-----------
air, substrate : dielectrics
metal_left, metal_right : conductor cores, excluded from the mesh
oxide_left, oxide_right : native oxide shells covering top and sides of the cores
penetration_left, penetration_right : frames of thickness lambda_L inside the
    pads, dielectric with eps_r = 1, between the oxide and the outside

"""

import warnings
from dataclasses import dataclass, field, replace, asdict
import numpy as np
import shapely
from shapely.geometry import Polygon, MultiPolygon, box
from shapely.ops import unary_union

from transmonkit.exceptions import GeometryError, ParameterError, TransmonkitWarning

#: Area tolerance for the tiling checks, relative to the airbox area.
TILING_RTOL = 1e-9

PARTICIPATION_CLASSES = ('substrate_bulk', 'substrate_surface_layer', 'metal_oxide', 'penetration_layer', 'air')

PROVENANCE = ('Geometry dimensions, oxide thicknesses and permittivities, and London penetration depths '
              'are toolkit defaults taken from common literature values, not measured device data.')


@dataclass(frozen=True)
class MaterialSpec:
    """
    Electrostatic description of a material.

    Attributes
    ----------
    name : str
    relative_permittivity : float
        eps_r, >= 1 for dielectrics.
    role : str
        'conductor' or 'dielectric'.
    oxide_thickness : float
        Native oxide thickness in um, conductors only.
    oxide_permittivity : float
        eps_r of the native oxide, conductors only.
    london_penetration_depth : float
        lambda_L in nm, conductors only.

    """
    name: str
    relative_permittivity: float = 1.0
    role: str = 'dielectric'
    oxide_thickness: float = 0.0
    oxide_permittivity: float = 1.0
    london_penetration_depth: float = 0.0

    def __post_init__(self):
        if self.role not in ('conductor', 'dielectric'):
            raise ParameterError("Material {}: role must be 'conductor' or 'dielectric', got {!r}"
                                 .format(self.name, self.role))
        if self.role == 'dielectric' and not self.relative_permittivity >= 1:
            raise ParameterError('Material {}: relative permittivity must be >= 1, got {}'
                                 .format(self.name, self.relative_permittivity))
        if not self.oxide_thickness >= 0 or not self.london_penetration_depth >= 0:
            raise ParameterError('Material {}: layer thicknesses must be >= 0'.format(self.name))
        if self.role == 'conductor' and self.oxide_thickness > 0 and not self.oxide_permittivity >= 1:
            raise ParameterError('Material {}: oxide permittivity must be >= 1, got {}'
                                 .format(self.name, self.oxide_permittivity))

    @property
    def is_conductor(self):
        return self.role == 'conductor'

    def oxide(self):
        """ The native oxide as a dielectric material. """
        return MaterialSpec('{} oxide'.format(self.name), relative_permittivity=self.oxide_permittivity)

    def penetration_layer(self):
        """ The field-penetrated surface layer as a vacuum-like dielectric. """
        return MaterialSpec('{} penetration layer'.format(self.name), relative_permittivity=1.0)


VACUUM = MaterialSpec('vacuum', relative_permittivity=1.0)

MATERIALS = {
    'vacuum': VACUUM,
    'silicon': MaterialSpec('silicon', relative_permittivity=11.7),
    'sapphire': MaterialSpec('sapphire', relative_permittivity=10.0),
    'aluminum': MaterialSpec('aluminum', role='conductor', oxide_thickness=0.003, oxide_permittivity=9.8,
                             london_penetration_depth=16.0),
    'niobium': MaterialSpec('niobium', role='conductor', oxide_thickness=0.005, oxide_permittivity=33.0,
                            london_penetration_depth=39.0),
}

#: Material stacks, name -> (metal, substrate).
MATERIAL_STACKS = {
    'Al-on-Si': ('aluminum', 'silicon'),
    'Nb-on-Si': ('niobium', 'silicon'),
    'Al-on-sapphire': ('aluminum', 'sapphire'),
}


@dataclass(frozen=True)
class MaterialStack:
    name: str
    metal: MaterialSpec
    substrate: MaterialSpec


def resolve_material_stack(name, overrides=None):
    """
    Look up a material stack and apply overrides.

    Parameters
    ----------
    name : str
        One of MATERIAL_STACKS, e.g. 'Al-on-Si'.
    overrides : dict or None
        Optional ``{'metal': {...}, 'substrate': {...}}`` with MaterialSpec
        field values, e.g. ``{'metal': {'oxide_thickness': 0.004}}``.

    Returns
    -------
    stack : MaterialStack

    """
    if name not in MATERIAL_STACKS:
        raise ParameterError('Unknown material preset {!r}, available: {}'.format(
            name, ', '.join(sorted(MATERIAL_STACKS))))
    overrides = overrides or {}
    unknown = set(overrides) - {'metal', 'substrate'}
    if unknown:
        raise ParameterError('Material overrides only accept metal and substrate, got {}'.format(sorted(unknown)))

    metal_name, substrate_name = MATERIAL_STACKS[name]
    materials = {}
    for role, material_name in (('metal', metal_name), ('substrate', substrate_name)):
        values = dict(overrides.get(role) or {})
        invalid = set(values) - set(asdict(MATERIALS[material_name]))
        if invalid or 'role' in values:
            raise ParameterError('Invalid {} override field(s): {}'.format(role, sorted(invalid | ({'role'} & set(values)))))
        materials[role] = replace(MATERIALS[material_name], **values)
    return MaterialStack(name=name, metal=materials['metal'], substrate=materials['substrate'])


def region_class(tag):
    """ Participation class of a region tag, 'conductor' for pad cores. """
    if tag.startswith('metal'):
        return 'conductor'
    if tag.startswith('oxide'):
        return 'metal_oxide'
    if tag.startswith('penetration'):
        return 'penetration_layer'
    if tag.startswith('substrate'):
        return 'substrate_bulk'
    return 'air'


def material_map(geom, stack):
    """ Map every region tag of geom to its MaterialSpec. """
    mapping = {}
    for tag in geom.tags:
        cls = region_class(tag)
        if cls == 'conductor':
            mapping[tag] = stack.metal
        elif cls == 'metal_oxide':
            mapping[tag] = stack.metal.oxide()
        elif cls == 'penetration_layer':
            mapping[tag] = stack.metal.penetration_layer()
        elif cls == 'substrate_bulk':
            mapping[tag] = stack.substrate
        else:
            mapping[tag] = VACUUM
    return mapping


@dataclass(frozen=True)
class Region:
    tag: str
    polygon: object

    @property
    def is_conductor(self):
        return region_class(self.tag) == 'conductor'

    @property
    def components(self):
        if isinstance(self.polygon, MultiPolygon):
            return list(self.polygon.geoms)
        return [self.polygon]


@dataclass(eq=False)
class Geometry2D:
    """
    A set of regions tiling a rectangular airbox.

    Attributes
    ----------
    regions : tuple of Region
    airbox : tuple
        (xmin, ymin, xmax, ymax) in um.
    pad_gap : float
        Distance between the pads in um.
    ground, driven : str or None
        Tags of the grounded and the driven conductor.
    substrate_top : float or None
        y coordinate of the substrate surface, None without substrate.
    gap_corners : ndarray
        Pad corners facing the gap, shape (k, 2).
    description : dict
        Parameters the geometry was built from.

    """
    regions: tuple
    airbox: tuple
    pad_gap: float = None
    ground: str = None
    driven: str = None
    substrate_top: float = None
    gap_corners: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        self.regions = tuple(self.regions)
        self.airbox = tuple(float(v) for v in self.airbox)
        self.gap_corners = np.asarray(self.gap_corners, dtype=np.float64).reshape(-1, 2)
        self.validate()

    @property
    def tags(self):
        return tuple(region.tag for region in self.regions)

    @property
    def conductor_tags(self):
        return tuple(region.tag for region in self.regions if region.is_conductor)

    def region(self, tag):
        for region in self.regions:
            if region.tag == tag:
                return region
        raise KeyError(tag)

    def pad_extent(self):
        """ Lateral extent in um of everything that is neither air nor substrate. """
        pads = [r.polygon for r in self.regions if region_class(r.tag) not in ('air', 'substrate_bulk')]
        if not pads:
            return 0.0
        xmin, _, xmax, _ = unary_union(pads).bounds
        return xmax - xmin

    def corner_points(self):
        """ Vertices of all pad-related regions, the points the mesh is graded towards. """
        points = []
        for region in self.regions:
            if region_class(region.tag) in ('air', 'substrate_bulk'):
                continue
            for component in region.components:
                points.append(np.asarray(component.exterior.coords)[:-1])
                points.extend(np.asarray(ring.coords)[:-1] for ring in component.interiors)
        if not points:
            return np.zeros((0, 2))
        return np.unique(np.concatenate(points), axis=0)

    def validate(self):
        """
        Check that the regions tile the airbox.

        Raises
        ------
        GeometryError
            On duplicate tags, empty regions, overlapping pairs, regions
            leaving the airbox, gaps, or bad terminal tags.

        """
        tags = self.tags
        if len(set(tags)) != len(tags):
            raise GeometryError('Region tags must be unique, got {}'.format(tags))
        xmin, ymin, xmax, ymax = self.airbox
        if not (xmax > xmin and ymax > ymin):
            raise GeometryError('Degenerate airbox {}'.format(self.airbox))
        airbox = box(xmin, ymin, xmax, ymax)
        tol = TILING_RTOL * airbox.area

        for region in self.regions:
            if region.polygon.is_empty or not region.polygon.is_valid or region.polygon.area <= 0:
                raise GeometryError('Region {} is empty or invalid'.format(region.tag))
            if region.polygon.difference(airbox).area > tol:
                raise GeometryError('Region {} reaches outside of the airbox'.format(region.tag))

        for i, first in enumerate(self.regions):
            for second in self.regions[i + 1:]:
                overlap = first.polygon.intersection(second.polygon).area
                if overlap > tol:
                    raise GeometryError('Regions {} and {} overlap by {:.6g} um^2'.format(
                        first.tag, second.tag, overlap))

        uncovered = airbox.area - sum(region.polygon.area for region in self.regions)
        if abs(uncovered) > tol:
            raise GeometryError('Regions leave {:.6g} um^2 of the airbox uncovered'.format(uncovered))

        for name, tag in (('ground', self.ground), ('driven', self.driven)):
            if tag is not None and tag not in self.conductor_tags:
                raise GeometryError('The {} terminal {!r} is not a conductor region'.format(name, tag))
        if self.ground is not None and self.ground == self.driven:
            raise GeometryError('Ground and driven terminal must differ, both are {!r}'.format(self.ground))
        if self.pad_gap is not None and not self.pad_gap > 0:
            raise GeometryError('The pad gap must be > 0, got {}'.format(self.pad_gap))


@dataclass(frozen=True)
class PadLayout:
    """
    Parameters of the coplanar two-pad cross-section, lengths in um.

    ``oxide_thickness`` (um) and ``penetration_depth`` (nm) default to the
    values of the metal when left at None.

    """
    pad_width: float = 50.0
    pad_thickness: float = 0.1
    pad_gap: float = 10.0
    substrate_depth: float = 100.0
    substrate_width: float = 500.0
    airbox_width: float = 600.0
    airbox_above: float = 300.0
    airbox_below: float = 50.0
    oxide_thickness: float = None
    penetration_depth: float = None
    penetration_layers: bool = True


def _pad_regions(side, x0, x1, thickness, oxide, penetration):
    """
    Regions of one pad spanning x0..x1 on y = 0.

    The oxide shell always wraps the Dirichlet surface of the core: outside
    the pad without penetration layers, inside the penetration frame with
    them. The frame then lies between the oxide and the air or substrate.
    """
    pad = box(x0, 0.0, x1, thickness)
    regions = []
    cx0, bottom, cx1, top = x0 + penetration, penetration, x1 - penetration, thickness - penetration
    core = box(cx0, bottom, cx1, top)
    regions.append(Region('metal_' + side, core))
    if oxide > 0:
        shell = Polygon([(cx0 - oxide, bottom), (cx0, bottom), (cx0, top), (cx1, top), (cx1, bottom),
                         (cx1 + oxide, bottom), (cx1 + oxide, top + oxide), (cx0 - oxide, top + oxide)])
        regions.append(Region('oxide_' + side, shell))
    if penetration > 0:
        covered = box(cx0 - oxide, bottom, cx1 + oxide, top + oxide)
        regions.append(Region('penetration_' + side, Polygon(pad.exterior.coords, [covered.exterior.coords])))
    return regions


def _air_region(airbox, regions):
    air = airbox.difference(unary_union([r.polygon for r in regions]))
    return Region('air', shapely.normalize(air))


def _warn_small_airbox(geom):
    xmin, ymin, xmax, ymax = geom.airbox
    extent = geom.pad_extent()
    if extent > 0 and (xmax - xmin < 5 * extent or ymax - ymin < 2.5 * extent):
        warnings.warn('The airbox ({:.4g} x {:.4g} um) is small compared to the pad extent of {:.4g} um, '
                      'the Neumann walls will bias the capacitance'.format(xmax - xmin, ymax - ymin, extent),
                      TransmonkitWarning)


def build_geometry(layout=None, metal=None):
    """
    Build the coplanar two-pad cross-section.

    Parameters
    ----------
    layout : PadLayout or None
        Dimensions, PadLayout() if None.
    metal : MaterialSpec or None
        Supplies oxide thickness and penetration depth unless the layout
        overrides them. Aluminum if None.

    Returns
    -------
    geom : Geometry2D
        air, substrate, the two conductor cores and, if their thickness is
        nonzero, the oxide shells and penetration frames. metal_left is
        grounded, metal_right is driven.

    Raises
    ------
    GeometryError
        For non-positive dimensions, a zero gap, layers that do not fit or an
        airbox that does not strictly contain the substrate and pads.

    """
    layout = layout or PadLayout()
    metal = metal or MATERIALS['aluminum']
    if not metal.is_conductor:
        raise ParameterError('The pad material {} is not a conductor'.format(metal.name))

    for name in ('pad_width', 'pad_thickness', 'pad_gap', 'substrate_depth', 'substrate_width',
                 'airbox_width', 'airbox_above', 'airbox_below'):
        value = getattr(layout, name)
        if not (np.isfinite(value) and value > 0):
            raise GeometryError('{} must be > 0, got {}'.format(name, value))

    oxide = metal.oxide_thickness if layout.oxide_thickness is None else layout.oxide_thickness
    depth_nm = metal.london_penetration_depth if layout.penetration_depth is None else layout.penetration_depth
    penetration = depth_nm * 1e-3 if layout.penetration_layers else 0.0
    if oxide < 0 or penetration < 0:
        raise GeometryError('Layer thicknesses must be >= 0, got oxide {} um, penetration {} nm'
                            .format(oxide, depth_nm))

    w, t, g = layout.pad_width, layout.pad_thickness, layout.pad_gap
    if 2 * penetration >= min(t, w):
        raise GeometryError('Penetration layers of {} nm do not fit into a {} x {} um pad'.format(depth_nm, w, t))
    if penetration > 0 and oxide >= penetration:
        raise GeometryError('Oxide shells of {} um do not fit into {} nm penetration layers'.format(oxide, depth_nm))
    if 2 * oxide >= g:
        raise GeometryError('Oxide shells of {} um close the {} um gap'.format(oxide, g))
    footprint = 2 * w + g + 2 * oxide
    if layout.substrate_width <= footprint:
        raise GeometryError('The pads ({} um incl. oxide) do not fit on the {} um wide substrate'
                            .format(footprint, layout.substrate_width))
    if layout.airbox_width <= layout.substrate_width:
        raise GeometryError('The airbox must be wider than the substrate')
    if layout.airbox_above <= t + oxide:
        raise GeometryError('The airbox must reach above the pads')

    xa = layout.airbox_width / 2
    airbox = box(-xa, -layout.substrate_depth - layout.airbox_below, xa, layout.airbox_above)
    xs = layout.substrate_width / 2
    regions = [Region('substrate', box(-xs, -layout.substrate_depth, xs, 0.0))]
    regions += _pad_regions('left', -g / 2 - w, -g / 2, t, oxide, penetration)
    regions += _pad_regions('right', g / 2, g / 2 + w, t, oxide, penetration)
    regions.insert(0, _air_region(airbox, regions))

    description = asdict(layout)
    description.update(oxide_thickness=oxide, penetration_depth=depth_nm if penetration > 0 else 0.0,
                       metal=metal.name, builder='coplanar_pads')
    geom = Geometry2D(regions=tuple(regions), airbox=airbox.bounds, pad_gap=g, ground='metal_left',
                      driven='metal_right', substrate_top=0.0,
                      gap_corners=[(-g / 2, 0.0), (-g / 2, t), (g / 2, 0.0), (g / 2, t)],
                      description=description)
    _warn_small_airbox(geom)
    return geom


def parallel_plate_geometry(width=10.0, separation=1.0, thickness=0.5, margin=0.0, substrate_depth=0.0):
    """
    Two facing plates, the bottom one grounded (metal_left), the top one
    driven (metal_right).

    Parameters
    ----------
    width, separation, thickness : float
        Plate width, plate distance and plate thickness in um.
    margin : float
        Air around the plates in um. With margin = 0 the plate ends sit on
        the Neumann walls and the field between the plates is exactly uniform.
    substrate_depth : float
        If > 0, a substrate slab of this depth below the bottom plate.

    Returns
    -------
    geom : Geometry2D

    """
    for name, value in (('width', width), ('separation', separation), ('thickness', thickness)):
        if not value > 0:
            raise GeometryError('{} must be > 0, got {}'.format(name, value))
    if margin < 0 or substrate_depth < 0:
        raise GeometryError('margin and substrate_depth must be >= 0')

    half_w, half_d = width / 2, separation / 2
    bottom = box(-half_w, -half_d - thickness, half_w, -half_d)
    top = box(-half_w, half_d, half_w, half_d + thickness)
    y_low = -half_d - thickness - substrate_depth
    airbox = box(-half_w - margin, y_low - margin, half_w + margin, half_d + thickness + margin)

    regions = [Region('metal_left', bottom), Region('metal_right', top)]
    substrate_top = None
    if substrate_depth > 0:
        substrate_top = -half_d - thickness
        regions.append(Region('substrate', box(-half_w - margin, y_low, half_w + margin, substrate_top)))
    regions.insert(0, _air_region(airbox, regions))

    return Geometry2D(regions=tuple(regions), airbox=airbox.bounds, pad_gap=separation, ground='metal_left',
                      driven='metal_right', substrate_top=substrate_top,
                      gap_corners=[(-half_w, -half_d), (half_w, -half_d), (-half_w, half_d), (half_w, half_d)],
                      description=dict(builder='parallel_plates', width=width, separation=separation,
                                       thickness=thickness, margin=margin, substrate_depth=substrate_depth))
