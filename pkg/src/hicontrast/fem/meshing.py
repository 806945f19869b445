"""Mesh generators with fitted interfaces.

2D meshes are produced by Triangle (constrained quality Delaunay); circles
are represented by inscribed polygons whose edges are no longer than ``h``.
Vertices that Triangle inserts on a circle are projected back onto it.
"""

from __future__ import annotations

import numpy as np
import triangle
from scipy.spatial import Delaunay

from hicontrast.fem.mesh import FacetMarker, SimplicialMesh
from hicontrast.geometry import PhaseLabel

MIN_ANGLE = 30


def interval_mesh(a, b, n) -> SimplicialMesh:
    x = np.linspace(a, b, n + 1)
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return SimplicialMesh(x[:, None], cells)


def rectangle_mesh(nx, ny, x0=0.0, x1=1.0, y0=0.0, y1=1.0) -> SimplicialMesh:
    """Structured right-triangle mesh of a rectangle (nx*ny squares, 2 triangles each)."""
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    cells = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return SimplicialMesh(pts, cells)


def circle_points(center, radius, h, min_points=12):
    n = max(min_points, int(np.ceil(2 * np.pi * radius / h)))
    t = 2 * np.pi * np.arange(n) / n
    return np.asarray(center, float) + radius * np.column_stack([np.cos(t), np.sin(t)])


def _loop_segments(start, count):
    i = np.arange(count)
    return np.column_stack([start + i, start + (i + 1) % count])


def _triangulate(vertices, segments, vertex_markers, segment_markers, h, holes=None,
                 regions=None, fixed_boundary=True):
    area = h * h * np.sqrt(3) / 4
    data = {
        "vertices": np.asarray(vertices, float),
        "segments": np.asarray(segments, np.int32),
        "vertex_markers": np.asarray(vertex_markers, np.int32)[:, None],
        "segment_markers": np.asarray(segment_markers, np.int32)[:, None],
    }
    if holes is not None and len(holes):
        data["holes"] = np.asarray(holes, float)
    opts = f"pq{MIN_ANGLE}a{area:.17f}"
    if regions is not None:
        data["regions"] = np.asarray(regions, float)
        opts += "A"
    if fixed_boundary:
        opts += "Y"
    return triangle.triangulate(data, opts + "Q")


def _project_onto_circles(pts, markers, circles):
    for marker, (center, radius) in circles.items():
        sel = markers == marker
        if np.any(sel):
            d = pts[sel] - center
            pts[sel] = center + radius * d / np.linalg.norm(d, axis=1, keepdims=True)
    return pts


def _interface_facets(cells, tags):
    """Facets shared by two simplices with different tags."""
    d = cells.shape[1] - 1
    e = np.vstack([np.delete(cells, k, axis=1) for k in range(d + 1)])
    t = np.tile(tags, d + 1)
    e = np.sort(e, axis=1)
    order = np.lexsort(e.T[::-1])
    e, t = e[order], t[order]
    same = np.all(e[1:] == e[:-1], axis=1)
    pairs = np.flatnonzero(same & (t[1:] != t[:-1]))
    return e[pairs]


_D4 = [
    np.array([[1, 0], [0, 1]]), np.array([[0, 1], [1, 0]]),
    np.array([[-1, 0], [0, 1]]), np.array([[0, -1], [1, 0]]),
    np.array([[1, 0], [0, -1]]), np.array([[0, 1], [-1, 0]]),
    np.array([[-1, 0], [0, -1]]), np.array([[0, -1], [-1, 0]]),
]


def _subdivide(a, b, h):
    n = max(1, int(np.ceil(abs(b - a) / h - 1e-9)))
    return a + (b - a) * np.arange(n + 1) / n


def _chain(points, start):
    idx = start + np.arange(len(points))
    return np.column_stack([idx[:-1], idx[1:]])


def merge_vertices(points, cells, scale=1.0, decimals=9):
    """Merge coincident vertices (coordinates equal after rounding)."""
    key = np.round(points / scale, decimals)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    return points[first], inverse[cells]


def octant_symmetric_mesh(radii, hs, tags, outer, h_outer, outer_tag, boundary_radius=None):
    """D4-symmetric mesh about the origin, built from one octant and reflected.

    Parameters
    ----------
    radii : increasing radii of concentric fitted circles
    hs : target edge length inside each circle's annulus (len(radii))
    tags : phase tag of each annulus (disk inside radii[0] first)
    outer : ``"square"`` (half-width ``boundary_radius``) or ``"circle"``
        (radius ``boundary_radius``), or ``None`` when radii[-1] is the boundary
    h_outer, outer_tag : edge length and tag beyond the last circle

    Vertices on the symmetry lines coincide exactly in all copies, so the
    reflected pieces conform.  Circle vertices inserted by Triangle are
    projected back onto their circle.
    """
    radii = list(radii)
    q = np.pi / 4
    verts, segs, vmark, smark = [], [], [], []
    nv = 0

    def add(points, marker, closed=False):
        nonlocal nv
        points = np.asarray(points, float)
        verts.append(points)
        vmark.append(np.full(len(points), marker))
        seg = _chain(points, nv)
        segs.append(seg)
        smark.append(np.full(len(seg), marker))
        nv += len(points)

    stops = [0.0] + radii
    steps = list(hs)
    if outer is not None:
        steps.append(h_outer)
    # radial lines theta = 0 and theta = pi/4
    xs = [np.array([0.0])]
    for k in range(len(radii)):
        xs.append(_subdivide(stops[k], stops[k + 1], steps[k])[1:])
    x_axis = np.concatenate(xs)
    diag = x_axis.copy()
    if outer == "square":
        b = boundary_radius
        x_axis = np.concatenate([x_axis, _subdivide(radii[-1], b, h_outer)[1:]])
        diag = np.concatenate([diag, _subdivide(radii[-1], b * np.sqrt(2), h_outer * np.sqrt(2))[1:]])
    elif outer == "circle":
        b = boundary_radius
        x_axis = np.concatenate([x_axis, _subdivide(radii[-1], b, h_outer)[1:]])
        diag = x_axis.copy()
    add(np.column_stack([x_axis, np.zeros_like(x_axis)]), 1)
    add(np.column_stack([diag, diag]) / np.sqrt(2), 1)
    arcs = list(zip(radii, steps))
    if outer == "circle":
        arcs.append((boundary_radius, h_outer))
    for k, (r, hk) in enumerate(arcs):
        n = max(2, int(np.ceil(r * q / hk)))
        t = q * np.arange(n + 1) / n
        add(r * np.column_stack([np.cos(t), np.sin(t)]), 10 + k)
    if outer == "square":
        n = max(1, int(np.ceil(b / h_outer)))
        y = b * np.arange(n + 1) / n
        add(np.column_stack([np.full_like(y, b), y]), 1)
    V = np.vstack(verts)
    V, inv = merge_vertices(V, np.arange(len(V)), decimals=12)
    S = inv[np.vstack(segs)]
    vm = np.zeros(len(V), dtype=np.int64)
    for m, idx in zip(np.concatenate(vmark), inv):
        vm[idx] = max(vm[idx], m)
    sm = np.concatenate(smark)
    keep = S[:, 0] != S[:, 1]
    S, sm = S[keep], sm[keep]
    # boundary segments (radial lines, outer boundary) must not be split
    regions = []
    mids = [0.5 * (stops[k] + stops[k + 1]) for k in range(len(radii))]
    for k, r in enumerate(mids):
        regions.append([r * np.cos(q / 2), r * np.sin(q / 2), tags[k], steps[k] ** 2 * np.sqrt(3) / 4])
    if outer is not None:
        if outer == "square":
            r = 0.5 * (radii[-1] + boundary_radius)
        else:
            r = 0.5 * (radii[-1] + boundary_radius)
        regions.append([r * np.cos(q / 2), r * np.sin(q / 2), outer_tag, h_outer**2 * np.sqrt(3) / 4])
    out = _triangulate(V, S, vm, sm, max(steps), regions=regions)
    pts = out["vertices"].copy()
    markers = out["vertex_markers"][:, 0]
    circles = {10 + k: (np.zeros(2), r) for k, (r, _) in enumerate(arcs)}
    pts = _project_onto_circles(pts, markers, circles)
    tri = out["triangles"].astype(np.int64)
    ctag = out["triangle_attributes"][:, 0].astype(np.int64)
    allp, allc = [], []
    for i, g in enumerate(_D4):
        allp.append(pts @ g.T)
        allc.append(tri + i * len(pts))
    P, C = merge_vertices(np.vstack(allp), np.vstack(allc), decimals=12)
    T = np.tile(ctag, len(_D4))
    return P, C, T


def _tagged_mesh(P, C, T, interface_marker):
    outer = SimplicialMesh(P, C, T).boundary_facets()
    inner = _interface_facets(C, T)
    facets = np.vstack([outer, inner])
    markers = np.concatenate([np.full(len(outer), int(FacetMarker.OUTER)),
                              np.full(len(inner), int(interface_marker))])
    return SimplicialMesh(P, C, T, facets, markers)


def periodic_cell_mesh(radius, h, center=(0.5, 0.5), include_inclusion=True,
                       inclusion_h=None) -> SimplicialMesh:
    """Unit-cell mesh with a fitted circular inclusion, D4-symmetric about the centre.

    Opposite sides carry identical vertex distributions so the mesh can be
    periodically identified and tiled conformingly.  Cells are tagged
    ``PhaseLabel.INCLUSION`` / ``PhaseLabel.MATRIX``; with
    ``include_inclusion=False`` only the matrix cells are kept.  The centre
    must be the cell centre (symmetric construction).
    """
    c = np.asarray(center, float)
    if not np.allclose(c, 0.5):
        raise ValueError("symmetric cell meshes require the inclusion at the cell centre")
    hi = inclusion_h or h
    # side subdivision count must be even so that the half-side is resolved
    half = max(1, int(np.ceil(0.5 / h)))
    P, C, T = octant_symmetric_mesh([radius], [hi], [int(PhaseLabel.INCLUSION)], "square",
                                    0.5 / half, int(PhaseLabel.MATRIX), boundary_radius=0.5)
    P = P + c
    # snap the cell faces exactly onto 0 and 1
    for k in range(2):
        P[np.abs(P[:, k]) < 1e-12, k] = 0.0
        P[np.abs(P[:, k] - 1.0) < 1e-12, k] = 1.0
    mesh = _tagged_mesh(P, C, T, FacetMarker.INCLUSION_INTERFACE)
    if not include_inclusion:
        mesh, _ = mesh.submesh(mesh.cell_tags == int(PhaseLabel.MATRIX))
        bnd_inc = np.all(np.abs(np.linalg.norm(mesh.points[mesh.facets] - c, axis=2) - radius) < 1e-9, axis=1)
        mesh.facet_markers[bnd_inc] = int(FacetMarker.INCLUSION_INTERFACE)
    return mesh


def disk_mesh(radius, h, center=(0.0, 0.0), inner_radius=None, inner_h=None,
              inner_tag=int(PhaseLabel.DEFECT), outer_tag=int(PhaseLabel.MATRIX)) -> SimplicialMesh:
    """D4-symmetric disk mesh, optionally with a fitted concentric inner circle.

    Without ``inner_radius`` all cells carry ``inner_tag``.  The outer circle
    is marked OUTER, the inner one DEFECT_INTERFACE.
    """
    c = np.asarray(center, float)
    if inner_radius is None:
        P, C, T = octant_symmetric_mesh([radius], [h], [inner_tag], None, h, outer_tag)
    else:
        P, C, T = octant_symmetric_mesh([inner_radius], [inner_h or h], [inner_tag], "circle", h,
                                        outer_tag, boundary_radius=radius)
    return _tagged_mesh(P + c, C, T, FacetMarker.DEFECT_INTERFACE)


def _fibonacci_sphere(count):
    i = np.arange(count) + 0.5
    phi = np.arccos(1 - 2 * i / count)
    theta = np.pi * (1 + 5**0.5) * i
    return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def ball_mesh(radius, h, center=(0.0, 0.0, 0.0)) -> SimplicialMesh:
    """Tetrahedral mesh of a ball (Delaunay of shells of quasi-uniform points).

    The ball is convex, so the Delaunay tetrahedralization of points on
    concentric spheres fills exactly the inscribed polyhedron.
    """
    c = np.asarray(center, float)
    nshell = max(1, int(np.ceil(radius / h)))
    pts = [np.zeros((1, 3))]
    for k in range(1, nshell + 1):
        r = radius * k / nshell
        count = max(4, int(np.ceil(4 * np.pi * r * r / (h * h) * 2 / np.sqrt(3))))
        pts.append(r * _fibonacci_sphere(count))
    P = np.vstack(pts)
    tri = Delaunay(P)
    cells = tri.simplices.astype(np.int64)
    vol = np.abs(np.linalg.det(P[cells[:, 1:]] - P[cells[:, :1]])) / 6
    cells = cells[vol > 1e-12 * h**3]
    mesh = SimplicialMesh(P + c, cells, np.full(len(cells), int(PhaseLabel.INCLUSION)))
    return mesh


def defect_disk_mesh(radius, truncation, h, h_far=None, outer_radius=None) -> SimplicialMesh:
    """Disk of radius ``outer_radius`` around a disk defect of radius ``radius``.

    Fitted circles at ``radius`` and ``truncation``; edge length ``h`` up to
    the truncation circle and ``h_far`` beyond it.  Restricting to the cells
    inside ``truncation`` gives the same mesh as a smaller run, so two
    truncation radii can be compared without remeshing noise.
    """
    outer_radius = outer_radius or truncation
    if not radius < truncation <= outer_radius:
        raise ValueError("need radius < truncation <= outer_radius")
    h_far = h_far or h
    if outer_radius > truncation:
        P, C, T = octant_symmetric_mesh([radius, truncation], [h, h],
                                        [int(PhaseLabel.DEFECT), int(PhaseLabel.MATRIX)], "circle",
                                        h_far, int(PhaseLabel.MATRIX), boundary_radius=outer_radius)
    else:
        P, C, T = octant_symmetric_mesh([radius], [h], [int(PhaseLabel.DEFECT)], "circle", h,
                                        int(PhaseLabel.MATRIX), boundary_radius=truncation)
    return _tagged_mesh(P, C, T, FacetMarker.DEFECT_INTERFACE)


def polygon_defect_mesh(vertices, truncation, h, scale_h_outer=1.0) -> SimplicialMesh:
    """Disk of radius ``truncation`` containing a fitted polygonal defect (no symmetry)."""
    poly = np.asarray(vertices, float)
    pts, segs = [], []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / h)))
        t = np.arange(n) / n
        pts.append(a + t[:, None] * (b - a))
    inner = np.vstack(pts)
    circ = circle_points((0.0, 0.0), truncation, h * scale_h_outer)
    V = np.vstack([inner, circ])
    S = np.vstack([_loop_segments(0, len(inner)), _loop_segments(len(inner), len(circ))])
    vm = np.concatenate([np.full(len(inner), 2), np.full(len(circ), 10)])
    sm = np.concatenate([np.full(len(inner), 2), np.full(len(circ), 10)])
    inside = poly.mean(axis=0)  # region seed; assumes a star-shaped polygon about its centroid
    ann = np.array([truncation * (1 - 1e-3), 0.0])
    regions = [[*inside, int(PhaseLabel.DEFECT), h * h * np.sqrt(3) / 4],
               [*ann, int(PhaseLabel.MATRIX), (h * scale_h_outer) ** 2 * np.sqrt(3) / 4]]
    out = _triangulate(V, S, vm, sm, h, regions=regions)
    P = _project_onto_circles(out["vertices"].copy(), out["vertex_markers"][:, 0],
                              {10: (np.zeros(2), truncation)})
    C = out["triangles"].astype(np.int64)
    T = out["triangle_attributes"][:, 0].astype(np.int64)
    return _tagged_mesh(P, C, T, FacetMarker.DEFECT_INTERFACE)


_KUHN = np.array([[0, 1, 3, 7], [0, 1, 5, 7], [0, 2, 3, 7], [0, 2, 6, 7], [0, 4, 5, 7], [0, 4, 6, 7]])


def periodic_cube_mesh(radius, n, center=(0.5, 0.5, 0.5), snap=0.35) -> SimplicialMesh:
    """Unit-cube mesh with a ball inclusion, ``n`` grid steps per side.

    Each grid cube is split into six Kuhn tetrahedra, a pattern invariant
    under lattice translations, so opposite faces match.  Grid vertices
    within ``snap * h`` of the sphere are moved radially onto it, then
    tetrahedra are tagged by centroid.  The sphere is resolved to O(h^2)
    in the normal direction without a constrained 3D mesher.
    """
    c = np.asarray(center, float)
    h = 1.0 / n
    if radius + snap * h >= float(np.min(np.minimum(c, 1 - c))):
        raise ValueError("ball too close to the cell faces for snapping")
    g = np.arange(n + 1) * h
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    idx = np.arange((n + 1) ** 3).reshape(n + 1, n + 1, n + 1)
    i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    corners = np.stack([idx[i + a, j + b, k + e] for a in (0, 1) for b in (0, 1) for e in (0, 1)],
                       axis=-1).reshape(-1, 8)
    # corner bit order is (x, y, z) -> 4x + 2y + z
    C = corners[:, _KUHN].reshape(-1, 4)
    d = P - c
    r = np.linalg.norm(d, axis=1)
    near = np.abs(r - radius) < snap * h
    P[near] = c + d[near] * (radius / r[near])[:, None]
    cen = P[C].mean(axis=1)
    inside = np.linalg.norm(cen - c, axis=1) < radius
    T = np.where(inside, int(PhaseLabel.INCLUSION), int(PhaseLabel.MATRIX))
    return _tagged_mesh(P, C, T, FacetMarker.INCLUSION_INTERFACE)


def _polygon_loop(poly, h):
    pts = []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / h)))
        pts.append(a + (np.arange(n) / n)[:, None] * (b - a))
    return np.vstack(pts)


def polygon_mesh(vertices, h, tag=int(PhaseLabel.INCLUSION)) -> SimplicialMesh:
    """Quality triangulation of a simple polygon, all cells tagged ``tag``."""
    loop = _polygon_loop(np.asarray(vertices, float), h)
    out = _triangulate(loop, _loop_segments(0, len(loop)), np.ones(len(loop)), np.ones(len(loop)), h)
    C = out["triangles"].astype(np.int64)
    return SimplicialMesh(out["vertices"], C, np.full(len(C), tag))


def periodic_polygon_cell_mesh(vertices, h, inclusion_h=None) -> SimplicialMesh:
    """Unit-cell mesh with a fitted polygonal inclusion and matching opposite sides."""
    poly = np.asarray(vertices, float)
    hi = inclusion_h or h
    n = max(2, int(np.ceil(1.0 / h)))
    s = np.arange(n) / n
    square = np.vstack([np.column_stack([s, 0 * s]), np.column_stack([1 + 0 * s, s]),
                        np.column_stack([1 - s, 1 + 0 * s]), np.column_stack([0 * s, 1 - s])])
    loop = _polygon_loop(poly, hi)
    V = np.vstack([square, loop])
    S = np.vstack([_loop_segments(0, len(square)), _loop_segments(len(square), len(loop))])
    vm = np.concatenate([np.full(len(square), 1), np.full(len(loop), 2)])
    inside = poly.mean(axis=0)  # region seed; assumes a star-shaped polygon about its centroid
    corner = np.array([1e-3, 1e-3])
    regions = [[*inside, int(PhaseLabel.INCLUSION), hi * hi * np.sqrt(3) / 4],
               [*corner, int(PhaseLabel.MATRIX), h * h * np.sqrt(3) / 4]]
    out = _triangulate(V, S, vm, vm[S[:, 0]], min(h, hi), regions=regions)
    P = out["vertices"].copy()
    for k in range(2):
        P[np.abs(P[:, k]) < 1e-12, k] = 0.0
        P[np.abs(P[:, k] - 1.0) < 1e-12, k] = 1.0
    C = out["triangles"].astype(np.int64)
    T = out["triangle_attributes"][:, 0].astype(np.int64)
    return _tagged_mesh(P, C, T, FacetMarker.INCLUSION_INTERFACE)
