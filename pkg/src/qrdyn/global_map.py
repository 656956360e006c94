"""Assembly of the global piecewise map g and its shifted variant f.

g is the identity below {x3 = 0}, equals the exponential-type expanding map
F above {x3 = L}, and interpolates in the slab through an atlas of five
radial-extension charts over one period cell [0,2]^2 (a cuboid onto a nine
face polyhedron below level 1, and four cuboids onto star-shaped solids
between levels 1 and L).  Reflections in {x1 = 2}, {x2 = 2} and period-4
translations extend the atlas to the whole slab.  f is g followed by a
downward translation large enough that the whole slab maps below zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import zorich
from .geometry import (CertificationFailure, GeometryError, StarShape,
                       attach_certificate, certify_star_centre, locate)
from .star_extend import (AffineTrianglePiece, DiagonalSelect, FormulaPiece,
                          IdentityPiece, QuadrantSelect, Radial2DPiece,
                          RadialMap, TrivialSelect, ValidationReport)


# --- fixed interpolation data: point names, coordinates and images ---------

# corners and edge midpoints of the period square [0,2]^2
_BASE_XY = {
    "P": (0.0, 0.0), "Q": (0.0, 2.0), "R": (2.0, 2.0), "S": (2.0, 0.0),
    "T": (0.0, 1.0), "U": (1.0, 2.0), "V": (2.0, 1.0), "W": (1.0, 0.0),
    "X": (1.0, 1.0),
}

# prescribed images of the level-0 and level-1 points
_IMAGES = {
    "P0": (0.0, 0.0, 0.0), "Q0": (0.0, 2.0, 0.0),
    "R0": (2.0, 2.0, 0.0), "S0": (2.0, 0.0, 0.0),
    "P1": (0.0, 0.0, 4.0), "Q1": (0.0, 2.0, 3.5),
    "R1": (2.0, 2.0, 0.5), "S1": (2.0, 0.0, -0.4),
    "T1": (0.0, 4.0, 4.0), "U1": (4.5, 2.0, 2.0),
    "V1": (2.0, 4.0, -0.4), "W1": (6.0, 0.0, 2.0),
    "X1": (6.0, 4.0, 2.0),
}

# the four image quadrilaterals of the level-1 squares are planar; each lies
# in the stated plane  coeff . x = rhs
_TOP_QUAD_PLANES = [
    (("P1", "W1", "X1", "T1"), (1.0, 0.0, 3.0), 12.0),
    (("T1", "X1", "U1", "Q1"), (4.0, -3.0, 12.0), 36.0),
    (("W1", "S1", "V1", "X1"), (3.0, 0.0, -5.0), 8.0),
    (("X1", "V1", "R1", "U1"), (-12.0, 9.0, 20.0), 4.0),
]


class ConstructionError(RuntimeError):
    """The interpolation data failed a build-time consistency check."""


@dataclass
class VertexTable:
    """Coordinates and images for every named interpolation vertex."""

    L: float
    coords: Dict[str, np.ndarray]
    images: Dict[str, np.ndarray]

    def coord(self, name):
        return self.coords[name]

    def image(self, name):
        return self.images[name]

    def loop_coords(self, names):
        return [self.coords[n] for n in names]

    def loop_images(self, names):
        return [self.images[n] for n in names]


def build_vertex_table(L: float) -> VertexTable:
    """Populate the vertex table and verify its internal consistency:
    the image quadrilaterals of the level-1 squares must be planar in their
    stated planes, and level-L images come from the closed form of F."""
    coords = {}
    images = {}
    for letter, (x1, x2) in _BASE_XY.items():
        coords[letter + "1"] = np.array([x1, x2, 1.0])
        coords[letter + "L"] = np.array([x1, x2, L])
        images[letter + "L"] = np.asarray(zorich.F_scalar(x1, x2, L))
    for letter in ("P", "Q", "R", "S"):
        x1, x2 = _BASE_XY[letter]
        coords[letter + "0"] = np.array([x1, x2, 0.0])
    for name, img in _IMAGES.items():
        images[name] = np.array(img)

    for names, coeff, rhs in _TOP_QUAD_PLANES:
        c = np.asarray(coeff)
        for n in names:
            dev = abs(float(c @ images[n]) - rhs)
            if dev > 1e-12 * max(1.0, abs(rhs)):
                raise ConstructionError(
                    f"image of {n} misses plane {coeff}.x={rhs} by {dev:.3e}")
    return VertexTable(L=L, coords=coords, images=images)


@dataclass
class CellChart:
    """One atlas cell: an axis-aligned cuboid mapped by a radial extension."""

    cell_id: str
    lo: np.ndarray
    hi: np.ndarray
    map: RadialMap

    def contains(self, x, y, z, tol=0.0):
        return (self.lo[0] - tol <= x <= self.hi[0] + tol and
                self.lo[1] - tol <= y <= self.hi[1] + tol and
                self.lo[2] - tol <= z <= self.hi[2] + tol)


def _radial_piece(vt, names, resolution):
    return Radial2DPiece(vt.loop_coords(names), vt.loop_images(names),
                         resolution=resolution)


def _formula_top_piece(vt, square_names, tri_a, tri_b):
    """Level-L end face: the closed form of F, with its two affine triangle
    restrictions recorded for inversion."""
    tri_pieces = [
        AffineTrianglePiece(vt.loop_coords(t), vt.loop_images(t))
        for t in (tri_a, tri_b)
    ]
    loop = vt.loop_coords(square_names)
    return FormulaPiece(_FEval(), tri_pieces, loop)


class _FEval:
    """Picklable wrapper for the closed-form facet map."""

    def __call__(self, p):
        return zorich.F_scalar(p[0], p[1], p[2])


def build_aprime_chart(vt: VertexTable, resolution=48) -> CellChart:
    """The chart of [0,2]^2 x [0,1] onto the nine-face image polyhedron."""
    bottom = IdentityPiece(vt.loop_coords(["P0", "Q0", "R0", "S0"]))
    side_x0 = _radial_piece(vt, ["P0", "P1", "T1", "Q1", "Q0"], resolution)
    side_x2 = _radial_piece(vt, ["S0", "S1", "V1", "R1", "R0"], resolution)
    side_y0 = _radial_piece(vt, ["P0", "P1", "W1", "S1", "S0"], resolution)
    side_y2 = _radial_piece(vt, ["Q0", "Q1", "U1", "R1", "R0"], resolution)
    top = {
        "P": _radial_piece(vt, ["P1", "W1", "X1", "T1"], resolution),
        "W": _radial_piece(vt, ["W1", "S1", "V1", "X1"], resolution),
        "T": _radial_piece(vt, ["T1", "X1", "U1", "Q1"], resolution),
        "X": _radial_piece(vt, ["X1", "V1", "R1", "U1"], resolution),
    }

    domain = StarShape.cuboid([0, 0, 0], [2, 2, 1], centre=(1, 1, 0.5))
    attach_certificate(domain, resolution)

    names = ["P0", "Q0", "R0", "S0", "P1", "Q1", "R1", "S1",
             "T1", "U1", "V1", "W1", "X1"]
    pool = {n: i for i, n in enumerate(names)}
    verts = np.array([vt.image(n) for n in names])
    facets = [
        ["P0", "Q0", "R0", "S0"],
        ["P0", "P1", "T1", "Q1", "Q0"],
        ["R0", "R1", "V1", "S1", "S0"],
        ["S0", "S1", "W1", "P1", "P0"],
        ["Q0", "Q1", "U1", "R1", "R0"],
        ["P1", "W1", "X1", "T1"],
        ["T1", "X1", "U1", "Q1"],
        ["W1", "S1", "V1", "X1"],
        ["X1", "V1", "R1", "U1"],
    ]
    codomain = StarShape.polyhedron(
        verts, [[pool[n] for n in f] for f in facets], centre=(5.0, 1.0, 2.0))
    attach_certificate(codomain, resolution)

    pieces_by_facet = {
        0: TrivialSelect(side_x0),
        1: TrivialSelect(side_x2),
        2: TrivialSelect(side_y0),
        3: TrivialSelect(side_y2),
        4: TrivialSelect(bottom),
        5: QuadrantSelect([top["P"], top["W"], top["T"], top["X"]]),
    }
    by_codomain = {0: bottom, 1: side_x0, 2: side_x2, 3: side_y0,
                   4: side_y2, 5: top["P"], 6: top["T"], 7: top["W"],
                   8: top["X"]}
    rmap = RadialMap(domain, codomain, pieces_by_facet, by_codomain)
    chart = CellChart("A'", np.array([0.0, 0.0, 0.0]),
                      np.array([2.0, 2.0, 1.0]), rmap)
    chart.top_pieces = top
    return chart


# level-1 square, level-L square, level-L triangle split, exterior faces and
# interior faces for the four upper cells; interior faces are shared
_CELL_DEFS = {
    "A''1": {
        "lo": (0.0, 0.0), "hi": (1.0, 1.0),
        "bottom_sq": "P",
        "top": (["PL", "WL", "XL", "TL"], ("PL", "WL", "XL"), ("PL", "XL", "TL")),
        "ext": {0: ["P1", "T1", "TL", "PL"], 2: ["P1", "W1", "WL", "PL"]},
        "int": {1: "x1_lo", 3: "y1_lo"},
        "apex": "PL",
    },
    "A''2": {
        "lo": (1.0, 0.0), "hi": (2.0, 1.0),
        "bottom_sq": "W",
        "top": (["WL", "SL", "VL", "XL"], ("WL", "SL", "XL"), ("SL", "VL", "XL")),
        "ext": {1: ["S1", "V1", "VL", "SL"], 2: ["W1", "S1", "SL", "WL"]},
        "int": {0: "x1_lo", 3: "y1_hi"},
        "apex": "SL",
    },
    "A''3": {
        "lo": (0.0, 1.0), "hi": (1.0, 2.0),
        "bottom_sq": "T",
        "top": (["TL", "XL", "UL", "QL"], ("TL", "XL", "QL"), ("XL", "UL", "QL")),
        "ext": {0: ["T1", "Q1", "QL", "TL"], 3: ["Q1", "U1", "UL", "QL"]},
        "int": {1: "x1_hi", 2: "y1_lo"},
        "apex": "QL",
    },
    "A''4": {
        "lo": (1.0, 1.0), "hi": (2.0, 2.0),
        "bottom_sq": "X",
        "top": (["XL", "VL", "RL", "UL"], ("XL", "VL", "RL"), ("XL", "RL", "UL")),
        "ext": {1: ["V1", "R1", "RL", "VL"], 3: ["U1", "R1", "RL", "UL"]},
        "int": {0: "x1_hi", 2: "y1_hi"},
        "apex": "RL",
    },
}

# shared interior faces: quad loop, triangle split (both triangles), and the
# normal of the face plane used for the diagonal side test
_INT_FACE_DEFS = {
    "x1_lo": (["W1", "X1", "XL", "WL"], ("W1", "X1", "WL"), ("X1", "XL", "WL"),
              ("X1", "WL"), (1.0, 0.0, 0.0)),
    "y1_lo": (["T1", "X1", "XL", "TL"], ("T1", "X1", "TL"), ("TL", "X1", "XL"),
              ("X1", "TL"), (0.0, 1.0, 0.0)),
    "x1_hi": (["X1", "U1", "UL", "XL"], ("X1", "U1", "UL"), ("X1", "UL", "XL"),
              ("X1", "UL"), (1.0, 0.0, 0.0)),
    "y1_hi": (["X1", "V1", "VL", "XL"], ("X1", "V1", "VL"), ("X1", "VL", "XL"),
              ("X1", "VL"), (0.0, 1.0, 0.0)),
}


def _build_interior_faces(vt, resolution):
    faces = {}
    for key, (quad, tri_a, tri_b, diag, normal) in _INT_FACE_DEFS.items():
        pa = _radial_piece(vt, list(tri_a), resolution)
        pb = _radial_piece(vt, list(tri_b), resolution)
        sel = DiagonalSelect(vt.coord(diag[0]), vt.coord(diag[1]), normal)
        # decide which side each triangle occupies using its off-diagonal vertex
        others = [n for n in tri_a if n not in diag]
        if sel.side(tuple(map(float, vt.coord(others[0])))) == 0:
            sel.pieces = [pa, pb]
            tri_order = (tri_a, tri_b)
        else:
            sel.pieces = [pb, pa]
            tri_order = (tri_b, tri_a)
        faces[key] = (sel, tri_order)
    return faces


def build_asecond_charts(vt: VertexTable, L: float, aprime: CellChart,
                         resolution=48, max_centre_tries=20):
    """The four charts of the upper slab cells onto their star-shaped
    image solids."""
    int_faces = _build_interior_faces(vt, resolution)
    charts = []
    for cell_id, spec in _CELL_DEFS.items():
        lo = np.array([spec["lo"][0], spec["lo"][1], 1.0])
        hi = np.array([spec["hi"][0], spec["hi"][1], L])
        domain = StarShape.cuboid(lo, hi)
        attach_certificate(domain, resolution)

        bottom_piece = aprime.top_pieces[spec["bottom_sq"]]
        sq_names, tri_a, tri_b = spec["top"]
        top_piece = _formula_top_piece(vt, sq_names, tri_a, tri_b)

        pieces_by_facet = {4: TrivialSelect(bottom_piece),
                           5: TrivialSelect(top_piece)}
        ext_pieces = {}
        for facet, names in spec["ext"].items():
            ext_pieces[facet] = _radial_piece(vt, names, resolution)
            pieces_by_facet[facet] = TrivialSelect(ext_pieces[facet])
        int_sels = {}
        for facet, key in spec["int"].items():
            sel, tri_order = int_faces[key]
            pieces_by_facet[facet] = sel
            int_sels[facet] = (sel, tri_order)

        # codomain solid: bottom quad, two top triangles, two exterior quads,
        # four interior triangles
        bottom_names = {"P": ["P1", "W1", "X1", "T1"],
                        "W": ["W1", "S1", "V1", "X1"],
                        "T": ["T1", "X1", "U1", "Q1"],
                        "X": ["X1", "V1", "R1", "U1"]}[spec["bottom_sq"]]
        facet_loops = [list(bottom_names), list(tri_a), list(tri_b)]
        facet_pieces = [bottom_piece, top_piece, top_piece]
        for facet in sorted(spec["ext"]):
            facet_loops.append(spec["ext"][facet])
            facet_pieces.append(ext_pieces[facet])
        for facet in sorted(spec["int"]):
            sel, tri_order = int_sels[facet]
            for tri_names, piece in zip(tri_order, sel.pieces):
                facet_loops.append(list(tri_names))
                facet_pieces.append(piece)

        pool_names = sorted({n for loop in facet_loops for n in loop})
        pool = {n: i for i, n in enumerate(pool_names)}
        verts = np.array([vt.image(n) for n in pool_names])
        facet_idx = [[pool[n] for n in loop] for loop in facet_loops]

        apex = vt.image(spec["apex"])
        centroid = verts.mean(axis=0)
        codomain = None
        last_err = None
        for k in range(max_centre_tries):
            lam = 0.10 + 0.045 * k
            cand = apex + lam * (centroid - apex)
            try:
                shape = StarShape.polyhedron(verts, facet_idx, centre=cand)
                attach_certificate(shape, resolution)
                codomain = shape
                break
            except (GeometryError, CertificationFailure) as err:
                last_err = err
        if codomain is None:
            raise ConstructionError(
                f"no certifiable star centre for image of {cell_id}: {last_err}")

        by_codomain = {i: p for i, p in enumerate(facet_pieces)}
        rmap = RadialMap(domain, codomain, pieces_by_facet, by_codomain)
        charts.append(CellChart(cell_id, lo, hi, rmap))
    return charts


# ---------------------------------------------------------------------------
# the assembled global map

class GlobalMap:
    """g (mode "g") or f = g - (0, 0, L') (mode "f") on all of R^3.

    Dispatch: identity below {x3 = 0}; F above {x3 = L}; in the slab, reduce
    (x1, x2) mod 4 into [0,4)^2, reflect into the base block [0,2]^2 while
    recording the isometry, evaluate the owning cell chart (ties resolved by
    the fixed priority A', A''1..A''4), then undo the isometry.
    """

    def __init__(self, charts, L, L_prime=None, mode="g", constants=None):
        if mode not in ("g", "f"):
            raise ValueError("mode must be 'g' or 'f'")
        if mode == "f" and L_prime is None:
            raise ValueError("mode 'f' requires the translation constant")
        self.charts = list(charts)
        self.by_id = {c.cell_id: c for c in self.charts}
        self.L = float(L)
        self.L_prime = float(L_prime) if L_prime is not None else None
        self.mode = mode
        self.constants = constants
        self._aprime = self.by_id["A'"]
        self._cells = [self.by_id[f"A''{i}"] for i in (1, 2, 3, 4)]
        vmax = 0.0
        blob = []
        for c in self.charts:
            blob.append(c.map.codomain.vertices)
        allv = np.vstack(blob)
        self.image_diameter = float(np.linalg.norm(allv.max(axis=0) - allv.min(axis=0)))
        self.max_image_height = float(allv[:, 2].max())

    # -- evaluation ----------------------------------------------------------

    def eval3(self, x, y, z):
        if z < 0.0:
            out = (x, y, z)
        elif z > self.L:
            out = zorich.F_scalar(x, y, z)
        else:
            out = self._slab_eval(x, y, z)
        if self.mode == "f":
            return (out[0], out[1], out[2] - self.L_prime)
        return out

    def _slab_eval(self, x, y, z):
        n1 = math.floor(x / 4.0)
        n2 = math.floor(y / 4.0)
        tx = x - 4.0 * n1
        ty = y - 4.0 * n2
        r1 = tx > 2.0
        r2 = ty > 2.0
        if r1:
            tx = 4.0 - tx
        if r2:
            ty = 4.0 - ty
        chart = self._pick_cell(tx, ty, z)
        gx, gy, gz = chart.map.eval((tx, ty, z))
        if r1:
            gx = 4.0 - gx
        if r2:
            gy = 4.0 - gy
        return (gx + 4.0 * n1, gy + 4.0 * n2, gz)

    def _pick_cell(self, tx, ty, z):
        if z <= 1.0:
            return self._aprime
        return self._cells[(1 if tx > 1.0 else 0) + (2 if ty > 1.0 else 0)]

    def eval(self, p):
        return np.asarray(self.eval3(float(p[0]), float(p[1]), float(p[2])))

    def __call__(self, p):
        return self.eval(p)

    def eval_with_trace(self, x, y, z):
        """Value plus a smooth-piece signature (equal signatures guarantee the
        points lie in a common smooth region of the map)."""
        if z < 0.0:
            out = (x, y, z)
            sig = ("id",)
        elif z > self.L:
            out = zorich.F_scalar(x, y, z)
            fr = zorich.fold_square(x, y)
            side = abs(fr.u[0]) >= abs(fr.u[1])
            sig = ("F", fr.flags, side, fr.u[0] >= 0, fr.u[1] >= 0)
        else:
            n1 = math.floor(x / 4.0)
            n2 = math.floor(y / 4.0)
            tx = x - 4.0 * n1
            ty = y - 4.0 * n2
            r1 = tx > 2.0
            r2 = ty > 2.0
            if r1:
                tx = 4.0 - tx
            if r2:
                ty = 4.0 - ty
            chart = self._pick_cell(tx, ty, z)
            (gx, gy, gz), sub = chart.map.eval((tx, ty, z), with_trace=True)
            if r1:
                gx = 4.0 - gx
            if r2:
                gy = 4.0 - gy
            out = (gx + 4.0 * n1, gy + 4.0 * n2, gz)
            sig = ("chart", chart.cell_id, n1, n2, r1, r2) + sub
        if self.mode == "f":
            out = (out[0], out[1], out[2] - self.L_prime)
        return out, sig


def assemble_g(charts, L, constants=None) -> GlobalMap:
    return GlobalMap(charts, L, mode="g", constants=constants)


def derive_translation_constant(g: GlobalMap, samples=100000, seed=0,
                                tol=1e-9) -> float:
    """L' = 1 + (largest third coordinate over all chart image vertices),
    sample-verified so that the whole slab maps at least one unit below it."""
    if g.mode != "g":
        raise ValueError("derive the translation constant from the unshifted map")
    vmax = g.max_image_height
    L_prime = vmax + 1.0
    rng = np.random.default_rng(seed)
    pts = rng.random((samples, 3))
    pts[:, 0] = pts[:, 0] * 16.0 - 8.0
    pts[:, 1] = pts[:, 1] * 16.0 - 8.0
    pts[:, 2] = pts[:, 2] * g.L
    worst = -math.inf
    for p in pts:
        g3 = g.eval3(p[0], p[1], p[2])[2]
        if g3 > worst:
            worst = g3
    if worst > vmax + tol:
        raise ConstructionError(
            f"sampled image height {worst} exceeds the vertex bound {vmax}")
    return L_prime


# ---------------------------------------------------------------------------
# audits

@dataclass
class SeamReport:
    worst_raw: float
    worst_scaled: float
    per_interface: Dict[str, float]
    passed: bool


@dataclass
class OrientationReport:
    min_det: float
    per_chart: Dict[str, float]
    samples: int
    passed: bool


@dataclass
class DilatationReport:
    k_sup: float
    k_median: float
    samples: int
    stability: float


def _fd_jacobian(fn, x, y, z, h):
    cols = []
    for dx, dy, dz in ((h, 0, 0), (0, h, 0), (0, 0, h)):
        fp = fn(x + dx, y + dy, z + dz)
        fm = fn(x - dx, y - dy, z - dz)
        cols.append([(fp[i] - fm[i]) / (2 * h) for i in range(3)])
    return np.array(cols).T


def seam_interfaces(L):
    """Interface name -> (point sampler over (u, v) in [0,1]^2, unit normal)."""
    return {
        "identity/slab x3=0": (lambda u, v: (-6 + 12 * u, -6 + 12 * v, 0.0), (0, 0, 1)),
        "slab/F x3=L": (lambda u, v: (-6 + 12 * u, -6 + 12 * v, L), (0, 0, 1)),
        "A'/A'' x3=1": (lambda u, v: (-6 + 12 * u, -6 + 12 * v, 1.0), (0, 0, 1)),
        "cells x1=1": (lambda u, v: (1.0, 4 * u, 1 + (L - 1) * v), (1, 0, 0)),
        "cells x2=1": (lambda u, v: (4 * u, 1.0, 1 + (L - 1) * v), (0, 1, 0)),
        "reflection x1=2": (lambda u, v: (2.0, 4 * u, L * v), (1, 0, 0)),
        "reflection x2=2": (lambda u, v: (4 * u, 2.0, L * v), (0, 1, 0)),
        "translation x1=0": (lambda u, v: (0.0, 4 * u, L * v), (1, 0, 0)),
        "translation x2=0": (lambda u, v: (4 * u, 0.0, L * v), (0, 1, 0)),
    }


def audit_seams(gm: GlobalMap, samples=10000, seed=0, tol_scaled=1e-6,
                delta=1e-9) -> SeamReport:
    rng = np.random.default_rng(seed)
    scale = max(1.0, gm.image_diameter)
    per = {}
    worst = 0.0
    for name, (sampler, normal) in seam_interfaces(gm.L).items():
        nx, ny, nz = normal
        w = 0.0
        uv = rng.random((samples, 2))
        for u, v in uv:
            px, py, pz = sampler(u, v)
            a = gm.eval3(px + delta * nx, py + delta * ny, pz + delta * nz)
            b = gm.eval3(px - delta * nx, py - delta * ny, pz - delta * nz)
            d = math.dist(a, b)
            if d > w:
                w = d
        per[name] = w
        worst = max(worst, w)
    return SeamReport(worst_raw=worst, worst_scaled=worst / scale, per_interface=per,
                      passed=worst / scale <= tol_scaled)


def _chart_samples_smooth(gm, chart, count, rng, h):
    """Interior samples whose full FD stencil shares one smooth piece."""
    lo, hi = chart.lo, chart.hi
    a = chart.map.domain.centre
    out = []
    tries = 0
    while len(out) < count and tries < 40 * count:
        tries += 1
        p = lo + rng.random(3) * (hi - lo)
        margin = 4 * h
        if np.any(p - lo < margin) or np.any(hi - p < margin):
            continue
        if np.linalg.norm(p - a) < 1e-3 * chart.map.domain.diameter:
            continue
        _, sig0 = chart.map.eval(tuple(p), with_trace=True)
        ok = True
        for d in ((h, 0, 0), (-h, 0, 0), (0, h, 0), (0, -h, 0), (0, 0, h), (0, 0, -h)):
            _, sig = chart.map.eval((p[0] + d[0], p[1] + d[1], p[2] + d[2]),
                                    with_trace=True)
            if sig != sig0:
                ok = False
                break
        if ok:
            out.append(p)
    return out


def audit_orientation(gm: GlobalMap, samples_per_chart=10000, seed=0,
                      h=1e-6) -> OrientationReport:
    rng = np.random.default_rng(seed)
    per = {}
    min_det = math.inf
    total = 0
    for chart in gm.charts:
        pts = _chart_samples_smooth(gm, chart, samples_per_chart, rng, h)
        total += len(pts)
        cmin = math.inf
        fn = lambda x, y, z: chart.map.eval((x, y, z))
        for p in pts:
            det = float(np.linalg.det(_fd_jacobian(fn, p[0], p[1], p[2], h)))
            cmin = min(cmin, det)
        per[chart.cell_id] = cmin
        min_det = min(min_det, cmin)
    return OrientationReport(min_det=min_det, per_chart=per, samples=total,
                             passed=min_det > 0.0)


def audit_dilatation(gm: GlobalMap, samples=2000, seed=0, h=1e-6) -> DilatationReport:
    rng = np.random.default_rng(seed)
    ks = []
    for chart in gm.charts:
        pts = _chart_samples_smooth(gm, chart, samples // len(gm.charts), rng, h)
        fn = lambda x, y, z: chart.map.eval((x, y, z))
        for p in pts:
            j = _fd_jacobian(fn, p[0], p[1], p[2], h)
            sv = np.linalg.svd(j, compute_uv=False)
            det = float(np.linalg.det(j))
            if det <= 0 or sv[-1] <= 0:
                ks.append(math.inf)
                continue
            ks.append(max(sv[0] ** 3 / det, det / sv[-1] ** 3))
    ks = np.asarray(ks)
    half = ks[: len(ks) // 2]
    stability = float(np.max(half) / np.max(ks)) if len(half) else 1.0
    return DilatationReport(k_sup=float(np.max(ks)), k_median=float(np.median(ks)),
                            samples=len(ks), stability=stability)


def audit(gm: GlobalMap, kind: str, samples=10000, seed=0):
    if kind == "seams":
        return audit_seams(gm, samples=samples, seed=seed)
    if kind == "orientation":
        return audit_orientation(gm, samples_per_chart=samples, seed=seed)
    if kind == "dilatation":
        return audit_dilatation(gm, samples=samples, seed=seed)
    raise ValueError(f"unknown audit kind: {kind}")


# ---------------------------------------------------------------------------
# one-stop builder and the constants dump

@dataclass
class BuildResult:
    constants: "zorich.ConstantsReport"
    vertex_table: VertexTable
    g: GlobalMap
    f: GlobalMap
    L_prime: float
    validations: Dict[str, ValidationReport] = field(default_factory=dict)


def build_maps(resolution=128, chart_resolution=48, lprime_samples=20000,
               seed=0, validate=True) -> BuildResult:
    """Derive constants, build the atlas, assemble g and f."""
    constants = zorich.derive_beam_constants(resolution)
    L = constants.L
    vt = build_vertex_table(L)
    aprime = build_aprime_chart(vt, chart_resolution)
    cells = build_asecond_charts(vt, L, aprime, chart_resolution)
    charts = [aprime] + cells
    g = assemble_g(charts, L, constants)
    L_prime = derive_translation_constant(g, samples=lprime_samples, seed=seed)
    f = GlobalMap(charts, L, L_prime, mode="f", constants=constants)
    g.L_prime = L_prime
    validations = {}
    if validate:
        for c in charts:
            rep = c.map.validate_boundary_map(samples=600, seed=seed)
            validations[c.cell_id] = rep
            if not rep.passed:
                raise ConstructionError(
                    f"boundary map validation failed for {c.cell_id}: {rep}")
    return BuildResult(constants=constants, vertex_table=vt, g=g, f=f,
                       L_prime=L_prime, validations=validations)


def constants_report_text(build: BuildResult) -> str:
    """Plain key = value dump of derived constants and certificates."""
    c = build.constants
    lines = [
        f"c0 = {c.c0:.12g}",
        f"L = {c.L:.12g}",
        f"L_prime = {build.L_prime:.12g}",
        f"K_F = {c.K_F:.12g}",
        f"expansion_floor = {math.exp(c.L) * c.c0:.12g}",
        f"exp_margin = {c.exp_margin:.12g}",
        f"jac_margin = {c.jac_margin:.12g}",
        f"norm_margin = {c.norm_margin:.12g}",
        f"grid_resolution = {c.resolution}",
    ]
    for chart in build.g.charts:
        dom = chart.map.domain
        cod = chart.map.codomain
        cid = chart.cell_id
        lines.append(f"chart.{cid}.domain_centre = {tuple(dom.centre)}")
        lines.append(f"chart.{cid}.domain_theta = {dom.certificate.theta:.6g}")
        lines.append(f"chart.{cid}.domain_eps = {dom.certificate.eps:.6g}")
        lines.append(f"chart.{cid}.codomain_centre = "
                     f"({cod.centre[0]:.6g}, {cod.centre[1]:.6g}, {cod.centre[2]:.6g})")
        lines.append(f"chart.{cid}.codomain_theta = {cod.certificate.theta:.6g}")
        lines.append(f"chart.{cid}.codomain_eps = {cod.certificate.eps:.6g}")
    return "\n".join(lines) + "\n"
