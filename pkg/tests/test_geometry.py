import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrdyn.geometry import (CertificationFailure, GeometryError, StarShape,
                            attach_certificate, certify_star_centre,
                            local_lipschitz_constants, locate, psi,
                            pick_star_centre_2d, polygon_kernel)


def cube(a=(0.0, 0.0, 0.0)):
    return StarShape.cuboid([-1, -1, -1], [1, 1, 1], centre=a)


def unit_square(a=(0.0, 0.0)):
    return StarShape.polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)], a)


# image pentagon of the side face {x1 = 0}, in (x2, x3) coordinates
PENTAGON = [(0.0, 0.0), (0.0, 4.0), (4.0, 4.0), (2.0, 3.5), (2.0, 0.0)]


def ray_segment_oracle(vertices, a, x):
    """Independent 2D oracle: first boundary crossing of the ray a->x with
    ray parameter >= 1, by brute force over all edges."""
    a = np.asarray(a, float)
    r = np.asarray(x, float) - a
    best = (math.inf, None, None)
    n = len(vertices)
    for i in range(n):
        p = np.asarray(vertices[i], float)
        q = np.asarray(vertices[(i + 1) % n], float)
        e = q - p
        den = r[0] * e[1] - r[1] * e[0]
        if abs(den) < 1e-15:
            continue
        t = ((p[0] - a[0]) * e[1] - (p[1] - a[1]) * e[0]) / den
        s = ((p[0] - a[0]) * r[1] - (p[1] - a[1]) * r[0]) / den
        if 0 - 1e-12 <= s <= 1 + 1e-12 and t >= 1 - 1e-12 and t < best[0]:
            best = (t, i, p + s * e)
    return best


class TestLocate:
    def test_cube_centre_is_interior(self):
        assert locate(cube(), (0, 0, 0)).kind == "interior"

    def test_cube_face_point_is_boundary(self):
        loc = locate(cube(), (1, 0, 0))
        assert loc.kind == "boundary"
        assert loc.facet == 1  # +x face

    def test_cube_outside_point_is_exterior(self):
        assert locate(cube(), (2, 0, 0)).kind == "exterior"

    def test_polygon_classification(self):
        sq = unit_square()
        assert locate(sq, (0.2, -0.3)).kind == "interior"
        assert locate(sq, (1.0, 0.5)).kind == "boundary"
        assert locate(sq, (1.5, 0.0)).kind == "exterior"


class TestPsi:
    def test_cube_axis_ray(self):
        hit = psi(cube(), (0.5, 0, 0))
        assert np.allclose(hit.point, (1, 0, 0), atol=1e-12)
        assert hit.t == pytest.approx(2.0, abs=1e-12)

    def test_square_diagonal_ray_to_corner(self):
        hit = psi(unit_square(), (0.3, 0.3))
        assert np.allclose(hit.point, (1, 1), atol=1e-12)
        assert hit.t == pytest.approx(10.0 / 3.0, abs=1e-12)

    def test_pentagon_matches_brute_force_oracle(self):
        a = (1.0, 2.0)
        shape = StarShape.polygon(PENTAGON, a)
        x = (1.0, 3.0)
        t_or, edge_or, pt_or = ray_segment_oracle(PENTAGON, a, x)
        hit = psi(shape, x)
        assert hit.facet == edge_or == 1
        assert np.allclose(hit.point, pt_or, atol=1e-12)
        assert np.allclose(hit.point, (1.0, 4.0), atol=1e-12)
        assert hit.t == pytest.approx(t_or, rel=1e-12)

    def test_pentagon_random_rays_match_oracle(self):
        a = np.array([1.0, 2.0])
        shape = StarShape.polygon(PENTAGON, a)
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 200:
            x = rng.random(2) * np.array([4.0, 4.0])
            if locate(shape, x).kind != "interior":
                continue
            if np.linalg.norm(x - a) < 1e-3:
                continue
            t_or, edge_or, pt_or = ray_segment_oracle(PENTAGON, a, x)
            hit = psi(shape, x)
            assert np.allclose(hit.point, pt_or, atol=1e-9)
            checked += 1

    def test_centre_and_exterior_raise(self):
        with pytest.raises(GeometryError):
            psi(cube(), (0, 0, 0))
        with pytest.raises(GeometryError):
            psi(cube(), (3, 0, 0))

    @settings(max_examples=150, deadline=None)
    @given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
    def test_idempotence_and_collinearity(self, x, y, z):
        c = cube()
        p = np.array([x, y, z])
        if np.linalg.norm(p) < 1e-6:
            return
        hit = psi(c, p)
        again = psi(c, hit.point)
        assert np.allclose(again.point, hit.point, atol=1e-12)
        # collinear with the centre, and no closer than p
        cr = np.cross(p, hit.point)
        assert np.linalg.norm(cr) <= 1e-12 * max(1.0, np.linalg.norm(hit.point))
        assert np.linalg.norm(hit.point) >= np.linalg.norm(p) - 1e-12


class TestCertification:
    # the exact minimum over the cube boundary of the angle between the
    # centre ray and an in-face direction is atan(1/sqrt(2)), attained at the
    # corners along face diagonals; the certificate carries half of it
    CUBE_MIN_ANGLE = math.atan(1.0 / math.sqrt(2.0))

    def test_cube_certificate_value(self):
        cert = certify_star_centre(cube(), (0, 0, 0), resolution=64)
        assert cert.theta == pytest.approx(self.CUBE_MIN_ANGLE / 2, rel=0.02)
        assert cert.theta >= 0.3

    def test_off_centre_gives_smaller_angle(self):
        c0 = certify_star_centre(cube(), (0, 0, 0), resolution=48)
        c1 = certify_star_centre(cube(), (0.99, 0, 0), resolution=48)
        assert c1.theta < c0.theta

    def test_exterior_centre_rejected(self):
        with pytest.raises(GeometryError):
            certify_star_centre(cube(), (3, 0, 0))

    def test_resolution_doubling_stability(self):
        for shape in (cube(), StarShape.polygon(PENTAGON, pick_star_centre_2d(PENTAGON))):
            c1 = certify_star_centre(shape, shape.centre, resolution=48)
            c2 = certify_star_centre(shape, shape.centre, resolution=96)
            assert abs(c2.theta - c1.theta) <= 0.05 * c1.theta

    def test_nonconvex_pentagon_needs_kernel_centre(self):
        # the area centroid of this pentagon does not see the whole boundary;
        # the kernel fallback produces a certifiable centre
        kern = polygon_kernel(PENTAGON)
        assert kern, "kernel should be nonempty"
        centre = pick_star_centre_2d(PENTAGON)
        shape = StarShape.polygon(PENTAGON, centre)
        cert = certify_star_centre(shape, centre, resolution=48)
        assert cert.theta > 0.01
        # kernel of this pentagon sits high: x3 >= 3 + 0.25*(x2 - 2)
        assert centre[1] >= 3.0


class TestLipschitz:
    def test_constant_formulas(self):
        shape = cube()
        shape.certificate = None
        from qrdyn.geometry import Certificate
        shape.certificate = Certificate(theta=0.6, eps=1.0, resolution=1)
        eta, T = local_lipschitz_constants(shape)
        s = math.sin(0.3)
        assert T == pytest.approx(2.0 / s * math.sqrt(3.0), rel=1e-12)
        assert eta == pytest.approx(min(0.5, s / 4, 1.0 * s / (4 * math.sqrt(3))), rel=1e-12)
        assert eta <= 0.5

    def test_missing_certificate_raises(self):
        with pytest.raises(GeometryError):
            local_lipschitz_constants(cube())

    @pytest.mark.parametrize("make", [cube, lambda: StarShape.polygon(
        PENTAGON, pick_star_centre_2d(PENTAGON))])
    def test_psi_local_lipschitz_bound(self, make):
        shape = make()
        attach_certificate(shape, resolution=48)
        eta, T = local_lipschitz_constants(shape)
        a = shape.centre
        rng = np.random.default_rng(7)
        lo = shape.vertices.min(axis=0)
        hi = shape.vertices.max(axis=0)
        tested = 0
        while tested < 2000:
            xi = lo + rng.random(shape.dim) * (hi - lo)
            if locate(shape, xi).kind != "interior":
                continue
            rxi = np.linalg.norm(xi - a)
            if rxi < 1e-3:
                continue
            pair = []
            for _ in range(2):
                for _try in range(50):
                    cand = xi + (rng.random(shape.dim) - 0.5) * 2 * eta * rxi
                    if (np.linalg.norm(cand - xi) <= eta * rxi
                            and locate(shape, cand).kind != "exterior"
                            and np.linalg.norm(cand - a) > 1e-9):
                        pair.append(cand)
                        break
            if len(pair) < 2:
                continue
            x, y = pair
            px = psi(shape, x).point
            py = psi(shape, y).point
            lhs = np.linalg.norm(px - py)
            rhs = T / rxi * np.linalg.norm(x - y)
            assert lhs <= rhs * (1 + 1e-9)
            tested += 1
