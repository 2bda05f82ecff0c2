import numpy as np
import pytest

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"CRITERION {num}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20241019)


def random_triangle(rng, min_angle_deg=15.0):
    """Counter-clockwise triangle with angles above a floor, diameter about 0.1 to 1."""
    while True:
        v = rng.uniform(-1, 1, (3, 2)) * rng.uniform(0.1, 1.0)
        area = 0.5 * ((v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1]) - (v[2, 0] - v[0, 0]) * (v[1, 1] - v[0, 1]))
        if area < 0:
            v = v[[0, 2, 1]]
        ang = []
        for i in range(3):
            a, b = v[(i + 1) % 3] - v[i], v[(i + 2) % 3] - v[i]
            ang.append(np.degrees(np.arccos(a @ b / np.linalg.norm(a) / np.linalg.norm(b))))
        if min(ang) > min_angle_deg:
            return v


def random_parallelogram(rng):
    while True:
        o = rng.uniform(-1, 1, 2)
        a = rng.uniform(-1, 1, 2)
        b = rng.uniform(-1, 1, 2)
        cross = a[0] * b[1] - a[1] * b[0]
        if abs(cross) > 0.3 * np.linalg.norm(a) * np.linalg.norm(b):
            if cross < 0:
                a, b = b, a
            return np.array([o, o + a, o + a + b, o + b])


class PolyField:
    """Random polynomial vector field u of total degree p with exact derived fields."""

    def __init__(self, rng, p):
        P = np.polynomial.polynomial
        mask = np.add.outer(np.arange(p + 1), np.arange(p + 1)) <= p
        self.c1 = rng.standard_normal((p + 1, p + 1)) * mask
        self.c2 = rng.standard_normal((p + 1, p + 1)) * mask
        d = P.polyder
        # sigma = rot u = du2/dx - du1/dy ; phi = -div u
        self.cs = _pad(d(self.c2, axis=0), p) - _pad(d(self.c1, axis=1), p)
        self.cp = -(_pad(d(self.c1, axis=0), p) + _pad(d(self.c2, axis=1), p))
        # f = curl sigma + grad phi = (sigma_y + phi_x, -sigma_x + phi_y)
        self.cf1 = _pad(d(self.cs, axis=1), p) + _pad(d(self.cp, axis=0), p)
        self.cf2 = -_pad(d(self.cs, axis=0), p) + _pad(d(self.cp, axis=1), p)

    @staticmethod
    def _ev(c, x, y):
        return np.polynomial.polynomial.polyval2d(x, y, c)

    def u(self, x, y):
        return np.array([self._ev(self.c1, x, y), self._ev(self.c2, x, y)])

    def sigma(self, x, y):
        return self._ev(self.cs, x, y)

    def phi(self, x, y):
        return self._ev(self.cp, x, y)

    def f(self, x, y):
        return np.array([self._ev(self.cf1, x, y), self._ev(self.cf2, x, y)])


def _pad(c, p):
    out = np.zeros((p + 1, p + 1))
    out[: c.shape[0], : c.shape[1]] = c
    return out
