import numpy as np
import pytest
from scipy.special import fresnel as scipy_fresnel

from emeflow.fresnel import fresnel_cs, fresnel_e

# mpmath fresnelc / fresnels at 30 digits
TABLE = [
    (0.5, 0.49234422587144639288, 0.06473243285999927761),
    (1.0, 0.77989340037682282947, 0.43825914739035476608),
    (1.5, 0.44526117603982153506, 0.69750496008209301308),
    (2.0, 0.48825340607534075450, 0.34341567836369824220),
    (3.0, 0.60572078929768562956, 0.49631299896737503610),
]


@pytest.mark.parametrize("x,c,s", TABLE)
def test_tabulated_values(x, c, s):
    cc, ss = fresnel_cs(x)
    assert cc == pytest.approx(c, abs=1e-13)
    assert ss == pytest.approx(s, abs=1e-13)


def test_against_scipy_across_branches():
    x = np.concatenate([np.linspace(-50, 50, 100_001), [1.5 - 1e-12, 1.5 + 1e-12]])
    e = fresnel_e(x)
    s, c = scipy_fresnel(x)
    assert np.max(np.abs(e.real - c)) < 1e-10
    assert np.max(np.abs(e.imag - s)) < 1e-10


def test_odd_symmetry_and_limits():
    x = np.linspace(0, 20, 201)
    assert np.array_equal(fresnel_e(-x), -fresnel_e(x))
    assert abs(fresnel_e(1e6) - (0.5 + 0.5j)) < 1e-6


def test_scalar_returns_complex():
    assert isinstance(fresnel_e(0.3), complex)
