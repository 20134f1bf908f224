import numpy as np
import pytest

from uadi.errors import ShiftCollision, UnpairedComplexShift, UnstableShift
from uadi.linalg import shifted_solve
from uadi.realify import (
    ShiftUnit,
    as_units,
    expand_units,
    lyap_sl,
    realified_columns,
    sylv_case,
    sylv_sl,
)
from uadi.systems import random_stable_system


def test_unit_grouping_roundtrip():
    shifts = [-1.0, -2.0 + 3.0j, -2.0 - 3.0j, -0.5]
    units = as_units(shifts)
    assert [u.is_pair for u in units] == [False, True, False]
    assert expand_units(units) == shifts


def test_unpaired_complex_rejected():
    with pytest.raises(UnpairedComplexShift):
        as_units([-1.0 + 2.0j, -0.5])
    with pytest.raises(UnpairedComplexShift):
        as_units([-1.0 + 2.0j])


def test_unstable_shift_rejected():
    with pytest.raises(UnstableShift):
        ShiftUnit(0.5)
    with pytest.raises(UnstableShift):
        ShiftUnit(0.0 + 1.0j)


@pytest.mark.parametrize("alpha", [-0.8, -0.7 + 2.3j, -3.0 - 0.4j])
def test_lyap_block_identity(alpha):
    """The realified block satisfies A Vb - E Vb s + B l = 0 and the
    companion blocks satisfy s^T + s = l^T l (identity middle matrix)."""
    sys = random_stable_system(14, 2, 2, 3)
    unit = ShiftUnit(alpha)
    s, l = lyap_sl(unit, sys.m)
    np.testing.assert_allclose(s.T + s, l.T @ l, atol=1e-13)
    v = shifted_solve(sys.A, sys.E, unit.value, sys.B)
    Vb = realified_columns(unit, v)
    assert np.isrealobj(Vb)
    res = sys.A @ Vb - sys.E @ Vb @ s + sys.B @ l
    assert np.abs(res).max() < 1e-10


def test_pair_block_eigenvalues():
    unit = ShiftUnit(-1.5 + 4.0j)
    s, _ = lyap_sl(unit, 1)
    w = np.linalg.eigvals(s)
    np.testing.assert_allclose(
        np.sort_complex(w), np.sort_complex(np.array([-unit.value.conjugate(), -unit.value])),
        atol=1e-12,
    )


def test_sylv_cases():
    r = ShiftUnit(-1.0)
    p = ShiftUnit(-1.0 + 2.0j)
    assert sylv_case([r], [r]) == 1
    assert sylv_case([p], [p]) == 2
    assert sylv_case([r, r], [p]) == 3
    assert sylv_case([p], [r, r]) == 4
    with pytest.raises(UnpairedComplexShift):
        sylv_case([r], [p])


def test_sylv_shift_collision():
    """alpha ~ -conj(beta) across near-axis pairs makes the coupling blow up;
    for strictly damped shifts the stability guard already precludes it."""
    a = ShiftUnit(-1e-15 + 1.0j)
    b = ShiftUnit(-1e-15 - 1.0j)  # contains -1e-15 + 1j whose mirror hits alpha
    with pytest.raises(ShiftCollision):
        sylv_sl(2, [a], [b], 1)
    # well-damped mirrored pairs are fine
    sylv_sl(2, [ShiftUnit(-1.0 + 1.0j)], [ShiftUnit(-1.0 + 1.0j)], 1)
