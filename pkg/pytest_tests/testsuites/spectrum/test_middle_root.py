import math

import allure
import pytest
from ces_spectra.potential import DkvParams
from ces_spectra.spectrum import (
    BoundState,
    build_triple,
    coupling_from_root,
    root_certificate,
    select_physical_root,
)
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from steps.sweeps import middle_root_instances

INSTANCES = 10_000


@allure.title("A root inside the level window is always the middle root")
@pytest.mark.spectrum
@pytest.mark.property
def test_middle_root_sweep():
    failures = []
    for instance in middle_root_instances(INSTANCES):
        p = DkvParams(A=instance.A, B=2 * instance.b)
        triple = build_triple(p, instance.n)
        if not triple.all_real:
            failures.append((instance, "complex roots"))
            continue
        left, middle, right = triple.real_roots
        scale = max(1.0, instance.t)
        if abs(middle - instance.t) > 1e-8 * scale:
            failures.append((instance, f"middle root {middle}"))
            continue
        if not (left < 0 and right > math.sqrt(instance.b)):
            failures.append((instance, f"outer roots {left}, {right}"))
            continue
        a = select_physical_root(triple)
        if a is None or abs(a - (instance.t - instance.n)) > 1e-8 * scale:
            failures.append((instance, f"selected root {a}"))
    assert not failures, f"{len(failures)} of {INSTANCES} instances fail, first: {failures[:5]}"


@allure.title("Certificate and level data for random admissible roots")
@pytest.mark.spectrum
@pytest.mark.property
@settings(max_examples=300, deadline=None)
@given(
    b=st.floats(min_value=0.3, max_value=400.0),
    n=st.integers(min_value=0, max_value=18),
    fraction=st.floats(min_value=1e-4, max_value=1 - 1e-4),
)
def test_middle_root_certificate(b, n, fraction):
    lo, hi = n + 0.5, math.sqrt(b)
    assume(hi - lo > 1e-3)
    t = lo + (hi - lo) * fraction
    p = DkvParams(A=coupling_from_root(n, b, t), B=2 * b)

    triple = build_triple(p, n)
    certificate = root_certificate(triple)
    assert certificate.holds, f"Certificate fails for n={n}, b={b}, t={t}: {certificate}"

    a = select_physical_root(triple)
    assert a == pytest.approx(t - n, rel=1e-9)
    state = BoundState.from_root(n, a, b)
    assert state.is_normalizable
    assert state.E_n == pytest.approx(-((a - 0.5) ** 2))
