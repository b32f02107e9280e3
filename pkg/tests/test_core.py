import pytest

from bdgas.core import (ContinuumConfiguration, DiscreteConfiguration,
                        Estimate, KernelValue, ReservoirParams,
                        ValidationError, make_discrete_config,
                        restrict_interior, superpose)


def test_make_discrete_config_empty():
    c = make_discrete_config([0, 0, 0])
    assert c.mass == 0
    assert c.absorbed_left == 0 and c.absorbed_right == 0


def test_make_discrete_config_mass():
    assert make_discrete_config([2, 0, 1]).mass == 3


def test_make_discrete_config_rejects_negative():
    with pytest.raises(ValidationError):
        make_discrete_config([-1])


def test_discrete_restrict_zeroes_tallies():
    c = DiscreteConfiguration((1, 2), absorbed_left=3, absorbed_right=1)
    r = c.restrict_interior()
    assert r.counts == (1, 2)
    assert r.absorbed_left == 0 and r.absorbed_right == 0
    assert c.mass == 7 and r.mass == 3


def test_superpose_identity():
    a = ContinuumConfiguration((0.2,))
    e = ContinuumConfiguration(())
    assert superpose(a, e).positions == (0.2,)


def test_superpose_multiset():
    a = ContinuumConfiguration((0.2,))
    assert superpose(a, a).positions == (0.2, 0.2)
    b = ContinuumConfiguration((0.1, 0.9))
    c = ContinuumConfiguration((0.5,))
    assert superpose(b, c).mass == 3


def test_superpose_commutative_associative():
    import numpy as np
    rng = np.random.default_rng(5)
    for _ in range(25):
        a = ContinuumConfiguration(tuple(rng.uniform(0.01, 0.99, rng.integers(0, 4))))
        b = ContinuumConfiguration(tuple(rng.uniform(0.01, 0.99, rng.integers(0, 4))))
        c = ContinuumConfiguration(tuple(rng.uniform(0.01, 0.99, rng.integers(0, 4))))
        assert superpose(a, b).positions == superpose(b, a).positions
        assert (superpose(superpose(a, b), c).positions
                == superpose(a, superpose(b, c)).positions)


def test_restrict_interior_idempotent():
    c = ContinuumConfiguration((0.1, 0.2), absorbed_left=0, absorbed_right=1)
    r = restrict_interior(c)
    assert r.positions == (0.1, 0.2)
    assert r.absorbed_left == 0 and r.absorbed_right == 0
    assert restrict_interior(r) == r
    assert restrict_interior(ContinuumConfiguration(())) == ContinuumConfiguration(())


def test_continuum_rejects_boundary_points():
    with pytest.raises(ValidationError):
        ContinuumConfiguration((0.0,))
    with pytest.raises(ValidationError):
        ContinuumConfiguration((1.0,))


def test_reservoir_params_validation():
    p = ReservoirParams(1.0, 2.0)
    with pytest.raises(ValidationError):
        p.require_theta()
    assert ReservoirParams(0.0, 0.0, 1.5).require_theta() == 1.5
    with pytest.raises(ValidationError):
        ReservoirParams(-1.0, 0.0)
    with pytest.raises(ValidationError):
        ReservoirParams(1.0, 1.0, 0.0)


def test_estimate_and_kernel_value():
    e = Estimate(mean=1.0, stderr=0.1, n_samples=10, seed=1, stream_count=2)
    assert e.n_samples == 10
    with pytest.raises(ValidationError):
        Estimate(mean=0.0, stderr=-1.0, n_samples=10, seed=1, stream_count=1)
    kv = KernelValue(0.5, 1e-12)
    assert float(kv) == 0.5
