"""Benchmark functions against hand-computed values."""

import numpy as np
import pytest

from raceopt.benchfns import BENCH_NAMES, eval_bench, get_bench


class TestGetBench:
    def test_names(self):
        assert set(BENCH_NAMES) == {"sphere", "rosenbrock", "rastrigin"}

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="sphere"):
            get_bench("ackley", 5)

    def test_rosenbrock_needs_two_dims(self):
        with pytest.raises(ValueError):
            get_bench("rosenbrock", 1)

    def test_domains(self):
        assert get_bench("sphere", 3).lower == -5.0
        assert get_bench("rosenbrock", 3).upper == 2.0
        assert get_bench("rastrigin", 3).lower == -5.12


class TestValues:
    def test_minimum_is_zero(self):
        for name in BENCH_NAMES:
            fn = get_bench(name, 4)
            assert eval_bench(fn, fn.minimum_unit) == pytest.approx(0.0, abs=1e-12)

    def test_sphere_hand_value(self):
        fn = get_bench("sphere", 2)
        # unit (0.6, 0.7) -> domain (1, 2) -> 1 + 4
        assert eval_bench(fn, np.array([0.6, 0.7])) == pytest.approx(5.0)

    def test_rosenbrock_hand_value(self):
        fn = get_bench("rosenbrock", 2)
        # domain (0, 0): 100*(0-0)^2 + (1-0)^2 = 1
        assert eval_bench(fn, np.array([0.5, 0.5])) == pytest.approx(1.0)

    def test_rosenbrock_banana_floor(self):
        fn = get_bench("rosenbrock", 3)
        # on the parabola x2=x1^2, x3=x2^2 only the (1-x)^2 terms remain
        x = np.array([0.5, 0.25, 0.0625])
        u = (x - fn.lower) / (fn.upper - fn.lower)
        expected = (1.0 - 0.5) ** 2 + (1.0 - 0.25) ** 2
        assert eval_bench(fn, u) == pytest.approx(expected, abs=1e-12)

    def test_rastrigin_integer_lattice(self):
        fn = get_bench("rastrigin", 2)
        # integer points are local minima with value sum(x^2)
        x = np.array([1.0, 2.0])
        u = (x - fn.lower) / (fn.upper - fn.lower)
        assert eval_bench(fn, u) == pytest.approx(5.0, abs=1e-9)

    def test_minimum_unit_inside_cube(self):
        for name in BENCH_NAMES:
            mu = get_bench(name, 5).minimum_unit
            assert np.all(mu > 0.0) and np.all(mu < 1.0)

    def test_shape_mismatch(self):
        fn = get_bench("sphere", 3)
        with pytest.raises(ValueError):
            eval_bench(fn, np.zeros(4))
