import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amcqueue import (
    BmapSpec,
    arrival_count_matrices,
    mean_arrival_rate,
    phase_transition_matrix,
    scale_intensity,
    stationary_phase_vector,
    validate,
)
from amcqueue.bmap import uniformized_expm
from amcqueue.errors import IrreducibilityError, StructuralError, TruncationError

from conftest import random_bmap
from oracles import poisson_pmf, taylor_expm, truncation_bound


def test_paper_matrices_validate(paper):
    report = validate(paper)
    assert report.ok, str(report)
    np.testing.assert_allclose(paper.generator.sum(axis=1), [0.0, 0.0], atol=0)
    np.testing.assert_allclose(paper.generator, [[-1.25, 1.25], [0.625, -0.625]])


def test_positive_d0_diagonal_reported():
    spec = BmapSpec(([[0.5, 0.0], [0.5, -1.0]], [[0.0, 0.0], [0.25, 0.25]]))
    report = validate(spec)
    assert report.failed("d0_diagonal_negative")
    (v,) = [v for v in report.violations if v.check == "d0_diagonal_negative"]
    assert v.location == (0, 0, 0)


def test_no_batches_reported():
    spec = BmapSpec(([[-1.0, 1.0], [1.0, -1.0]], np.zeros((2, 2)), np.zeros((2, 2))))
    report = validate(spec)
    assert report.failed("arrivals_occur")
    assert not report.failed("generator_row_sums")


def test_row_sum_violation_has_magnitude():
    spec = BmapSpec(([[-1.0]], [[0.5]]))
    (v,) = validate(spec).violations
    assert v.check == "generator_row_sums"
    assert v.magnitude == pytest.approx(0.5)


def test_dimension_mismatch_is_structural():
    with pytest.raises(StructuralError):
        BmapSpec(([[-1.0, 1.0], [1.0, -1.0]], [[1.0]]))
    with pytest.raises(StructuralError):
        BmapSpec(([[-1.0]],))


def test_stationary_vector_paper(paper):
    np.testing.assert_allclose(stationary_phase_vector(paper), [1 / 3, 2 / 3], atol=1e-15)


def test_stationary_single_phase():
    assert stationary_phase_vector(BmapSpec(([[-3.0]], [[3.0]]))).tolist() == [1.0]


def test_stationary_symmetric():
    spec = BmapSpec(([[-2.0, 1.0], [1.0, -2.0]], [[0.5, 0.5], [0.5, 0.5]]))
    np.testing.assert_allclose(stationary_phase_vector(spec), [0.5, 0.5], atol=1e-15)


def test_reducible_generator_names_phases():
    D0 = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.5], [0.0, 0.5, -1.0]]
    D1 = [[1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]]
    spec = BmapSpec((D0, D1))
    assert validate(spec).failed("irreducible")
    with pytest.raises(IrreducibilityError) as err:
        stationary_phase_vector(spec)
    assert set(err.value.states) == {1, 2}


def test_mean_rate_paper(paper):
    assert mean_arrival_rate(paper) == pytest.approx(19 / 12, abs=1e-12)


def test_mean_rate_poisson():
    assert mean_arrival_rate(BmapSpec(([[-2.5]], [[2.5]]))) == pytest.approx(2.5, abs=1e-15)


def test_doubling_doubles_rate(paper):
    doubled = BmapSpec(tuple(2 * m for m in paper.D))
    assert mean_arrival_rate(doubled) == pytest.approx(2 * mean_arrival_rate(paper), abs=1e-12)


def test_phase_matrix_zero_frame(paper):
    np.testing.assert_array_equal(phase_transition_matrix(paper.with_frame_duration(0.0)), np.eye(2))


def test_phase_matrix_long_frame(paper):
    phi = phase_transition_matrix(paper.with_frame_duration(500.0))
    np.testing.assert_allclose(phi, [[1 / 3, 2 / 3], [1 / 3, 2 / 3]], atol=1e-12)


def test_phase_matrix_matches_taylor(paper):
    np.testing.assert_allclose(phase_transition_matrix(paper), taylor_expm(paper.generator, 1.0),
                               atol=1e-8, rtol=0)
    # uniformization is much tighter than the acceptance tolerance
    np.testing.assert_allclose(phase_transition_matrix(paper), taylor_expm(paper.generator, 1.0),
                               atol=1e-13, rtol=0)


def test_arrival_kernel_no_arrivals():
    spec = BmapSpec(([[0.0]], [[0.0]], [[0.0]]))
    kernel = arrival_count_matrices(spec, 1e-9)
    assert kernel.A == spec.K == 2
    np.testing.assert_array_equal(kernel.xi[0], np.eye(1))
    assert kernel.tail_mass == 0.0


def test_arrival_kernel_paper_matches_recurrence(paper):
    kernel = arrival_count_matrices(paper, 1e-9)
    assert kernel.A == truncation_bound([2.0, 1.0], 1e-9, 2) == 15
    for s, mu in enumerate([2.0, 1.0]):
        expected = poisson_pmf(mu, kernel.A)
        np.testing.assert_allclose(kernel.xi[:, s, s], expected, atol=1e-15, rtol=0)
    off = ~np.eye(2, dtype=bool)
    assert np.all(kernel.xi[:, off] == 0.0)


def test_arrival_bound_half():
    spec = BmapSpec(([[-1.0]], [[1.0]]))
    assert arrival_count_matrices(spec, 0.5).A == 1
    # floor at K
    spec2 = BmapSpec(([[-1.0]], [[0.5]], [[0.25]], [[0.25]]))
    assert arrival_count_matrices(spec2, 0.5).A == 3


def test_truncation_cap():
    spec = BmapSpec(([[-1.0]], [[1.0]]))
    with pytest.raises(TruncationError):
        arrival_count_matrices(spec, 1e-300, cap=5)


def test_scale_identity(paper):
    same = scale_intensity(paper, 1.0)
    for a, b in zip(same.D, paper.D):
        np.testing.assert_array_equal(a, b)


def test_scale_doubles(paper):
    doubled = scale_intensity(paper, 2.0)
    assert mean_arrival_rate(doubled) == pytest.approx(19 / 6, abs=1e-12)
    np.testing.assert_allclose(stationary_phase_vector(doubled), [1 / 3, 2 / 3], atol=1e-12)


def test_scale_rejects_nonpositive(paper):
    with pytest.raises(ValueError):
        scale_intensity(paper, 0.0)


@st.composite
def bmaps(draw):
    S = draw(st.integers(1, 6))
    K = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    T = draw(st.sampled_from([0.1, 0.5, 1.0, 3.0]))
    return random_bmap(np.random.default_rng(seed), S, K, T)


@settings(max_examples=120, deadline=None)
@given(bmaps())
def test_generator_residual(spec):
    assert validate(spec).ok
    pi = stationary_phase_vector(spec)
    assert np.all(pi >= 0.0)
    assert pi.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(pi @ spec.generator)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(bmaps(), st.sampled_from([1e-3, 1e-6, 1e-9]))
def test_xi_normalization(spec, er):
    kernel = arrival_count_matrices(spec, er)
    sums = kernel.probs.sum(axis=0)
    # upper bound allows summation rounding over up to ~50 terms
    assert np.all(sums >= 1.0 - er) and np.all(sums <= 1.0 + 1e-14)
    assert np.all(kernel.tail < er)
    np.testing.assert_allclose(sums + kernel.tail, 1.0, atol=1e-14)
    assert kernel.A >= spec.K


@settings(max_examples=60, deadline=None)
@given(bmaps(), st.floats(0.05, 4.0), st.floats(0.05, 4.0))
def test_phase_semigroup(spec, t1, t2):
    Q = spec.generator
    a, b, ab = uniformized_expm(Q, t1), uniformized_expm(Q, t2), uniformized_expm(Q, t1 + t2)
    np.testing.assert_allclose(ab.sum(axis=1), 1.0, atol=1e-10)
    assert np.all(ab >= 0.0)
    np.testing.assert_allclose(a @ b, ab, atol=1e-9, rtol=0)


@settings(max_examples=60, deadline=None)
@given(bmaps(), st.floats(0.1, 10.0))
def test_scale_identities(spec, rho):
    scaled = scale_intensity(spec, rho)
    assert mean_arrival_rate(scaled) == pytest.approx(rho * mean_arrival_rate(spec), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(stationary_phase_vector(scaled), stationary_phase_vector(spec), atol=1e-12)
