import numpy as np
import pytest

from vmadmm.errors import (
    AdjointConsistencyError,
    DimensionMismatch,
    NotPositiveSemidefinite,
    PowerIterationError,
)
from vmadmm.linops import (
    LinearMap,
    MetricOperator,
    adjoint_mismatch,
    as_vector,
    forward_difference,
    in_P_alpha,
    linear_map_from_file,
    load_dense_matrix,
    loewner_geq,
    min_eigenvalue,
    operator_norm,
    save_dense_matrix,
)


# ---------------------------------------------------------------------------
# vectors
# ---------------------------------------------------------------------------


def test_as_vector_basic():
    v = as_vector([1.0, 2.0, 3.0])
    assert v.shape == (3,)
    assert as_vector(5.0).shape == (1,)


def test_as_vector_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])
    with pytest.raises(ValueError):
        as_vector([np.inf])


def test_as_vector_dim_mismatch_names_dims():
    with pytest.raises(DimensionMismatch) as exc:
        as_vector([1.0, 2.0], dim=3)
    assert "3" in str(exc.value) and "2" in str(exc.value)


# ---------------------------------------------------------------------------
# apply
# ---------------------------------------------------------------------------


def test_apply_identity():
    A = LinearMap.identity(3)
    assert np.array_equal(A.apply(np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])


def test_apply_zero_map():
    A = LinearMap.zero(2, 2)
    assert np.array_equal(A.apply(np.array([5.0, -1.0])), [0.0, 0.0])


def test_apply_hand_multiplication():
    A = LinearMap.from_dense([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(A.apply(np.array([1.0, 1.0])), [3.0, 7.0])


def test_apply_dimension_mismatch_names_both_dims():
    A = LinearMap.from_dense([[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(DimensionMismatch) as exc:
        A.apply(np.ones(3))
    assert "2" in str(exc.value) and "3" in str(exc.value)


def test_adjoint_consistency_random_dense():
    rng = np.random.default_rng(0)
    A = LinearMap.from_dense(rng.standard_normal((7, 5)))
    assert adjoint_mismatch(A) <= 1e-12


def test_adjoint_consistency_forward_difference():
    A = forward_difference(12)
    assert adjoint_mismatch(A) <= 1e-12
    dense = A.to_dense()
    x = np.arange(12.0)
    assert np.allclose(A.apply(x), dense @ x)
    v = np.arange(11.0)
    assert np.allclose(A.adjoint(v), dense.T @ v)


def test_matrix_free_rejects_bad_adjoint():
    with pytest.raises(AdjointConsistencyError):
        LinearMap.matrix_free(
            3, 3, lambda x: 2.0 * x, lambda v: 3.0 * v  # wrong adjoint
        )


# ---------------------------------------------------------------------------
# operator norm
# ---------------------------------------------------------------------------


def test_operator_norm_diagonal():
    A = LinearMap.from_dense(np.diag([3.0, 1.0]))
    assert abs(operator_norm(A, tol=1e-10) - 3.0) <= 1e-8


def test_operator_norm_identity():
    assert operator_norm(LinearMap.identity(5)) == pytest.approx(1.0, abs=1e-12)


def test_operator_norm_forward_difference_vs_svd():
    # independent oracle: dense SVD of the 49x50 difference matrix
    A = forward_difference(50)
    estimate = operator_norm(A, tol=1e-10)
    assert 1.99 < estimate < 2.0
    exact = float(np.linalg.svd(A.to_dense(), compute_uv=False)[0])
    assert abs(estimate - exact) <= 1e-8 * exact


@pytest.mark.parametrize("shape", [(4, 4), (20, 13), (100, 60)])
def test_operator_norm_squared_matches_dense_eigensolve(shape):
    rng = np.random.default_rng(shape[0] * 100 + shape[1])
    A = LinearMap.from_dense(rng.standard_normal(shape))
    lam_max = float(np.linalg.eigvalsh(A.gram_dense())[-1])
    assert operator_norm(A, tol=1e-10) ** 2 == pytest.approx(lam_max, rel=1e-8)


def test_operator_norm_nonconvergence_carries_estimate():
    A = LinearMap.from_dense(np.diag([3.0, 2.9]))  # tiny gap, slow convergence
    with pytest.raises(PowerIterationError) as exc:
        operator_norm(A, tol=1e-14, max_iter=2)
    assert exc.value.estimate > 0.0


def test_operator_norm_zero_map():
    assert operator_norm(LinearMap.zero(3, 3)) == 0.0


# ---------------------------------------------------------------------------
# metric operators
# ---------------------------------------------------------------------------


def test_seminorm_zero_operator():
    U = MetricOperator.zero(4)
    assert U.seminorm_sq(np.array([1.0, -2.0, 3.0, 0.5])) == 0.0


def test_seminorm_scaled_identity():
    U = MetricOperator.scaled_identity(2, 2.0)
    assert U.seminorm_sq(np.array([1.0, 1.0])) == pytest.approx(4.0)


def test_seminorm_shifted_gram():
    U = MetricOperator.shifted_gram(0.25, 1.0, LinearMap.identity(2))
    assert U.seminorm_sq(np.array([1.0, 0.0])) == pytest.approx(3.0)


def test_seminorm_dimension_mismatch():
    U = MetricOperator.scaled_identity(2, 1.0)
    with pytest.raises(DimensionMismatch):
        U.seminorm_sq(np.ones(3))


@pytest.mark.parametrize(
    "metric",
    [
        MetricOperator.zero(5),
        MetricOperator.scaled_identity(5, 0.7),
        MetricOperator.diagonal([0.0, 1.0, 2.0, 0.5, 3.0]),
        MetricOperator.dense(np.diag([1.0, 2.0, 3.0, 0.0, 0.1])),
        MetricOperator.shifted_gram(0.2, 1.0, forward_difference(5)),
    ],
)
def test_seminorm_nonnegative_on_random_probes(metric):
    rng = np.random.default_rng(42)
    for _ in range(50):
        assert metric.seminorm_sq(rng.standard_normal(5) * 10.0) >= 0.0


def test_metric_symmetry_probes():
    rng = np.random.default_rng(3)
    base = rng.standard_normal((6, 6))
    U = MetricOperator.dense(base @ base.T)
    for _ in range(10):
        x = rng.standard_normal(6)
        w = rng.standard_normal(6)
        lhs = float(U.apply(x) @ w)
        rhs = float(x @ U.apply(w))
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1.0)


def test_shifted_gram_construction_guard():
    # 1/tau must dominate coupling * ||A||^2
    with pytest.raises(NotPositiveSemidefinite):
        MetricOperator.shifted_gram(2.0, 1.0, LinearMap.identity(3))


def test_diagonal_rejects_negative_entries():
    with pytest.raises(NotPositiveSemidefinite):
        MetricOperator.diagonal([1.0, -0.5])


def test_scaled_identity_rejects_negative():
    with pytest.raises(NotPositiveSemidefinite):
        MetricOperator.scaled_identity(2, -1.0)


def test_dense_rejects_indefinite():
    with pytest.raises(NotPositiveSemidefinite):
        MetricOperator.dense([[1.0, 0.0], [0.0, -1.0]])


def test_metric_scaled_preserves_form():
    A = forward_difference(6)
    U = MetricOperator.shifted_gram(0.2, 1.0, A)
    V = U.scaled(2.0)
    assert V.kind == "shifted_gram"
    x = np.arange(6.0)
    assert np.allclose(V.apply(x), 2.0 * U.apply(x))
    assert U.scaled(0.0).kind == "zero"
    D = MetricOperator.diagonal([1.0, 2.0]).scaled(3.0)
    assert np.allclose(D.diagonal_entries(), [3.0, 6.0])


# ---------------------------------------------------------------------------
# Loewner order
# ---------------------------------------------------------------------------


def test_loewner_scaled_identities():
    two = MetricOperator.scaled_identity(2, 2.0)
    one = MetricOperator.scaled_identity(2, 1.0)
    assert loewner_geq(two, one).holds
    res = loewner_geq(one, two)
    assert not res.holds
    assert res.witness is not None
    assert np.linalg.norm(res.witness) == pytest.approx(1.0)


def test_loewner_diagonal_witness():
    U1 = MetricOperator.diagonal([3.0, 0.5])
    U2 = MetricOperator.scaled_identity(2, 1.0)
    res = loewner_geq(U1, U2)
    assert not res.holds
    assert abs(res.witness[1]) == pytest.approx(1.0, abs=1e-12)
    assert res.min_eigenvalue == pytest.approx(-0.5)


def test_loewner_reflexive_and_antisymmetric_up_to_slack():
    rng = np.random.default_rng(11)
    base = rng.standard_normal((5, 5))
    U = MetricOperator.dense(base @ base.T)
    assert loewner_geq(U, U, slack=1e-12).holds
    V = MetricOperator.dense(U.to_dense() + 1e-9 * np.eye(5))
    if loewner_geq(U, V, slack=1e-8).holds and loewner_geq(V, U, slack=1e-8).holds:
        diff = np.abs(np.linalg.eigvalsh(U.to_dense() - V.to_dense())).max()
        assert diff <= 2e-8


def test_loewner_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        loewner_geq(MetricOperator.zero(2), MetricOperator.zero(3))


def test_in_P_alpha_examples():
    assert in_P_alpha(MetricOperator.scaled_identity(2, 2.0), 1.0)
    assert not in_P_alpha(MetricOperator.zero(3), 0.1)
    gram = MetricOperator.dense(np.diag([2.0, 1.0]) ** 2)
    assert in_P_alpha(gram, 1.0)  # smallest eigenvalue exactly 1


def test_in_P_alpha_requires_positive_alpha():
    with pytest.raises(ValueError):
        in_P_alpha(MetricOperator.zero(2), 0.0)


def test_min_eigenvalue_shifted_gram():
    A = forward_difference(20)
    U = MetricOperator.shifted_gram(0.2, 1.0, A)
    lam = min_eigenvalue(U)
    gram_max = float(np.linalg.eigvalsh(A.gram_dense())[-1])
    assert lam == pytest.approx(5.0 - gram_max, abs=1e-10)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def test_dense_matrix_file_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    m = rng.standard_normal((3, 4))
    path = tmp_path / "mat.txt"
    save_dense_matrix(path, m)
    loaded = load_dense_matrix(path)
    assert np.array_equal(loaded, m)
    assert load_dense_matrix(path).shape == (3, 4)
    A = linear_map_from_file(path)
    assert A.rows == 3 and A.cols == 4


def test_dense_matrix_file_reports_bad_count(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 2\n1.0 2.0 3.0\n")
    with pytest.raises(ValueError):
        load_dense_matrix(path)
