import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import matrices, quaternions
from sspectrum.errors import DomainError, PreconditionError, SpectralPointError, UnsupportedOperationError
from sspectrum.fredholm import (
    AlgebraElement, BasisPermutation, BlockTriangularAlgebra, Homomorphism, IdentityHomomorphism,
    approx_null_sequence, boundary_inclusion, boundary_s_spectrum, fredholm_s_spectrum,
    inverse_spectral_map, inversion_of_boundary, is_fredholm_element, is_weyl_element,
    out_of_ball_fredholm, product_spectra_off_imaginaries, sandwich_holds,
    search_sum_counterexamples, spherical, sum_identity_terms, theorem_sum_spectra, unit_like,
    verify_sum_identity, verify_sum_identity_mirror, weyl_s_spectrum, zero_like,
)
from sspectrum.qmat import QMatrix, char_elem, is_invertible, op_norm, s_spectrum_exact
from sspectrum.quat import I, J, K, Quaternion, Sphere, is_subset, sample_sphere, sphere_sets_match

ALG = BlockTriangularAlgebra(2, 2)
PI = ALG.projection()
ID = IdentityHomomorphism()


def upper(rng):
    return ALG.random_upper(rng)


def block(D1, U, D2, alg=ALG):
    return alg.element(D1, U, D2)


def test_element_protocol():
    assert isinstance(QMatrix.identity(2), AlgebraElement)
    assert unit_like(QMatrix.random(2, np.random.default_rng(0))) == QMatrix.identity(2)
    assert zero_like(QMatrix.identity(2)) == QMatrix.zeros(2)


def test_homomorphism_is_abstract():
    with pytest.raises(TypeError):
        Homomorphism()


# block algebra ----------------------------------------------------------------

def test_block_algebra_closure_and_ideal(rng):
    a, b = ALG.random_element(rng), ALG.random_element(rng)
    assert ALG.contains(a @ b) and ALG.contains(a + b)
    p, p2 = ALG.random_kernel_element(rng), ALG.random_kernel_element(rng)
    assert PI.in_kernel(p) and PI.in_kernel(p + p2) and PI.in_kernel(a @ p) and PI.in_kernel(p @ a)
    assert not PI.in_kernel(a)
    with pytest.raises(DomainError):
        BlockTriangularAlgebra(0, 2)
    with pytest.raises(DomainError):
        ALG.element(QMatrix.identity(3), None, QMatrix.identity(2))


def test_projection_rejects_lower_blocks():
    with pytest.raises(DomainError):
        PI(QMatrix.random(4, np.random.default_rng(0)))


@given(st.integers(0, 2**32 - 1), quaternions)
def test_homomorphism_axioms(seed, q):
    rng = np.random.default_rng(seed)
    u, v = ALG.random_element(rng), ALG.random_element(rng)
    tol = 1e-9 * (1 + q.norm()) * (1 + op_norm(u)) * (1 + op_norm(v))
    for h in (PI, ID, BasisPermutation([2, 0, 3, 1])):
        assert h(u @ v).allclose(h(u) @ h(v), tol)
        assert h(q * u).allclose(q * h(u), tol) and h(u * q).allclose(h(u) * q, tol)
        assert h(u + v).allclose(h(u) + h(v), tol)
        assert h(QMatrix.identity(4)) == QMatrix.identity(4)


def test_projection_is_surjective_onto_block_diagonal(rng):
    D = ALG.element(QMatrix.random(2, rng), None, QMatrix.random(2, rng))
    assert PI(D) == D


def test_fredholm_element_examples(rng):
    U = upper(rng)
    assert is_fredholm_element(PI, QMatrix.identity(4))
    assert is_fredholm_element(PI, block(QMatrix.identity(2), U, QMatrix.identity(2)))
    assert not is_fredholm_element(PI, block(QMatrix.zeros(2), U, QMatrix.identity(2)))


def test_weyl_element_examples(rng):
    U = upper(rng)
    assert is_weyl_element(ID, QMatrix.identity(3))
    assert is_weyl_element(PI, block(QMatrix.random(2, rng), U, QMatrix.random(2, rng)))
    assert not is_weyl_element(PI, block(QMatrix.zeros(2), U, QMatrix.zeros(2)))
    assert not is_weyl_element(PI, block(QMatrix.diag([1, 0]), U, QMatrix.identity(2)))


def test_block_weyl_rule_matches_brute_force_search(rng):
    """v + c invertible for some c in ker iff both diagonal blocks are invertible (2x2 blocks)."""
    for trial in range(6):
        D1 = QMatrix.random(2, rng) if trial % 3 else QMatrix.diag([1, 0])
        D2 = QMatrix.random(2, rng) if trial % 2 else QMatrix.diag([0, J])
        v = block(D1, upper(rng), D2)
        found = any(is_invertible(v + ALG.random_kernel_element(rng, scale=s))[0]
                    for s in (0.0, 0.1, 1.0, 10.0) for _ in range(25))
        assert found == PI.is_weyl(v)


def test_unsupported_weyl():
    class Bare(Homomorphism):
        def __call__(self, v):
            return v

        def in_kernel(self, v, tol=1e-10):
            return False

    with pytest.raises(UnsupportedOperationError):
        is_weyl_element(Bare(), QMatrix.identity(2))
    with pytest.raises(UnsupportedOperationError):
        weyl_s_spectrum(Bare(), QMatrix.identity(2))


def test_remark_products_fredholm_imply_factors(rng):
    for _ in range(10):
        a, b = ALG.random_element(rng), ALG.random_element(rng)
        if PI.is_fredholm(a @ b) and PI.is_fredholm(b @ a):
            assert PI.is_fredholm(a) and PI.is_fredholm(b)


# spectra ------------------------------------------------------------------------

def test_fredholm_spectrum_examples(rng):
    v = QMatrix.random(3, rng)
    assert fredholm_s_spectrum(ID, v).spheres == s_spectrum_exact(v)
    w = block(QMatrix.diag([I, I]), upper(rng), QMatrix.diag([J, J]))
    assert sphere_sets_match(fredholm_s_spectrum(PI, w).spheres, [Sphere(0, 1)])
    assert fredholm_s_spectrum(PI, ALG.random_kernel_element(rng)).spheres == [Sphere(0, 0)]


def test_weyl_spectrum_examples(rng):
    v = QMatrix.random(3, rng)
    assert sphere_sets_match(weyl_s_spectrum(ID, v).spheres, s_spectrum_exact(v))
    w = ALG.random_element(rng)
    assert sphere_sets_match(weyl_s_spectrum(PI, w).spheres, fredholm_s_spectrum(PI, w).spheres)


def test_sandwich_and_axial_symmetry(rng):
    for h, v in ((ID, QMatrix.random(3, rng)), (PI, ALG.random_element(rng))):
        assert sandwich_holds(h, v)
        rep = weyl_s_spectrum(h, v, samples=6)
        assert rep.extra["axial_disagreements"] == 0


def test_report_json_and_exclusions():
    rep = fredholm_s_spectrum(ID, QMatrix.diag([0, I, 2]))
    assert rep.to_json()["kind"] == "FredholmS" and rep.to_json()["excluded"] == "none"
    assert Sphere(0, 0) not in rep.excluding("zero").spheres
    assert Sphere(0, 1) not in [Sphere(round(s.re, 9), round(s.rad, 9)) for s in rep.excluding("Hp0").spheres]
    assert rep.excluding("Hp0").excluded == "Hp0"
    with pytest.raises(DomainError):
        rep.excluding("other")


def test_out_of_ball_fredholm(rng):
    v = ALG.random_element(rng)
    r = op_norm(PI(v)) * 1.01 + 1e-3
    for q in (Quaternion(r), Quaternion(0, 0, r), Quaternion(r * 0.6, r * 0.8)):
        assert out_of_ball_fredholm(PI, v, q)
    with pytest.raises(PreconditionError):
        out_of_ball_fredholm(PI, v, Quaternion(0.0))


# sum identity and union law ---------------------------------------------------------

def test_sum_identity_zero():
    z = QMatrix.zeros(3)
    assert verify_sum_identity(Quaternion(1, 1), z, z) == 0.0
    with pytest.raises(DomainError):
        verify_sum_identity(0.0, z, z)


def test_sum_identity_examples(rng):
    a, b = QMatrix.random(3, rng), QMatrix.random(3, rng)
    assert verify_sum_identity(Quaternion(1, 1), a, b) < 1e-9
    a, b = ALG.random_element(rng), ALG.random_element(rng)
    assert verify_sum_identity(J, a, b) < 1e-9
    assert verify_sum_identity_mirror(J, a, b) < 1e-9
    lhs, rhs = sum_identity_terms(K, a, b)
    assert lhs.allclose(rhs, 1e-9)


@given(matrices(n=3), matrices(n=3), quaternions.filter(lambda q: q.norm() > 0.2))
def test_sum_identity_property(a, b, q):
    scale = (1 + op_norm(a) + op_norm(b)) ** 4 * max(1.0, 1 / q.norm2(), q.norm2())
    assert verify_sum_identity(q, a, b) < 1e-9 * scale


def test_spherical_generic_matches_char_elem(rng):
    A, q = QMatrix.random(3, rng), Quaternion(0.5, -1, 2, 0.1)
    assert spherical(A, q).allclose(char_elem(A, q), 1e-12)


def test_union_law_blockwise_example():
    a = block(QMatrix.diag([I, I]), None, QMatrix.zeros(2))
    b = block(QMatrix.zeros(2), None, QMatrix.diag([J, J]))
    rep = theorem_sum_spectra(PI, a, b)
    assert rep.passed and sphere_sets_match(rep.lhs, [Sphere(0, 1)])


def test_union_law_zero_summand(rng):
    b = ALG.random_element(rng)
    rep = theorem_sum_spectra(PI, ALG.element(QMatrix.zeros(2), None, QMatrix.zeros(2)), b)
    assert rep.passed
    assert sphere_sets_match(rep.lhs, [s for s in fredholm_s_spectrum(PI, b).spheres if not s.is_zero()], 1e-7)


def test_union_law_precondition(rng):
    a, b = ALG.random_element(rng), ALG.random_element(rng)
    with pytest.raises(PreconditionError):
        theorem_sum_spectra(PI, a, b)


def test_union_law_identity_homomorphism_projectors(rng):
    from sspectrum.cli import _matrix_sum_pair
    a, b = _matrix_sum_pair(4, rng)
    assert (a @ b).norm() < 1e-10 and (b @ a).norm() < 1e-10
    rep = theorem_sum_spectra(ID, a, b, check_hypothesis=False)
    assert rep.passed


def test_counterexample_search_asserts_nothing(rng):
    reps = search_sum_counterexamples(PI, lambda r: (ALG.random_element(r), ALG.random_element(r)), 4, rng)
    assert len(reps) == 4 and all(r.details["hypothesis"] is False for r in reps)


# inverse, product, boundary ---------------------------------------------------------

def test_inverse_map_examples(rng):
    rep = inverse_spectral_map(ID, QMatrix.identity(2) * 2.0)
    assert rep.passed and sphere_sets_match(rep.lhs, [Sphere(0.5, 0)])
    rep = inverse_spectral_map(ID, QMatrix.diag([I, J]))
    assert rep.passed and sphere_sets_match(rep.lhs, [Sphere(0, 1)])
    with pytest.raises(DomainError):
        inverse_spectral_map(ID, QMatrix.diag([1, 0]))


def test_product_examples(rng):
    v1 = QMatrix.random(3, rng)
    v2 = QMatrix.random(3, rng)
    assert product_spectra_off_imaginaries(ID, v1, v1).passed
    # invertible factor: similarity, equality even on the purely imaginary spheres
    assert sphere_sets_match(s_spectrum_exact(v1 @ v2), s_spectrum_exact(v2 @ v1), 1e-7)


def test_boundary_spectrum_examples():
    rep = boundary_s_spectrum(QMatrix.diag([I, J]))
    assert rep.kind == "BoundaryS" and sphere_sets_match(rep.spheres, [Sphere(0, 1)])
    assert all(abs(c["delta"]) < 1e-6 for c in rep.extra["certificates"])
    assert boundary_s_spectrum(QMatrix.zeros(2)).spheres == [Sphere(0, 0)]
    with pytest.raises(UnsupportedOperationError):
        boundary_s_spectrum("not a matrix")


def test_boundary_sandwich_and_inversion(rng):
    v = QMatrix.random(3, rng)
    b = boundary_s_spectrum(v).spheres
    s = s_spectrum_exact(v)
    assert is_subset(s, b) and is_subset(b, s)  # finite sphere unions are their own boundary
    if is_invertible(v)[0]:
        assert inversion_of_boundary(v).passed
    assert inversion_of_boundary(QMatrix.diag([I, J])).passed
    assert inversion_of_boundary(QMatrix.identity(2) * 2.0).passed


def test_boundary_inclusion(rng):
    assert boundary_inclusion(ID, QMatrix.random(3, rng)).passed
    # block example with diagonal blocks carrying the whole spectrum
    v = block(QMatrix.diag([I, 2]), upper(rng), QMatrix.diag([J, K]))
    assert boundary_inclusion(PI, v).passed


def test_permutation_isomorphism_smoke(rng):
    P = BasisPermutation([2, 0, 1])
    v = QMatrix.random(3, rng)
    assert P.inverse_map(P(v)) == v
    assert sphere_sets_match(fredholm_s_spectrum(P, v).spheres, s_spectrum_exact(v), 1e-7)
    assert sphere_sets_match(weyl_s_spectrum(P, v).spheres, s_spectrum_exact(v), 1e-7)
    with pytest.raises(DomainError):
        BasisPermutation([0, 0, 1])


# approximate null sequences ------------------------------------------------------------

def test_null_sequence_diagonal():
    # R_i(diag(i, j)) = 0, so residuals vanish and only the bound carries the O(1/n) rate
    ns = [1, 2, 4, 8, 16, 32]
    qs = [Quaternion(0, 1 + 1 / n) for n in ns]
    seq = approx_null_sequence(QMatrix.diag([I, J]), I, qs)
    assert seq.left == [0.0] * 6 and seq.right == [0.0] * 6 and seq.within_bounds()
    assert seq.bounds[-2] / seq.bounds[-1] == pytest.approx(2.0, rel=0.05)
    # blow-up of the resolvent norm near the spectrum
    assert all(x < y for x, y in zip(seq.inverse_norms, seq.inverse_norms[1:]))

    seq = approx_null_sequence(QMatrix.diag([I, 2]), I, qs)
    assert seq.within_bounds()
    assert all(x > y for x, y in zip(seq.left, seq.left[1:]))
    assert seq.left[-2] / seq.left[-1] == pytest.approx(2.0, rel=0.05)
    expected = [5 * (q.norm2() - 1) / (4 + q.norm2()) for q in qs]
    assert seq.left == pytest.approx(expected, rel=1e-9)


def test_null_sequence_zero_matrix():
    ns = (1, 2, 4, 8)
    seq = approx_null_sequence(QMatrix.zeros(2), 0.0, [1.0 / n for n in ns])
    assert seq.left == [0.0] * 4  # R_0(0) = 0
    assert seq.bounds == pytest.approx([2.0 / n ** 2 for n in ns])


def test_null_sequence_errors():
    a = QMatrix.diag([I, J])
    with pytest.raises(PreconditionError):
        approx_null_sequence(a, 3.0, [Quaternion(3.1)])
    with pytest.raises(SpectralPointError):
        approx_null_sequence(a, I, [K])


def test_null_sequence_random_boundary_points(rng):
    a = QMatrix.random(3, rng)
    s = s_spectrum_exact(a)[0]
    p = sample_sphere(s, 3)[2]
    qs = [Quaternion(p.re, p.x * (1 + t), p.y * (1 + t), p.z * (1 + t)) for t in (0.1, 0.03, 0.01, 0.003)]
    seq = approx_null_sequence(a, p, qs)
    assert seq.within_bounds()
    assert seq.left[-1] < seq.left[0] and seq.right[-1] < seq.right[0]
