"""Unit tests for built-in codes."""

import numpy as np
import pytest

from relaygap.codes import (
    BivariatePoly,
    bb_code,
    bb_preset_code,
    build_preset,
    css_code,
    css_logicals,
    css_pairing,
    css_side_problem,
    repetition_phenom_problem,
    repetition_problem,
)
from relaygap.f2core import SparseBitMatrix, is_zero, kernel_basis, mat_mul, mat_vec_mul, rank


class TestRepetition:
    """Code-capacity and phenomenological repetition codes."""

    @pytest.mark.unit
    def test_rep3_matrices(self):
        prob = repetition_problem(3, 0.1)
        np.testing.assert_array_equal(prob.H.to_dense(), [[1, 1, 0], [0, 1, 1]])
        np.testing.assert_array_equal(prob.A.to_dense(), [[1, 0, 0]])

    @pytest.mark.unit
    def test_rep5_kernel(self):
        """Rank 4 and kernel spanned by the all-ones vector."""
        prob = repetition_problem(5, 0.1)
        assert rank(prob.H) == 4
        basis = kernel_basis(prob.H)
        assert len(basis) == 1
        np.testing.assert_array_equal(basis[0], np.ones(5))

    @pytest.mark.unit
    @pytest.mark.parametrize("n", [2, 4, 1])
    def test_bad_length(self, n):
        with pytest.raises(ValueError, match="odd"):
            repetition_problem(n, 0.1)

    @pytest.mark.unit
    def test_phenom_counts(self):
        """Two rounds of rep-3: 4 detectors, 6 data and 2 measurement faults."""
        prob = repetition_phenom_problem(3, 2, 0.01, 0.02)
        assert prob.num_detectors == 4
        assert prob.num_faults == 8
        assert prob.num_observables == 1
        assert sorted(set(prob.priors.tolist())) == [0.01, 0.02]

    @pytest.mark.unit
    def test_phenom_single_round(self):
        """One noiseless-measurement round is the code-capacity problem."""
        assert repetition_phenom_problem(3, 1, 0.1, 0.0).same_as(repetition_problem(3, 0.1))

    @pytest.mark.unit
    def test_phenom_measurement_fault_flips_two_rounds(self):
        """A measurement fault flips the same check in consecutive rounds."""
        prob = repetition_phenom_problem(3, 2, 0.01, 0.02)
        columns = prob.H.T
        measurement = [j for j in range(prob.num_faults) if prob.priors[j] == 0.02]
        assert [columns.row(j) for j in measurement] == [[0, 2], [1, 3]]


class TestBivariateBicycle:
    """Polynomials and BB codes."""

    @pytest.mark.unit
    def test_parse_and_render(self):
        poly = BivariatePoly.parse("x^3 + y + y^2")
        assert poly.terms == frozenset({(3, 0), (0, 1), (0, 2)})
        assert BivariatePoly.parse(str(poly)) == poly
        assert BivariatePoly.parse("1 + x*y^2").terms == frozenset({(0, 0), (1, 2)})

    @pytest.mark.unit
    @pytest.mark.parametrize("text", ["", "x + x", "x^3 + z"])
    def test_parse_errors(self, text):
        with pytest.raises(ValueError):
            BivariatePoly.parse(text)

    @pytest.mark.unit
    def test_single_term_code_commutes(self):
        """a = b = 1 still gives commuting checks."""
        one = BivariatePoly.parse("1")
        a = one.matrix(3, 3)
        h_x = SparseBitMatrix.from_dense(np.hstack([a, a]))
        h_z = SparseBitMatrix.from_dense(np.hstack([a.T, a.T]))
        assert is_zero(mat_mul(h_x, h_z.T))

    @pytest.mark.unit
    @pytest.mark.parametrize(("name", "n"), [("bb72", 72), ("bb144", 144)])
    def test_presets(self, name, n):
        """[[72,12]] and [[144,12]] with paired logicals."""
        code = bb_preset_code(name)
        assert code.n == n
        assert code.k == 12
        assert is_zero(mat_mul(code.H_X, code.H_Z.T))
        assert css_pairing(code) == SparseBitMatrix.identity(12)
        for i in range(code.k):
            assert not mat_vec_mul(code.H_Z, code.A_X.row_vector(i)).any()
            assert not mat_vec_mul(code.H_X, code.A_Z.row_vector(i)).any()

    @pytest.mark.unit
    def test_bb72_check_rank(self):
        code = bb_preset_code("bb72")
        assert rank(code.H_X) == 30
        assert rank(code.H_Z) == 30

    @pytest.mark.unit
    def test_explicit_construction_matches_preset(self):
        code = bb_code(6, 6, BivariatePoly.parse("x^3 + y + y^2"), BivariatePoly.parse("y^3 + x + x^2"))
        assert code.H_X == bb_preset_code("bb72").H_X


class TestCss:
    """Logical operators and side problems."""

    @pytest.mark.unit
    def test_repetition_as_css(self):
        """Empty H_X with adjacent-parity H_Z has one logical pair."""
        h_z = SparseBitMatrix.from_dense([[1, 1, 0], [0, 1, 1]])
        h_x = SparseBitMatrix.zeros(0, 3)
        a_x, a_z = css_logicals(h_x, h_z)
        assert a_x.rows == a_z.rows == 1
        assert not mat_vec_mul(h_z, a_x.row_vector(0)).any()
        assert int(a_x.row_vector(0) @ a_z.row_vector(0)) % 2 == 1

    @pytest.mark.unit
    def test_non_commuting_rejected(self):
        h = SparseBitMatrix.from_dense([[1, 0]])
        with pytest.raises(ValueError, match="not a CSS code"):
            css_code(h, h)

    @pytest.mark.unit
    def test_bb72_side_problem(self):
        """Side Z: 72 faults, 36 detectors, 12 observables."""
        prob = build_preset("bb72", 0.001)
        assert (prob.num_faults, prob.num_detectors, prob.num_observables) == (72, 36, 12)
        x_side = css_side_problem(bb_preset_code("bb72"), "X", 0.001)
        assert x_side.H == bb_preset_code("bb72").H_X

    @pytest.mark.unit
    def test_build_preset_errors(self):
        with pytest.raises(ValueError, match="Unknown preset"):
            build_preset("surface", 0.01)
        with pytest.raises(ValueError, match=r"\[0, 0.5\)"):
            build_preset("rep3", 0.7)
