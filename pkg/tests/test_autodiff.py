import numpy as np
import pytest
import scipy.sparse as sp

from motifgcl import autodiff as ad
from motifgcl.autodiff import Tape
from motifgcl.errors import ContractViolation, NumericError

from oracles import central_difference, max_relative_error


def leaf_env(rng, shapes):
    """(tape, values dict, leaves dict) for gradient checks."""
    tape = Tape()
    values = {name: rng.normal(size=shape) for name, shape in shapes.items()}
    leaves = {name: tape.leaf(values[name]) for name in shapes}
    return tape, values, leaves


class TestForwardExamples:
    def test_matmul_identity(self):
        tape = Tape()
        x = tape.leaf(np.array([[1.0, 2.0], [3.0, 4.0]]))
        eye = tape.constant(np.eye(2))
        out = ad.matmul(eye, x)
        assert np.array_equal(out.value, x.value)
        tape.backward(ad.total_sum(out))
        assert np.array_equal(x.grad, np.ones((2, 2)))

    def test_sum_grad_is_ones(self):
        tape = Tape()
        w = tape.leaf(np.arange(4.0).reshape(2, 2))
        tape.backward(ad.total_sum(w))
        assert np.array_equal(w.grad, np.ones((2, 2)))

    def test_prelu_definition(self):
        tape = Tape()
        x = tape.leaf(np.array([[-2.0]]))
        slope = tape.leaf(np.array([[0.25]]))
        out = ad.prelu(x, slope)
        assert out.value[0, 0] == -0.5
        tape.backward(ad.total_sum(out))
        assert x.grad[0, 0] == 0.25          # d/dx = slope on the negative side
        assert slope.grad[0, 0] == -2.0      # d/dslope = x

    def test_row_l2_normalize_values(self):
        tape = Tape()
        x = tape.leaf(np.array([[3.0, 4.0]]))
        out = ad.row_l2_normalize(x)
        assert np.allclose(out.value, [[0.6, 0.8]])

    def test_mean_and_rowwise_dot(self):
        tape = Tape()
        a = tape.leaf(np.array([[1.0, 2.0], [3.0, 4.0]]))
        b = tape.constant(np.array([[1.0, 1.0], [1.0, 1.0]]))
        dots = ad.rowwise_dot(a, b)
        assert np.allclose(dots.value, [[3.0], [7.0]])
        assert ad.mean(dots).value[0, 0] == 5.0

    def test_spmm_sparse_and_dense_agree(self):
        rng = np.random.default_rng(0)
        dense = rng.normal(size=(4, 4)) * (rng.random((4, 4)) < 0.5)
        x_val = rng.normal(size=(4, 3))
        tape = Tape()
        x1, x2 = tape.leaf(x_val), tape.leaf(x_val)
        out_sparse = ad.spmm(sp.csr_matrix(dense), x1)
        out_dense = ad.spmm(dense, x2)
        assert np.allclose(out_sparse.value, out_dense.value)
        tape.backward(ad.total_sum(ad.add(out_sparse, out_dense)))
        assert np.allclose(x1.grad, x2.grad)


class TestGradientChecks:
    @pytest.mark.parametrize("seed", range(3))
    def test_every_op_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        struct = sp.csr_matrix(rng.normal(size=(5, 5)) * (rng.random((5, 5)) < 0.4))

        def build(values):
            tape = Tape()
            a = tape.leaf(values["a"])
            b = tape.leaf(values["b"])
            w = tape.leaf(values["w"])
            bias = tape.leaf(values["bias"])
            slope = tape.leaf(values["slope"])
            h = ad.prelu(ad.add_bias(ad.matmul(a, w), bias), slope)
            h = ad.spmm(struct, h)
            h = ad.add(h, ad.scale(b, 0.7))
            sims = ad.rowwise_dot(ad.row_l2_normalize(h),
                                  ad.row_l2_normalize(ad.transpose(ad.matmul(ad.transpose(b), tape.constant(np.eye(5))))))
            return tape, ad.scale(ad.mean(sims), -1.0), {"a": a, "b": b, "w": w,
                                                         "bias": bias, "slope": slope}

        values = {
            "a": rng.normal(size=(5, 4)),
            "b": rng.normal(size=(5, 3)) + 0.5,
            "w": rng.normal(size=(4, 3)),
            "bias": rng.normal(size=(1, 3)),
            "slope": np.array([[0.25]]),
        }
        tape, loss, leaves = build(values)
        tape.backward(loss)
        analytic = {k: t.grad for k, t in leaves.items()}

        def f():
            _, loss2, _ = build(values)
            return float(loss2.value[0, 0])

        numeric = central_difference(f, values)
        assert max_relative_error(analytic, numeric) < 1e-4

    def test_cross_entropy_diag_gradient(self):
        rng = np.random.default_rng(9)
        values = {"s": rng.normal(size=(6, 6))}

        def build():
            tape = Tape()
            s = tape.leaf(values["s"])
            return tape, ad.cross_entropy_diag(s), s

        tape, loss, s = build()
        tape.backward(loss)

        def f():
            return float(build()[1].value[0, 0])

        numeric = central_difference(f, values)
        assert max_relative_error({"s": s.grad}, numeric) < 1e-4

    def test_row_l2_normalize_gradient(self):
        rng = np.random.default_rng(3)
        values = {"x": rng.normal(size=(4, 5)) + 0.3}

        def build():
            tape = Tape()
            x = tape.leaf(values["x"])
            return tape, ad.mean(ad.row_l2_normalize(x)), x

        tape, loss, x = build()
        tape.backward(loss)
        numeric = central_difference(lambda: float(build()[1].value[0, 0]), values)
        assert max_relative_error({"x": x.grad}, numeric) < 1e-4


class TestBackwardContract:
    def test_double_backward_rejected(self):
        tape = Tape()
        w = tape.leaf(np.ones((2, 2)))
        loss = ad.total_sum(w)
        tape.backward(loss)
        with pytest.raises(ContractViolation, match="twice"):
            tape.backward(loss)

    def test_non_scalar_loss_rejected(self):
        tape = Tape()
        w = tape.leaf(np.ones((2, 2)))
        with pytest.raises(ContractViolation, match="scalar"):
            tape.backward(w)

    def test_unreachable_parameter_has_zero_grad(self):
        tape = Tape()
        used = tape.leaf(np.ones((2, 2)))
        unused = tape.leaf(np.ones((3, 3)))
        tape.backward(ad.total_sum(used))
        assert np.array_equal(unused.grad, np.zeros((3, 3)))

    def test_mixed_tapes_rejected(self):
        t1, t2 = Tape(), Tape()
        a = t1.leaf(np.ones((2, 2)))
        b = t2.leaf(np.ones((2, 2)))
        with pytest.raises(ContractViolation, match="tapes"):
            ad.add(a, b)

    def test_shape_mismatch_rejected(self):
        tape = Tape()
        a = tape.leaf(np.ones((2, 2)))
        b = tape.leaf(np.ones((3, 2)))
        with pytest.raises(ContractViolation):
            ad.add(a, b)

    def test_nan_detected_with_op_identity(self):
        tape = Tape()
        a = tape.leaf(np.array([[np.inf]]))
        b = tape.leaf(np.array([[-np.inf]]))
        with np.errstate(invalid="ignore"), pytest.raises(NumericError, match="add"):
            ad.add(a, b)


class TestStationarity:
    def test_cosine_loss_gradient_vanishes_at_alignment(self):
        # -cos(p, q) with p equal to a normalized q sits at a stationary point
        rng = np.random.default_rng(4)
        q_val = rng.normal(size=(3, 4))
        q_val /= np.linalg.norm(q_val, axis=1, keepdims=True)
        tape = Tape()
        p = tape.leaf(q_val.copy())
        q = tape.constant(q_val)
        loss = ad.scale(ad.mean(ad.rowwise_dot(ad.row_l2_normalize(p),
                                               ad.row_l2_normalize(q))), -1.0)
        assert loss.value[0, 0] == pytest.approx(-1.0, abs=1e-9)
        tape.backward(loss)
        assert np.max(np.abs(p.grad)) < 1e-9

    def test_determinism_bitwise(self):
        def run():
            rng = np.random.default_rng(8)
            tape = Tape()
            a = tape.leaf(rng.normal(size=(6, 5)))
            w = tape.leaf(rng.normal(size=(5, 5)))
            s = tape.leaf(np.array([[0.25]]))
            loss = ad.mean(ad.prelu(ad.matmul(a, w), s))
            tape.backward(loss)
            return loss.value.copy(), a.grad.copy(), w.grad.copy()

        l1, ga1, gw1 = run()
        l2, ga2, gw2 = run()
        assert np.array_equal(l1, l2)
        assert np.array_equal(ga1, ga2)
        assert np.array_equal(gw1, gw2)
