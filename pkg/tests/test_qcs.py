import json

import numpy as np
import pytest

from onebit_feas.qcs import (
    FULL_RANK,
    RANK_ONE,
    IndexOutOfRange,
    InvalidSparsity,
    SensingEnsemble,
    apply_operator,
    build_instance,
    build_polyhedron,
    dump_instance,
    feasibility_margin,
    generate_ensemble,
    generate_instance,
    lifted_apply,
    lifted_row,
)


class TestGenerateInstance:
    def test_sparsity_exact(self):
        inst = generate_instance(64, 5, 30, RANK_ONE, seed=0)
        assert int(np.count_nonzero(inst.x_true)) == 5
        assert inst.y.shape == (30,)

    def test_dense_boundary(self):
        inst = generate_instance(6, 6, 10, FULL_RANK, seed=1)
        assert np.count_nonzero(inst.x_true) == 6

    def test_invalid_sparsity(self):
        for k in (0, 7):
            with pytest.raises(InvalidSparsity):
                generate_instance(6, k, 10, RANK_ONE, seed=0)

    def test_deterministic(self):
        a = generate_instance(12, 4, 20, RANK_ONE, seed=9)
        b = generate_instance(12, 4, 20, RANK_ONE, seed=9)
        np.testing.assert_array_equal(a.x_true, b.x_true)
        np.testing.assert_array_equal(a.y, b.y)

    def test_measurements_are_quadratic_forms(self):
        for kind in (RANK_ONE, FULL_RANK):
            inst = generate_instance(10, 3, 25, kind, seed=5)
            direct = np.array(
                [inst.x_true @ inst.ensemble.matrix(j) @ inst.x_true for j in range(25)]
            )
            np.testing.assert_allclose(inst.y, direct, rtol=1e-10)

    def test_forced_unit_signal_identity_sensing(self):
        # x = e1 with A_j = I gives y_j = 1 for every measurement
        n = 4
        ens = SensingEnsemble(
            n=n, m=3, kind=FULL_RANK, matrices=np.stack([np.eye(n)] * 3)
        )
        x = np.zeros(n)
        x[0] = 1.0
        inst = build_instance(x, ens)
        np.testing.assert_allclose(inst.y, np.ones(3))


class TestLiftedRow:
    def test_rank_one_kron(self):
        ens = SensingEnsemble(n=2, m=1, kind=RANK_ONE, vectors=np.array([[1.0, 2.0]]))
        np.testing.assert_array_equal(lifted_row(ens, 0), [1.0, 2.0, 2.0, 4.0])

    def test_full_rank_identity(self):
        ens = SensingEnsemble(n=2, m=1, kind=FULL_RANK,
                              matrices=np.eye(2)[None, :, :])
        np.testing.assert_array_equal(lifted_row(ens, 0), [1.0, 0.0, 0.0, 1.0])

    def test_dot_with_vec_identity_is_trace(self):
        ens = generate_ensemble(5, 20, FULL_RANK, seed=2)
        vec_eye = np.eye(5).flatten(order="F")
        for j in range(20):
            assert lifted_row(ens, j) @ vec_eye == pytest.approx(
                np.trace(ens.matrix(j)), rel=1e-12
            )

    def test_lifting_identity_random(self):
        # row . vec(X) == Tr(A X) for random pairs at n = 8
        rng = np.random.default_rng(0)
        for kind in (RANK_ONE, FULL_RANK):
            ens = generate_ensemble(8, 50, kind, seed=3)
            for j in range(50):
                x = rng.standard_normal((8, 8))
                lhs = lifted_row(ens, j) @ x.flatten(order="F")
                rhs = np.trace(ens.matrix(j) @ x)
                assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_index_out_of_range(self):
        ens = generate_ensemble(3, 4, RANK_ONE, seed=0)
        with pytest.raises(IndexOutOfRange):
            lifted_row(ens, 4)


class TestApplyOperator:
    @pytest.fixture()
    def poly(self):
        inst = generate_instance(6, 2, 15, RANK_ONE, seed=13)
        return inst, build_polyhedron(inst, m1=4, seed=1)

    def test_all_plus_signs(self, poly):
        inst, p = poly
        ell = 2
        object.__setattr__(p.record, "signs", np.abs(p.record.signs))
        xvec = np.random.default_rng(0).standard_normal(36)
        np.testing.assert_allclose(
            apply_operator(p, xvec, ell), lifted_apply(p.ensemble, xvec), rtol=1e-12
        )

    def test_all_minus_signs(self, poly):
        inst, p = poly
        object.__setattr__(p.record, "signs", -np.abs(p.record.signs))
        xvec = np.random.default_rng(1).standard_normal(36)
        np.testing.assert_allclose(
            apply_operator(p, xvec, 0), -lifted_apply(p.ensemble, xvec), rtol=1e-12
        )

    def test_single_row_sign_flip(self):
        ens = SensingEnsemble(n=2, m=1, kind=FULL_RANK,
                              matrices=np.array([[[1.0, 0.0], [0.0, 0.0]]]))
        inst = build_instance(np.array([1.0, 0.0]), ens)  # y = [1]
        p = build_polyhedron(inst, m1=1, dynamic_range=3.0, seed=0)
        object.__setattr__(p.record, "signs", np.array([[-1.0]]))
        xvec = np.array([1.0, 0.0, 0.0, 0.0])  # vec(e1 e1^T)
        np.testing.assert_allclose(apply_operator(p, xvec, 0), [-1.0])

    def test_block_out_of_range(self, poly):
        _, p = poly
        with pytest.raises(IndexOutOfRange):
            apply_operator(p, np.zeros(36), 4)

    def test_matches_materialized_rows(self, poly):
        _, p = poly
        rng = np.random.default_rng(5)
        xvec = rng.standard_normal(36)
        rows = np.stack([lifted_row(p.ensemble, j) for j in range(p.m)])
        for ell in range(p.m1):
            want = p.record.signs[:, ell] * (rows @ xvec)
            np.testing.assert_allclose(apply_operator(p, xvec, ell), want, rtol=1e-10)


class TestBuildPolyhedron:
    def test_single_inequality_contains_truth(self):
        inst = generate_instance(3, 1, 1, RANK_ONE, seed=2)
        p = build_polyhedron(inst, m1=1, seed=0)
        margin, violated = feasibility_margin(p, inst.lifted_truth_vec())
        assert margin >= 0.0
        assert violated == 0

    def test_truth_feasible_across_seed_grid(self):
        for seed in range(20):
            kind = RANK_ONE if seed % 2 == 0 else FULL_RANK
            inst = generate_instance(8, 3, 40, kind, seed=seed)
            p = build_polyhedron(inst, m1=6, seed=seed + 100)
            margin, violated = feasibility_margin(p, inst.lifted_truth_vec())
            assert margin >= 0.0
            assert violated == 0

    def test_flipped_sign_breaks_exactly_one_row(self):
        inst = generate_instance(5, 2, 12, RANK_ONE, seed=4)
        p = build_polyhedron(inst, m1=3, seed=7)
        signs = p.record.signs.copy()
        j, ell = 5, 1
        signs[j, ell] = -signs[j, ell]
        object.__setattr__(p.record, "signs", signs)
        object.__setattr__(p, "rhs", (signs * p.record.thresholds.gamma).flatten(order="F"))
        margin, violated = feasibility_margin(p, inst.lifted_truth_vec())
        assert violated == 1
        assert margin < 0.0

    def test_zero_point_violates_positive_threshold_rows(self):
        # row with sign +1 and threshold > 0: 0 >= tau fails
        inst = generate_instance(4, 2, 30, RANK_ONE, seed=6)
        p = build_polyhedron(inst, m1=2, seed=3)
        has_target_row = np.any((p.record.signs > 0) & (p.record.thresholds.gamma > 0))
        assert has_target_row
        margin, violated = feasibility_margin(p, np.zeros(16))
        assert violated > 0

    def test_explicit_margin_value(self):
        ens = SensingEnsemble(n=2, m=1, kind=FULL_RANK,
                              matrices=np.array([[[1.0, 0.0], [0.0, 0.0]]]))
        inst = build_instance(np.array([1.0, 0.0]), ens)
        p = build_polyhedron(inst, m1=1, dynamic_range=3.0, seed=0)
        object.__setattr__(p.record, "thresholds",
                           type(p.record.thresholds)(m=1, m1=1, gamma=np.array([[0.5]])))
        object.__setattr__(p.record, "signs", np.array([[1.0]]))
        xvec = np.array([0.7, 0.0, 0.0, 0.0])
        margin, violated = feasibility_margin(p, xvec)
        assert margin == pytest.approx(0.2)
        assert violated == 0

    def test_memory_stays_implicit_at_scale(self):
        # n=64, m=5000, m1=150: 750000 inequalities, but storage is only the
        # generating vectors, the sign/threshold matrices and the rhs
        inst = generate_instance(64, 5, 5000, RANK_ONE, seed=0)
        p = build_polyhedron(inst, m1=150, seed=1)
        assert p.n_rows == 750_000
        held = (
            p.ensemble.vectors.nbytes
            + p.record.signs.nbytes
            + p.record.thresholds.gamma.nbytes
            + p.rhs.nbytes
        )
        assert held < 60e6  # far below an explicit 750000 x 4096 operator
        assert p.ensemble.matrices is None

    def test_shrinkage_with_more_sequences(self):
        # prefix-nested thresholds: a probe excluded at m1 stays excluded at
        # larger m1, and more probes get excluded as sequences accumulate
        for seed in range(10):
            inst = generate_instance(8, 3, 40, RANK_ONE, seed=seed)
            rng = np.random.default_rng(seed + 999)
            probes = [
                inst.lifted_truth_vec() + 0.35 * rng.standard_normal(64)
                for _ in range(6)
            ]
            counts = []
            for m1 in (1, 4, 16, 64):
                p = build_polyhedron(inst, m1=m1, seed=seed + 17)
                counts.append(
                    sum(feasibility_margin(p, q)[1] > 0 for q in probes)
                )
            assert counts == sorted(counts)


class TestDumpInstance:
    def test_files_and_content(self, tmp_path):
        inst = generate_instance(6, 2, 9, RANK_ONE, seed=11)
        p = build_polyhedron(inst, m1=2, seed=5)
        dump_instance(inst, str(tmp_path), poly=p)
        meta = json.loads((tmp_path / "instance.json").read_text())
        assert meta["n"] == 6 and meta["k"] == 2 and meta["m"] == 9
        assert meta["m1"] == 2 and meta["kind"] == RANK_ONE
        x = np.zeros(6)
        x[meta["x_true_support"]] = meta["x_true_values"]
        np.testing.assert_array_equal(x, inst.x_true)
        y = np.loadtxt(tmp_path / "y.csv", delimiter=",")
        np.testing.assert_array_equal(y, inst.y)
        assert (tmp_path / "R.csv").exists() and (tmp_path / "Gamma.csv").exists()
