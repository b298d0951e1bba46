import itertools

import numpy as np
import pytest

from tshash.codegen import (
    BqpInstance,
    CodeMatrix,
    TrainConfig,
    assemble_bqp,
    box_relax,
    learn_codes,
    pairwise_objective,
    round_and_select,
    spectral_relax,
)
from tshash.data import PairSupervision
from tshash.loss import LOSS_TAGS, LossKind

import oracle


def random_bqp(rng, n, scale=1.0):
    a = rng.normal(scale=scale, size=(n, n))
    a = (a + a.T) / 2.0
    np.fill_diagonal(a, 0.0)
    return BqpInstance.from_dense(a)


def random_supervision(rng, n, pairs):
    entries = set()
    while len(entries) < pairs:
        a, b = rng.choice(n, size=2, replace=False)
        key = (min(a, b), max(a, b))
        entries.add(key)
    return PairSupervision.from_entries(
        n, [(a, b, float(rng.choice([-1.0, 1.0]))) for a, b in sorted(entries)]
    )


class TestCodeMatrix:
    def test_rejects_non_sign_entries(self):
        with pytest.raises(ValueError):
            CodeMatrix(np.array([[1, 0], [-1, 1]]))

    def test_immutable(self):
        cm = CodeMatrix(np.array([[1, -1]]))
        with pytest.raises(ValueError):
            cm.bits[0, 0] = -1


class TestBqpInstance:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            BqpInstance.from_dense(np.array([[0.0, 1.0], [2.0, 0.0]]))

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError):
            BqpInstance.from_dense(np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_quad_matches_dense_form(self):
        rng = np.random.default_rng(0)
        bqp = random_bqp(rng, 7)
        z = rng.normal(size=7)
        assert bqp.quad(z) == pytest.approx(z @ bqp.dense() @ z, rel=1e-12)

    def test_gershgorin_dominates_spectrum(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            bqp = random_bqp(rng, 9)
            radius = np.abs(np.linalg.eigvalsh(bqp.dense())).max()
            assert bqp.gershgorin_bound() >= radius - 1e-12


class TestAssemble:
    def test_empty_supervision_gives_zero_matrix(self):
        sup = PairSupervision(3)
        codes = CodeMatrix(np.ones((3, 2), dtype=np.int8))
        bqp = assemble_bqp(sup, codes, 0, LossKind("ksh", 2))
        assert bqp.matrix.nnz == 0

    def test_single_pair_worked_example(self):
        sup = PairSupervision.from_entries(2, [(0, 1, 1.0)])
        codes = CodeMatrix(np.ones((2, 1), dtype=np.int8))
        bqp = assemble_bqp(sup, codes, 0, LossKind("ksh", 1))
        dense = bqp.dense()
        assert dense[0, 1] == -2.0 and dense[1, 0] == -2.0

    def test_bit_index_out_of_range(self):
        sup = PairSupervision.from_entries(2, [(0, 1, 1.0)])
        codes = CodeMatrix(np.ones((2, 2), dtype=np.int8))
        with pytest.raises(ValueError):
            assemble_bqp(sup, codes, 2, LossKind("ksh", 2))

    def test_symmetry_on_random_supervision(self):
        rng = np.random.default_rng(3)
        sup = random_supervision(rng, 12, 20)
        codes = CodeMatrix(rng.choice([-1, 1], size=(12, 4)).astype(np.int8))
        bqp = assemble_bqp(sup, codes, 1, LossKind("ee", 4))
        dense = bqp.dense()
        assert np.array_equal(dense, dense.T)

    @pytest.mark.parametrize("tag", LOSS_TAGS)
    def test_quadratic_form_fidelity(self, tag):
        # z_k' A z_k plus the per-pair constants must equal the doubled sum
        # of restricted pair losses, for any column and any loss.
        rng = np.random.default_rng(17)
        for _ in range(15):
            n, m = 10, 5
            kind = LossKind(tag, m)
            sup = random_supervision(rng, n, 18)
            codes = CodeMatrix(rng.choice([-1, 1], size=(n, m)).astype(np.int8))
            k = int(rng.integers(m))
            bqp = assemble_bqp(sup, codes, k, kind)

            const = 0.0
            for a, b, y in zip(sup.i, sup.j, sup.y):
                sbar = int(codes.bits[a] @ codes.bits[b]) - int(codes.bits[a, k]) * int(codes.bits[b, k])
                hi = oracle.direct_pair_loss(tag, m, sbar + 1, float(y))
                lo = oracle.direct_pair_loss(tag, m, sbar - 1, float(y))
                const += hi + lo  # ordered-pair sum of c = (hi + lo) / 2
            direct = oracle.total_objective(tag, m, codes.bits, zip(sup.i, sup.j, sup.y))
            assert bqp.quad(codes.bits[:, k]) + const == pytest.approx(direct, abs=1e-8)


class TestSpectralRelax:
    def test_exchange_matrix(self):
        bqp = BqpInstance.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
        v = spectral_relax(bqp)
        assert np.sum(v**2) == pytest.approx(2.0, rel=1e-12)
        assert bqp.quad(v) == pytest.approx(-2.0, abs=1e-9)
        assert v[0] * v[1] < 0

    def test_zero_matrix(self):
        bqp = BqpInstance.from_dense(np.zeros((4, 4)))
        v = spectral_relax(bqp)
        assert np.sum(v**2) == pytest.approx(4.0, rel=1e-12)
        assert bqp.quad(v) == 0.0

    def test_monte_carlo_domination(self):
        rng = np.random.default_rng(5)
        bqp = random_bqp(rng, 10)
        v = spectral_relax(bqp)
        base = bqp.quad(v)
        for _ in range(1000):
            u = rng.normal(size=10)
            u *= np.sqrt(10.0) / np.linalg.norm(u)
            assert base <= bqp.quad(u) + 1e-9

    def test_power_matches_dense(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            bqp = random_bqp(rng, 40)
            vd = spectral_relax(bqp, method="dense")
            vp = spectral_relax(bqp, method="power", seed=trial)
            assert bqp.quad(vp) == pytest.approx(bqp.quad(vd), rel=1e-5, abs=1e-8)

    def test_nonconvergence_warns_and_falls_back(self):
        rng = np.random.default_rng(9)
        bqp = random_bqp(rng, 30)
        with pytest.warns(RuntimeWarning, match="did not converge"):
            v = spectral_relax(bqp, method="power", max_iters=1, seed=0)
        assert np.sum(v**2) == pytest.approx(30.0, rel=1e-12)

    def test_norm_constraint(self):
        rng = np.random.default_rng(11)
        for n in (1, 3, 17):
            bqp = random_bqp(rng, n) if n > 1 else BqpInstance.from_dense(np.zeros((1, 1)))
            v = spectral_relax(bqp)
            assert np.sum(v**2) == pytest.approx(float(n), rel=1e-12)


class TestBoxRelax:
    def test_two_variable_vertex_solution(self):
        bqp = BqpInstance.from_dense(np.array([[0.0, -1.0], [-1.0, 0.0]]))
        z = box_relax(bqp, np.array([0.1, 0.1]))
        assert bqp.quad(z) == pytest.approx(-2.0, abs=1e-4)
        assert np.all(np.abs(z) <= 1.0)

    def test_zero_matrix_returns_clamped_init(self):
        bqp = BqpInstance.from_dense(np.zeros((3, 3)))
        z = box_relax(bqp, np.array([2.0, -7.0, 0.25]))
        assert np.array_equal(z, [1.0, -1.0, 0.25])

    def test_objective_never_increases_vs_init(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            n = int(rng.integers(2, 12))
            bqp = random_bqp(rng, n)
            init = rng.normal(scale=2.0, size=n)
            z = box_relax(bqp, init)
            assert np.all(np.abs(z) <= 1.0 + 1e-15)
            assert bqp.quad(z) <= bqp.quad(np.clip(init, -1, 1)) + 1e-12

    def test_rejects_non_finite_init(self):
        bqp = BqpInstance.from_dense(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            box_relax(bqp, np.array([np.nan, 0.0]))


class TestRoundAndSelect:
    def test_sign_rounding_with_zero_positive(self):
        bqp = BqpInstance.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
        out = round_and_select(bqp, [np.array([0.0, -1.0])], np.array([1, 1]))
        assert out.tolist() == [1, -1]  # rounded candidate wins, sign(0) = +1

    def test_incumbent_wins_ties(self):
        bqp = BqpInstance.from_dense(np.array([[0.0, -1.0], [-1.0, 0.0]]))
        incumbent = np.array([-1, -1], dtype=np.int8)
        out = round_and_select(bqp, [np.array([0.9, 0.9])], incumbent)
        assert out.tolist() == [-1, -1]  # candidate (1,1) only ties

    def test_incumbent_kept_when_optimal(self):
        bqp = BqpInstance.from_dense(np.array([[0.0, -1.0], [-1.0, 0.0]]))
        out = round_and_select(bqp, [np.array([0.5, -0.5])], np.array([1, 1]))
        assert out.tolist() == [1, 1]

    def test_selected_dominates_all_candidates(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            n = int(rng.integers(2, 10))
            bqp = random_bqp(rng, n)
            cands = [rng.normal(size=n) for _ in range(3)]
            incumbent = rng.choice([-1, 1], size=n).astype(np.int8)
            out = round_and_select(bqp, cands, incumbent)
            out_val = bqp.quad(out)
            assert out_val <= bqp.quad(incumbent)
            for cand in cands:
                assert out_val <= bqp.quad(np.where(cand >= 0, 1, -1))

    def test_rejects_empty_candidates(self):
        bqp = BqpInstance.from_dense(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            round_and_select(bqp, [], np.array([1, 1]))


class TestLearnCodes:
    def test_single_similar_pair_agrees(self):
        sup = PairSupervision.from_entries(2, [(0, 1, 1.0)])
        cfg = TrainConfig(m=1, loss=LossKind("ksh", 1), seed=3)
        codes, trace = learn_codes(sup, cfg)
        assert codes.bits[0, 0] == codes.bits[1, 0]
        assert trace[-1].objective == 0.0

    def test_three_point_exhaustive_optimum(self):
        sup = PairSupervision.from_entries(3, [(0, 1, 1.0), (0, 2, -1.0), (1, 2, -1.0)])
        kind = LossKind("bre", 2)
        cfg = TrainConfig(m=2, loss=kind, seed=1)
        codes, trace = learn_codes(sup, cfg)
        pairs = [(0, 1, 1.0), (0, 2, -1.0), (1, 2, -1.0)]
        best = min(
            oracle.total_objective("bre", 2, np.array(combo).reshape(3, 2), pairs)
            for combo in itertools.product((-1, 1), repeat=6)
        )
        assert trace[-1].objective == pytest.approx(best, abs=1e-12)

    def test_empty_supervision_trace_is_zero(self):
        cfg = TrainConfig(m=3, loss=LossKind("ksh", 3), sweeps=2, seed=7)
        codes, trace = learn_codes(PairSupervision(5), cfg)
        assert codes.bits.shape == (5, 3)
        assert len(trace) == 6 and all(e.objective == 0.0 for e in trace)

    @pytest.mark.parametrize("tag", LOSS_TAGS)
    def test_trace_monotone_non_increasing(self, tag):
        rng = np.random.default_rng(29)
        for trial in range(3):
            n = 30
            sup = random_supervision(rng, n, 60)
            cfg = TrainConfig(m=8, loss=LossKind(tag, 8), sweeps=2, seed=trial)
            _, trace = learn_codes(sup, cfg)
            objs = [e.objective for e in trace]
            assert all(b <= a for a, b in zip(objs, objs[1:])), tag

    def test_trace_tail_matches_direct_objective(self):
        rng = np.random.default_rng(31)
        sup = random_supervision(rng, 20, 40)
        kind = LossKind("splh", 6)
        cfg = TrainConfig(m=6, loss=kind, seed=5)
        codes, trace = learn_codes(sup, cfg)
        direct = oracle.total_objective("splh", 6, codes.bits, zip(sup.i, sup.j, sup.y))
        assert trace[-1].objective == pytest.approx(direct, rel=1e-12)
        assert pairwise_objective(sup, codes, kind) == pytest.approx(direct, rel=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(37)
        sup = random_supervision(rng, 25, 50)
        cfg = TrainConfig(m=4, loss=LossKind("ee", 4), seed=23)
        a, trace_a = learn_codes(sup, cfg)
        b, trace_b = learn_codes(sup, cfg)
        assert np.array_equal(a.bits, b.bits)
        assert trace_a == trace_b

    def test_trace_covers_every_bit_update(self):
        rng = np.random.default_rng(41)
        sup = random_supervision(rng, 12, 20)
        cfg = TrainConfig(m=5, loss=LossKind("ksh", 5), sweeps=3, seed=0)
        _, trace = learn_codes(sup, cfg)
        assert [(e.sweep, e.bit) for e in trace] == [
            (s, k) for s in range(3) for k in range(5)
        ]
