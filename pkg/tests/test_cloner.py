"""Cloner pipeline: estimation grid, gain arithmetic, loss measurement."""

import math

import numpy as np
import pytest

from clonekit import (
    Bernoulli,
    ClonerConfig,
    GaussianLocation,
    Poisson,
    clone,
    clone_loss_discrete,
    estimate_theta,
    local_minimax_probe,
    stream,
    tv_isotropic,
)
from clonekit.cloner import _loss_replicates


class TestConfig:
    def test_splits(self):
        cfg = ClonerConfig(n=100, r=2.0, delta=0.05, epsilon=0.01, seed=1)
        assert cfg.n1 == 5 and cfg.n2 == 95 and cfg.rn == 200

    def test_ceiling_keeps_stage_one_alive(self):
        cfg = ClonerConfig(n=10, r=1.0, delta=0.001, epsilon=0.0, seed=1)
        assert cfg.n1 == 1 and cfg.n2 == 9

    def test_validation(self):
        with pytest.raises(ValueError):
            ClonerConfig(n=10, r=1.37, delta=0.1, epsilon=0.0, seed=1)  # rn not integer
        with pytest.raises(ValueError):
            ClonerConfig(n=10, r=0.5, delta=0.1, epsilon=0.0, seed=1)
        with pytest.raises(ValueError):
            ClonerConfig(n=10, r=2.0, delta=1.0, epsilon=0.0, seed=1)
        with pytest.raises(ValueError):
            ClonerConfig(n=2, r=2.0, delta=0.9, epsilon=0.0, seed=1)  # n2 = 0


class TestEstimateTheta:
    def test_bernoulli_on_grid(self):
        data = np.array([1, 1, 1, 1, 1, 1, 0, 0, 0])
        est = estimate_theta(Bernoulli(), data)
        assert est.theta_hat == pytest.approx(2 / 3)
        assert est.n_used == 9

    def test_poisson_on_grid(self):
        est = estimate_theta(Poisson(), np.array([2, 2, 2, 2]))
        assert est.theta_hat == pytest.approx(2.0)

    def test_grid_membership(self):
        for i in range(30):
            rng = stream(2, "grid", i)
            data = Bernoulli().sample(0.37, 50, rng)
            est = estimate_theta(Bernoulli(), data)
            step = 1 / math.sqrt(50)
            assert est.theta_hat / step == pytest.approx(round(est.theta_hat / step), abs=1e-9)
            assert 0.0 < est.theta_hat < 1.0

    def test_boundary_sample_stays_interior(self):
        est = estimate_theta(Bernoulli(), np.zeros(9, dtype=int))
        assert est.theta_hat == pytest.approx(1 / 3)
        est = estimate_theta(Bernoulli(), np.ones(9, dtype=int))
        assert est.theta_hat == pytest.approx(2 / 3)
        est = estimate_theta(Poisson(), np.zeros(4, dtype=int))
        assert est.theta_hat == pytest.approx(0.5)

    def test_tie_rounds_toward_floor(self):
        # mean 0.25 with n = 4 sits exactly between grid points 0 and 0.5
        est = estimate_theta(GaussianLocation(1.0), np.array([0.25, 0.25, 0.25, 0.25]))
        assert est.theta_hat == 0.0

    def test_root_n_consistency(self):
        for n1 in (100, 400):
            exceed = 0
            reps = 10_000
            for i in range(reps):
                rng = stream(3, "cons", n1, i)
                data = Bernoulli().sample(0.3, n1, rng)
                est = estimate_theta(Bernoulli(), data)
                if math.sqrt(n1) * abs(est.theta_hat - 0.3) > 3:
                    exceed += 1
            # MLE tail 2 Phi(-2.5 / sqrt(.21)) plus grid slack: ~ 5e-8
            assert exceed / reps < 1e-3


class TestClonePipeline:
    def test_frozen_estimate_r1_is_resampling_fixed_point(self):
        for family, theta in ((Bernoulli(), 0.3), (Poisson(), 2.0)):
            cfg = ClonerConfig(n=24, r=1.0, delta=0.05, epsilon=0.0, seed=4)
            for i in range(50):
                rng = stream(5, "fix", family.name, i)
                data = family.sample(theta, cfg.n, rng)
                rec = clone(family, data, cfg, rng, theta_hat=theta)
                assert rec.output.sum() == data.sum()
                assert not rec.clipped

    def test_frozen_estimate_r1_gaussian(self):
        fam = GaussianLocation(1.0)
        cfg = ClonerConfig(n=16, r=1.0, delta=0.1, epsilon=0.0, seed=4)
        rng = stream(6, "fixg")
        data = fam.sample(0.5, cfg.n, rng)
        rec = clone(fam, data, cfg, rng, theta_hat=0.5)
        assert rec.output.mean() == pytest.approx(data.mean(), rel=1e-12)

    def test_record_arithmetic_consistency(self):
        fam = Bernoulli()
        cfg = ClonerConfig(n=400, r=2.0, delta=0.05, epsilon=0.01, seed=7)
        rng = stream(7, "arith")
        data = fam.sample(0.3, cfg.n, rng)
        rec = clone(fam, data, cfg, rng)
        assert rec.output.size == cfg.rn
        # the target solves the affine score relation at the estimate
        back = fam.stat_from_score(
            rec.theta_hat, cfg.rn, fam.fisher(rec.theta_hat) * rec.amplified
        )
        assert rec.target_stat == pytest.approx(back, rel=1e-12)
        assert rec.target_stat == pytest.approx(
            cfg.rn * rec.theta_hat + math.sqrt(cfg.rn) * rec.amplified, rel=1e-10
        )
        assert abs(rec.output.sum() - rec.target_stat) <= 1.0

    def test_gain_centers_amplified_score(self):
        # frozen estimate at theta + h/sqrt(n): X mean is -sqrt(rn/n2) h
        fam, theta, h, reps = Bernoulli(), 0.5, 1.0, 10_000
        cfg = ClonerConfig(n=256, r=2.0, delta=0.25, epsilon=0.0, seed=8)
        frozen = theta + h / math.sqrt(cfg.n)
        xs = np.empty(reps)
        for i in range(reps):
            rng = stream(8, "gain", i)
            data = fam.sample(theta, cfg.n, rng)
            xs[i] = clone(fam, data, cfg, rng, theta_hat=frozen).amplified
        expected = -math.sqrt(cfg.rn / cfg.n) * h  # frozen mode scores on all n
        se = xs.std() / math.sqrt(reps)
        assert abs(xs.mean() - expected) < 4 * se

    def test_gaussian_output_mean_pinned_to_target(self):
        fam = GaussianLocation(1.0)
        cfg = ClonerConfig(n=400, r=2.0, delta=0.05, epsilon=0.01, seed=22)
        rng = stream(22, "gmean")
        data = fam.sample(1.0, cfg.n, rng)
        rec = clone(fam, data, cfg, rng)
        # the bridge construction pins the output mean at the real target
        assert rec.output.mean() == pytest.approx(rec.target_stat / cfg.rn, rel=1e-12)
        assert rec.output.size == cfg.rn

    def test_length_check(self):
        cfg = ClonerConfig(n=10, r=2.0, delta=0.2, epsilon=0.0, seed=9)
        with pytest.raises(ValueError):
            clone(Bernoulli(), np.ones(9, dtype=int), cfg, stream(0, "len"))


class TestCloneLoss:
    def test_fixed_point_loss_shrinks_with_reps(self):
        cfg = ClonerConfig(n=20, r=1.0, delta=0.05, epsilon=0.0, seed=10)
        small = clone_loss_discrete(Bernoulli(), 0.3, cfg, reps=500, theta_hat=0.3)
        large = clone_loss_discrete(Bernoulli(), 0.3, cfg, reps=20_000, theta_hat=0.3)
        assert large.loss < small.loss
        assert large.loss < 0.05  # plug-in sampling error only

    def test_bernoulli_loss_near_reference(self):
        cfg = ClonerConfig(n=400, r=2.0, delta=0.05, epsilon=0.01, seed=11)
        rep = clone_loss_discrete(Bernoulli(), 0.3, cfg, reps=4000)
        ref = tv_isotropic(2 / 0.95, 1).value
        assert abs(rep.loss - ref) < 0.08
        assert rep.ci_low < rep.loss < rep.ci_high
        assert rep.clip_rate < 0.01

    def test_workers_do_not_change_result(self):
        cfg = ClonerConfig(n=64, r=2.0, delta=0.1, epsilon=0.01, seed=12)
        a = clone_loss_discrete(Bernoulli(), 0.4, cfg, reps=400, workers=1)
        b = clone_loss_discrete(Bernoulli(), 0.4, cfg, reps=400, workers=3)
        assert a.loss == b.loss
        assert (a.ci_low, a.ci_high) == (b.ci_low, b.ci_high)

    def test_continuous_family_rejected(self):
        cfg = ClonerConfig(n=16, r=1.0, delta=0.1, epsilon=0.0, seed=13)
        with pytest.raises(ValueError):
            clone_loss_discrete(GaussianLocation(1.0), 0.0, cfg, reps=100)

    def test_insensitive_to_small_epsilon(self):
        # smoothing below 0.01 moves the loss within the confidence slack
        losses = []
        for eps in (0.01, 0.001):
            cfg = ClonerConfig(n=400, r=2.0, delta=0.05, epsilon=eps, seed=20)
            losses.append(clone_loss_discrete(Bernoulli(), 0.3, cfg, reps=4000))
        slack = sum((rep.ci_high - rep.ci_low) / 2 for rep in losses)
        assert abs(losses[0].loss - losses[1].loss) < slack

    def test_clip_alarm_logged(self, caplog):
        # oversized smoothing noise at tiny n pushes targets out of range
        cfg = ClonerConfig(n=2, r=1.0, delta=0.5, epsilon=5.0, seed=21)
        with caplog.at_level("WARNING", logger="clonekit.cloner"):
            rep = clone_loss_discrete(Bernoulli(), 0.5, cfg, reps=500, theta_hat=0.5)
        assert rep.clip_rate > 0.05
        assert "clip rate" in caplog.text

    def test_rao_blackwell_beats_plugin_variance(self):
        # paired streams: same replicate targets, RB pmf vs sampled counts
        fam, theta = Bernoulli(), 0.3
        rb_losses, plug_losses = [], []
        for trial in range(24):
            cfg = ClonerConfig(n=100, r=2.0, delta=0.05, epsilon=0.01,
                               seed=1000 + trial)
            reps = 500
            rep = clone_loss_discrete(fam, theta, cfg, reps=reps, bootstrap=0)
            rb_losses.append(rep.loss)
            atoms, weights, _ = _loss_replicates(
                (fam, theta, cfg, "", None, 0, reps)
            )
            target = fam.stat_pmf(theta, cfg.rn)
            rng = stream(cfg.seed, "plugin")
            pick = (rng.random(reps) < weights[:, 1]).astype(int)
            counts = atoms[np.arange(reps), pick]
            pmf = np.bincount(counts, minlength=cfg.rn + 1) / reps
            target_vec = np.zeros(max(cfg.rn + 1, target.support.max() + 1))
            target_vec[target.support] = target.mass
            pmf_padded = np.zeros_like(target_vec)
            pmf_padded[: cfg.rn + 1] = pmf
            plug_losses.append(np.abs(pmf_padded - target_vec).sum())
        assert np.var(rb_losses) < np.var(plug_losses)


class TestSequenceVsCountLevel:
    def test_brute_force_enumeration(self):
        # n = 2, rn = 4: the output sequence law is uniform given the count,
        # so the sequence-level L1 against the product law collapses exactly
        # to the count-level L1
        fam, theta = Bernoulli(), 0.3
        cfg = ClonerConfig(n=2, r=2.0, delta=0.5, epsilon=0.01, seed=14)
        rep_atoms, rep_weights, _ = _loss_replicates((fam, theta, cfg, "", None, 0, 4000))
        out_pmf = np.zeros(5)
        for (k0, k1), (w0, w1) in zip(rep_atoms, rep_weights):
            out_pmf[k0] += w0
            out_pmf[k1] += w1
        out_pmf /= out_pmf.sum()
        target = fam.stat_pmf(theta, 4)
        count_l1 = np.abs(out_pmf - target.mass).sum()
        seq_l1 = 0.0
        for bits in range(16):
            seq = [(bits >> i) & 1 for i in range(4)]
            k = sum(seq)
            comb = math.comb(4, k)
            seq_l1 += abs(out_pmf[k] / comb - theta**k * (1 - theta) ** (4 - k))
        assert seq_l1 == pytest.approx(count_l1, abs=1e-12)


class TestMinimaxProbe:
    def test_single_point_grid_matches_direct_loss(self):
        cfg = ClonerConfig(n=64, r=2.0, delta=0.1, epsilon=0.01, seed=15)
        probe = local_minimax_probe(Bernoulli(), 0.3, 0.0, [0.0], cfg, reps=300)
        direct = clone_loss_discrete(Bernoulli(), 0.3, cfg, reps=300, label="h0")
        assert probe.sup_loss == direct.loss

    def test_sup_dominates_center(self):
        cfg = ClonerConfig(n=64, r=2.0, delta=0.1, epsilon=0.01, seed=16)
        probe = local_minimax_probe(
            Bernoulli(), 0.3, 2.0, [-2.0, 0.0, 2.0], cfg, reps=300
        )
        center = probe.losses[1].loss
        assert probe.sup_loss >= center
        assert len(probe.losses) == 3

    def test_out_of_range_grid(self):
        cfg = ClonerConfig(n=64, r=2.0, delta=0.1, epsilon=0.01, seed=17)
        with pytest.raises(ValueError):
            local_minimax_probe(Bernoulli(), 0.3, 1.0, [2.0], cfg, reps=10)
