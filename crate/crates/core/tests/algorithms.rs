mod common;

use cgb_core::adversary::{AttackConfig, AttackKind, AttackLedger};
use cgb_core::algorithms::{
    gamma_surrogate, run_gp_ucb, run_rgp_pe, run_rgp_pe_with, run_rgp_ucb, BetaSchedule, ConfidenceConfig,
    RgpPeConfig, UcbConfig, WidthMode,
};
use cgb_core::audit::{all_pass, RgpPeAudit, EPOCH_LENGTH};
use cgb_core::environment::{sample_gp_function, stream_rng, Environment, GroundTruth, GroundTruthKind, StreamRole};
use cgb_core::kernel::{Domain, KernelSpec};
use common::{se, Expanded};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid2(n: usize) -> Domain<f64> {
    Domain::grid(-5.0, 5.0, n, 2).unwrap()
}

fn pe_config(horizon: u64, psi: f64, conf: ConfidenceConfig<f64>) -> RgpPeConfig<f64> {
    RgpPeConfig {
        horizon,
        lambda: 1.0,
        eta: 2.0,
        psi,
        confidence: conf,
    }
}

fn practical(beta: f64, c: f64) -> ConfidenceConfig<f64> {
    ConfidenceConfig {
        beta: BetaSchedule::Constant(beta),
        width: WidthMode::Practical { b: 0.1 },
        c_known: c,
    }
}

#[test]
fn audit_catches_allocation_that_ignores_psi() {
    let k = KernelSpec::squared_exponential(0.5).unwrap();
    let d = grid2(10);
    let truth = sample_gp_function(&k, &d, 3).unwrap();
    let cfg = pe_config(4096, 0.5, practical(4.0, 0.0));

    let run = |broken: bool| {
        let mut env = Environment::new(truth.clone(), 0.02, stream_rng(7, StreamRole::Noise)).unwrap();
        let mut ledger = AttackLedger::new(AttackConfig::none()).unwrap();
        let mut hooks = RgpPeAudit::new(k, &d, 1.0, 2.0, 0.5, 4096);
        if broken {
            // every picked action gets a full l_h plays, whatever ψ is
            hooks = hooks.with_allocator(|s, _psi| s.support().into_iter().map(|x| (x, s.l_h)).collect());
        }
        run_rgp_pe_with(&cfg, &k, &d, &mut env, &mut ledger, &mut hooks).unwrap();
        hooks.finish().unwrap()
    };

    let good = run(false);
    assert!(all_pass(&good));
    let bad = run(true);
    let failing: Vec<_> = bad.iter().filter(|r| !r.pass).collect();
    assert!(!failing.is_empty());
    assert!(failing.iter().any(|r| r.lemma_id == EPOCH_LENGTH));
}

/// A function with RKHS norm exactly `b` on a 1-D grid.
fn rkhs_function(seed: u64, domain: &Domain<f64>, l: f64, b: f64) -> GroundTruth<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = se(l);
    let pts = domain.points();
    let alpha: Vec<f64> = pts.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let f: Vec<f64> = pts
        .iter()
        .map(|x| pts.iter().zip(&alpha).map(|(z, a)| a * k(x, z)).sum())
        .collect();
    let norm = f.iter().zip(&alpha).map(|(v, a)| v * a).sum::<f64>().sqrt();
    GroundTruth::from_values(GroundTruthKind::Analytic, f.iter().map(|v| v * b / norm).collect()).unwrap()
}

#[test]
fn true_argmax_survives_elimination_without_corruption() {
    let (l, b, sigma, delta) = (0.15, 1.0, 0.1, 0.1);
    let k = KernelSpec::squared_exponential(l).unwrap();
    let d = Domain::grid(0.0, 1.0, 10, 1).unwrap();
    let conf = ConfidenceConfig {
        beta: BetaSchedule::FiniteDomain {
            b_norm: b,
            noise_sd: sigma,
            delta,
            n_actions: 10,
        },
        width: WidthMode::Theoretical,
        c_known: 0.0,
    };
    let cfg = pe_config(512, 0.5, conf);
    let runs = 200;
    let mut kept = 0;
    for seed in 0..runs {
        let truth = rkhs_function(seed, &d, l, b);
        let best = truth.argmax();
        let mut env = Environment::new(truth, sigma, stream_rng(seed, StreamRole::Noise)).unwrap();
        let mut ledger = AttackLedger::new(AttackConfig::none()).unwrap();
        let trace = run_rgp_pe(&cfg, &k, &d, &mut env, &mut ledger).unwrap();
        if trace.final_active().unwrap().contains(&best) {
            kept += 1;
        }
    }
    assert!(kept as f64 >= (1.0 - delta) * runs as f64, "kept {kept}/{runs}");
}

fn ucb(horizon: u64, c: f64) -> UcbConfig<f64> {
    UcbConfig {
        horizon,
        lambda: 1.0,
        confidence: ConfidenceConfig {
            beta: BetaSchedule::SqrtLog { scale: 0.5 },
            width: WidthMode::Practical { b: 0.1 },
            c_known: c,
        },
    }
}

#[test]
fn robust_ucb_with_zero_budget_is_plain_ucb() {
    let k = KernelSpec::squared_exponential(0.5).unwrap();
    let d = grid2(6);
    for seed in 0..5 {
        let truth = sample_gp_function(&k, &d, seed).unwrap();
        let trace = |robust: bool| {
            let mut env = Environment::new(truth.clone(), 0.02, stream_rng(seed, StreamRole::Noise)).unwrap();
            let mut ledger = AttackLedger::new(AttackConfig::none()).unwrap();
            let f = if robust { run_rgp_ucb } else { run_gp_ucb };
            f(&ucb(600, 0.0), &k, &d, &mut env, &mut ledger).unwrap()
        };
        assert_eq!(trace(false).rows(), trace(true).rows());
    }
}

#[test]
fn every_attack_respects_the_budget() {
    let k = KernelSpec::squared_exponential(0.5).unwrap();
    let d = grid2(10);
    let truth = sample_gp_function(&k, &d, 0).unwrap();
    let region = cgb_core::adversary::Region::parse("x1<=x2", &d).unwrap();
    let kinds = [
        AttackKind::Clipping,
        AttackKind::AggSub,
        AttackKind::TopK(3),
        AttackKind::TopK(5),
        AttackKind::Flip,
    ];
    for kind in kinds {
        for budget in [0.3, 5.0, 50.0] {
            let attack = AttackConfig::new(kind, budget).with_region(region.clone());
            let mut env = Environment::new(truth.clone(), 0.02, stream_rng(1, StreamRole::Noise)).unwrap();
            let mut ledger = AttackLedger::new(attack).unwrap();
            run_rgp_pe(&pe_config(3000, 0.5, practical(4.0, budget)), &k, &d, &mut env, &mut ledger).unwrap();
            let total: f64 = ledger.log().iter().map(|r| r.c.abs()).sum();
            assert!(total <= budget, "{kind:?} C={budget}: {total}");
            assert_eq!(total, ledger.spent());
            if ledger.demand() > budget {
                assert!(budget - total <= budget * f64::EPSILON, "{kind:?} C={budget}: {total}");
            }
        }
    }
}

/// `½ ln det(I + λ⁻¹K)` of a sequence, from the expanded matrix.
fn sequence_gain(domain: &Domain<f64>, l: f64, lambda: f64, seq: &[usize]) -> f64 {
    Expanded {
        xs: seq.iter().map(|&i| domain.point(i).to_vec()).collect(),
        ys: vec![0.0; seq.len()],
        lambda,
    }
    .info_gain(&se(l))
}

#[test]
fn gamma_surrogate_is_near_optimal_on_small_domains() {
    let factor = 1.0 - (-1f64).exp();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = rng.random_range(2..=4);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let d = Domain::new(pts).unwrap();
        let l = rng.random_range(0.2..1.0);
        let lambda = rng.random_range(0.2..2.0);
        let len = n + 1;
        let k = KernelSpec::squared_exponential(l).unwrap();
        let g = gamma_surrogate(&k, &d, lambda, len as u64).unwrap();
        // every sequence of the same length, repeats allowed
        let mut best = 0f64;
        let total = n.pow(len as u32);
        for code in 0..total {
            let mut c = code;
            let seq: Vec<usize> = (0..len)
                .map(|_| {
                    let i = c % n;
                    c /= n;
                    i
                })
                .collect();
            best = best.max(sequence_gain(&d, l, lambda, &seq));
        }
        assert!(g <= best + 1e-10, "seed {seed}: {g} > {best}");
        assert!(g >= factor * best - 1e-10, "seed {seed}: {g} < {factor}·{best}");
    }
}
