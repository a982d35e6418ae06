use olas_core::estimator::{estimate_confusion, estimate_prior, regularize_and_invertibility, unbiased_risk};
use olas_core::learners::{
    hedge_update, optimistic_hedge_update, prox_solve, Ensemble, EnsembleConfig, HintObjective, MetaRate,
    PoolVariant, ProxConfig, RoundContext, StepPool, Uogd,
};
use olas_core::model::{
    per_class_risks, project_to_domain, surrogate_loss, surrogate_loss_gradient, train_offline, OfflineTrainConfig,
};
use olas_core::prior::simplex_project;
use olas_core::rng::{substream, Substream};
use olas_core::shiftsim::{sample_batch, GaussianClassModel};
use olas_core::{ConfusionMatrix, DomainSpec, LabeledSample, ModelParams, OfflineData, PriorVector};
use proptest::prelude::*;

fn params_strategy(k: usize, d: usize, scale: f64) -> impl Strategy<Value = ModelParams> {
    prop::collection::vec(-scale..scale, k * (d + 1))
        .prop_map(move |w| ModelParams::from_weights(k, d, w).unwrap())
}

fn offline_strategy(k: usize, d: usize) -> impl Strategy<Value = OfflineData> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), k * 3).prop_map(move |rows| {
        let samples: Vec<_> = rows
            .into_iter()
            .enumerate()
            .map(|(i, features)| LabeledSample { features, label: i % k })
            .collect();
        OfflineData::new(&samples, k).unwrap()
    })
}

fn central_difference(f: impl Fn(&ModelParams) -> f64, w: &ModelParams, h: f64) -> Vec<f64> {
    let mut probe = w.clone();
    (0..w.as_slice().len())
        .map(|i| {
            let x = w.as_slice()[i];
            probe.as_mut_slice()[i] = x + h;
            let up = f(&probe);
            probe.as_mut_slice()[i] = x - h;
            let down = f(&probe);
            probe.as_mut_slice()[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na.max(nb) == 0.0 {
        0.0
    } else {
        diff / na.max(nb)
    }
}

proptest! {
    #[test]
    fn simplex_projection_is_idempotent_and_feasible(v in prop::collection::vec(-5.0f64..5.0, 2..8)) {
        let p = simplex_project(&v).unwrap();
        let s: f64 = p.as_slice().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
        let q = simplex_project(p.as_slice()).unwrap();
        for (a, b) in p.as_slice().iter().zip(q.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_projection_satisfies_kkt(v in prop::collection::vec(-5.0f64..5.0, 2..8)) {
        // Positive entries share one shift theta; zeroed entries lie below it.
        let p = simplex_project(&v).unwrap();
        let p = p.as_slice();
        let i = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        let theta = v[i] - p[i];
        for (x, y) in p.iter().zip(&v) {
            if *x > 1e-12 {
                prop_assert!((y - x - theta).abs() < 1e-9);
            } else {
                prop_assert!(*y <= theta + 1e-9);
            }
        }
    }

    #[test]
    fn hedge_weights_respond_monotonically(
        cum in prop::collection::vec(0.0f64..10.0, 2..6),
        bump in 0.01f64..5.0,
        eps in 0.01f64..2.0,
    ) {
        let p = hedge_update(&cum, eps).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut worse = cum.clone();
        worse[0] += bump;
        let q = hedge_update(&worse, eps).unwrap();
        prop_assert!(q[0] < p[0]);
        for i in 1..cum.len() {
            prop_assert!(q[i] > p[i]);
        }
        // A uniform hint shifts nothing.
        let h = vec![bump; cum.len()];
        let r = optimistic_hedge_update(&cum, &h, eps).unwrap();
        for (a, b) in p.iter().zip(&r) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn per_class_risk_is_convex_along_segments(
        data in offline_strategy(3, 2),
        a in params_strategy(3, 2, 2.0),
        b in params_strategy(3, 2, 2.0),
        lam in 0.0f64..1.0,
    ) {
        let mut mid = a.clone();
        mid.scale(lam);
        mid.axpy(1.0 - lam, &b);
        let ra = per_class_risks(&a, &data, false).unwrap().values;
        let rb = per_class_risks(&b, &data, false).unwrap().values;
        let rm = per_class_risks(&mid, &data, false).unwrap().values;
        for k in 0..3 {
            prop_assert!(rm[k] <= lam * ra[k] + (1.0 - lam) * rb[k] + 1e-10);
        }
    }

    #[test]
    fn surrogate_gradient_matches_differences(
        w in params_strategy(3, 4, 1.5),
        x in prop::collection::vec(-3.0f64..3.0, 4),
        y in 0usize..3,
    ) {
        let g = surrogate_loss_gradient(&w, &x, y).unwrap();
        let fd = central_difference(|p| surrogate_loss(p, &x, y).unwrap(), &w, 1e-5);
        prop_assert!(rel_err(g.as_slice(), &fd) < 1e-5);
    }

    #[test]
    fn unbiased_risk_gradient_matches_differences(
        data in offline_strategy(3, 2),
        w in params_strategy(3, 2, 1.5),
        raw in prop::collection::vec(-0.3f64..1.2, 3),
    ) {
        let raw = olas_core::RawPriorEstimate(raw);
        let pcr = per_class_risks(&w, &data, true).unwrap();
        let g = unbiased_risk(&raw, &pcr).unwrap().gradient.unwrap();
        let fd = central_difference(
            |p| unbiased_risk(&raw, &per_class_risks(p, &data, false).unwrap()).unwrap().value,
            &w,
            1e-5,
        );
        prop_assert!(rel_err(g.as_slice(), &fd) < 1e-5);
    }

    #[test]
    fn domain_projection_is_idempotent(w in params_strategy(2, 3, 10.0), r in 0.1f64..20.0) {
        let d = DomainSpec::new(r).unwrap();
        let p = project_to_domain(&w, &d);
        prop_assert!(p.norm() <= r * (1.0 + 1e-12));
        prop_assert!(project_to_domain(&p, &d).distance(&p) <= 1e-12 * r);
        if w.norm() <= r {
            prop_assert_eq!(p, w);
        }
    }

    #[test]
    fn prox_output_is_first_order_optimal(
        data in offline_strategy(2, 2),
        w_hat in params_strategy(2, 2, 1.0),
        h0 in 0.0f64..1.0,
        eta in 0.001f64..0.5,
    ) {
        let h = [h0, 1.0 - h0];
        let obj = HintObjective { hint: &h, offline: &data };
        let domain = DomainSpec::new(3.0).unwrap();
        let cfg = ProxConfig { tol: 1e-9, max_iters: 2000 };
        let out = prox_solve(&w_hat, &obj, eta, &domain, &cfg).unwrap();
        prop_assert!(out.objective <= out.start_objective + 1e-12);
        let (_, g) = data.weighted_risk(&out.w, &h, true).unwrap();
        let mut step = out.w.clone();
        step.axpy(-eta, &g.unwrap());
        let mut to_hat = out.w.clone();
        to_hat.axpy(-1.0, &w_hat);
        step.axpy(-1.0, &to_hat);
        let mapped = project_to_domain(&step, &domain);
        prop_assert!(mapped.distance(&out.w) <= 1e-6);
    }

    #[test]
    fn prior_solve_inverts_the_confusion_matrix(
        diag in prop::collection::vec(0.6f64..0.95, 3),
        mu in prop::collection::vec(0.05f64..1.0, 3),
    ) {
        // Columns of C sum to one; the expected histogram is C mu.
        let k = 3;
        let mut e = vec![0.0; 9];
        for j in 0..k {
            for i in 0..k {
                e[i * k + j] = if i == j { diag[j] } else { (1.0 - diag[j]) / 2.0 };
            }
        }
        let c = ConfusionMatrix::from_entries(k, e).unwrap();
        let s: f64 = mu.iter().sum();
        let mu: Vec<f64> = mu.iter().map(|m| m / s).collect();
        let hist = PriorVector::new(c.apply(&mu)).unwrap();
        let est = estimate_prior(&c, &hist).unwrap();
        for (a, b) in est.as_slice().iter().zip(&mu) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

struct Setup {
    offline: OfflineData,
    f0: ModelParams,
    domain: DomainSpec,
    confusion: ConfusionMatrix,
    model: GaussianClassModel,
}

impl Setup {
    fn new(seed: u64) -> Self {
        let model = GaussianClassModel::benchmark();
        let mut rng = substream(seed, Substream::Offline);
        let offline = OfflineData::new(&model.sample_balanced(300, &mut rng), 3).unwrap();
        let f0 = train_offline(&offline, &DomainSpec::new(100.0).unwrap(), &OfflineTrainConfig::default()).unwrap();
        let domain = DomainSpec::around(&f0);
        let confusion = regularize_and_invertibility(&estimate_confusion(&f0, &offline).unwrap(), 1e-3).unwrap();
        Self {
            offline,
            f0,
            domain,
            confusion,
            model,
        }
    }

    fn ctx(&self) -> RoundContext<'_> {
        RoundContext {
            f0: &self.f0,
            confusion: &self.confusion,
            offline: &self.offline,
            domain: &self.domain,
        }
    }

    fn batches(&self, t: usize, seed: u64) -> Vec<olas_core::Features> {
        let mut rng = substream(seed, Substream::Stream);
        let a = PriorVector::uniform(3).unwrap();
        let b = PriorVector::new(vec![0.8, 0.15, 0.05]).unwrap();
        (0..t)
            .map(|i| {
                let p = if (i / 10) % 2 == 0 { &a } else { &b };
                sample_batch(p, &self.model, 20, &mut rng).unwrap().features().clone()
            })
            .collect()
    }
}

fn ensemble(etas: Vec<f64>, variant: PoolVariant, rate: MetaRate, f0: &ModelParams) -> Ensemble {
    let cfg = EnsembleConfig {
        pool: StepPool::from_etas(etas, variant).unwrap(),
        meta_rate: rate,
        prox: ProxConfig::default(),
    };
    Ensemble::new(cfg, f0, None).unwrap()
}

#[test]
fn single_base_ensemble_matches_uogd() {
    let s = Setup::new(11);
    let ctx = s.ctx();
    let eta = 0.3;
    let mut u = Uogd::new(&s.f0, eta).unwrap();
    let mut e = ensemble(vec![eta], PoolVariant::Atlas, MetaRate::Fixed(0.7), &s.f0);
    for b in s.batches(200, 11) {
        let a = u.round(&ctx, &b).unwrap().deployed;
        let c = e.round(&ctx, &b).unwrap().deployed;
        for (x, y) in a.as_slice().iter().zip(c.as_slice()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn zero_hint_optimistic_ensemble_matches_plain() {
    let s = Setup::new(12);
    let ctx = s.ctx();
    let etas = vec![0.01, 0.02, 0.04, 0.08, 0.16];
    let rate = MetaRate::Fixed(0.05);
    let mut plain = ensemble(etas.clone(), PoolVariant::Atlas, rate, &s.f0);
    let mut opt = ensemble(etas, PoolVariant::AtlasAda, rate, &s.f0);
    for b in s.batches(200, 12) {
        let p = plain.round(&ctx, &b).unwrap();
        let o = opt.round(&ctx, &b).unwrap();
        for (x, y) in p.deployed.as_slice().iter().zip(o.deployed.as_slice()) {
            assert!((x - y).abs() <= 1e-12);
        }
        for (x, y) in p.weights.iter().zip(&o.weights) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn identical_bases_keep_uniform_weights() {
    let s = Setup::new(13);
    let ctx = s.ctx();
    let mut e = ensemble(vec![0.05, 0.05], PoolVariant::Atlas, MetaRate::Fixed(1.0), &s.f0);
    for b in s.batches(50, 13) {
        let out = e.round(&ctx, &b).unwrap();
        assert_eq!(out.weights, vec![0.5, 0.5]);
    }
}

#[test]
fn self_confident_rate_is_nonincreasing() {
    let s = Setup::new(14);
    let ctx = s.ctx();
    let mut e = ensemble(vec![0.01, 0.1, 1.0], PoolVariant::Atlas, MetaRate::SelfConfident, &s.f0);
    let mut last = f64::INFINITY;
    for b in s.batches(60, 14) {
        let out = e.round(&ctx, &b).unwrap();
        assert!(out.meta_rate <= last);
        last = out.meta_rate;
    }
    assert!(last < ((3f64).ln() + 2.0).sqrt());
}

#[test]
fn meta_regret_stays_within_its_bound() {
    let s = Setup::new(15);
    let ctx = s.ctx();
    let t = 300;
    let n = 4;
    let b_bound = 20.0;
    let sigma = s.confusion.min_singular();
    let eps = olas_core::learners::atlas_meta_rate(n, 3, t, b_bound, sigma);
    let mut e = ensemble(vec![0.02, 0.04, 0.08, 0.16], PoolVariant::Atlas, MetaRate::Fixed(eps), &s.f0);
    for b in s.batches(t, 15) {
        e.round(&ctx, &b).unwrap();
    }
    let bound = 2.0 * b_bound / sigma * (((n as f64).ln() + 2.0) * 3.0 * t as f64).sqrt();
    assert!(e.meta_regret() <= bound);
}

#[test]
fn risk_estimate_is_exact_in_expectation() {
    // With the offline set as the population, averaging the estimator over
    // every possible single-sample batch weighted by its probability gives
    // the true risk exactly.
    let s = Setup::new(16);
    let confusion = estimate_confusion(&s.f0, &s.offline).unwrap();
    let mu = [0.5, 0.3, 0.2];
    let mut w = s.f0.clone();
    w.scale(0.8);
    let pcr = per_class_risks(&w, &s.offline, false).unwrap();
    let truth: f64 = mu.iter().zip(&pcr.values).map(|(m, r)| m * r).sum();
    let counts = s.offline.class_counts().to_vec();
    let mut expected = 0.0;
    for (x, y) in s.offline.iter() {
        let batch = olas_core::Features::new(x.len(), x.to_vec()).unwrap();
        let hist = olas_core::estimator::predicted_histogram(&s.f0, &batch).unwrap();
        let raw = estimate_prior(&confusion, &hist).unwrap();
        expected += mu[y] / counts[y] as f64 * unbiased_risk(&raw, &pcr).unwrap().value;
    }
    assert!((expected - truth).abs() < 1e-10, "{expected} vs {truth}");
}
