//! Bayesian optimization of a noisy quadratic: the upper-confidence
//! rule balances exploring the domain with exploiting the peak, and
//! the hyperparameters refit online once enough data has arrived.
//!
//! Run with: cargo run --example bayesopt_quadratic

use gazetrack::bayesopt::{
    ucb_acquire, ActionDomain, GpHyperparams, GpModel, HyperPriors, DEFAULT_UCB_DELTA,
};
use gazetrack::rng::stream_rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let domain = ActionDomain::centered(8.0);
    let truth = |p: [f64; 2]| 1.0 - ((p[0] - 2.0).powi(2) + (p[1] + 3.0).powi(2)) / 80.0;
    let mut rng = stream_rng(11, "example/bayesopt");
    let noise = Normal::new(0.0, 0.05).unwrap();

    let mut model = GpModel::new(GpHyperparams {
        signal_variance: 0.5,
        noise_variance: 0.05,
        length_scales: [4.0, 4.0],
    })
    .unwrap();
    let priors = HyperPriors::for_domain(&domain);
    let warmup = 8;

    println!("noisy quadratic peaking at (2, -3); 30 rounds of UCB\n");
    for t in 1..=30 {
        let point = ucb_acquire(&model, &domain, t, DEFAULT_UCB_DELTA, 200);
        let observed = truth(point) + noise.sample(&mut rng);
        model.observe(point, observed).unwrap();
        if model.len() >= warmup && (model.len() - warmup) % 5 == 0 {
            model.refit(&priors, warmup);
        }
        if t % 5 == 0 {
            let (best_point, best_value) = model.incumbent().unwrap();
            println!(
                "t={t:2}: acquired ({:6.2}, {:6.2}), incumbent ({:5.2}, {:5.2}) at {best_value:.3}",
                point[0], point[1], best_point[0], best_point[1]
            );
        }
    }

    let (best_point, _) = model.incumbent().unwrap();
    let gap = ((best_point[0] - 2.0).powi(2) + (best_point[1] + 3.0).powi(2)).sqrt();
    println!("\nincumbent is {gap:.2} away from the true peak");
    let h = model.hyper();
    println!(
        "fitted hyperparameters: signal {:.3}, noise {:.4}, lengths ({:.2}, {:.2})",
        h.signal_variance, h.noise_variance, h.length_scales[0], h.length_scales[1]
    );
}
