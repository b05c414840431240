//! Hedge and EXP3 on a fixed reward profile: both concentrate on the
//! best action, Hedge faster because it sees every arm's reward.
//!
//! Run with: cargo run --example bandit_policies

use gazetrack::policies::{
    exp3_gamma, exp3_policy, exp3_update, hedge_gamma, hedge_policy, hedge_update,
    sample_index, DiscreteActionSet, Exp3DivideBy, Exp3State, HedgeState,
};
use gazetrack::rng::stream_rng;

fn main() {
    let actions = DiscreteActionSet::grid(3, 8.0);
    let k = actions.len();
    let horizon = 200;
    // A fixed profile peaking at the grid centre.
    let reward = |a: usize| -> f64 {
        let o = actions.offset(a);
        let d2 = o[0] * o[0] + o[1] * o[1];
        (-d2 / 64.0).exp()
    };
    let best = (0..k).max_by(|a, b| reward(*a).total_cmp(&reward(*b))).unwrap();
    println!("grid of {k} gazes; the most rewarding is index {best} at {:?}\n", actions.offset(best));

    let mut rng = stream_rng(3, "example/bandits");
    let mut hedge = HedgeState::new(k, hedge_gamma(k, horizon));
    let mut exp3 = Exp3State::new(k, exp3_gamma(k, horizon));
    let mut hedge_total = 0.0;
    let mut exp3_total = 0.0;

    for t in 1..=horizon {
        // Hedge observes the full reward vector.
        let p = hedge_policy(&hedge);
        hedge_total += reward(sample_index(&p, &mut rng));
        let all: Vec<f64> = (0..k).map(reward).collect();
        hedge = hedge_update(&hedge, &all).unwrap();

        // EXP3 observes only the sampled arm.
        let p = exp3_policy(&exp3);
        let chosen = sample_index(&p, &mut rng);
        let r = reward(chosen);
        exp3_total += r;
        exp3 = exp3_update(&exp3, chosen, r, Exp3DivideBy::Sampled).unwrap();

        if t % 50 == 0 {
            let ph = hedge_policy(&hedge);
            let pe = exp3_policy(&exp3);
            println!(
                "t={t:3}  hedge p(best)={:.3}  exp3 p(best)={:.3}",
                ph[best], pe[best]
            );
        }
    }

    let oracle = horizon as f64 * reward(best);
    println!("\ncumulative reward: hedge {hedge_total:.1}, exp3 {exp3_total:.1}, oracle {oracle:.1}");
    println!("regret: hedge {:.1}, exp3 {:.1}", oracle - hedge_total, oracle - exp3_total);
}
