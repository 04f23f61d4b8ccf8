//! Scratch inspection of the N=10 linear steady state vs the census
//! prediction. Run with `cargo run --release --example debug_steady`.

use rydsim::census::{blockade_graph, enumerate_census};
use rydsim::geometry::{build_chain, interaction_matrix};
use rydsim::hamiltonian::SpinSystem;
use rydsim::statevec::{quench_evolve, steady_average, EvolveMethod, QuenchOptions};

fn main() {
    let geom = build_chain(10, 4.0, 180.0).unwrap();
    let graph = blockade_graph(&geom, 6.5).unwrap();
    let census = enumerate_census(&graph).unwrap();

    for variant in ["all pairs", "v12+v13", "v12 only"] {
        let base = interaction_matrix(&geom, 470.0).unwrap().with_v12_override(20.0).unwrap();
        let v = match variant {
            "all pairs" => base,
            "v12+v13" => base.truncated(2),
            _ => base.truncated(1),
        };
        let sys = SpinSystem::new(v, std::f64::consts::TAU, 0.0);

        let mut opts = QuenchOptions::new(6.0, 0.02, EvolveMethod::DenseEigen);
        opts.census = Some(&census);
        let trace = quench_evolve(&sys, &opts).unwrap();
        let ss = steady_average(&trace, 2.0).unwrap();
        let predicted = census.equilibrium_distribution::<f64>();
        let tv: f64 = (0..ss.p_eq.len().max(predicted.len()))
            .map(|n| {
                (ss.p_eq.get(n).copied().unwrap_or(0.0) - predicted.get(n).copied().unwrap_or(0.0)).abs()
            })
            .sum::<f64>()
            / 2.0;
        let maxdev: f64 = (0..ss.p_eq.len().max(predicted.len()))
            .map(|n| {
                (ss.p_eq.get(n).copied().unwrap_or(0.0) - predicted.get(n).copied().unwrap_or(0.0)).abs()
            })
            .fold(0.0, f64::max);
        let cm2: f64 = ss.cm2_eq.as_ref().unwrap().iter().sum();
        println!(
            "{variant:9}: TV/2 = {tv:.4}, max|dP| = {maxdev:.4}, f_R_bar = {:.4}, census weight = {cm2:.4}",
            ss.f_r_bar
        );
        let d = census.d() as f64;
        let in_band = ss
            .cm2_eq
            .as_ref()
            .unwrap()
            .iter()
            .filter(|&&w| w >= 0.3 / d && w <= 3.0 / d)
            .count();
        println!("           cm2 in [0.3/D, 3/D]: {in_band}/{}", census.d());
        let nu = census.nu();
        for n in 1..=4 {
            let r = ss.p_eq[n - 1] / ss.p_eq[n];
            let theory = nu[n - 1] as f64 / nu[n] as f64;
            println!(
                "           r_{n} = {r:.4} vs nu ratio {theory:.4} ({:+.1}%)",
                100.0 * (r / theory - 1.0)
            );
        }
    }
}
