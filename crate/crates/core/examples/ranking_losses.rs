//! The four pairwise ranking losses on a few prediction pairs, with their
//! gradients.
//!
//!     cargo run --example ranking_losses

use reltrav::losses::{consistency_loss, total_loss, LossConfig, PairLoss};
use reltrav::{Ordinal, TraversabilityMap};

fn main() {
    let cfg = LossConfig::default();
    let pairs = [
        (0.5, 0.5, Ordinal::Equal),
        (0.3, 0.5, Ordinal::Equal),
        (0.5, 0.5, Ordinal::BMore),
        (0.7, 0.3, Ordinal::BMore),
        (0.1, 0.8, Ordinal::BMore),
        (0.1, 0.8, Ordinal::AMore),
    ];
    println!("margin L = {}, snow clamp c = {}\n", cfg.margin, cfg.snow_clamp);
    println!("{:>5} {:>5} {:>3} | {:>22} {:>22} {:>22} {:>22}", "p_a", "p_b", "t", "rizz", "rizz_l1", "diw", "snow");
    for (pa, pb, t) in pairs {
        let cells: Vec<String> = PairLoss::ALL
            .iter()
            .map(|l| {
                let g = l.value_and_grad(pa, pb, t, &cfg);
                format!("{:.4} ({:+.3},{:+.3})", g.value, g.d_pa, g.d_pb)
            })
            .collect();
        println!("{pa:>5} {pb:>5} {:>3} | {}", t.to_string(), cells.join(" "));
    }

    // A satisfied inequality costs nothing under rizz but still pulls the
    // pair apart under diw.
    let (pa, pb) = (0.1, 0.9);
    println!(
        "\nsatisfied pair ({pa}, {pb}, t=1): rizz {:.4}, diw {:.4}",
        PairLoss::Rizz.value(pa, pb, Ordinal::BMore, &cfg),
        PairLoss::Diw.value(pa, pb, Ordinal::BMore, &cfg)
    );

    let student = TraversabilityMap::new(2, 2, vec![0.0; 4]).unwrap();
    let teacher = TraversabilityMap::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let cons = consistency_loss(&student, &teacher).unwrap();
    println!("consistency {cons}, total with acc 0.5 and lambda 1: {}", total_loss(0.5, cons, 1.0));
}
