//! Greedy choice quality across link-process parameters.
//!
//! Run with: cargo run --release --example drift_scan -- [trials]

use meshfwd::experiment::{compare_choices, ExperimentConfig};
use meshfwd::{LinkProcessConfig, RouterKind};

fn main() -> anyhow::Result<()> {
    let trials: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100);
    println!("dwell_ms drift_rate payload seed | ml_hit lo_hit | ml_delay lo_delay | ml_ok lo_ok | ml_hop lo_hop");
    for mean_dwell in [0.5, 1.0, 2.0] {
        for drift_rate in [0.5, 1.0] {
            for payload in [8.0] {
                for base_seed in [2017, 1, 2, 3] {
                    let config = ExperimentConfig {
                        payload,
                        base_seed,
                        link: LinkProcessConfig { mean_dwell, drift_rate, ..Default::default() },
                        ..Default::default()
                    };
                    let q = compare_choices(&config, trials)?;
                    let (ml, lo) = (q[&RouterKind::MlForwarding], q[&RouterKind::LastObservedGreedy]);
                    println!(
                        "{mean_dwell:>8} {drift_rate:>10} {payload:>7} {base_seed:>4} | {:.4} {:.4} | {:>8.3} {:>8.3} | {:>5} {:>5} | {:.4} {:.4}",
                        ml.hit_rate(),
                        lo.hit_rate(),
                        ml.mean_delivered_delay().unwrap_or(f64::NAN),
                        lo.mean_delivered_delay().unwrap_or(f64::NAN),
                        ml.delivered,
                        lo.delivered,
                        ml.mean_hop_delay().unwrap_or(f64::NAN),
                        lo.mean_hop_delay().unwrap_or(f64::NAN),
                    );
                }
            }
        }
    }
    Ok(())
}
