//! Closed-loop grinding with a +2 N sensor offset.
//!
//! Trains a CNN on Data1 Mel features, then compares raw sensor feedback with
//! estimator feedback on a constant press and on the letter "A".
//!
//! ```bash
//! cargo run --release --example closed_loop_letter_a -- [epochs] [seeds]
//! ```

use melforce::control::{letter_a_path, press_path, run_closed_loop, FeedbackMode, LoopConfig, PathParams};
use melforce::experiment::train_column;
use melforce::plant::{generate_dataset, Split};
use melforce::{checkpoint::ModelKind, Estimator, FeatureKind, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);

    let data1 = generate_dataset(Scenario::Data1, 0)?;
    let train: Vec<_> = data1.split(Split::Train).collect();
    let ckpt = train_column(ModelKind::Cnn, FeatureKind::MS_LC, &train, epochs, 1e-3, 0)?;
    let mut estimator = Estimator::from_checkpoint(&ckpt)?;

    let params = PathParams::for_force(2.0, 10_000.0);
    let press = press_path(2.0, &params, 0.0, 6.0, [0.0, 0.0])?;
    for mode in [FeedbackMode::Raw, FeedbackMode::Estimator] {
        let cfg = LoopConfig { scenario: Scenario::Data2, feedback: mode, ..Default::default() };
        let est = (mode == FeedbackMode::Estimator).then_some(&mut estimator as &mut dyn melforce::control::ForceEstimator);
        let log = run_closed_loop(&press, &cfg, est)?;
        println!("press {mode}: steady true force {:.3} N", log.summary(1e-3, 2.0).steady_state_force);
    }

    let letter = letter_a_path(0.05, 2.0, &params)?;
    for seed in 0..seeds {
        let mut e = [0.0; 2];
        for (i, mode) in [FeedbackMode::Raw, FeedbackMode::Estimator].into_iter().enumerate() {
            let cfg = LoopConfig { scenario: Scenario::Data2, feedback: mode, seed, ..Default::default() };
            let est = (mode == FeedbackMode::Estimator).then_some(&mut estimator as &mut dyn melforce::control::ForceEstimator);
            e[i] = run_closed_loop(&letter, &cfg, est)?.summary(1e-3, 2.0).integrated_error;
        }
        println!("letter A seed {seed}: E_raw {:.3} N s, E_est {:.3} N s", e[0], e[1]);
    }
    Ok(())
}
