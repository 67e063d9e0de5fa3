//! CNN accuracy for each input feature and Mel trim level, trained on Data1.
//!
//! ```bash
//! cargo run --release --example feature_comparison -- [epochs] [seeds]
//! ```

use melforce::checkpoint::ModelKind;
use melforce::experiment::{run_grid, Column, ExperimentConfig};
use melforce::FeatureKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(300);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let cfg = ExperimentConfig { epochs, seeds: (0..seeds).collect(), ..Default::default() };

    let mut columns = vec![Column::Lpf { cutoff_hz: cfg.lpf_cutoff_hz }];
    for feature in [FeatureKind::Raw, FeatureKind::Stft, FeatureKind::Mfcc, FeatureKind::MS_ALL, FeatureKind::MS_LC] {
        columns.push(Column::Model { model: ModelKind::Cnn, feature });
    }
    println!("{}", run_grid(&cfg, &columns, "features")?.render());
    println!("{}", run_grid(&cfg, &cfg.trim_columns(), "trim levels")?.render());
    Ok(())
}
