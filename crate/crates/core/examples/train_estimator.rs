//! Trains the Mel-feature CNN on Data1 and scores it on every scenario.
//!
//! ```bash
//! cargo run --release --example train_estimator -- [epochs] [checkpoint.json]
//! ```

use melforce::checkpoint::ModelKind;
use melforce::experiment::{rmse, train_column, Predictor};
use melforce::plant::{generate_dataset, Split};
use melforce::{Estimator, FeatureKind, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let out = args.next();

    let data1 = generate_dataset(Scenario::Data1, 0)?;
    let train: Vec<_> = data1.split(Split::Train).collect();
    let started = std::time::Instant::now();
    let ckpt = train_column(ModelKind::Cnn, FeatureKind::MS_LC, &train, epochs, 1e-3, 0)?;
    println!("trained {epochs} epochs in {:.1} s", started.elapsed().as_secs_f64());

    let pred = Predictor::Net(Box::new(Estimator::from_checkpoint(&ckpt)?));
    println!("Data1 train RMSE {:.3} N", rmse(&pred, &train)?);
    for s in Scenario::ALL {
        let test = if s == Scenario::Data1 { data1.clone() } else { generate_dataset(s, 0)? };
        println!("{s} test RMSE {:.3} N", rmse(&pred, &test.test())?);
    }
    if let Some(path) = out {
        ckpt.save(path.as_ref())?;
        println!("saved {path}");
    }
    Ok(())
}
