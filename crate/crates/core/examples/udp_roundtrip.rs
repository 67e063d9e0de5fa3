//! Estimator server and client over loopback UDP.
//!
//! A briefly trained model is served on an ephemeral port; the client sends
//! Data2 windows and checks each reply against the in-process estimate.
//!
//! ```bash
//! cargo run --release --example udp_roundtrip
//! ```

use melforce::checkpoint::ModelKind;
use melforce::experiment::train_column;
use melforce::plant::{generate_dataset, Split};
use melforce::service::{Client, EstimateRequest, Server};
use melforce::{Estimator, FeatureKind, Scenario};
use std::time::Duration;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data1 = generate_dataset(Scenario::Data1, 0)?;
    let train: Vec<_> = data1.split(Split::Train).collect();
    let ckpt = train_column(ModelKind::Cnn, FeatureKind::MS_LC, &train, 200, 1e-3, 0)?;
    let local = Estimator::from_checkpoint(&ckpt)?;

    let server = Server::bind("127.0.0.1:0", Some(Estimator::from_checkpoint(&ckpt)?))?.spawn()?;
    let mut client = Client::connect(server.addr, Duration::from_millis(50))?;

    let data2 = generate_dataset(Scenario::Data2, 0)?;
    let mut matches = 0;
    for r in &data2.records {
        let w = r.window()?;
        let remote = client.poll(&w).value().ok_or("stale reply")?;
        // the wire carries f32 samples, so compare on the quantised window
        let sent = EstimateRequest::from_window(0, &w).to_window()?;
        let here = local.estimate(&sent)? as f32;
        matches += usize::from(remote as f32 == here);
    }
    println!("{matches}/{} replies equal the in-process estimate", data2.records.len());
    let q = |p| client.latency.quantile(p).map_or(f64::NAN, |d| d.as_secs_f64() * 1e3);
    println!("latency p50 {:.2} ms, p99 {:.2} ms, stale {}", q(0.5), q(0.99), client.stale);

    let stats = server.stop()?;
    println!("server: {} ok, {} bad, {} dropped", stats.ok, stats.bad_request, stats.dropped);
    Ok(())
}
