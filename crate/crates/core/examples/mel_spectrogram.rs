//! Mel spectrogram of one grinding window.
//!
//! Prints the kept channel centres, the loudest channel per frame, and how
//! little the features move when a constant 2 N offset is added.
//!
//! ```bash
//! cargo run --release --example mel_spectrogram
//! ```

use melforce::dsp::{mel_spectrogram, MelFilterbank, SAMPLE_PERIOD};
use melforce::plant::generate_dataset;
use melforce::{ForceWindow, Scenario, SpectrogramConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SpectrogramConfig::default();
    let bank = MelFilterbank::for_config(&cfg, 1.0 / SAMPLE_PERIOD)?;
    let kept = &bank.centers_hz()[cfg.trim_low..cfg.n_mels - cfg.trim_high];
    println!("{} kept channels, {:.1} Hz .. {:.1} Hz", kept.len(), kept[0], kept[kept.len() - 1]);

    let data = generate_dataset(Scenario::Data1, 0)?;
    let record = &data.records[0];
    let window = record.window()?;
    let ms = mel_spectrogram(&window, &cfg)?;
    println!("label {:.3} N, shape {} x {}", record.label_n, ms.n_frames(), ms.n_channels());
    for t in 0..ms.n_frames() {
        let row = ms.values.row(t);
        let (c, v) = row.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        println!("frame {t:2}: peak channel {c:2} ({:.0} Hz), log power {v:.2}", kept[c]);
    }

    let shifted: Vec<f64> = window.samples().iter().map(|x| x + 2.0).collect();
    let ms2 = mel_spectrogram(&ForceWindow::new(shifted, window.sample_period(), window.t_end())?, &cfg)?;
    let worst = ms.values.data.iter().zip(&ms2.values.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("largest change under a +2 N offset: {worst:.2e}");
    Ok(())
}
