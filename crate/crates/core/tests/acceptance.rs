//! Acceptance run: one line per criterion.
//!
//! Failures are reported, not hidden. The process exits non-zero on any
//! failure only when `ACCEPTANCE_STRICT` is set.

mod common;

use common::{gradcheck, oracle, service};
use melforce::checkpoint::ModelKind;
use melforce::control::{letter_a_path, press_path, run_closed_loop, FeedbackMode, ForceEstimator, LoopConfig, PathParams};
use melforce::dsp::{stft_power, MelFilterbank};
use melforce::experiment::{median, predict_lpf, train_column};
use melforce::neural::{Architecture, Network, TdnnParams, TdnnShapes, Tensor2};
use melforce::plant::{excursion_peaks, generate_dataset, residual_statistics, GrindDataset, HysteresisOperator, Record};
use melforce::service::{Client, EstimateRequest, EstimateResponse, Poll, Server, Status};
use melforce::{Checkpoint, Estimator, FeatureKind, ForceWindow, Scenario, SpectrogramConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::net::UdpSocket;
use std::time::{Duration, Instant};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const EPOCHS: usize = 1000;
const LR: f64 = 1e-3;
const DRIFTED: [Scenario; 2] = [Scenario::Data2, Scenario::Data3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn dsp_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = SpectrogramConfig::default();
    let (mut worst_dft, mut worst_parseval): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let samples: Vec<f64> = (0..512).map(|_| rng.random_range(-10.0..10.0)).collect();
        let fast = stft_power(&ForceWindow::from_samples(samples.clone(), 0.512).unwrap(), &cfg).unwrap();
        for (f, row) in oracle::stft_power(&samples).iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                worst_dft = worst_dft.max(rel(fast.get(f, b), v));
            }
        }
        for (f, fr) in oracle::frames(&samples).iter().enumerate() {
            let energy: f64 = fr.iter().map(|x| x * x).sum();
            let row = fast.row(f);
            let n = oracle::FRAME;
            let spectral = (row[0] + row[n / 2] + 2.0 * row[1..n / 2].iter().sum::<f64>()) / n as f64;
            worst_parseval = worst_parseval.max(rel(energy, spectral));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst_dft <= 1e-9 && worst_parseval <= 1e-9 && secs < 10.0,
        format!("max DFT rel err {worst_dft:.1e}, max Parseval rel err {worst_parseval:.1e}, {secs:.1} s"),
    )
}

fn mel_calibration() -> Outcome {
    let cfg = SpectrogramConfig::default();
    let bank = MelFilterbank::for_config(&cfg, 1000.0).unwrap();
    let kept = &bank.centers_hz()[cfg.trim_low..cfg.n_mels - cfg.trim_high];
    let (lo, hi) = (kept[0], kept[kept.len() - 1]);
    outcome(
        kept.len() == 45 && (32.0..=48.0).contains(&lo) && (320.0..=440.0).contains(&hi),
        format!("{} kept channels, channel 0 at {lo:.1} Hz, channel 44 at {hi:.1} Hz", kept.len()),
    )
}

fn gradients() -> Outcome {
    let started = Instant::now();
    let n = 20;
    let errs = [
        ("conv1d", gradcheck::conv1d(n, 11)),
        ("dense", gradcheck::dense(n, 12)),
        ("avg_pool", gradcheck::avg_pool(n, 13)),
        ("relu", gradcheck::relu_layer(n, 14)),
        ("tdnn", gradcheck::network(Architecture::MS_LC_TDNN, n, 15)),
    ];
    let secs = started.elapsed().as_secs_f64();
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let list: Vec<String> = errs.iter().map(|(k, e)| format!("{k} {e:.1e}")).collect();
    outcome(worst < 1e-4 && secs < 30.0, format!("{n} instances each: {}; {secs:.1} s", list.join(", ")))
}

fn shapes() -> Outcome {
    let p = TdnnParams::init(17, 45, 0).unwrap();
    let (_, got) = p.forward_with_shapes(&Tensor2::zeros(17, 45)).unwrap();
    let want = TdnnShapes {
        input: (17, 45),
        conv1: (15, 20),
        pool1: (7, 20),
        conv2: (6, 10),
        pool2: (3, 10),
        flat: 30,
        fc1: 30,
        fc2: 30,
        out: 1,
    };
    let fmt = |s: &TdnnShapes| {
        format!(
            "{:?}->{:?}->{:?}->{:?}->{:?}->{}->{}->{}->{}",
            s.input, s.conv1, s.pool1, s.conv2, s.pool2, s.flat, s.fc1, s.fc2, s.out
        )
    };
    outcome(got == want && Network::Tdnn(p).forward(&Tensor2::zeros(17, 45)).is_ok(), fmt(&got))
}

/// Test RMSE of every column, `rmse[column][scenario][seed]`.
struct Grid {
    rmse: BTreeMap<String, BTreeMap<Scenario, Vec<f64>>>,
    core_secs: f64,
    ms_lc_seed0: Option<Checkpoint>,
}

impl Grid {
    fn med(&self, column: &str, s: Scenario) -> f64 {
        median(&self.rmse[column][&s])
    }
}

fn rmse_of(records: &[&Record], mut predict: impl FnMut(&ForceWindow) -> f64) -> f64 {
    let sq: f64 = records
        .iter()
        .map(|r| {
            let e = predict(&r.window().unwrap()) - r.label_n;
            e * e
        })
        .sum();
    (sq / records.len() as f64).sqrt()
}

fn run_grid() -> Grid {
    let scenarios = [Scenario::Data1, Scenario::Data2, Scenario::Data3];
    let mut rmse: BTreeMap<String, BTreeMap<Scenario, Vec<f64>>> = BTreeMap::new();
    let mut push = |col: &str, s: Scenario, v: f64| rmse.entry(col.to_string()).or_default().entry(s).or_default().push(v);
    let mut core_secs = 0.0;
    let mut ms_lc_seed0 = None;
    for seed in SEEDS {
        let core = Instant::now();
        let sets: Vec<GrindDataset> = scenarios.iter().map(|&s| generate_dataset(s, seed).unwrap()).collect();
        let train = sets[0].train();
        for (s, d) in scenarios.iter().zip(&sets) {
            push("lpf", *s, rmse_of(&d.test(), |w| predict_lpf(w, 5.0)));
        }
        let score = |name: &str, ck: &Checkpoint, push: &mut dyn FnMut(&str, Scenario, f64)| {
            let est = Estimator::from_checkpoint(ck).unwrap();
            for (s, d) in scenarios.iter().zip(&sets) {
                push(name, *s, rmse_of(&d.test(), |w| est.estimate(w).unwrap()));
            }
        };
        let raw = train_column(ModelKind::Cnn, FeatureKind::Raw, &train, EPOCHS, LR, seed).unwrap();
        score("cnn_raw", &raw, &mut push);
        let lc = train_column(ModelKind::Cnn, FeatureKind::MS_LC, &train, EPOCHS, LR, seed).unwrap();
        score("trim5", &lc, &mut push);
        core_secs += core.elapsed().as_secs_f64();
        for trim in 0..5 {
            let ck = train_column(ModelKind::Cnn, FeatureKind::Ms { trim_low: trim }, &train, EPOCHS, LR, seed).unwrap();
            score(&format!("trim{trim}"), &ck, &mut push);
        }
        if seed == 0 {
            ms_lc_seed0 = Some(lc);
        }
        eprintln!("  seed {seed} trained");
    }
    Grid { rmse, core_secs, ms_lc_seed0 }
}

fn drift_ordering(g: &Grid) -> Outcome {
    let mut pass = g.core_secs < 600.0;
    let mut parts = Vec::new();
    for s in DRIFTED {
        let (ms, raw, lpf) = (g.med("trim5", s), g.med("cnn_raw", s), g.med("lpf", s));
        pass &= ms <= 0.5 * raw && ms <= 0.5 * lpf;
        parts.push(format!("{s}: ms_lc {ms:.3} vs cnn_raw {raw:.3}, lpf {lpf:.3}"));
    }
    outcome(pass, format!("{}; {:.0} s", parts.join("; "), g.core_secs))
}

fn no_drift_ordering(g: &Grid) -> Outcome {
    let (raw, ms) = (g.med("cnn_raw", Scenario::Data1), g.med("trim5", Scenario::Data1));
    outcome(raw <= ms, format!("Data1: cnn_raw {raw:.3} vs ms_lc {ms:.3}"))
}

fn trim_ablation(g: &Grid) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in DRIFTED {
        let none = g.med("trim0", s);
        let worst_ratio = (1..=5).map(|t| none / g.med(&format!("trim{t}"), s)).fold(f64::INFINITY, f64::min);
        pass &= worst_ratio >= 3.0;
        parts.push(format!("{s}: untrimmed {none:.3}, weakest improvement {worst_ratio:.2}x"));
    }
    let none1 = g.med("trim0", Scenario::Data1);
    let best1 = (1..=5).map(|t| g.med(&format!("trim{t}"), Scenario::Data1)).fold(f64::INFINITY, f64::min);
    pass &= none1 <= best1;
    parts.push(format!("Data1: untrimmed {none1:.3} vs best trimmed {best1:.3}"));
    outcome(pass, parts.join("; "))
}

fn hysteresis() -> Outcome {
    let (mean, var) = residual_statistics(&HysteresisOperator::default(), &excursion_peaks(9, 0));
    outcome((mean - 4.31).abs() <= 1.0, format!("nine excursions: mean residual {mean:.3} N, variance {var:.3} N^2"))
}

fn closed_loop(ck: &Checkpoint) -> Outcome {
    let mut est = Estimator::from_checkpoint(ck).unwrap();
    let params = PathParams::for_force(2.0, 10_000.0);
    let press = press_path(2.0, &params, 0.0, 6.0, [0.0, 0.0]).unwrap();
    let run = |traj, mode, seed, est: &mut Estimator| {
        let cfg = LoopConfig { scenario: Scenario::Data2, feedback: mode, seed, ..Default::default() };
        let e = (mode == FeedbackMode::Estimator).then_some(est as &mut dyn ForceEstimator);
        run_closed_loop(traj, &cfg, e).unwrap().summary(1e-3, 2.0)
    };
    let f_est = run(&press, FeedbackMode::Estimator, 0, &mut est).steady_state_force;
    let f_raw = run(&press, FeedbackMode::Raw, 0, &mut est).steady_state_force;
    let letter = letter_a_path(0.05, 2.0, &params).unwrap();
    let mut wins = 0;
    let mut ratios = Vec::new();
    for seed in SEEDS {
        let e_raw = run(&letter, FeedbackMode::Raw, seed, &mut est).integrated_error;
        let e_est = run(&letter, FeedbackMode::Estimator, seed, &mut est).integrated_error;
        wins += usize::from(e_est < e_raw);
        ratios.push(format!("{:.2}", e_est / e_raw));
    }
    outcome(
        (1.6..=2.4).contains(&f_est) && f_raw < 0.5 && wins == SEEDS.len(),
        format!(
            "press: estimator {f_est:.3} N, raw {f_raw:.3} N; letter A E_est < E_raw on {wins}/{} seeds (ratios {})",
            SEEDS.len(),
            ratios.join(", ")
        ),
    )
}

fn wire(ck: &Checkpoint) -> Outcome {
    let mut rng = service::rng(10);
    let mut exact = 0;
    for _ in 0..10_000 {
        let req = EstimateRequest {
            seq: rng.random(),
            t_end_us: rng.random(),
            samples: (0..512).map(|_| f32::from_bits(rng.random())).collect(),
        };
        let back = EstimateRequest::decode(&req.encode().unwrap()).unwrap();
        let res = EstimateResponse { seq: rng.random(), estimate: f32::from_bits(rng.random()), status: Status::Ok };
        let rback = EstimateResponse::decode(&res.encode()).unwrap();
        let same = back.seq == req.seq
            && back.t_end_us == req.t_end_us
            && back.samples.iter().zip(&req.samples).all(|(a, b)| a.to_bits() == b.to_bits())
            && rback.seq == res.seq
            && rback.estimate.to_bits() == res.estimate.to_bits();
        exact += usize::from(same);
    }

    let local = Estimator::from_checkpoint(ck).unwrap();
    let server = Server::bind("127.0.0.1:0", Some(Estimator::from_checkpoint(ck).unwrap())).unwrap().spawn().unwrap();
    let mut client = Client::connect(server.addr, Duration::from_millis(500)).unwrap();
    let mut equal = 0;
    let n_udp = 200;
    for _ in 0..n_udp {
        let w = service::random_window(&mut rng);
        let expected = local.estimate(&EstimateRequest::from_window(0, &w).to_window().unwrap()).unwrap() as f32;
        if let Poll::Fresh(v) = client.poll(&w) {
            equal += usize::from((v as f32).to_bits() == expected.to_bits());
        }
    }

    let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
    sock.connect(server.addr).unwrap();
    let valid = EstimateRequest::from_window(1, &service::random_window(&mut rng)).encode().unwrap();
    for _ in 0..100_000 {
        sock.send(&service::malformed_datagram(&mut rng, &valid)).unwrap();
    }
    let alive = server.is_running();
    let w = service::random_window(&mut rng);
    let answers = (0..50).any(|_| matches!(client.poll(&w), Poll::Fresh(_)));
    let stats = server.stop().unwrap();
    outcome(
        exact == 10_000 && equal == n_udp && alive && answers,
        format!(
            "{exact}/10000 exact round trips; {equal}/{n_udp} UDP estimates bitwise equal; after 1e5 malformed datagrams server {} ({} bad, {} dropped)",
            if alive && answers { "still answering" } else { "down" },
            stats.bad_request,
            stats.dropped
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "DSP oracle equivalence", dsp_oracle()));
    results.push((2, "Mel calibration", mel_calibration()));
    results.push((3, "gradient correctness", gradients()));
    results.push((4, "TDNN shapes", shapes()));
    let grid = run_grid();
    results.push((5, "drift-robustness ordering", drift_ordering(&grid)));
    results.push((6, "no-drift ordering", no_drift_ordering(&grid)));
    results.push((7, "trim ablation", trim_ablation(&grid)));
    results.push((8, "hysteresis calibration", hysteresis()));
    let ck = grid.ms_lc_seed0.as_ref().expect("seed 0 trained");
    results.push((9, "closed-loop drift robustness", closed_loop(ck)));
    results.push((10, "wire protocol", wire(ck)));

    let passed = results.iter().filter(|r| r.2.pass).count();
    for (n, name, o) in &results {
        println!("criterion {n:>2} {:<30} {} | {}", name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{passed}/{} criteria passed", results.len());
    if passed < results.len() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
