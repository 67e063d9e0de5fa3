mod common;

use common::service::{malformed_datagram, random_estimator, random_window, rng};
use melforce::service::{Client, EstimateRequest, EstimateResponse, Poll, Server, Status};
use proptest::prelude::*;
use std::net::UdpSocket;
use std::time::{Duration, Instant};

proptest! {
    #[test]
    fn request_round_trip(seq: u32, t_end_us: u64, bits in prop::collection::vec(any::<u32>(), 512)) {
        let req = EstimateRequest { seq, t_end_us, samples: bits.iter().map(|&b| f32::from_bits(b)).collect() };
        let back = EstimateRequest::decode(&req.encode().unwrap()).unwrap();
        prop_assert_eq!(back.seq, seq);
        prop_assert_eq!(back.t_end_us, t_end_us);
        prop_assert!(back.samples.iter().zip(&bits).all(|(s, &b)| s.to_bits() == b));
    }

    #[test]
    fn response_round_trip(seq: u32, bits: u32, status in 0u8..3) {
        let status = Status::try_from(status).unwrap();
        let r = EstimateResponse { seq, estimate: f32::from_bits(bits), status };
        let back = EstimateResponse::decode(&r.encode()).unwrap();
        prop_assert_eq!((back.seq, back.estimate.to_bits(), back.status), (seq, bits, status));
    }
}

#[test]
fn udp_estimate_equals_in_process() {
    let local = random_estimator(11);
    let server = Server::bind("127.0.0.1:0", Some(random_estimator(11))).unwrap().spawn().unwrap();
    let mut client = Client::connect(server.addr, Duration::from_millis(200)).unwrap();
    let mut r = rng(1);
    for _ in 0..200 {
        let w = random_window(&mut r);
        let sent = EstimateRequest::from_window(0, &w).to_window().unwrap();
        let expected = local.estimate(&sent).unwrap() as f32;
        match client.poll(&w) {
            Poll::Fresh(v) => assert_eq!((v as f32).to_bits(), expected.to_bits()),
            Poll::Stale => panic!("stale reply on loopback"),
        }
    }
    assert_eq!(server.stop().unwrap().ok, 200);
}

#[test]
fn loopback_p99_under_two_ms() {
    let server = Server::bind("127.0.0.1:0", Some(random_estimator(3))).unwrap().spawn().unwrap();
    let mut client = Client::connect(server.addr, Duration::from_millis(100)).unwrap();
    let mut r = rng(2);
    let windows: Vec<_> = (0..50).map(|_| random_window(&mut r)).collect();
    for i in 0..1000 {
        client.poll(&windows[i % windows.len()]);
    }
    let p99 = client.latency.quantile(0.99).unwrap();
    assert!(p99 < Duration::from_millis(2), "p99 {p99:?}");
    assert_eq!(client.stale, 0);
}

#[test]
fn reply_for_an_older_seq_is_ignored() {
    let fake = UdpSocket::bind("127.0.0.1:0").unwrap();
    let addr = fake.local_addr().unwrap();
    let responder = std::thread::spawn(move || {
        let mut buf = [0u8; 4096];
        let (n, peer) = fake.recv_from(&mut buf).unwrap();
        let req = EstimateRequest::decode(&buf[..n]).unwrap();
        let old = EstimateResponse { seq: req.seq.wrapping_sub(1), estimate: 99.0, status: Status::Ok };
        fake.send_to(&old.encode(), peer).unwrap();
        let good = EstimateResponse { seq: req.seq, estimate: 1.25, status: Status::Ok };
        fake.send_to(&good.encode(), peer).unwrap();
    });
    let mut client = Client::connect(addr, Duration::from_millis(500)).unwrap();
    assert_eq!(client.poll(&random_window(&mut rng(3))), Poll::Fresh(1.25));
    assert_eq!(client.mailbox.latest().map(|(_, v)| v), Some(1.25));
    responder.join().unwrap();
}

#[test]
fn silent_server_gives_stale_within_timeout() {
    // bound but never answering
    let silent = UdpSocket::bind("127.0.0.1:0").unwrap();
    let timeout = Duration::from_millis(20);
    let mut client = Client::connect(silent.local_addr().unwrap(), timeout).unwrap();
    let w = random_window(&mut rng(4));
    let mut elapsed: Vec<Duration> = (0..9)
        .map(|_| {
            let t = Instant::now();
            assert_eq!(client.poll(&w), Poll::Stale);
            t.elapsed()
        })
        .collect();
    elapsed.sort();
    assert!(elapsed[0] >= timeout);
    assert!(elapsed[4] <= timeout + Duration::from_millis(1), "median {:?}", elapsed[4]);
    assert_eq!(client.stale, 9);
}

#[test]
fn server_survives_malformed_traffic() {
    let server = Server::bind("127.0.0.1:0", Some(random_estimator(5))).unwrap().spawn().unwrap();
    let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
    sock.connect(server.addr).unwrap();
    let mut r = rng(6);
    let valid = EstimateRequest::from_window(42, &random_window(&mut r)).encode().unwrap();
    for _ in 0..10_000 {
        sock.send(&malformed_datagram(&mut r, &valid)).unwrap();
    }
    assert!(server.is_running());
    // the flood may still fill the socket buffer, so a few polls can be lost
    let mut client = Client::connect(server.addr, Duration::from_millis(200)).unwrap();
    let w = random_window(&mut r);
    assert!((0..50).any(|_| matches!(client.poll(&w), Poll::Fresh(_))));
    let stats = server.stop().unwrap();
    assert!(stats.ok >= 1);
    assert!(stats.bad_request + stats.dropped > 0);
}
