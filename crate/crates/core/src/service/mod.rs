//! UDP prediction server and the client the control loop polls.

mod wire;

pub use wire::{
    recover_seq, DecodeError, EncodeError, EstimateRequest, EstimateResponse, Status, MAGIC, REQUEST_LEN, RESPONSE_LEN,
    VERSION,
};

use crate::checkpoint::Estimator;
use crate::control::ForceEstimator;
use crate::dsp::ForceWindow;
use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

/// Counters kept by a server.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerStats {
    pub ok: u64,
    pub no_model: u64,
    pub bad_request: u64,
    pub dropped: u64,
}

/// Request handling without the socket.
#[derive(Debug, Default)]
pub struct Handler {
    estimator: Option<Estimator>,
    pub stats: ServerStats,
}

impl Handler {
    pub fn new(estimator: Option<Estimator>) -> Self {
        Self { estimator, stats: ServerStats::default() }
    }

    /// Reply for one datagram, or `None` when it is dropped.
    pub fn handle(&mut self, bytes: &[u8]) -> Option<[u8; RESPONSE_LEN]> {
        let reply = |seq, estimate, status| Some(EstimateResponse { seq, estimate, status }.encode());
        let req = match EstimateRequest::decode(bytes) {
            Ok(r) => r,
            Err(e) => {
                return match recover_seq(bytes) {
                    Some(seq) => {
                        log::debug!("bad request seq {seq}: {e}");
                        self.stats.bad_request += 1;
                        reply(seq, 0.0, Status::BadRequest)
                    }
                    None => {
                        self.stats.dropped += 1;
                        None
                    }
                };
            }
        };
        let Some(est) = &self.estimator else {
            self.stats.no_model += 1;
            return reply(req.seq, 0.0, Status::ModelNotLoaded);
        };
        match req.to_window().map_err(|e| e.to_string()).and_then(|w| est.estimate(&w).map_err(|e| e.to_string())) {
            Ok(v) if v.is_finite() => {
                self.stats.ok += 1;
                reply(req.seq, v as f32, Status::Ok)
            }
            Ok(_) => {
                self.stats.bad_request += 1;
                reply(req.seq, 0.0, Status::BadRequest)
            }
            Err(e) => {
                log::debug!("seq {}: {e}", req.seq);
                self.stats.bad_request += 1;
                reply(req.seq, 0.0, Status::BadRequest)
            }
        }
    }
}

pub struct Server {
    socket: UdpSocket,
    pub handler: Handler,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A, estimator: Option<Estimator>) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        Ok(Self { socket, handler: Handler::new(estimator) })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    /// Runs until `stop` is set; returns the final counters.
    pub fn serve(mut self, stop: &AtomicBool) -> io::Result<ServerStats> {
        let mut buf = [0u8; 4096];
        while !stop.load(Ordering::Relaxed) {
            let (n, peer) = match self.socket.recv_from(&mut buf) {
                Ok(x) => x,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
                // ICMP port-unreachable from an earlier reply surfaces here on some platforms
                Err(e) if e.kind() == io::ErrorKind::ConnectionRefused || e.kind() == io::ErrorKind::ConnectionReset => continue,
                Err(e) => return Err(e),
            };
            if let Some(reply) = self.handler.handle(&buf[..n]) {
                if let Err(e) = self.socket.send_to(&reply, peer) {
                    log::warn!("send to {peer} failed: {e}");
                }
            }
        }
        Ok(self.handler.stats)
    }

    /// Serves on a background thread until the returned guard is stopped or dropped.
    pub fn spawn(self) -> io::Result<RunningServer> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = std::thread::spawn(move || self.serve(&flag));
        Ok(RunningServer { addr, stop, thread: Some(thread) })
    }
}

pub struct RunningServer {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<io::Result<ServerStats>>>,
}

impl RunningServer {
    pub fn stop(mut self) -> io::Result<ServerStats> {
        self.stop.store(true, Ordering::Relaxed);
        self.thread.take().expect("joined once").join().expect("server thread panicked")
    }

    pub fn is_running(&self) -> bool {
        self.thread.as_ref().is_some_and(|t| !t.is_finished())
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Fixed 100 us buckets up to 50 ms plus an overflow bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyHistogram {
    counts: Vec<u64>,
}

impl LatencyHistogram {
    pub const BUCKET_US: u64 = 100;
    pub const BUCKETS: usize = 500;

    pub fn new() -> Self {
        Self { counts: vec![0; Self::BUCKETS + 1] }
    }

    pub fn record(&mut self, d: Duration) {
        let b = (d.as_micros() as u64 / Self::BUCKET_US).min(Self::BUCKETS as u64) as usize;
        self.counts[b] += 1;
    }

    pub fn count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Upper edge of the bucket holding the `q` quantile.
    pub fn quantile(&self, q: f64) -> Option<Duration> {
        let total = self.count();
        if total == 0 {
            return None;
        }
        let rank = ((total as f64 * q.clamp(0.0, 1.0)).ceil() as u64).max(1);
        let mut seen = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            seen += c;
            if seen >= rank {
                return Some(Duration::from_micros((i as u64 + 1) * Self::BUCKET_US));
            }
        }
        unreachable!("rank <= total")
    }
}

impl Default for LatencyHistogram {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Poll {
    Fresh(f64),
    Stale,
}

impl Poll {
    pub fn value(self) -> Option<f64> {
        match self {
            Poll::Fresh(v) => Some(v),
            Poll::Stale => None,
        }
    }
}

/// Latest estimate shared between the client thread and the control tick.
#[derive(Debug, Clone, Default)]
pub struct Mailbox(Arc<Mutex<Option<(u32, f64)>>>);

impl Mailbox {
    pub fn put(&self, seq: u32, value: f64) {
        let mut slot = self.0.lock().expect("mailbox poisoned");
        if slot.map_or(true, |(s, _)| seq_newer(seq, s)) {
            *slot = Some((seq, value));
        }
    }

    pub fn latest(&self) -> Option<(u32, f64)> {
        *self.0.lock().expect("mailbox poisoned")
    }
}

fn seq_newer(a: u32, b: u32) -> bool {
    a != b && a.wrapping_sub(b) < u32::MAX / 2
}

const POLL_INTERVAL: Duration = Duration::from_micros(50);

pub struct Client {
    socket: UdpSocket,
    timeout: Duration,
    next_seq: u32,
    pub latency: LatencyHistogram,
    pub stale: u64,
    pub mailbox: Mailbox,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(server: A, timeout: Duration) -> io::Result<Self> {
        let server = server
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no server address"))?;
        let local: SocketAddr = if server.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().unwrap();
        let socket = UdpSocket::bind(local)?;
        socket.connect(server)?;
        socket.set_nonblocking(true)?;
        Ok(Self { socket, timeout, next_seq: 1, latency: LatencyHistogram::new(), stale: 0, mailbox: Mailbox::default() })
    }

    /// Sends one window and waits up to the timeout for the matching reply.
    pub fn poll(&mut self, window: &ForceWindow) -> Poll {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        let bytes = EstimateRequest::from_window(seq, window).encode().expect("windows hold 512 samples");
        let started = Instant::now();
        let deadline = started + self.timeout;
        if let Err(e) = self.socket.send(&bytes) {
            log::debug!("send failed: {e}");
            return self.mark_stale();
        }
        let mut buf = [0u8; 64];
        loop {
            match self.socket.recv(&mut buf) {
                Ok(n) => match EstimateResponse::decode(&buf[..n]) {
                    Ok(r) if r.seq == seq => {
                        self.latency.record(started.elapsed());
                        if r.status != Status::Ok {
                            return self.mark_stale();
                        }
                        let v = f64::from(r.estimate);
                        self.mailbox.put(seq, v);
                        return Poll::Fresh(v);
                    }
                    Ok(r) => log::debug!("ignoring reply for seq {} while waiting for {seq}", r.seq),
                    Err(e) => log::debug!("ignoring malformed reply: {e}"),
                },
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    // socket timeouts round up to the kernel tick, so wait in short sleeps
                    if Instant::now() >= deadline {
                        return self.mark_stale();
                    }
                    std::thread::sleep(POLL_INTERVAL.min(deadline.saturating_duration_since(Instant::now())));
                }
                Err(e) => {
                    log::debug!("recv failed: {e}");
                    return self.mark_stale();
                }
            }
        }
    }

    fn mark_stale(&mut self) -> Poll {
        self.stale += 1;
        Poll::Stale
    }
}

impl ForceEstimator for Client {
    fn estimate(&mut self, window: &ForceWindow) -> Option<f64> {
        self.poll(window).value()
    }
}

/// Client on its own thread. `submit` never blocks; `latest` reads the mailbox.
pub struct BackgroundClient {
    tx: Option<mpsc::SyncSender<ForceWindow>>,
    mailbox: Mailbox,
    thread: Option<JoinHandle<Client>>,
}

impl BackgroundClient {
    pub fn spawn(client: Client) -> Self {
        let (tx, rx) = mpsc::sync_channel::<ForceWindow>(1);
        let mailbox = client.mailbox.clone();
        let thread = std::thread::spawn(move || {
            let mut client = client;
            for w in rx {
                client.poll(&w);
            }
            client
        });
        Self { tx: Some(tx), mailbox, thread: Some(thread) }
    }

    /// Queues a window; returns false when the worker is still busy with the last one.
    pub fn submit(&self, window: ForceWindow) -> bool {
        self.tx.as_ref().is_some_and(|tx| tx.try_send(window).is_ok())
    }

    pub fn latest(&self) -> Option<(u32, f64)> {
        self.mailbox.latest()
    }

    /// Stops the worker and hands back the client with its statistics.
    pub fn finish(mut self) -> Client {
        self.tx.take();
        self.thread.take().expect("joined once").join().expect("client thread panicked")
    }
}

impl Drop for BackgroundClient {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, Normalization};
    use crate::checkpoint::ModelKind;
    use crate::neural::{Architecture, Network};

    fn zero_estimator() -> Estimator {
        Estimator::new(ModelKind::Cnn, FeatureKind::MS_LC, Network::zeros(Architecture::MS_LC_TDNN).unwrap(), Normalization::identity(45))
    }

    fn zero_window() -> ForceWindow {
        ForceWindow::from_samples(vec![0.0; 512], 0.512).unwrap()
    }

    #[test]
    fn zero_model_answers_zero() {
        let mut h = Handler::new(Some(zero_estimator()));
        let req = EstimateRequest::from_window(7, &zero_window()).encode().unwrap();
        let r = EstimateResponse::decode(&h.handle(&req).unwrap()).unwrap();
        assert_eq!(r, EstimateResponse { seq: 7, estimate: 0.0, status: Status::Ok });
    }

    #[test]
    fn no_model_and_bad_frames() {
        let mut h = Handler::new(None);
        let req = EstimateRequest::from_window(3, &zero_window()).encode().unwrap();
        assert_eq!(EstimateResponse::decode(&h.handle(&req).unwrap()).unwrap().status, Status::ModelNotLoaded);
        let mut h = Handler::new(Some(zero_estimator()));
        let short = EstimateResponse::decode(&h.handle(&req[..2066]).unwrap()).unwrap();
        assert_eq!((short.seq, short.status), (3, Status::BadRequest));
        assert!(h.handle(&req[..8]).is_none());
        assert!(h.handle(b"junk").is_none());
        let mut nan = EstimateRequest::from_window(4, &zero_window());
        nan.samples[10] = f32::NAN;
        let r = EstimateResponse::decode(&h.handle(&nan.encode().unwrap()).unwrap()).unwrap();
        assert_eq!(r.status, Status::BadRequest);
        assert_eq!(h.stats, ServerStats { ok: 0, no_model: 0, bad_request: 2, dropped: 2 });
    }

    #[test]
    fn histogram_quantiles() {
        let mut h = LatencyHistogram::new();
        assert_eq!(h.quantile(0.5), None);
        for us in [50, 150, 150, 950, 80_000] {
            h.record(Duration::from_micros(us));
        }
        assert_eq!(h.quantile(0.2), Some(Duration::from_micros(100)));
        assert_eq!(h.quantile(0.6), Some(Duration::from_micros(200)));
        assert_eq!(h.quantile(0.8), Some(Duration::from_micros(1000)));
        assert_eq!(h.quantile(1.0), Some(Duration::from_micros(50_100)));
    }

    #[test]
    fn mailbox_keeps_newest() {
        let m = Mailbox::default();
        m.put(5, 1.0);
        m.put(4, 2.0);
        assert_eq!(m.latest(), Some((5, 1.0)));
        m.put(6, 3.0);
        assert_eq!(m.latest(), Some((6, 3.0)));
        m.put(0, 4.0);
        assert_eq!(m.latest(), Some((6, 3.0)));
        assert!(seq_newer(0, u32::MAX));
    }
}
