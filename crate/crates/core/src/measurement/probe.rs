//! Live probes from the local machine: ICMP echo (falling back to TCP
//! connect time) and timed HTTP GETs.

use std::io::ErrorKind;
use std::mem::MaybeUninit;
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU16, Ordering};
use std::time::{Duration, Instant};

use socket2::{Domain, Protocol, Socket, Type};

use super::{Measurement, MeasurementProvider, ProbeConfig};
use crate::candidate::Metric;
use crate::error::{Error, Result};
use crate::geo::host_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoMethod {
    Icmp,
    TcpConnect,
}

impl EchoMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EchoMethod::Icmp => "icmp",
            EchoMethod::TcpConnect => "tcp-connect",
        }
    }
}

fn resolve(host: &str) -> Option<IpAddr> {
    let addrs: Vec<SocketAddr> = (host, 0).to_socket_addrs().ok()?.collect();
    addrs
        .iter()
        .find(|a| a.is_ipv4())
        .or_else(|| addrs.first())
        .map(|a| a.ip())
}

fn checksum(data: &[u8]) -> u16 {
    let mut sum: u32 = data
        .chunks(2)
        .map(|c| u32::from(u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)])))
        .sum();
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

fn echo_request(ident: u16, seq: u16) -> [u8; 24] {
    let mut pkt = [0u8; 24];
    pkt[0] = 8;
    pkt[4..6].copy_from_slice(&ident.to_be_bytes());
    pkt[6..8].copy_from_slice(&seq.to_be_bytes());
    pkt[8..].copy_from_slice(b"cloudforecast-ec");
    let sum = checksum(&pkt);
    pkt[2..4].copy_from_slice(&sum.to_be_bytes());
    pkt
}

/// Opens an ICMPv4 socket: unprivileged datagram first, raw second.
fn icmp_socket() -> Option<(Socket, bool)> {
    if let Ok(s) = Socket::new(Domain::IPV4, Type::DGRAM, Some(Protocol::ICMPV4)) {
        return Some((s, false));
    }
    Socket::new(Domain::IPV4, Type::RAW, Some(Protocol::ICMPV4))
        .ok()
        .map(|s| (s, true))
}

static NEXT_IDENT: AtomicU16 = AtomicU16::new(0);

fn icmp_rtt(
    sock: &Socket,
    raw: bool,
    ip: Ipv4Addr,
    ident: u16,
    seq: u16,
    timeout: Duration,
) -> Option<f64> {
    let dest = SocketAddr::new(IpAddr::V4(ip), 0).into();
    let start = Instant::now();
    sock.send_to(&echo_request(ident, seq), &dest).ok()?;
    let mut buf = [MaybeUninit::<u8>::uninit(); 1500];
    loop {
        let left = timeout.checked_sub(start.elapsed())?;
        sock.set_read_timeout(Some(left.max(Duration::from_millis(1))))
            .ok()?;
        let n = match sock.recv(&mut buf) {
            Ok(n) => n,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(_) => return None,
        };
        // SAFETY: recv initialised the first n bytes.
        let bytes: Vec<u8> = buf[..n]
            .iter()
            .map(|b| unsafe { b.assume_init() })
            .collect();
        let icmp = if raw {
            let ihl = usize::from(bytes.first()? & 0x0f) * 4;
            bytes.get(ihl..)?
        } else {
            &bytes[..]
        };
        // type 0 = echo reply; datagram sockets rewrite the identifier
        let reply_seq = u16::from_be_bytes([*icmp.get(6)?, *icmp.get(7)?]);
        let reply_id = u16::from_be_bytes([*icmp.get(4)?, *icmp.get(5)?]);
        if icmp[0] == 0 && reply_seq == seq && (!raw || reply_id == ident) {
            return Some(start.elapsed().as_secs_f64() * 1e3);
        }
    }
}

/// Time to a TCP handshake outcome on port 80, then 443. A refused
/// connection still measures a full round trip to the host's stack.
fn tcp_rtt(ip: IpAddr, timeout: Duration) -> Option<f64> {
    for port in [80, 443] {
        let start = Instant::now();
        match TcpStream::connect_timeout(&SocketAddr::new(ip, port), timeout) {
            Ok(_) => return Some(start.elapsed().as_secs_f64() * 1e3),
            Err(e) if e.kind() == ErrorKind::ConnectionRefused => {
                return Some(start.elapsed().as_secs_f64() * 1e3)
            }
            Err(_) => continue,
        }
    }
    None
}

/// Individual echo round-trip times to `host`, the number of lost probes,
/// and the method used.
pub fn echo_samples(host: &str, samples: u32, timeout: Duration) -> (Vec<f64>, u32, EchoMethod) {
    let host = host_of(host);
    let Some(ip) = resolve(&host) else {
        return (Vec::new(), samples, EchoMethod::TcpConnect);
    };
    let icmp = match ip {
        IpAddr::V4(v4) => icmp_socket().map(|(s, raw)| (s, raw, v4)),
        IpAddr::V6(_) => None,
    };
    let mut rtts = Vec::new();
    let method = if icmp.is_some() {
        EchoMethod::Icmp
    } else {
        EchoMethod::TcpConnect
    };
    // raw sockets see every reply on the host, so each call gets its own id
    let ident =
        (std::process::id() as u16).wrapping_add(NEXT_IDENT.fetch_add(1, Ordering::Relaxed));
    for seq in 0..samples {
        let rtt = match &icmp {
            Some((sock, raw, v4)) => icmp_rtt(sock, *raw, *v4, ident, seq as u16, timeout),
            None => tcp_rtt(ip, timeout),
        };
        rtts.extend(rtt);
    }
    let failures = samples - rtts.len() as u32;
    (rtts, failures, method)
}

fn as_url(endpoint: &str) -> String {
    if endpoint.contains("://") {
        endpoint.to_owned()
    } else {
        format!("http://{endpoint}/")
    }
}

/// Wall time of complete GET request/response exchanges against `endpoint`.
pub fn http_samples(endpoint: &str, samples: u32, timeout: Duration) -> (Vec<f64>, u32) {
    let url = as_url(endpoint);
    let client = match reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
    {
        Ok(c) => c,
        Err(_) => return (Vec::new(), samples),
    };
    let mut rtts = Vec::new();
    for _ in 0..samples {
        let start = Instant::now();
        let done = client.get(&url).send().and_then(|r| r.bytes()).is_ok();
        if done {
            rtts.push(start.elapsed().as_secs_f64() * 1e3);
        }
    }
    let failures = samples - rtts.len() as u32;
    (rtts, failures)
}

fn summarise(
    src: &str,
    dst: &str,
    metric: Metric,
    rtts: &[f64],
    config: &ProbeConfig,
    note: String,
) -> Measurement {
    match config.aggregator.apply(rtts) {
        Some(v) => Measurement::ok(src, dst, metric, v, rtts.len() as u32),
        None => Measurement::failed(src, dst, metric, config.samples_per_pair),
    }
    .with_note(note)
}

/// Echo probes from this machine to `dst`.
pub fn measure_latency(src: &str, dst: &str, config: &ProbeConfig) -> Measurement {
    let timeout = Duration::from_millis(config.timeout_ms);
    let (rtts, failures, method) = echo_samples(dst, config.samples_per_pair, timeout);
    let note = format!("local {} ({} lost)", method.as_str(), failures);
    summarise(src, dst, Metric::Ping, &rtts, config, note)
}

/// Timed GETs from this machine to `dst`.
pub fn measure_http_rtt(src: &str, dst: &str, config: &ProbeConfig) -> Measurement {
    let timeout = Duration::from_millis(config.timeout_ms);
    let (rtts, failures) = http_samples(dst, config.samples_per_pair, timeout);
    let note = format!("local http ({failures} failed)");
    summarise(src, dst, Metric::HttpRtt, &rtts, config, note)
}

/// Probes the destination of every pair from the analysis machine. Each
/// leg is approximated by the local machine's view of its destination,
/// so pairs are directed.
#[derive(Debug, Clone, Default)]
pub struct LocalProbeProvider {
    pub config: ProbeConfig,
}

impl LocalProbeProvider {
    pub fn new(config: ProbeConfig) -> Self {
        LocalProbeProvider { config }
    }
}

impl MeasurementProvider for LocalProbeProvider {
    fn measure(&self, src: &str, dst: &str, metric: Metric) -> Result<Measurement> {
        match metric {
            Metric::Ping => Ok(measure_latency(src, dst, &self.config)),
            Metric::HttpRtt => Ok(measure_http_rtt(src, dst, &self.config)),
            Metric::Distance => Err(Error::Config("live probes do not measure distance".into())),
        }
    }

    fn is_symmetric(&self, _metric: Metric) -> bool {
        false
    }

    fn describe(&self, metric: Metric) -> String {
        format!("local {metric} probe")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_of_request_verifies() {
        let pkt = echo_request(0x1234, 7);
        assert_eq!(checksum(&pkt), 0);
    }

    #[test]
    fn loopback_echo_is_fast() {
        let m = measure_latency("local", "127.0.0.1", &ProbeConfig::default());
        assert!(m.success, "{m:?}");
        assert!(m.value < 5.0, "{m:?}");
    }

    #[test]
    fn unroutable_address_fails() {
        let config = ProbeConfig {
            samples_per_pair: 2,
            timeout_ms: 100,
            ..Default::default()
        };
        let start = Instant::now();
        // reserved TLD: never resolves, so no probe can be answered
        let m = measure_latency("local", "unroutable.invalid", &config);
        assert!(!m.success, "{m:?}");
        assert_eq!(m.value(), None);
        // both ports per sample in the worst case, plus slack
        assert!(start.elapsed() < Duration::from_millis(2 * 2 * 100 + 500));
    }

    #[test]
    fn closed_port_http_fails() {
        let port = {
            let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let config = ProbeConfig {
            samples_per_pair: 2,
            timeout_ms: 100,
            ..Default::default()
        };
        let m = measure_http_rtt("local", &format!("127.0.0.1:{port}"), &config);
        assert!(!m.success);
    }

    #[test]
    fn url_defaults() {
        assert_eq!(as_url("host.a"), "http://host.a/");
        assert_eq!(as_url("https://host.a/x"), "https://host.a/x");
    }
}
