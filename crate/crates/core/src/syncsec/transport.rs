//! Delivery paths for wire frames: an in-process loopback, a TCP socket, and
//! a fault-injecting wrapper driven by the fault plan.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use log::debug;

use super::wire::MAX_FRAME;
use crate::simworld::{EntityId, FaultEntry, FaultKind};

/// Something that answers a request frame with a response frame.
pub trait Endpoint: Send + Sync {
    fn handle(&self, frame: &[u8]) -> Vec<u8>;
}

impl<E: Endpoint + ?Sized> Endpoint for Arc<E> {
    fn handle(&self, frame: &[u8]) -> Vec<u8> {
        (**self).handle(frame)
    }
}

impl<E: Endpoint + ?Sized> Endpoint for &E {
    fn handle(&self, frame: &[u8]) -> Vec<u8> {
        (**self).handle(frame)
    }
}

/// The agent-side view of the network.
pub trait Uplink {
    fn is_connected(&self, entity: &EntityId) -> bool;
    /// Send one frame; returns whatever response frames came back.
    fn exchange(&mut self, entity: &EntityId, frame: &[u8]) -> Vec<Vec<u8>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    Delivered,
    Dropped,
    Duplicated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransportStats {
    pub delivered: u64,
    pub dropped: u64,
    pub duplicated: u64,
}

/// Wraps an endpoint with per-entity connectivity and one-shot delivery faults.
pub struct FaultyTransport<E> {
    endpoint: E,
    offline: BTreeSet<EntityId>,
    armed: BTreeMap<EntityId, VecDeque<FaultKind>>,
    stats: TransportStats,
}

impl<E: Endpoint> FaultyTransport<E> {
    pub fn new(endpoint: E) -> Self {
        FaultyTransport {
            endpoint,
            offline: BTreeSet::new(),
            armed: BTreeMap::new(),
            stats: TransportStats::default(),
        }
    }

    pub fn endpoint(&self) -> &E {
        &self.endpoint
    }

    /// Take a scheduled fault into account. Returns false for faults that
    /// concern the device rather than the network.
    pub fn apply_fault(&mut self, fault: &FaultEntry) -> bool {
        match fault.kind {
            FaultKind::NetDown => {
                self.offline.insert(fault.entity.clone());
            }
            FaultKind::NetUp => {
                self.offline.remove(&fault.entity);
            }
            FaultKind::DupDelivery | FaultKind::DropDelivery => {
                self.armed.entry(fault.entity.clone()).or_default().push_back(fault.kind);
            }
            FaultKind::Crash | FaultKind::Reboot => return false,
        }
        true
    }

    /// Restore connectivity everywhere and disarm pending faults.
    pub fn heal(&mut self) {
        self.offline.clear();
        self.armed.clear();
    }

    pub fn stats(&self) -> TransportStats {
        self.stats
    }

    pub fn transmit(&mut self, entity: &EntityId, frame: &[u8]) -> (Delivery, Vec<Vec<u8>>) {
        if self.offline.contains(entity) {
            self.stats.dropped += 1;
            return (Delivery::Dropped, Vec::new());
        }
        let fault = self.armed.get_mut(entity).and_then(VecDeque::pop_front);
        match fault {
            Some(FaultKind::DropDelivery) => {
                debug!("dropping frame from {entity}");
                self.stats.dropped += 1;
                (Delivery::Dropped, Vec::new())
            }
            Some(FaultKind::DupDelivery) => {
                self.stats.duplicated += 1;
                let first = self.endpoint.handle(frame);
                let second = self.endpoint.handle(frame);
                (Delivery::Duplicated, vec![first, second])
            }
            _ => {
                self.stats.delivered += 1;
                (Delivery::Delivered, vec![self.endpoint.handle(frame)])
            }
        }
    }
}

impl<E: Endpoint> Uplink for FaultyTransport<E> {
    fn is_connected(&self, entity: &EntityId) -> bool {
        !self.offline.contains(entity)
    }

    fn exchange(&mut self, entity: &EntityId, frame: &[u8]) -> Vec<Vec<u8>> {
        self.transmit(entity, frame).1
    }
}

/// Read one length-prefixed frame, prefix included. `Ok(None)` on clean EOF.
pub fn read_frame<R: Read>(reader: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut prefix = [0u8; 4];
    match reader.read_exact(&mut prefix) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut frame = Vec::with_capacity(4 + len);
    frame.extend_from_slice(&prefix);
    frame.resize(4 + len, 0);
    reader.read_exact(&mut frame[4..])?;
    Ok(Some(frame))
}

/// Client half of the socket transport; one persistent connection.
pub struct TcpEndpoint {
    stream: Mutex<TcpStream>,
}

impl TcpEndpoint {
    pub fn connect(addr: SocketAddr) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(TcpEndpoint {
            stream: Mutex::new(stream),
        })
    }

    pub fn request(&self, frame: &[u8]) -> io::Result<Vec<u8>> {
        let mut s = self.stream.lock().expect("socket lock");
        s.write_all(frame)?;
        s.flush()?;
        read_frame(&mut *s)?
            .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "server closed"))
    }
}

impl Endpoint for TcpEndpoint {
    /// Socket failures surface as an empty response, which no decoder accepts.
    fn handle(&self, frame: &[u8]) -> Vec<u8> {
        self.request(frame).unwrap_or_default()
    }
}

/// Answer frames on one connection until the peer hangs up.
pub fn serve_connection<E: Endpoint + ?Sized>(mut stream: TcpStream, endpoint: &E) -> io::Result<()> {
    while let Some(frame) = read_frame(&mut stream)? {
        let response = endpoint.handle(&frame);
        stream.write_all(&response)?;
        stream.flush()?;
    }
    Ok(())
}

/// Accept connections forever, one thread per connection.
pub fn spawn_tcp_server<E: Endpoint + 'static>(
    listener: TcpListener,
    endpoint: Arc<E>,
) -> JoinHandle<()> {
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let ep = Arc::clone(&endpoint);
            std::thread::spawn(move || {
                if let Err(e) = serve_connection(stream, &*ep) {
                    debug!("connection ended: {e}");
                }
            });
        }
    })
}
