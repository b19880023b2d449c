//! Bounded order-preserving stream endpoints with stall accounting.

use std::time::Duration;

use crossbeam_channel::{
    bounded, Receiver, RecvTimeoutError, SendTimeoutError, Sender, TryRecvError, TrySendError,
};

use crate::error::{Error, Result};

/// Occupancy probe kept by the executor for stall diagnostics.
pub(crate) struct Probe {
    pub name: String,
    pub capacity: usize,
    len: Box<dyn Fn() -> usize + Send + Sync>,
}

impl Probe {
    pub fn len(&self) -> usize {
        (self.len)()
    }
}

pub(crate) fn stream<T: Send + 'static>(
    name: impl Into<String>,
    capacity: usize,
    probes: &mut Vec<Probe>,
) -> (OutPort<T>, InPort<T>) {
    let name = name.into();
    let (tx, rx) = bounded(capacity);
    let peek = rx.clone();
    probes.push(Probe {
        name: name.clone(),
        capacity,
        len: Box::new(move || peek.len()),
    });
    (
        OutPort {
            tx,
            pending: None,
            counted: false,
            stalls: 0,
            name: name.clone(),
        },
        InPort {
            rx,
            counted: false,
            stalls: 0,
            name,
        },
    )
}

pub(crate) struct OutPort<T> {
    tx: Sender<T>,
    pending: Option<T>,
    counted: bool,
    pub stalls: u64,
    name: String,
}

impl<T> OutPort<T> {
    /// Stage an item; the previous one must have been flushed.
    pub fn put(&mut self, item: T) {
        debug_assert!(self.pending.is_none());
        self.pending = Some(item);
    }

    /// Try to hand the staged item downstream. `Ok(false)` means the stream
    /// is full (after waiting up to `wait`).
    pub fn flush(&mut self, wait: Option<Duration>) -> Result<bool> {
        let Some(item) = self.pending.take() else {
            return Ok(true);
        };
        let item = match self.tx.try_send(item) {
            Ok(()) => {
                self.counted = false;
                return Ok(true);
            }
            Err(TrySendError::Full(item)) => item,
            Err(TrySendError::Disconnected(_)) => return Err(self.closed()),
        };
        if !self.counted {
            self.counted = true;
            self.stalls += 1;
        }
        match wait {
            None => {
                self.pending = Some(item);
                Ok(false)
            }
            Some(d) => match self.tx.send_timeout(item, d) {
                Ok(()) => {
                    self.counted = false;
                    Ok(true)
                }
                Err(SendTimeoutError::Timeout(item)) => {
                    self.pending = Some(item);
                    Ok(false)
                }
                Err(SendTimeoutError::Disconnected(_)) => Err(self.closed()),
            },
        }
    }

    fn closed(&self) -> Error {
        Error::StageFailed {
            stage: self.name.clone(),
            reason: "downstream closed".into(),
        }
    }
}

pub(crate) struct InPort<T> {
    rx: Receiver<T>,
    counted: bool,
    pub stalls: u64,
    name: String,
}

impl<T> InPort<T> {
    /// Receive the next item, or `Ok(None)` if none arrived within `wait`.
    pub fn take(&mut self, wait: Option<Duration>) -> Result<Option<T>> {
        match self.rx.try_recv() {
            Ok(v) => {
                self.counted = false;
                return Ok(Some(v));
            }
            Err(TryRecvError::Empty) => {}
            Err(TryRecvError::Disconnected) => return Err(self.closed()),
        }
        if !self.counted {
            self.counted = true;
            self.stalls += 1;
        }
        let Some(d) = wait else {
            return Ok(None);
        };
        match self.rx.recv_timeout(d) {
            Ok(v) => {
                self.counted = false;
                Ok(Some(v))
            }
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(self.closed()),
        }
    }

    fn closed(&self) -> Error {
        Error::StageFailed {
            stage: self.name.clone(),
            reason: "upstream closed before end of stream".into(),
        }
    }
}
