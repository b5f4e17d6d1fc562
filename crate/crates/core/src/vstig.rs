//! Virtual stigmergy: a replicated key/value store whose entries carry a
//! per-key Lamport timestamp and the id of the last writer.
//!
//! This module holds the protocol state machine. Conflict resolution is
//! supplied by the caller so that script-defined resolvers can run inside
//! the VM.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::queue::OutQueue;
use crate::wire::{Datum, Message, VStigWire};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VStigError {
    #[error("stigmergy keys must be integers, floats or strings, not {0}")]
    BadKey(&'static str),
}

/// Store key: integral floats collapse onto integers, like table keys.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VKey {
    Int(i64),
    Float(u64),
    Str(String),
}

impl VKey {
    pub fn from_datum(d: &Datum) -> Result<Self, VStigError> {
        match d {
            Datum::Int(i) => Ok(VKey::Int(*i)),
            Datum::Float(f) if f.is_nan() => Err(VStigError::BadKey("NaN")),
            Datum::Float(f) if f.fract() == 0.0 && f.abs() < 9.2e18 => Ok(VKey::Int(*f as i64)),
            Datum::Float(f) => Ok(VKey::Float(f.to_bits())),
            Datum::Str(s) => Ok(VKey::Str(s.clone())),
            Datum::Nil => Err(VStigError::BadKey("nil")),
            Datum::Table(_) => Err(VStigError::BadKey("a table")),
        }
    }

    pub fn to_datum(&self) -> Datum {
        match self {
            VKey::Int(i) => Datum::Int(*i),
            VKey::Float(b) => Datum::Float(f64::from_bits(*b)),
            VKey::Str(s) => Datum::Str(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VStigEntry {
    pub value: Datum,
    pub timestamp: u32,
    pub robot: u32,
}

/// Outcome of a conflict between two entries with equal timestamps.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Local,
    Remote,
    /// A new entry built by the resolver.
    Fresh(VStigEntry),
}

/// Default policy: the entry written by the highest robot id wins.
pub fn default_resolve(local: &VStigEntry, remote: &VStigEntry) -> Resolution {
    if remote.robot > local.robot {
        Resolution::Remote
    } else {
        Resolution::Local
    }
}

/// What the store wants the runtime to do after handling a message.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reaction {
    /// A PUT to queue.
    pub send: Option<VStigWire>,
    /// The local entry that lost a conflict, if any.
    pub lost: Option<VStigEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VStigStore {
    pub id: u16,
    entries: BTreeMap<VKey, VStigEntry>,
}

impl VStigStore {
    pub fn new(id: u16) -> Self {
        Self {
            id,
            entries: BTreeMap::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, key: &VKey) -> Option<&VStigEntry> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&VKey, &VStigEntry)> {
        self.entries.iter()
    }

    fn wire(&self, key: &VKey, e: &VStigEntry) -> VStigWire {
        VStigWire {
            vstig: self.id,
            key: key.to_datum(),
            value: e.value.clone(),
            timestamp: e.timestamp,
            robot: e.robot,
        }
    }

    /// Local write. Returns the PUT to queue.
    pub fn put(&mut self, key: VKey, value: Datum, robot: u32) -> VStigWire {
        let timestamp = self
            .entries
            .get(&key)
            .map_or(1, |e| e.timestamp.saturating_add(1));
        let e = VStigEntry {
            value,
            timestamp,
            robot,
        };
        let w = self.wire(&key, &e);
        self.entries.insert(key, e);
        w
    }

    /// Local read. Returns the value (nil when absent) and the GET to queue,
    /// which carries timestamp 0 for an absent key.
    pub fn get(&self, key: &VKey, robot: u32) -> (Datum, VStigWire) {
        match self.entries.get(key) {
            Some(e) => (e.value.clone(), self.wire(key, e)),
            None => (
                Datum::Nil,
                VStigWire {
                    vstig: self.id,
                    key: key.to_datum(),
                    value: Datum::Nil,
                    timestamp: 0,
                    robot,
                },
            ),
        }
    }

    fn remote_entry(w: &VStigWire) -> VStigEntry {
        VStigEntry {
            value: w.value.clone(),
            timestamp: w.timestamp,
            robot: w.robot,
        }
    }

    fn adopt(&mut self, key: VKey, remote: VStigEntry) -> Reaction {
        let send = Some(self.wire(&key, &remote));
        self.entries.insert(key, remote);
        Reaction { send, lost: None }
    }

    fn conflict<E>(
        &mut self,
        key: VKey,
        remote: VStigEntry,
        resolve: impl FnOnce(&VKey, &VStigEntry, &VStigEntry) -> Result<Resolution, E>,
    ) -> Result<Reaction, E> {
        let local = self.entries[&key].clone();
        let winner = match resolve(&key, &local, &remote)? {
            Resolution::Local => local.clone(),
            Resolution::Remote => remote,
            Resolution::Fresh(e) => e,
        };
        let lost = (winner != local).then_some(local);
        let send = Some(self.wire(&key, &winner));
        self.entries.insert(key, winner);
        Ok(Reaction { send, lost })
    }

    /// Handles an incoming PUT.
    pub fn on_put<E>(
        &mut self,
        w: &VStigWire,
        resolve: impl FnOnce(&VKey, &VStigEntry, &VStigEntry) -> Result<Resolution, E>,
    ) -> Result<Reaction, E> {
        let Ok(key) = VKey::from_datum(&w.key) else {
            return Ok(Reaction::default());
        };
        let remote = Self::remote_entry(w);
        let local_ts = self.entries.get(&key).map(|e| (e.timestamp, e.robot));
        match local_ts {
            None if remote.timestamp > 0 => Ok(self.adopt(key, remote)),
            None => Ok(Reaction::default()),
            Some((ts, _)) if remote.timestamp > ts => Ok(self.adopt(key, remote)),
            Some((ts, robot)) if remote.timestamp == ts && remote.robot != robot => {
                self.conflict(key, remote, resolve)
            }
            Some(_) => Ok(Reaction::default()),
        }
    }

    /// Handles an incoming GET: answers with the local entry when it is
    /// newer, adopts the remote one when it is newer.
    pub fn on_get<E>(
        &mut self,
        w: &VStigWire,
        resolve: impl FnOnce(&VKey, &VStigEntry, &VStigEntry) -> Result<Resolution, E>,
    ) -> Result<Reaction, E> {
        let Ok(key) = VKey::from_datum(&w.key) else {
            return Ok(Reaction::default());
        };
        let remote = Self::remote_entry(w);
        match self.entries.get(&key) {
            None if remote.timestamp > 0 => Ok(self.adopt(key, remote)),
            None => Ok(Reaction::default()),
            Some(local) if local.timestamp > remote.timestamp => Ok(Reaction {
                send: Some(self.wire(&key, local)),
                lost: None,
            }),
            Some(local) if local.timestamp < remote.timestamp => Ok(self.adopt(key, remote)),
            Some(local) if local.robot != remote.robot => self.conflict(key, remote, resolve),
            Some(_) => Ok(Reaction::default()),
        }
    }
}

/// Kind of a queued stigmergy message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VStigOp {
    Put,
    Get,
}

/// Enqueues a PUT or GET keeping at most one message per (store, key): a
/// newer timestamp replaces the queued message, and at equal timestamps a
/// PUT is never replaced by a GET.
pub fn enqueue(queue: &mut OutQueue, op: VStigOp, w: VStigWire) {
    let Ok(key) = VKey::from_datum(&w.key) else {
        return;
    };
    let items = queue.items_mut();
    let existing = items.iter().position(|m| match m {
        Message::VStigPut(q) | Message::VStigGet(q) => {
            q.vstig == w.vstig && VKey::from_datum(&q.key).as_ref() == Ok(&key)
        }
        _ => false,
    });
    let msg = match op {
        VStigOp::Put => Message::VStigPut(w),
        VStigOp::Get => Message::VStigGet(w),
    };
    let Some(i) = existing else {
        items.push(msg);
        return;
    };
    let (old_ts, old_put) = match &items[i] {
        Message::VStigPut(q) => (q.timestamp, true),
        Message::VStigGet(q) => (q.timestamp, false),
        _ => unreachable!(),
    };
    let new_ts = match &msg {
        Message::VStigPut(q) | Message::VStigGet(q) => q.timestamp,
        _ => unreachable!(),
    };
    if new_ts > old_ts || (new_ts == old_ts && !(old_put && op == VStigOp::Get)) {
        items[i] = msg;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn never<E>(_: &VKey, _: &VStigEntry, _: &VStigEntry) -> Result<Resolution, E> {
        panic!("no conflict expected")
    }

    fn default<E>(_: &VKey, l: &VStigEntry, r: &VStigEntry) -> Result<Resolution, E> {
        Ok(default_resolve(l, r))
    }

    fn wire(ts: u32, robot: u32, v: i64) -> VStigWire {
        VStigWire {
            vstig: 1,
            key: Datum::Str("a".into()),
            value: Datum::Int(v),
            timestamp: ts,
            robot,
        }
    }

    fn key() -> VKey {
        VKey::Str("a".into())
    }

    fn store_with(ts: u32, robot: u32, v: i64) -> VStigStore {
        let mut s = VStigStore::new(1);
        s.entries.insert(
            key(),
            VStigEntry {
                value: Datum::Int(v),
                timestamp: ts,
                robot,
            },
        );
        s
    }

    #[test]
    fn local_writes_increase_timestamp() {
        let mut s = VStigStore::new(1);
        let a = s.put(key(), Datum::Int(6), 0);
        let b = s.put(key(), Datum::Int(7), 0);
        assert_eq!((a.timestamp, b.timestamp), (1, 2));
        assert_eq!(s.get(&key(), 0).0, Datum::Int(7));
        assert_eq!(s.size(), 1);
    }

    #[test]
    fn get_of_absent_key_carries_zero_timestamp() {
        let s = VStigStore::new(1);
        let (v, w) = s.get(&key(), 4);
        assert_eq!(v, Datum::Nil);
        assert_eq!((w.timestamp, w.robot), (0, 4));
    }

    #[test]
    fn put_newer_adopted_older_ignored() {
        let mut s = store_with(3, 1, 0);
        let r = s.on_put(&wire(5, 2, 9), never::<()>).unwrap();
        assert_eq!(r.send.unwrap().timestamp, 5);
        let mut s = store_with(5, 1, 0);
        assert_eq!(s.on_put(&wire(3, 2, 9), never::<()>).unwrap(), Reaction::default());
        assert_eq!(s.entry(&key()).unwrap().timestamp, 5);
    }

    #[test]
    fn equal_timestamp_highest_robot_wins() {
        let mut s = store_with(2, 3, 30);
        let r = s.on_put(&wire(2, 7, 70), default::<()>).unwrap();
        assert_eq!(s.entry(&key()).unwrap().robot, 7);
        assert_eq!(r.lost.unwrap().robot, 3);
        let mut s = store_with(2, 7, 70);
        let r = s.on_put(&wire(2, 3, 30), default::<()>).unwrap();
        assert_eq!(s.entry(&key()).unwrap().robot, 7);
        assert!(r.lost.is_none());
        assert_eq!(r.send.unwrap().robot, 7);
    }

    #[test]
    fn get_replies_or_adopts() {
        let mut s = store_with(7, 1, 0);
        let r = s.on_get(&wire(4, 2, 0), never::<()>).unwrap();
        assert_eq!(r.send.unwrap().timestamp, 7);
        let mut s = store_with(2, 1, 0);
        let r = s.on_get(&wire(4, 2, 9), never::<()>).unwrap();
        assert_eq!(r.send.unwrap().timestamp, 4);
        assert_eq!(s.entry(&key()).unwrap().value, Datum::Int(9));
        let mut s = store_with(4, 2, 9);
        assert_eq!(s.on_get(&wire(4, 2, 9), never::<()>).unwrap(), Reaction::default());
    }

    #[test]
    fn queue_keeps_freshest_per_key() {
        let mut q = OutQueue::new();
        enqueue(&mut q, VStigOp::Put, wire(2, 0, 1));
        enqueue(&mut q, VStigOp::Put, wire(3, 0, 2));
        assert_eq!(q.len(), 1);
        let mut other = wire(1, 0, 0);
        other.key = Datum::Str("b".into());
        enqueue(&mut q, VStigOp::Put, other);
        assert_eq!(q.len(), 2);

        let mut q = OutQueue::new();
        enqueue(&mut q, VStigOp::Get, wire(3, 0, 1));
        enqueue(&mut q, VStigOp::Put, wire(3, 0, 1));
        assert!(matches!(q.iter().next(), Some(Message::VStigPut(_))));
        enqueue(&mut q, VStigOp::Get, wire(3, 0, 1));
        assert!(matches!(q.iter().next(), Some(Message::VStigPut(_))));
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn table_keys_rejected() {
        assert!(VKey::from_datum(&Datum::Table(vec![])).is_err());
        assert_eq!(VKey::from_datum(&Datum::Float(3.0)).unwrap(), VKey::Int(3));
    }
}
