//! Neighbor records collected from situated communication, and the
//! outbound rule for key/value broadcasts.

use std::collections::BTreeMap;

use crate::queue::OutQueue;
use crate::wire::{Datum, Message};

/// Position of a neighbor relative to the receiving robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborRecord {
    pub robot: u32,
    /// Centimeters.
    pub distance: f64,
    /// Radians.
    pub azimuth: f64,
    /// Radians.
    pub elevation: f64,
}

/// Builds the per-step neighbor table. A robot heard more than once keeps
/// its last reading.
pub fn rebuild(readings: impl IntoIterator<Item = NeighborRecord>) -> BTreeMap<u32, NeighborRecord> {
    let mut view = BTreeMap::new();
    for r in readings {
        view.insert(r.robot, r);
    }
    view
}

/// Queues a broadcast, replacing a queued broadcast with the same key.
pub fn enqueue_broadcast(queue: &mut OutQueue, key: String, value: Datum) {
    let items = queue.items_mut();
    for m in items.iter_mut() {
        if let Message::Broadcast { key: k, value: v } = m {
            if *k == key {
                *v = value;
                return;
            }
        }
    }
    items.push(Message::Broadcast { key, value });
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(robot: u32, distance: f64) -> NeighborRecord {
        NeighborRecord {
            robot,
            distance,
            azimuth: 0.0,
            elevation: 0.0,
        }
    }

    #[test]
    fn empty_and_counted() {
        assert!(rebuild([]).is_empty());
        assert_eq!(rebuild([rec(1, 1.0), rec(2, 1.0), rec(3, 1.0)]).len(), 3);
    }

    #[test]
    fn broadcast_keeps_most_recent() {
        let mut q = OutQueue::new();
        enqueue_broadcast(&mut q, "d".into(), Datum::Int(1));
        enqueue_broadcast(&mut q, "e".into(), Datum::Int(5));
        enqueue_broadcast(&mut q, "d".into(), Datum::Int(2));
        let msgs: Vec<_> = q.iter().cloned().collect();
        assert_eq!(
            msgs,
            vec![
                Message::Broadcast {
                    key: "d".into(),
                    value: Datum::Int(2)
                },
                Message::Broadcast {
                    key: "e".into(),
                    value: Datum::Int(5)
                },
            ]
        );
    }

    proptest! {
        #[test]
        fn duplicate_readings_last_wins(readings in prop::collection::vec((0u32..8, 0.0f64..500.0), 0..40)) {
            let view = rebuild(readings.iter().map(|&(r, d)| rec(r, d)));
            for (robot, record) in &view {
                let last = readings.iter().rev().find(|(r, _)| r == robot).unwrap();
                prop_assert_eq!(record.distance, last.1);
            }
            let distinct: std::collections::BTreeSet<_> = readings.iter().map(|(r, _)| *r).collect();
            prop_assert_eq!(view.len(), distinct.len());
        }
    }
}
