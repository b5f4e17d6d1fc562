//! Swarm membership: the local registry, the view of neighbor memberships
//! and the compaction rules for outbound swarm messages.

use std::collections::{BTreeMap, BTreeSet};

use crate::queue::OutQueue;
use crate::wire::Message;

pub const DEFAULT_FORGET_THRESHOLD: u32 = 50;
pub const DEFAULT_LIST_PERIOD: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwarmMessage {
    Join(u16),
    Leave(u16),
    List(Vec<u16>),
}

impl SwarmMessage {
    pub fn to_message(&self) -> Message {
        match self {
            Self::Join(swarm) => Message::SwarmJoin { swarm: *swarm },
            Self::Leave(swarm) => Message::SwarmLeave { swarm: *swarm },
            Self::List(swarms) => Message::SwarmList {
                swarms: swarms.clone(),
            },
        }
    }

    pub fn from_message(msg: &Message) -> Option<Self> {
        match msg {
            Message::SwarmJoin { swarm } => Some(Self::Join(*swarm)),
            Message::SwarmLeave { swarm } => Some(Self::Leave(*swarm)),
            Message::SwarmList { swarms } => Some(Self::List(swarms.clone())),
            _ => None,
        }
    }
}

/// Enqueues a swarm message applying the compaction rules:
///
/// * a LIST supersedes every queued swarm message;
/// * a JOIN or LEAVE after a queued LIST is folded into that LIST;
/// * a JOIN cancels a queued LEAVE for the same swarm and vice versa;
/// * a JOIN (LEAVE) behind an identical queued JOIN (LEAVE) is discarded.
pub fn enqueue(queue: &mut OutQueue, msg: SwarmMessage) {
    let items = queue.items_mut();
    match msg {
        SwarmMessage::List(_) => {
            items.retain(|m| SwarmMessage::from_message(m).is_none());
            items.push(msg.to_message());
        }
        SwarmMessage::Join(id) | SwarmMessage::Leave(id) => {
            let joining = matches!(msg, SwarmMessage::Join(_));
            if let Some(Message::SwarmList { swarms }) = items
                .iter_mut()
                .find(|m| matches!(m, Message::SwarmList { .. }))
            {
                if joining {
                    if !swarms.contains(&id) {
                        swarms.push(id);
                    }
                } else {
                    swarms.retain(|s| *s != id);
                }
                return;
            }
            let same = |m: &Message| match m {
                Message::SwarmJoin { swarm } => Some((true, *swarm == id)),
                Message::SwarmLeave { swarm } => Some((false, *swarm == id)),
                _ => None,
            };
            if items.iter().any(|m| same(m) == Some((joining, true))) {
                return;
            }
            items.retain(|m| same(m) != Some((!joining, true)));
            items.push(msg.to_message());
        }
    }
}

/// Reference form of the optimizer: the result of enqueuing `msgs` in
/// order into an empty queue.
pub fn optimize_queue(msgs: &[SwarmMessage]) -> Vec<SwarmMessage> {
    let mut q = OutQueue::new();
    for m in msgs {
        enqueue(&mut q, m.clone());
    }
    q.iter().filter_map(SwarmMessage::from_message).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeighborSwarms {
    pub swarms: BTreeSet<u16>,
    /// Steps since the last swarm message from this robot.
    pub age: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwarmRegistry {
    /// Swarms created on this robot and whether it is a member.
    pub local: BTreeMap<u16, bool>,
    pub neighbor_info: BTreeMap<u32, NeighborSwarms>,
    pub forget_threshold: u32,
    pub list_period: u64,
}

impl Default for SwarmRegistry {
    fn default() -> Self {
        Self::new(DEFAULT_FORGET_THRESHOLD, DEFAULT_LIST_PERIOD)
    }
}

impl SwarmRegistry {
    pub fn new(forget_threshold: u32, list_period: u64) -> Self {
        Self {
            local: BTreeMap::new(),
            neighbor_info: BTreeMap::new(),
            forget_threshold,
            list_period,
        }
    }

    /// Registers a swarm; an existing entry keeps its flag.
    pub fn create(&mut self, id: u16) {
        self.local.entry(id).or_insert(false);
    }

    pub fn is_member(&self, id: u16) -> bool {
        self.local.get(&id).copied().unwrap_or(false)
    }

    /// Sets the membership flag. Returns the message to queue when the flag
    /// actually changed.
    pub fn set_member(&mut self, id: u16, member: bool) -> Option<SwarmMessage> {
        let flag = self.local.entry(id).or_insert(false);
        if *flag == member {
            return None;
        }
        *flag = member;
        Some(if member {
            SwarmMessage::Join(id)
        } else {
            SwarmMessage::Leave(id)
        })
    }

    pub fn memberships(&self) -> Vec<u16> {
        self.local
            .iter()
            .filter(|(_, m)| **m)
            .map(|(id, _)| *id)
            .collect()
    }

    /// Updates the view of `robot` from one of its swarm messages.
    pub fn apply(&mut self, robot: u32, msg: &SwarmMessage) {
        let entry = self.neighbor_info.entry(robot).or_default();
        entry.age = 0;
        match msg {
            SwarmMessage::Join(id) => {
                entry.swarms.insert(*id);
            }
            SwarmMessage::Leave(id) => {
                entry.swarms.remove(id);
            }
            SwarmMessage::List(ids) => entry.swarms = ids.iter().copied().collect(),
        }
    }

    /// Per-step bookkeeping: ages entries, forgets stale ones and, on
    /// `step` multiples of the list period, queues a LIST.
    pub fn on_step(&mut self, step: u64, queue: &mut OutQueue) {
        for info in self.neighbor_info.values_mut() {
            info.age += 1;
        }
        let limit = self.forget_threshold;
        self.neighbor_info.retain(|_, info| info.age <= limit);
        if self.list_period > 0 && step.is_multiple_of(self.list_period) {
            enqueue(queue, SwarmMessage::List(self.memberships()));
        }
    }

    /// Known membership of `robot` in `swarm`; `None` when nothing is known.
    pub fn neighbor_member(&self, robot: u32, swarm: u16) -> Option<bool> {
        self.neighbor_info
            .get(&robot)
            .map(|info| info.swarms.contains(&swarm))
    }
}

#[cfg(test)]
mod tests {
    use super::SwarmMessage::*;
    use super::*;

    #[test]
    fn list_purges_older_messages() {
        assert_eq!(
            optimize_queue(&[Join(1), List(vec![1, 2]), List(vec![1, 2])]),
            vec![List(vec![1, 2])]
        );
    }

    #[test]
    fn leave_folds_into_list() {
        assert_eq!(optimize_queue(&[List(vec![1, 2]), Leave(2)]), vec![List(vec![1])]);
        assert_eq!(optimize_queue(&[List(vec![1]), Join(3), Join(1)]), vec![List(vec![1, 3])]);
    }

    #[test]
    fn join_cancels_leave_and_back() {
        assert_eq!(optimize_queue(&[Leave(3), Join(3)]), vec![Join(3)]);
        assert_eq!(optimize_queue(&[Join(3), Leave(3)]), vec![Leave(3)]);
        assert_eq!(optimize_queue(&[Join(3), Join(3)]), vec![Join(3)]);
        assert_eq!(optimize_queue(&[Leave(3), Leave(3)]), vec![Leave(3)]);
        assert_eq!(optimize_queue(&[Join(1), Leave(2)]), vec![Join(1), Leave(2)]);
    }

    #[test]
    fn non_swarm_messages_survive_a_list() {
        let mut q = OutQueue::new();
        q.push_raw(Message::Broadcast {
            key: "k".into(),
            value: crate::wire::Datum::Nil,
        });
        enqueue(&mut q, Join(1));
        enqueue(&mut q, List(vec![]));
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn flag_changes_only_emit_messages() {
        let mut reg = SwarmRegistry::default();
        reg.create(1);
        assert!(!reg.is_member(1));
        assert_eq!(reg.set_member(1, false), None);
        assert_eq!(reg.set_member(1, true), Some(Join(1)));
        assert_eq!(reg.set_member(1, true), None);
        reg.create(1);
        assert!(reg.is_member(1));
    }

    #[test]
    fn ages_and_forgets() {
        let mut reg = SwarmRegistry::new(3, 10);
        let mut q = OutQueue::new();
        reg.apply(9, &Join(1));
        for step in 1..=3 {
            reg.on_step(step, &mut q);
            assert!(reg.neighbor_info.contains_key(&9));
        }
        reg.apply(9, &Join(2));
        assert_eq!(reg.neighbor_info[&9].age, 0);
        for step in 4..=7 {
            reg.on_step(step, &mut q);
        }
        assert!(!reg.neighbor_info.contains_key(&9));
        assert!(q.is_empty());
        reg.on_step(10, &mut q);
        assert_eq!(q.len(), 1);
    }
}
