//! Outbound message queue shared by the runtime protocols.
//!
//! Each protocol applies its own compaction rules when it enqueues; the
//! queue itself keeps insertion order and drains front to back.

use crate::wire::{Envelope, Message, WireError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutQueue {
    items: Vec<Message>,
}

impl OutQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.items.iter()
    }

    /// Appends without any compaction.
    pub fn push_raw(&mut self, msg: Message) {
        self.items.push(msg);
    }

    pub(crate) fn items_mut(&mut self) -> &mut Vec<Message> {
        &mut self.items
    }

    /// Removes and encodes messages from the front while they fit in
    /// `budget` bytes. Stops at the first message that does not fit so that
    /// queue order is preserved.
    pub fn drain_budget(&mut self, sender: u32, budget: &mut usize) -> Result<Vec<Vec<u8>>, WireError> {
        let mut out = Vec::new();
        let mut taken = 0;
        for msg in &self.items {
            let bytes = Envelope::new(sender, msg.clone()).encode()?;
            if bytes.len() > *budget {
                break;
            }
            *budget -= bytes.len();
            out.push(bytes);
            taken += 1;
        }
        self.items.drain(..taken);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drain_respects_budget_and_order() {
        let mut q = OutQueue::new();
        q.push_raw(Message::SwarmJoin { swarm: 1 });
        q.push_raw(Message::SwarmList { swarms: vec![1, 2, 3] });
        q.push_raw(Message::SwarmJoin { swarm: 2 });
        let mut budget = 12;
        let out = q.drain_budget(0, &mut budget).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(budget, 5);
        assert_eq!(q.len(), 2);
        let mut zero = 0;
        assert!(q.drain_budget(0, &mut zero).unwrap().is_empty());
        assert_eq!(q.len(), 2);
    }
}
