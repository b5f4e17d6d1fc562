use std::sync::Arc;

use rand::Rng;
use swarmlang::Received;

use crate::placement::Topology;

/// Routes step-k outboxes to step-(k+1) inboxes. Every (message, receiver)
/// pair in range gets its own uniform draw, kept when `u >= drop_prob`, in
/// sender, message, receiver order. The draw is made even for P = 0 or 1
/// so the random stream does not depend on P's value.
pub fn deliver<R: Rng>(
    topo: &Topology,
    outboxes: &[Vec<Vec<u8>>],
    drop_prob: f64,
    rng: &mut R,
) -> Vec<Vec<Received>> {
    let mut inboxes: Vec<Vec<Received>> = vec![Vec::new(); topo.len()];
    for (sender, outbox) in outboxes.iter().enumerate() {
        for msg in outbox {
            let payload: Arc<[u8]> = Arc::from(msg.as_slice());
            for link in &topo.links[sender] {
                let u: f64 = rng.random();
                if u >= drop_prob {
                    inboxes[link.receiver as usize].push(Received {
                        payload: Arc::clone(&payload),
                        distance: link.distance,
                        azimuth: link.azimuth,
                        elevation: 0.0,
                    });
                }
            }
        }
    }
    inboxes
}
