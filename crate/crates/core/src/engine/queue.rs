//! Priority-ordered remediation queue with a per-cycle budget ledger.
//!
//! Ordering is priority tier first (resistance > detection > response >
//! resilience), then the scheduling-strategy key, then FIFO by enqueue
//! tick, with the control index as the final deterministic tie-break.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct QueueItem {
    pub control: usize,
    pub enqueued_tick: u64,
    pub priority_tier: u8,
    pub strategy_key: f64,
    pub cost_hours: f64,
}

impl QueueItem {
    fn ord_key(&self) -> (u8, f64, u64, usize) {
        (self.priority_tier, self.strategy_key, self.enqueued_tick, self.control)
    }
}

fn cmp_key(a: (u8, f64, u64, usize), b: (u8, f64, u64, usize)) -> std::cmp::Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3))
}

#[derive(Debug, Clone, Default)]
pub struct RemediationQueue {
    items: Vec<QueueItem>,
    budget_remaining_hours: f64,
    current_cycle_start_tick: u64,
}

impl RemediationQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn items(&self) -> &[QueueItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn budget_remaining_hours(&self) -> f64 {
        self.budget_remaining_hours
    }

    pub fn current_cycle_start_tick(&self) -> u64 {
        self.current_cycle_start_tick
    }

    /// Insert in priority order, after any existing item with an equal key.
    pub fn insert(&mut self, item: QueueItem) {
        let pos = self.items.partition_point(|existing| {
            cmp_key(existing.ord_key(), item.ord_key()) != std::cmp::Ordering::Greater
        });
        self.items.insert(pos, item);
    }

    /// Cycle boundary for resetting cadences: unused hours are discarded.
    pub fn reset_budget(&mut self, hours: f64, now_tick: u64) {
        self.budget_remaining_hours = hours;
        self.current_cycle_start_tick = now_tick;
    }

    /// Continuous accrual, capped.
    pub fn accrue(&mut self, hours: f64, cap: f64) {
        self.budget_remaining_hours = (self.budget_remaining_hours + hours).min(cap);
    }

    /// Start the item at `index`: deduct its full cost and remove it.
    pub fn start(&mut self, index: usize, cost_hours: f64) -> QueueItem {
        debug_assert!(self.budget_remaining_hours >= cost_hours);
        self.budget_remaining_hours -= cost_hours;
        self.items.remove(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(control: usize, tier: u8, key: f64, tick: u64) -> QueueItem {
        QueueItem {
            control,
            enqueued_tick: tick,
            priority_tier: tier,
            strategy_key: key,
            cost_hours: 8.0,
        }
    }

    #[test]
    fn ordering_is_tier_then_key_then_fifo() {
        let mut q = RemediationQueue::new();
        q.insert(item(0, 2, 1.0, 5));
        q.insert(item(1, 0, 9.0, 6));
        q.insert(item(2, 0, 1.0, 7));
        q.insert(item(3, 0, 1.0, 3));
        let order: Vec<usize> = q.items().iter().map(|i| i.control).collect();
        // Tier 0 first; within it key 1.0 before 9.0; FIFO among equal keys.
        assert_eq!(order, vec![3, 2, 1, 0]);
    }

    #[test]
    fn budget_deducts_on_start() {
        let mut q = RemediationQueue::new();
        q.reset_budget(10.0, 0);
        q.insert(item(0, 0, 1.0, 0));
        let it = q.start(0, 8.0);
        assert_eq!(it.control, 0);
        assert!((q.budget_remaining_hours() - 2.0).abs() < 1e-12);
        assert!(q.is_empty());
    }

    #[test]
    fn accrual_respects_cap() {
        let mut q = RemediationQueue::new();
        for _ in 0..1000 {
            q.accrue(1.0, 120.0);
        }
        assert_eq!(q.budget_remaining_hours(), 120.0);
    }
}
