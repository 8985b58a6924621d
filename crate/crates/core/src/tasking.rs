//! MEC task lifecycle and DC data buffers.
//!
//! Bits are integral throughout, so the DC conservation identity
//! `generated = collected + discarded + stored` holds exactly. Partial
//! transmissions move `floor(R · t)` bits.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::energy::ComputeParams;
use crate::matching::Association;
use crate::scenario::{Layout, TaskProfile};

#[derive(Debug, Error)]
pub enum TaskingError {
    #[error("association references unknown ground user {0}")]
    UnknownUser(usize),
    #[error("rate table has {got} entries, expected {expected}")]
    RateTable { got: usize, expected: usize },
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    InService,
    Completed,
    Expired,
}

impl TaskStatus {
    /// b_{m,f}: 1 while the task still needs service.
    pub fn unfinished(self) -> bool {
        matches!(self, TaskStatus::Pending | TaskStatus::InService)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: u64,
    pub owner: usize,
    pub bits_total: u64,
    pub bits_remaining: u64,
    /// Tolerance t_max in seconds.
    pub t_max: f64,
    pub birth_slot: usize,
    /// Last slot in which the task may still be served.
    pub deadline_slot: usize,
    pub status: TaskStatus,
    /// Transmission plus compute seconds spent on this task so far.
    pub service_time: f64,
}

/// P = min(1, δ·(slot − η)).
pub fn generation_probability(density: f64, slot: usize, last_generation: usize) -> f64 {
    (density * slot.saturating_sub(last_generation) as f64).min(1.0)
}

fn draw_size<R: Rng + ?Sized>(rng: &mut R, profile: &TaskProfile) -> usize {
    let dist = WeightedIndex::new(&profile.size_probs).expect("validated probabilities");
    dist.sample(rng)
}

/// FIFO task queue of one MEC user.
#[derive(Debug, Clone, PartialEq)]
pub struct GuQueue {
    pub owner: usize,
    pub tasks: VecDeque<Task>,
    /// η_g, the slot of the last generation.
    pub last_generation_slot: usize,
}

impl GuQueue {
    pub fn new(owner: usize) -> Self {
        Self {
            owner,
            tasks: VecDeque::new(),
            last_generation_slot: 0,
        }
    }

    /// Intermittent generation: draws once, and on success appends a task of
    /// a random size class and resets η.
    pub fn maybe_generate<R: Rng + ?Sized>(
        &mut self,
        slot: usize,
        rng: &mut R,
        profile: &TaskProfile,
        deadline_slots: usize,
        id: u64,
    ) -> Option<Task> {
        let p = generation_probability(profile.density, slot, self.last_generation_slot);
        if rng.random::<f64>() >= p {
            return None;
        }
        let k = draw_size(rng, profile);
        self.last_generation_slot = slot;
        let task = Task {
            id,
            owner: self.owner,
            bits_total: profile.sizes[k],
            bits_remaining: profile.sizes[k],
            t_max: profile.tolerance_limits[k],
            birth_slot: slot,
            deadline_slot: slot + deadline_slots,
            status: TaskStatus::Pending,
            service_time: 0.0,
        };
        self.tasks.push_back(task.clone());
        Some(task)
    }

    /// l_m: unfinished bits across the queue.
    pub fn unfinished_bits(&self) -> u64 {
        self.tasks.iter().map(|t| t.bits_remaining).sum()
    }

    pub fn head(&self) -> Option<&Task> {
        self.tasks.front()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Stored data of one DC user.
#[derive(Debug, Clone, PartialEq)]
pub struct DcBuffer {
    pub owner: usize,
    /// L_n in bits.
    pub stored: u64,
    pub generated_total: u64,
    pub discarded_total: u64,
    pub collected_total: u64,
    pub last_generation_slot: usize,
}

impl DcBuffer {
    pub fn new(owner: usize) -> Self {
        Self {
            owner,
            stored: 0,
            generated_total: 0,
            discarded_total: 0,
            collected_total: 0,
            last_generation_slot: 0,
        }
    }

    pub fn at_capacity(&self, limit: u64) -> bool {
        self.stored >= limit
    }

    /// Adds `bits`, discarding the oldest data beyond `limit`.
    pub fn push(&mut self, bits: u64, limit: u64) {
        self.generated_total += bits;
        let room = limit.saturating_sub(self.stored);
        let kept = bits.min(room);
        self.stored += kept;
        self.discarded_total += bits - kept;
    }

    /// Same generation model as MEC tasks; returns the bits generated.
    pub fn maybe_generate<R: Rng + ?Sized>(
        &mut self,
        slot: usize,
        rng: &mut R,
        profile: &TaskProfile,
    ) -> u64 {
        let p = generation_probability(profile.density, slot, self.last_generation_slot);
        if rng.random::<f64>() >= p {
            return 0;
        }
        let bits = profile.sizes[draw_size(rng, profile)];
        self.last_generation_slot = slot;
        self.push(bits, profile.dc_storage_limit);
        bits
    }

    pub fn collect(&mut self, bits: u64) -> u64 {
        let taken = bits.min(self.stored);
        self.stored -= taken;
        self.collected_total += taken;
        taken
    }

    pub fn is_conserved(&self) -> bool {
        self.generated_total == self.collected_total + self.discarded_total + self.stored
    }
}

/// Service one task received in a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskService {
    pub task_id: u64,
    pub owner: usize,
    pub uav: usize,
    pub tx_seconds: f64,
    pub compute_seconds: f64,
    pub bits_moved: u64,
    pub t_max: f64,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcCollection {
    pub owner: usize,
    /// L_n before collection.
    pub stored_before: u64,
    pub collected: u64,
}

/// Everything that happened in one slot's service pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServiceReport {
    /// T_i^f: transmission seconds per UAV.
    pub uav_tx_seconds: Vec<f64>,
    /// Bits received for computation per UAV.
    pub uav_bits: Vec<u64>,
    pub tasks: Vec<TaskService>,
    pub dc: Vec<DcCollection>,
    pub completed: Vec<u64>,
    /// Tasks fully served but past t_max under strict completion.
    pub late: Vec<u64>,
}

impl ServiceReport {
    /// D(t): bits collected by the DC-UAV this slot.
    pub fn dc_collected(&self) -> u64 {
        self.dc.iter().map(|c| c.collected).sum()
    }
}

/// Per-task row of the episode event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    pub task_id: u64,
    pub owner: usize,
    pub birth: usize,
    pub bits: u64,
    pub status: TaskStatus,
    pub finish_slot: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaskTally {
    pub generated: u64,
    pub completed: u64,
    pub expired: u64,
}

/// All task queues and DC buffers of an episode, plus the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskBook {
    pub layout: Layout,
    pub queues: Vec<GuQueue>,
    pub buffers: Vec<DcBuffer>,
    pub records: Vec<TaskRecord>,
    pub tally: TaskTally,
    deadline_slots: usize,
}

impl TaskBook {
    pub fn new(layout: Layout, deadline_slots: usize) -> Self {
        Self {
            layout,
            queues: layout.mec_users().map(GuQueue::new).collect(),
            buffers: layout.dc_users().map(DcBuffer::new).collect(),
            records: Vec::new(),
            tally: TaskTally::default(),
            deadline_slots,
        }
    }

    pub fn queue(&self, gu: usize) -> &GuQueue {
        &self.queues[gu]
    }

    pub fn buffer(&self, gu: usize) -> &DcBuffer {
        &self.buffers[gu - self.layout.num_mec_users]
    }

    pub fn buffer_mut(&mut self, gu: usize) -> &mut DcBuffer {
        let m = self.layout.num_mec_users;
        &mut self.buffers[gu - m]
    }

    /// Runs one generation draw for every ground user, MEC users first.
    pub fn generate<R: Rng + ?Sized>(&mut self, slot: usize, rng: &mut R, profile: &TaskProfile) {
        for q in &mut self.queues {
            let id = self.records.len() as u64;
            if let Some(t) = q.maybe_generate(slot, rng, profile, self.deadline_slots, id) {
                self.records.push(TaskRecord {
                    task_id: t.id,
                    owner: t.owner,
                    birth: t.birth_slot,
                    bits: t.bits_total,
                    status: TaskStatus::Pending,
                    finish_slot: None,
                });
                self.tally.generated += 1;
            }
        }
        for b in &mut self.buffers {
            b.maybe_generate(slot, rng, profile);
        }
    }

    /// Association candidacy: MEC users with queued work, DC users holding at
    /// least `min_collectible` bits.
    pub fn eligibility(&self, min_collectible: u64) -> Vec<bool> {
        self.queues
            .iter()
            .map(|q| !q.is_empty())
            .chain(self.buffers.iter().map(|b| b.stored >= min_collectible))
            .collect()
    }

    fn finish(&mut self, id: u64, status: TaskStatus, slot: usize) {
        let rec = &mut self.records[id as usize];
        rec.status = status;
        rec.finish_slot = Some(slot);
        match status {
            TaskStatus::Completed => self.tally.completed += 1,
            TaskStatus::Expired => self.tally.expired += 1,
            _ => {}
        }
    }

    /// Remaining tasks still queued.
    pub fn live_tasks(&self) -> u64 {
        self.queues.iter().map(|q| q.tasks.len() as u64).sum()
    }
}

/// Serves every associated user for one slot.
///
/// `rates[g]` is the uplink rate of user `g` at its associated UAV. MEC
/// users drain their queue head-first until the slot's transmission budget
/// is used up; the DC user's buffer gives up `min(L_n, ⌊R·τ⌋)` bits.
pub fn serve_slot(
    book: &mut TaskBook,
    association: &Association,
    rates: &[f64],
    compute: &[ComputeParams<f64>],
    slot_len: f64,
    slot: usize,
    strict_tmax: bool,
) -> Result<ServiceReport, TaskingError> {
    let layout = book.layout;
    let n = layout.num_gus();
    if rates.len() != n {
        return Err(TaskingError::RateTable {
            got: rates.len(),
            expected: n,
        });
    }
    let mut report = ServiceReport {
        uav_tx_seconds: vec![0.0; association.num_uavs()],
        uav_bits: vec![0; association.num_uavs()],
        ..Default::default()
    };
    for (gu, uav) in association.pairs() {
        if gu >= n {
            return Err(TaskingError::UnknownUser(gu));
        }
        let rate = rates[gu];
        if layout.is_mec_user(gu) {
            let cp = &compute[uav];
            let mut budget = slot_len;
            let mut finished = Vec::new();
            let queue = &mut book.queues[gu];
            for task in queue.tasks.iter_mut() {
                if budget <= 0.0 || rate <= 0.0 {
                    break;
                }
                let needed = task.bits_remaining as f64 / rate;
                let (moved, tx) = if needed <= budget {
                    (task.bits_remaining, needed)
                } else {
                    (((rate * budget).floor() as u64).min(task.bits_remaining), budget)
                };
                budget -= tx;
                let comp = cp.compute_time(moved as f64);
                task.bits_remaining -= moved;
                task.service_time += tx + comp;
                let done = task.bits_remaining == 0;
                task.status = if done { TaskStatus::Completed } else { TaskStatus::InService };
                report.uav_tx_seconds[uav] += tx;
                report.uav_bits[uav] += moved;
                report.tasks.push(TaskService {
                    task_id: task.id,
                    owner: gu,
                    uav,
                    tx_seconds: tx,
                    compute_seconds: comp,
                    bits_moved: moved,
                    t_max: task.t_max,
                    finished: done,
                });
                if done {
                    finished.push((task.id, task.service_time <= task.t_max + 1e-12));
                }
            }
            queue.tasks.retain(|t| t.bits_remaining > 0);
            for (id, in_time) in finished {
                if strict_tmax && !in_time {
                    report.late.push(id);
                    book.finish(id, TaskStatus::Expired, slot);
                } else {
                    report.completed.push(id);
                    book.finish(id, TaskStatus::Completed, slot);
                }
            }
        } else {
            let buffer = book.buffer_mut(gu);
            let before = buffer.stored;
            let cap = (rate.max(0.0) * slot_len).floor() as u64;
            let collected = buffer.collect(cap);
            report.dc.push(DcCollection {
                owner: gu,
                stored_before: before,
                collected,
            });
        }
    }
    Ok(report)
}

/// Drops every unfinished task whose deadline slot has passed.
pub fn expire_and_rotate(book: &mut TaskBook, slot: usize) -> Vec<Task> {
    let mut expired = Vec::new();
    for q in &mut book.queues {
        let mut keep = VecDeque::with_capacity(q.tasks.len());
        for mut t in q.tasks.drain(..) {
            if slot > t.deadline_slot && t.bits_remaining > 0 {
                t.status = TaskStatus::Expired;
                expired.push(t);
            } else {
                keep.push_back(t);
            }
        }
        q.tasks = keep;
    }
    for t in &expired {
        book.finish(t.id, TaskStatus::Expired, slot);
    }
    expired
}

/// Completed over generated MEC tasks, in percent; 100 when none generated.
pub fn completion_rate(tally: &TaskTally) -> f64 {
    if tally.generated == 0 {
        100.0
    } else {
        100.0 * tally.completed as f64 / tally.generated as f64
    }
}

/// Collected over generated DC bits, in percent; 100 when none generated.
pub fn dc_rate(buffers: &[DcBuffer]) -> f64 {
    let generated: u64 = buffers.iter().map(|b| b.generated_total).sum();
    let collected: u64 = buffers.iter().map(|b| b.collected_total).sum();
    if generated == 0 {
        100.0
    } else {
        100.0 * collected as f64 / generated as f64
    }
}

#[derive(Serialize)]
struct DcRow {
    owner: usize,
    stored: u64,
    generated_total: u64,
    collected_total: u64,
    discarded_total: u64,
}

impl TaskBook {
    /// Task event log: task_id, owner, birth, bits, status, finish_slot.
    pub fn write_event_log<W: Write>(&self, out: W) -> Result<(), TaskingError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_dc_ledger<W: Write>(&self, out: W) -> Result<(), TaskingError> {
        let mut w = csv::Writer::from_writer(out);
        for b in &self.buffers {
            w.serialize(DcRow {
                owner: b.owner,
                stored: b.stored,
                generated_total: b.generated_total,
                collected_total: b.collected_total,
                discarded_total: b.discarded_total,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_event_log(&self, path: &Path) -> Result<(), TaskingError> {
        self.write_event_log(std::fs::File::create(path)?)
    }

    pub fn save_dc_ledger(&self, path: &Path) -> Result<(), TaskingError> {
        self.write_dc_ledger(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Scenario, KBIT, MBIT};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile() -> TaskProfile {
        Scenario::default().tasks
    }

    fn layout(m: usize, n: usize) -> Layout {
        Layout {
            num_mec_uavs: 1,
            num_mec_users: m,
            num_dc_users: n,
        }
    }

    #[test]
    fn no_generation_at_gap_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = GuQueue::new(0);
        q.last_generation_slot = 7;
        for _ in 0..1000 {
            assert!(q.maybe_generate(7, &mut rng, &profile(), 20, 0).is_none());
        }
    }

    #[test]
    fn certain_generation_at_gap_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let mut q = GuQueue::new(0);
            let t = q.maybe_generate(5, &mut rng, &profile(), 20, 0).unwrap();
            assert_eq!(q.last_generation_slot, 5);
            assert_eq!(t.deadline_slot, 25);
            let k = profile().sizes.iter().position(|s| *s == t.bits_total).unwrap();
            assert_eq!(t.t_max, profile().tolerance_limits[k]);
        }
    }

    #[test]
    fn empirical_frequency_at_gap_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 100_000;
        let mut hits = 0;
        for _ in 0..trials {
            let mut q = GuQueue::new(0);
            if q.maybe_generate(2, &mut rng, &profile(), 20, 0).is_some() {
                hits += 1;
            }
        }
        let f = hits as f64 / trials as f64;
        assert!((f - 0.4).abs() < 0.01, "{f}");
    }

    #[test]
    fn full_buffer_discards() {
        let limit = 60 * MBIT;
        let mut b = DcBuffer::new(0);
        b.push(limit, limit);
        b.push(256 * KBIT, limit);
        assert_eq!(b.stored, limit);
        assert_eq!(b.discarded_total, 256 * KBIT);
        assert!(b.is_conserved());
        let mut e = DcBuffer::new(0);
        e.push(512 * KBIT, limit);
        assert_eq!(e.stored, 512 * KBIT);
    }

    #[test]
    fn conservation_over_random_slots() {
        // Replay oracle: recount each buffer from its own history of pushes
        // and pulls and compare with the running totals.
        let mut p = profile();
        p.dc_storage_limit = 4 * MBIT;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut b = DcBuffer::new(0);
        let (mut gen, mut got) = (0u64, 0u64);
        for slot in 1..=10_000 {
            gen += b.maybe_generate(slot, &mut rng, &p);
            if rng.random::<f64>() < 0.02 {
                got += b.collect(rng.random_range(0..2 * MBIT));
            }
            assert!(b.is_conserved());
            assert!(b.stored <= p.dc_storage_limit);
        }
        assert_eq!(gen, b.generated_total);
        assert_eq!(got, b.collected_total);
        assert!(b.discarded_total > 0);
    }

    fn book_with_task(bits: u64, t_max: f64) -> TaskBook {
        let mut book = TaskBook::new(layout(1, 1), 20);
        book.queues[0].tasks.push_back(Task {
            id: 0,
            owner: 0,
            bits_total: bits,
            bits_remaining: bits,
            t_max,
            birth_slot: 0,
            deadline_slot: 20,
            status: TaskStatus::Pending,
            service_time: 0.0,
        });
        book.records.push(TaskRecord {
            task_id: 0,
            owner: 0,
            birth: 0,
            bits,
            status: TaskStatus::Pending,
            finish_slot: None,
        });
        book.tally.generated = 1;
        book
    }

    fn compute() -> Vec<ComputeParams<f64>> {
        vec![ComputeParams::default(); 2]
    }

    #[test]
    fn small_task_latency() {
        let mut book = book_with_task(128 * KBIT, 0.25);
        let mut a = Association::new(2, 2);
        a.assign(0, 0);
        let r = serve_slot(&mut book, &a, &[1.6e6, 0.0], &compute(), 1.0, 1, false).unwrap();
        let s = &r.tasks[0];
        assert!((s.tx_seconds - 0.08192).abs() < 1e-12);
        assert!((s.compute_seconds - 1000.0 * 131072.0 / 6e9).abs() < 1e-12);
        assert!((s.compute_seconds - 0.02185).abs() < 1e-5);
        assert_eq!(r.completed, vec![0]);
        assert!(book.queues[0].is_empty());
        assert_eq!(book.tally.completed, 1);
        assert!((r.uav_tx_seconds[0] - 0.08192).abs() < 1e-12);
    }

    #[test]
    fn large_task_carries_over() {
        let bits = 512 * KBIT;
        let mut book = book_with_task(bits, 1.0);
        let mut a = Association::new(2, 2);
        a.assign(0, 0);
        let rate = 2e5;
        let r = serve_slot(&mut book, &a, &[rate, 0.0], &compute(), 1.0, 1, false).unwrap();
        let t = book.queues[0].head().unwrap();
        assert_eq!(t.bits_remaining, bits - 200_000);
        assert_eq!(t.status, TaskStatus::InService);
        assert!(r.completed.is_empty());
        assert!(r.tasks[0].tx_seconds <= 1.0);
    }

    #[test]
    fn strict_tmax_marks_late() {
        let mut book = book_with_task(128 * KBIT, 0.05);
        let mut a = Association::new(2, 2);
        a.assign(0, 0);
        let r = serve_slot(&mut book, &a, &[1.6e6, 0.0], &compute(), 1.0, 1, true).unwrap();
        assert_eq!(r.late, vec![0]);
        assert_eq!(book.tally.completed, 0);
        assert_eq!(book.tally.expired, 1);
    }

    #[test]
    fn empty_dc_buffer_collects_nothing() {
        let mut book = TaskBook::new(layout(1, 1), 20);
        let mut a = Association::new(2, 2);
        a.assign(1, 1);
        let r = serve_slot(&mut book, &a, &[0.0, 5e6], &compute(), 1.0, 1, false).unwrap();
        assert_eq!(r.dc_collected(), 0);
        book.buffer_mut(1).push(3_000_000, 60 * MBIT);
        let r = serve_slot(&mut book, &a, &[0.0, 2.5e6], &compute(), 1.0, 2, false).unwrap();
        assert_eq!(r.dc[0].stored_before, 3_000_000);
        assert_eq!(r.dc_collected(), 2_500_000);
        assert_eq!(book.buffer(1).stored, 500_000);
    }

    #[test]
    fn unknown_user_rejected() {
        let mut book = TaskBook::new(layout(1, 1), 20);
        let mut a = Association::new(2, 5);
        a.assign(4, 0);
        assert!(serve_slot(&mut book, &a, &[0.0, 0.0], &compute(), 1.0, 1, false).is_err());
    }

    #[test]
    fn expiry_after_deadline() {
        let mut book = book_with_task(512 * KBIT, 1.0);
        assert!(expire_and_rotate(&mut book, 20).is_empty());
        let e = expire_and_rotate(&mut book, 21);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].status, TaskStatus::Expired);
        assert!(expire_and_rotate(&mut book, 21).is_empty());
        assert_eq!(book.tally.expired, 1);
        assert_eq!(book.records[0].finish_slot, Some(21));
    }

    #[test]
    fn finished_task_never_expires() {
        let mut book = book_with_task(128 * KBIT, 1.0);
        let mut a = Association::new(2, 2);
        a.assign(0, 0);
        serve_slot(&mut book, &a, &[1.6e6, 0.0], &compute(), 1.0, 1, false).unwrap();
        assert!(expire_and_rotate(&mut book, 50).is_empty());
        assert_eq!(book.tally.completed, 1);
        assert_eq!(book.tally.expired, 0);
    }

    #[test]
    fn rates_and_conventions() {
        assert_eq!(completion_rate(&TaskTally::default()), 100.0);
        let t = TaskTally { generated: 4, completed: 3, expired: 1 };
        assert_eq!(completion_rate(&t), 75.0);
        assert_eq!(dc_rate(&[]), 100.0);
        let mut b = DcBuffer::new(0);
        b.push(1000, 10_000);
        assert_eq!(dc_rate(std::slice::from_ref(&b)), 0.0);
        b.collect(400);
        assert!((dc_rate(&[b]) - 40.0).abs() < 1e-12);
    }
}
