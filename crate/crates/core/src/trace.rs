//! Regret traces and the learner event stream.
//!
//! Every learner assigns the same action to all agents each round, so the
//! good agents share one instantaneous-regret sequence. A [`RegretTrace`]
//! stores it run-length encoded; group regret is that sequence scaled by the
//! number of good agents.

/// A run of `len` consecutive rounds with the same instantaneous regret.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub arm: usize,
    pub gap: f64,
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    n_good: usize,
    segments: Vec<Segment>,
    total: u64,
}

impl RegretTrace {
    pub fn new(n_good: usize) -> Self {
        Self { n_good, segments: Vec::new(), total: 0 }
    }

    pub fn n_good(&self) -> usize {
        self.n_good
    }

    /// Appends `len` rounds of `arm` with instantaneous regret `gap`.
    pub fn push(&mut self, arm: usize, gap: f64, len: u64) {
        if len == 0 {
            return;
        }
        debug_assert!(gap >= 0.0);
        match self.segments.last_mut() {
            Some(last) if last.arm == arm && last.gap == gap => last.len += len,
            _ => self.segments.push(Segment { arm, gap, len }),
        }
        self.total += len;
    }

    /// Number of rounds recorded.
    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Arm chosen at round `t` (one-based).
    pub fn action_at(&self, t: u64) -> Option<usize> {
        let mut end = 0;
        for s in &self.segments {
            end += s.len;
            if t <= end && t >= 1 {
                return Some(s.arm);
            }
        }
        None
    }

    /// Per-agent cumulative regret after each of the sorted round counts in
    /// `ts` (0 means before the first round).
    pub fn cumulative_at(&self, ts: &[u64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(ts.len());
        let mut seg = 0;
        let mut seg_start = 0u64;
        let mut before = 0.0;
        for &t in ts {
            let t = t.min(self.total);
            while seg < self.segments.len() && seg_start + self.segments[seg].len <= t {
                before += self.segments[seg].gap * self.segments[seg].len as f64;
                seg_start += self.segments[seg].len;
                seg += 1;
            }
            let partial = if seg < self.segments.len() { self.segments[seg].gap * (t - seg_start) as f64 } else { 0.0 };
            out.push(before + partial);
        }
        out
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative_at(&[self.total])[0]
    }

    /// Group regret `n_good × per-agent cumulative`.
    pub fn group_at(&self, ts: &[u64]) -> Vec<f64> {
        self.cumulative_at(ts).into_iter().map(|r| r * self.n_good as f64).collect()
    }

    /// `(R(T) − R(T/2)) / R(T/2)`: about 1 for linear growth, below 1 for
    /// sub-linear growth. Zero when no regret accrued in the first half.
    pub fn growth_ratio(&self) -> f64 {
        let half = self.total / 2;
        let r = self.cumulative_at(&[half, self.total]);
        if r[0] <= 0.0 {
            return if r[1] > 0.0 { f64::INFINITY } else { 0.0 };
        }
        (r[1] - r[0]) / r[0]
    }
}

/// Learner progress notifications.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    EpochStart { epoch: usize, n_active: usize, support: Vec<usize>, pulls_per_agent: u64 },
    Pulls { arm: usize, count: u64, gap: f64 },
    Eliminated { epoch: usize, arms: Vec<usize> },
    Action { t: u64, arm: usize, gap: f64 },
    Warning(String),
}

pub trait EventSink {
    fn emit(&mut self, event: &Event);
}

/// Discards every event.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&mut self, _: &Event) {}
}

impl EventSink for Vec<Event> {
    fn emit(&mut self, event: &Event) {
        self.push(event.clone());
    }
}

/// What one phased-elimination epoch did.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub eps: f64,
    pub gamma: f64,
    pub active: Vec<usize>,
    pub support: Vec<usize>,
    /// Pulls each agent made of each support arm (aligned with `support`).
    pub pulls: Vec<u64>,
    pub survivors: Vec<usize>,
    pub truncated: bool,
    pub g_value: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trace: RegretTrace,
    pub epochs: Vec<EpochRecord>,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_cumulative_segments() {
        let mut tr = RegretTrace::new(3);
        tr.push(1, 0.5, 4);
        tr.push(0, 0.0, 2);
        tr.push(2, 1.0, 3);
        assert_eq!(tr.len(), 9);
        assert_eq!(tr.cumulative_at(&[0, 1, 4, 5, 6, 7, 9, 20]), vec![0.0, 0.5, 2.0, 2.0, 2.0, 3.0, 5.0, 5.0]);
        assert_eq!(tr.group_at(&[9]), vec![15.0]);
        assert_eq!(tr.action_at(5), Some(0));
        assert_eq!(tr.action_at(10), None);
    }

    #[test]
    fn test_merges_runs() {
        let mut tr = RegretTrace::new(1);
        tr.push(1, 0.5, 4);
        tr.push(1, 0.5, 6);
        tr.push(1, 0.5, 0);
        assert_eq!(tr.segments().len(), 1);
        assert_eq!(tr.len(), 10);
    }

    #[test]
    fn test_growth_ratio() {
        let mut lin = RegretTrace::new(1);
        lin.push(1, 0.3, 1000);
        assert!((lin.growth_ratio() - 1.0).abs() < 1e-12);
        let mut flat = RegretTrace::new(1);
        flat.push(1, 0.3, 100);
        flat.push(0, 0.0, 900);
        assert_eq!(flat.growth_ratio(), 0.0);
    }
}
