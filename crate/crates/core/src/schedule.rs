use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_n = n dt`, `n = 0..=nsteps`, with a subset of the
/// instants marked as output snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    dt: f64,
    nsteps: usize,
    snapshot_every: usize,
}

impl Schedule {
    pub fn new(dt: f64, nsteps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Schedule {
            dt,
            nsteps,
            snapshot_every: 1,
        })
    }

    /// Smallest number of equal steps of length at most `dt_target` that
    /// covers `[0, t_final]`.
    pub fn covering(t_final: f64, dt_target: f64) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if !(dt_target > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt_target}"
            )));
        }
        let nsteps = ((t_final / dt_target) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::new(t_final / nsteps as f64, nsteps)
    }

    /// Marks roughly `count` evenly spaced instants (plus both endpoints) as
    /// snapshots.
    pub fn with_snapshots(mut self, count: usize) -> Self {
        self.snapshot_every = (self.nsteps / count.max(1)).max(1);
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nsteps(&self) -> usize {
        self.nsteps
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.nsteps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nsteps).map(|n| self.time(n)).collect()
    }

    pub fn snapshot_every(&self) -> usize {
        self.snapshot_every
    }

    pub fn is_snapshot(&self, n: usize) -> bool {
        n % self.snapshot_every == 0 || n == self.nsteps
    }

    pub fn snapshot_steps(&self) -> Vec<usize> {
        (0..=self.nsteps).filter(|&n| self.is_snapshot(n)).collect()
    }

    /// Same horizon with the step halved.
    pub fn halved(&self) -> Self {
        Schedule {
            dt: self.dt / 2.0,
            nsteps: self.nsteps * 2,
            snapshot_every: self.snapshot_every * 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_hits_final_time() {
        let s = Schedule::covering(0.1, 1e-4).unwrap();
        assert_eq!(s.nsteps(), 1000);
        assert!((s.t_final() - 0.1).abs() < 1e-15);
        let s = Schedule::covering(0.1, 3e-4).unwrap();
        assert_eq!(s.nsteps(), 334);
        assert!(s.dt() <= 3e-4);
        assert!(Schedule::covering(0.0, 1e-3).is_err());
    }

    #[test]
    fn snapshots_include_endpoints() {
        let s = Schedule::covering(1.0, 0.01).unwrap().with_snapshots(7);
        let snaps = s.snapshot_steps();
        assert_eq!(snaps[0], 0);
        assert_eq!(*snaps.last().unwrap(), 100);
        // every 14th step plus the final one
        assert_eq!(snaps.len(), 9);
        let h = s.halved();
        assert_eq!(h.snapshot_steps().len(), snaps.len());
    }
}
