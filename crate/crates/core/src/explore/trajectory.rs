use crate::env::ControlSystem;
use crate::error::{Error, Result};
use std::path::Path;

/// Recorded tuples `(x(k), u(k), c(k), x(k+1))`.
///
/// Consecutive tuples are usually chained (`next[k] == states[k+1]`), but runs
/// with restarts or exhaustive sweeps store independent transitions; every
/// tuple still satisfies `next[k] = F(states[k], inputs[k])`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub next: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn push(&mut self, x: Vec<f64>, u: Vec<f64>, c: f64, next: Vec<f64>) {
        self.states.push(x);
        self.inputs.push(u);
        self.costs.push(c);
        self.next.push(next);
    }

    pub fn extend(&mut self, other: &Trajectory) {
        self.states.extend(other.states.iter().cloned());
        self.inputs.extend(other.inputs.iter().cloned());
        self.costs.extend(other.costs.iter().copied());
        self.next.extend(other.next.iter().cloned());
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Trajectory {
        Trajectory {
            states: self.states[range.clone()].to_vec(),
            inputs: self.inputs[range.clone()].to_vec(),
            costs: self.costs[range.clone()].to_vec(),
            next: self.next[range].to_vec(),
        }
    }

    /// First index whose tuple does not replay through `sys`, if any.
    pub fn replay_violation<S: ControlSystem + ?Sized>(&self, sys: &S) -> Option<usize> {
        (0..self.len()).find(|&k| {
            sys.dynamics(&self.states[k], &self.inputs[k]) != self.next[k]
                || sys.cost(&self.states[k], &self.inputs[k]) != self.costs[k]
        })
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, |x| x.len())
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, |u| u.len())
    }

    /// CSV with header `k,x0..,u0..,c,xn0..`; floats are written in
    /// shortest round-trip form so a reload is bit-exact.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let (n, m) = (self.state_dim(), self.input_dim());
        let mut header = vec!["k".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..m).map(|i| format!("u{i}")));
        header.push("c".into());
        header.extend((0..n).map(|i| format!("xn{i}")));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![k.to_string()];
            row.extend(self.states[k].iter().map(|v| v.to_string()));
            row.extend(self.inputs[k].iter().map(|v| v.to_string()));
            row.push(self.costs[k].to_string());
            row.extend(self.next[k].iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Trajectory> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let count = |p: &str| {
            header
                .iter()
                .filter(|h| h.starts_with(p) && h[p.len()..].chars().all(|c| c.is_ascii_digit()) && h.len() > p.len())
                .count()
        };
        let n = count("x");
        let m = count("u");
        if n == 0 || m == 0 || count("xn") != n || header.len() != 2 * n + m + 2 {
            return Err(Error::Config(format!(
                "trajectory header {:?} is not k,x..,u..,c,xn..",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut out = Trajectory::default();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad trajectory value: {e}")))?;
            out.push(
                vals[..n].to_vec(),
                vals[n..n + m].to_vec(),
                vals[n + m],
                vals[n + m + 1..].to_vec(),
            );
        }
        Ok(out)
    }
}
