use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sine {
    /// Radians per step.
    pub freq: f64,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Deterministic exploration signal `ξ(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeSignal {
    /// Coordinate `j` is `Σᵢ aᵢ sin(ωᵢ k + φᵢ)` over `channels[j]`.
    SinusoidMixture { channels: Vec<Vec<Sine>> },
    /// Rotation on the torus, `ξ(k+1) = ξ(k) + shift mod 1`, observed through `cos(2π·)`.
    MarkovMap { init: Vec<f64>, shift: Vec<f64> },
    /// `ξ(k) = k`.
    Enumerating,
}

impl Default for ProbeSignal {
    /// Three sines at `2π·{√2, √3, √5}/50` with amplitudes summing to one.
    fn default() -> Self {
        ProbeSignal::sinusoids(&[2f64.sqrt(), 3f64.sqrt(), 5f64.sqrt()], 50.0, 1.0)
    }
}

impl ProbeSignal {
    /// One channel of sines at `2π·rᵢ/period`, total amplitude `span`.
    pub fn sinusoids(ratios: &[f64], period: f64, span: f64) -> Self {
        let amp = span / ratios.len() as f64;
        let channel = ratios
            .iter()
            .enumerate()
            .map(|(i, r)| Sine {
                freq: 2.0 * PI * r / period,
                amp,
                phase: i as f64,
            })
            .collect();
        ProbeSignal::SinusoidMixture {
            channels: vec![channel],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProbeSignal::SinusoidMixture { channels } => channels.len(),
            ProbeSignal::MarkovMap { init, .. } => init.len(),
            ProbeSignal::Enumerating => 1,
        }
    }

    /// `Σ|amplitudes|` per channel, the a priori bound on `|ξⱼ(k)|`.
    pub fn bound(&self) -> f64 {
        match self {
            ProbeSignal::SinusoidMixture { channels } => channels
                .iter()
                .map(|c| c.iter().map(|s| s.amp.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            ProbeSignal::MarkovMap { .. } => 1.0,
            ProbeSignal::Enumerating => f64::INFINITY,
        }
    }

    pub fn start(&self) -> ProbeState {
        let torus = match self {
            ProbeSignal::MarkovMap { init, .. } => init.iter().map(|v| v.rem_euclid(1.0)).collect(),
            _ => Vec::new(),
        };
        ProbeState {
            signal: self.clone(),
            k: 0,
            torus,
        }
    }
}

/// Running probe; yields `ξ(0), ξ(1), …`.
#[derive(Debug, Clone)]
pub struct ProbeState {
    signal: ProbeSignal,
    k: u64,
    torus: Vec<f64>,
}

impl ProbeState {
    pub fn current(&self) -> Vec<f64> {
        let k = self.k as f64;
        match &self.signal {
            ProbeSignal::SinusoidMixture { channels } => channels
                .iter()
                .map(|c| c.iter().map(|s| s.amp * (s.freq * k + s.phase).sin()).sum())
                .collect(),
            ProbeSignal::MarkovMap { .. } => self.torus.iter().map(|t| (2.0 * PI * t).cos()).collect(),
            ProbeSignal::Enumerating => vec![k],
        }
    }

    pub fn advance(&mut self) {
        self.k += 1;
        if let ProbeSignal::MarkovMap { shift, .. } = &self.signal {
            for (t, s) in self.torus.iter_mut().zip(shift) {
                *t = (*t + s).rem_euclid(1.0);
            }
        }
    }

    pub fn index(&self) -> u64 {
        self.k
    }
}
