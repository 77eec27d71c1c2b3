//! Experiment grid runner, reports and the pinned comparison bands.

pub mod emit;
mod reference;
mod profiles;

pub use emit::{emit, render, Format};
pub use reference::{
    compare_to_paper, constant_sizes, downgrade_matches, key_agreement_trials, memory_model, paper_grid, probes,
    verify_paper, TrialSummary, Verdict, REFERENCE_MTUS,
};
pub use profiles::{
    credential, credential_for, endpoints, ChainProfile, CRL_URL, SINGLE_CLIENT_CERT_SIZE, SINGLE_SERVER_CERT_SIZE,
    RSA2048_CERT_SIZE, RSA4096_CERT_SIZE,
};

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certs::CertError;
use crate::crypto::sha256;
use crate::handshake::{run_handshake, Abort, Auth, Counters, Mode, Version};
use crate::netsim::{ByteLedger, LinkProfile, NetError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("report has no cell for {0}")]
    MissingCell(String),
    #[error("handshake aborted: {0}")]
    Handshake(#[from] Abort),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("credential generation: {0}")]
    Credential(#[from] CertError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Stable 64-bit seed for a labelled sub-experiment.
pub fn cell_seed(seed: u64, label: &str) -> u64 {
    let mut input = seed.to_be_bytes().to_vec();
    input.extend_from_slice(label.as_bytes());
    let h = sha256(&input);
    u64::from_be_bytes(h[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub version: Version,
    pub mode: Mode,
    pub mtu: usize,
    pub chain: ChainProfile,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("{}/{}/{}/{}", self.version.label(), self.mode.label(), self.mtu, self.chain.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub versions: Vec<Version>,
    pub modes: Vec<Mode>,
    pub mtus: Vec<usize>,
    pub chains: Vec<ChainProfile>,
    pub repetitions: usize,
    /// Precede measured connections with a populating handshake. Always on
    /// for caching and resumption modes.
    pub warm: bool,
    pub auth: Auth,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn single(version: Version, mode: Mode, mtu: usize, chain: ChainProfile, repetitions: usize, seed: u64) -> Self {
        Self {
            versions: vec![version],
            modes: vec![mode],
            mtus: vec![mtu],
            chains: vec![chain],
            repetitions,
            warm: true,
            auth: Auth::Mutual,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.repetitions == 0 {
            return Err(BenchError::InvalidSpec("repetitions must be at least 1".into()));
        }
        if self.versions.is_empty() || self.modes.is_empty() || self.mtus.is_empty() || self.chains.is_empty() {
            return Err(BenchError::InvalidSpec("every dimension needs at least one value".into()));
        }
        for &mtu in &self.mtus {
            LinkProfile::for_mtu(mtu).validate()?;
        }
        Ok(())
    }

    /// Cells in canonical order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &chain in &self.chains {
            for &version in &self.versions {
                for &mode in &self.modes {
                    for &mtu in &self.mtus {
                        cells.push(Cell { version, mode, mtu, chain });
                    }
                }
            }
        }
        cells.sort();
        cells.dedup();
        cells
    }
}

/// Per-layer byte figures (means are fractional).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Layers {
    pub tls: f64,
    pub transport: f64,
    pub network: f64,
    pub link: f64,
    pub frames: f64,
}

impl Layers {
    fn from_ledger(l: &ByteLedger) -> Self {
        Self {
            tls: l.tls_bytes as f64,
            transport: l.transport_bytes as f64,
            network: l.network_bytes as f64,
            link: l.link_bytes as f64,
            frames: l.frame_count as f64,
        }
    }

    fn zip(&self, o: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            tls: f(self.tls, o.tls),
            transport: f(self.transport, o.transport),
            network: f(self.network, o.network),
            link: f(self.link, o.link),
            frames: f(self.frames, o.frames),
        }
    }

    /// Bytes across all layers.
    pub fn total(&self) -> f64 {
        self.link
    }
}

/// Percent reduction per layer; `total` is the link-layer (all-layer) figure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub tls: f64,
    pub transport: f64,
    pub network: f64,
    pub total: f64,
}

impl Savings {
    pub fn between(baseline: &Layers, measured: &Layers) -> Self {
        let pct = |b: f64, m: f64| if b == 0.0 { 0.0 } else { (b - m) / b * 100.0 };
        Self {
            tls: pct(baseline.tls, measured.tls),
            transport: pct(baseline.transport, measured.transport),
            network: pct(baseline.network, measured.network),
            total: pct(baseline.link, measured.link),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub cell: Cell,
    pub repetitions: usize,
    pub mean: Layers,
    pub min: Layers,
    pub max: Layers,
    /// Counters of the last measured connection.
    pub client: Counters,
    pub server: Counters,
    pub resumed: bool,
    pub savings_vs_vanilla: Option<Savings>,
    pub savings_vs_rfc7924: Option<Savings>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn get(&self, cell: &Cell) -> Result<&Row, BenchError> {
        self.rows
            .iter()
            .find(|r| r.cell == *cell)
            .ok_or_else(|| BenchError::MissingCell(cell.label()))
    }

    /// Fills the savings columns from the Vanilla and RFC7924 rows of the same
    /// version, MTU and chain.
    fn attach_savings(&mut self) {
        let base: Vec<(Cell, Layers)> = self.rows.iter().map(|r| (r.cell, r.mean)).collect();
        let find = |c: Cell, mode: Mode| {
            base.iter()
                .find(|(b, _)| *b == Cell { mode, ..c })
                .map(|(_, l)| *l)
        };
        for r in &mut self.rows {
            r.savings_vs_vanilla = find(r.cell, Mode::Vanilla).map(|b| Savings::between(&b, &r.mean));
            r.savings_vs_rfc7924 = find(r.cell, Mode::Rfc7924).map(|b| Savings::between(&b, &r.mean));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon when the `parallel` feature is on, sequential otherwise.
    Parallel,
}

/// Runs `repetitions` measured connections for one cell on fresh endpoints.
pub fn run_cell(cell: Cell, spec: &ExperimentSpec) -> Result<Row, BenchError> {
    let (client, server) = endpoints(cell.version, cell.mode, cell.chain, spec.auth, spec.seed)?;
    let link = LinkProfile::for_mtu(cell.mtu);
    let mut rng = ChaCha20Rng::seed_from_u64(cell_seed(spec.seed, &cell.label()));
    if spec.warm || cell.mode != Mode::Vanilla {
        run_handshake(&client, &server, &link, &mut rng)?;
    }
    let mut sum = Layers::default();
    let mut min = Layers {
        tls: f64::MAX,
        transport: f64::MAX,
        network: f64::MAX,
        link: f64::MAX,
        frames: f64::MAX,
    };
    let mut max = Layers::default();
    let mut last = None;
    for _ in 0..spec.repetitions {
        let out = run_handshake(&client, &server, &link, &mut rng)?;
        let l = Layers::from_ledger(&out.ledger);
        sum = sum.zip(&l, |a, b| a + b);
        min = min.zip(&l, f64::min);
        max = max.zip(&l, f64::max);
        last = Some(out);
    }
    let last = last.expect("repetitions >= 1");
    let n = spec.repetitions as f64;
    Ok(Row {
        cell,
        repetitions: spec.repetitions,
        mean: sum.zip(&sum, |a, _| a / n),
        min,
        max,
        client: last.client,
        server: last.server,
        resumed: last.resumed,
        savings_vs_vanilla: None,
        savings_vs_rfc7924: None,
    })
}

pub fn run_grid(spec: &ExperimentSpec) -> Result<Report, BenchError> {
    run_grid_with(spec, Execution::Parallel)
}

/// Cells are independent (fresh endpoints, per-cell seeds), so the result
/// does not depend on execution order or parallelism.
pub fn run_grid_with(spec: &ExperimentSpec, exec: Execution) -> Result<Report, BenchError> {
    spec.validate()?;
    let cells = spec.cells();
    let rows = match exec {
        Execution::Sequential => cells.iter().map(|c| run_cell(*c, spec)).collect::<Vec<_>>(),
        Execution::Parallel => crate::par::map(&cells, |c| run_cell(*c, spec)),
    };
    let mut report = Report {
        seed: spec.seed,
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    };
    report.attach_savings();
    Ok(report)
}
