//! Experiment runner behind the `mipt` binary.
//!
//! Every simulation command streams per-trajectory records to
//! `<output>/trajectories.jsonl` (first line: a versioned header) and then
//! writes CSV summaries next to it. Work is split into (parameter cell, block
//! of 100 trajectories) tasks; blocks already present on disk are reused, so
//! an interrupted run resumes where it stopped. The final JSONL is sorted by
//! cell and trajectory index, which makes its bytes independent of the worker
//! count and of how the trajectories were split across runs.
//!
//! Config files are flat TOML key/value pairs using the long flag names with
//! underscores (`sizes = [8, 10]`, `model = "cgpm"`, `lambda = 1.0`, ...);
//! command-line flags override file values.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    ancilla_order_parameter_protocol, paired_state_trajectory, run_trajectory,
    two_ancilla_mutual_info_protocol, CircuitConfig, GateSet, InitialState, TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::lyapunov::{
    correlator_samples, cumulant_rates, cumulants, default_window, free_energy_density,
    generalized_free_energy_density, k1_rate, multifractal_histogram, scaling_dimension,
    write_csv, Estimate, FreeEnergyRow, FreeEnergySeries,
};
use crate::observables::{
    ancilla_dynamics, default_var_s_window, group_by_cell, mutual_info_correlator,
    order_parameter_curves, var_s_ensemble, write_series_csv,
};
use crate::scaling::{
    ceff_double_fit, collapse_fit_eta, collapse_fit_pc_nu, collapse_fit_z, crossing_estimate,
    CollapseData, CollapseKind, CollapseOptions, CollapseResult, ScalingSample, TrajectoryBlock,
};
use crate::weakmeas::{Cgpm, Dgpm, MeasurementModel, Spmm};

pub const SCHEMA: &str = "mipt.trajectories";
pub const SCHEMA_VERSION: u32 = 1;
pub const BLOCK_SIZE: u64 = 100;
pub const TRAJECTORY_FILE: &str = "trajectories.jsonl";
pub const RESULT_FILE: &str = "result.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PhaseMap,
    AncillaCrossing,
    AncillaDynamics,
    MutualInfo,
    FreeEnergy,
    GeneralizedFreeEnergy,
    Collapse,
    CeffFit,
    Table1,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PhaseMap => "phase-map",
            Command::AncillaCrossing => "ancilla-crossing",
            Command::AncillaDynamics => "ancilla-dynamics",
            Command::MutualInfo => "mutual-info",
            Command::FreeEnergy => "free-energy",
            Command::GeneralizedFreeEnergy => "generalized-free-energy",
            Command::Collapse => "collapse",
            Command::CeffFit => "ceff-fit",
            Command::Table1 => "table1",
        }
    }

    fn simulates(self) -> bool {
        !matches!(self, Command::Collapse | Command::CeffFit | Command::Table1)
    }

    fn default_t_max(self, size: usize) -> usize {
        match self {
            Command::PhaseMap => (2 * size).max(100),
            Command::AncillaDynamics => 4 * size,
            Command::FreeEnergy | Command::GeneralizedFreeEnergy => 32 * size,
            _ => 2 * size,
        }
    }
}

/// Everything a run needs. Serialized next to the outputs as `spec.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub sizes: Vec<usize>,
    pub rates: Vec<f64>,
    /// Measurement strengths `J`; empty means the model's own strength.
    pub strengths: Vec<f64>,
    /// `projective`, `cgpm`, `dgpm` or `spmm`.
    pub model: String,
    pub lambda: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub softening: f64,
    pub trajectories: u64,
    /// Index of the first trajectory, for splitting a sweep across runs.
    pub seed_offset: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub gate_set: GateSet,
    pub alpha: f64,
    pub t_max: Option<usize>,
    pub encoding_time: Option<usize>,
    pub output: PathBuf,
    /// Collapse flavour for `collapse`.
    pub kind: Option<CollapseKind>,
    /// `L_min` values for `ceff-fit`; empty means every size.
    pub l_min: Vec<usize>,
    pub resamples: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            sizes: vec![8],
            rates: vec![0.2],
            strengths: Vec::new(),
            model: "projective".into(),
            lambda: 1.0,
            delta: 1.0,
            epsilon: Dgpm::DEFAULT_RELATIVE_EPSILON,
            softening: 0.45,
            trajectories: 100,
            seed_offset: 0,
            master_seed: 0,
            workers: 1,
            gate_set: GateSet::Hdu,
            alpha: 1.0,
            t_max: None,
            encoding_time: None,
            output: PathBuf::from("out"),
            kind: None,
            l_min: Vec::new(),
            resamples: crate::stats::DEFAULT_RESAMPLES,
        }
    }
}

impl ExperimentSpec {
    pub fn base_model(&self) -> Result<MeasurementModel> {
        let m = match self.model.as_str() {
            "projective" => MeasurementModel::Projective,
            "cgpm" => MeasurementModel::Cgpm(Cgpm { lambda: self.lambda, delta: self.delta }),
            "dgpm" => MeasurementModel::Dgpm(Dgpm {
                lambda: self.lambda,
                delta: self.delta,
                epsilon: self.epsilon,
            }),
            "spmm" => MeasurementModel::Spmm(Spmm { softening: self.softening }),
            other => return Err(Error::Config(format!("unknown model '{other}'"))),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn models(&self) -> Result<Vec<MeasurementModel>> {
        let base = self.base_model()?;
        if self.strengths.is_empty() {
            return Ok(vec![base]);
        }
        self.strengths
            .iter()
            .map(|&j| {
                let m = base.with_strength(j);
                m.validate().map(|_| m)
            })
            .collect()
    }

    pub fn validate(&self, command: Command) -> Result<()> {
        if command.simulates() {
            if self.sizes.is_empty() || self.rates.is_empty() {
                return Err(Error::invalid("the parameter grid is empty"));
            }
            if self.trajectories < 1 {
                return Err(Error::invalid("trajectories must be at least 1"));
            }
            self.cells(command)?;
            let kind = match command {
                Command::AncillaCrossing => Some(CollapseKind::PcNu),
                Command::AncillaDynamics => Some(CollapseKind::Z),
                Command::MutualInfo => Some(CollapseKind::Eta),
                _ => None,
            };
            let distinct: BTreeSet<usize> = self.sizes.iter().copied().collect();
            if let Some(k) = kind.filter(|k| distinct.len() < k.min_sizes()) {
                return Err(Error::invalid(format!(
                    "{} needs at least {} distinct sizes, got {}",
                    command.name(),
                    k.min_sizes(),
                    distinct.len()
                )));
            }
            let needs_discrete = matches!(command, Command::FreeEnergy | Command::GeneralizedFreeEnergy);
            if needs_discrete && self.model == "cgpm" {
                return Err(Error::ContinuousOutcomes(self.base_model()?.to_string()));
            }
        }
        if self.workers < 1 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        if command == Command::Collapse && self.kind.is_none() {
            return Err(Error::invalid("collapse needs --kind"));
        }
        Ok(())
    }

    /// Circuit configuration of one cell; its seed mixes the cell parameters
    /// into the master seed.
    pub fn cell_config(&self, command: Command, size: usize, p: f64, model: MeasurementModel) -> CircuitConfig {
        let mut h = splitmix(self.master_seed);
        for v in [size as u64, p.to_bits(), model.strength().to_bits(), command as u64] {
            h = splitmix(h ^ v);
        }
        CircuitConfig {
            size,
            p,
            model,
            gate_set: self.gate_set,
            t_max: self.t_max.unwrap_or_else(|| command.default_t_max(size)),
            encoding_time: self.encoding_time,
            master_seed: h,
            alpha: self.alpha,
            initial: InitialState::RandomProduct,
        }
    }

    pub fn cells(&self, command: Command) -> Result<Vec<CircuitConfig>> {
        let mut out = Vec::new();
        for model in self.models()? {
            for &size in &self.sizes {
                for &p in &self.rates {
                    let c = self.cell_config(command, size, p, model);
                    c.validate()?;
                    out.push(c);
                }
            }
        }
        Ok(out)
    }
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs one trajectory of `command` in `config`.
pub fn simulate_one(command: Command, config: &CircuitConfig, index: u64) -> Result<TrajectoryRecord> {
    match command {
        Command::PhaseMap => run_trajectory(config, index, true),
        Command::AncillaCrossing | Command::AncillaDynamics => {
            ancilla_order_parameter_protocol(config, index, false)
        }
        Command::MutualInfo => two_ancilla_mutual_info_protocol(config, index),
        Command::FreeEnergy => run_trajectory(config, index, false),
        Command::GeneralizedFreeEnergy => paired_state_trajectory(config, index),
        _ => Err(Error::invalid(format!("{} does not simulate", command.name()))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub version: u32,
    pub command: Command,
}

impl Header {
    pub fn new(command: Command) -> Self {
        Header { schema: SCHEMA.into(), version: SCHEMA_VERSION, command }
    }
}

/// Identity of a record for sorting and duplicate detection.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RecordKey {
    pub size: usize,
    pub p_bits: u64,
    pub model: String,
    pub master_seed: u64,
    pub seed: u64,
}

impl RecordKey {
    pub fn of(r: &TrajectoryRecord) -> Self {
        RecordKey {
            size: r.size,
            p_bits: r.p.to_bits(),
            model: r.model.to_string(),
            master_seed: r.master_seed,
            seed: r.seed,
        }
    }

    fn cell(&self) -> String {
        format!("L={} p={} {}", self.size, f64::from_bits(self.p_bits), self.model)
    }
}

/// Reads a trajectory file. A truncated final line (interrupted write) is
/// ignored; any other malformed line is a schema error.
pub fn read_jsonl(path: &Path) -> Result<(Header, Vec<TrajectoryRecord>)> {
    if !path.is_file() {
        return Err(Error::invalid(format!("{} is not a file", path.display())));
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mismatch = |reason: String| Error::SchemaMismatch { path: path.to_path_buf(), reason };
    let first = lines
        .next()
        .ok_or_else(|| mismatch("empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| mismatch(format!("bad header: {e}")))?;
    if header.schema != SCHEMA || header.version != SCHEMA_VERSION {
        return Err(mismatch(format!(
            "expected {SCHEMA} v{SCHEMA_VERSION}, found {} v{}",
            header.schema, header.version
        )));
    }
    let raw: Vec<String> = lines.collect::<std::io::Result<_>>().map_err(|e| Error::io(path, e))?;
    let mut records = Vec::with_capacity(raw.len());
    for (i, line) in raw.iter().enumerate() {
        match serde_json::from_str::<TrajectoryRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) if i + 1 == raw.len() => {}
            Err(e) => return Err(mismatch(format!("line {}: {e}", i + 2))),
        }
    }
    Ok((header, records))
}

/// Writes header plus records in canonical order, atomically.
pub fn write_jsonl(path: &Path, header: &Header, records: &mut [TrajectoryRecord]) -> Result<()> {
    records.sort_by_cached_key(RecordKey::of);
    let tmp = path.with_extension("jsonl.tmp");
    {
        let f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(&tmp, e);
        serde_json::to_writer(&mut w, header)?;
        w.write_all(b"\n").map_err(io)?;
        for r in records.iter() {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Task {
    cell: usize,
    start: u64,
    end: u64,
}

/// Simulates every cell of `spec`, resuming from an existing trajectory file.
pub fn simulate(command: Command, spec: &ExperimentSpec) -> Result<Vec<TrajectoryRecord>> {
    spec.validate(command)?;
    let cells = spec.cells(command)?;
    fs::create_dir_all(&spec.output).map_err(|e| Error::io(&spec.output, e))?;
    let path = spec.output.join(TRAJECTORY_FILE);
    let header = Header::new(command);

    let mut done: BTreeMap<RecordKey, TrajectoryRecord> = BTreeMap::new();
    if path.exists() {
        let (h, recs) = read_jsonl(&path)?;
        if h != header {
            return Err(Error::SchemaMismatch {
                path,
                reason: format!("file holds '{}' records", h.command.name()),
            });
        }
        done.extend(recs.into_iter().map(|r| (RecordKey::of(&r), r)));
    }

    let first = spec.seed_offset;
    let last = spec.seed_offset + spec.trajectories;
    let key = |c: &CircuitConfig, seed: u64| RecordKey {
        size: c.size,
        p_bits: c.p.to_bits(),
        model: c.model.to_string(),
        master_seed: c.master_seed,
        seed,
    };
    let mut tasks = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        let mut start = first;
        while start < last {
            let end = ((start / BLOCK_SIZE + 1) * BLOCK_SIZE).min(last);
            if !(start..end).all(|s| done.contains_key(&key(c, s))) {
                tasks.push(Task { cell: i, start, end });
            }
            start = end;
        }
    }

    // a resumed file is rewritten without any partial trailing line before appending
    let mut existing: Vec<TrajectoryRecord> = done.values().cloned().collect();
    write_jsonl(&path, &header, &mut existing)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = BufWriter::new(
        fs::OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?,
    );
    for batch in tasks.chunks(spec.workers.max(1) * 2) {
        let results: Vec<Result<Vec<TrajectoryRecord>>> = pool.install(|| {
            batch
                .par_iter()
                .map(|t| (t.start..t.end).map(|s| simulate_one(command, &cells[t.cell], s)).collect())
                .collect()
        });
        for block in results {
            for r in block? {
                serde_json::to_writer(&mut out, &r)?;
                out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
                done.insert(RecordKey::of(&r), r);
            }
            out.flush().map_err(|e| Error::io(&path, e))?;
        }
    }
    drop(out);

    let wanted: BTreeSet<(u64, usize, u64)> =
        cells.iter().map(|c| (c.master_seed, c.size, c.p.to_bits())).collect();
    let mut all: Vec<TrajectoryRecord> = done.into_values().collect();
    write_jsonl(&path, &header, &mut all)?;
    all.retain(|r| {
        wanted.contains(&(r.master_seed, r.size, r.p.to_bits())) && (first..last).contains(&r.seed)
    });
    Ok(all)
}

/// Combines trajectory files. The output is sorted canonically, so it does not
/// depend on the input order; a trajectory present twice is an error.
pub fn merge(paths: &[PathBuf], output: &Path) -> Result<(Command, Vec<TrajectoryRecord>)> {
    if paths.is_empty() {
        return Err(Error::invalid("merge needs at least one input"));
    }
    let mut header: Option<Header> = None;
    let mut seen: BTreeMap<RecordKey, TrajectoryRecord> = BTreeMap::new();
    for path in paths {
        let (h, recs) = read_jsonl(path)?;
        match &header {
            None => header = Some(h),
            Some(h0) if *h0 != h => {
                return Err(Error::SchemaMismatch {
                    path: path.clone(),
                    reason: format!("'{}' records cannot merge with '{}'", h.command.name(), h0.command.name()),
                })
            }
            _ => {}
        }
        for r in recs {
            let k = RecordKey::of(&r);
            if seen.contains_key(&k) {
                return Err(Error::DuplicateCell { path: path.clone(), cell: k.cell(), seed: k.seed });
            }
            seen.insert(k, r);
        }
    }
    let header = header.expect("at least one input");
    let mut all: Vec<TrajectoryRecord> = seen.into_values().collect();
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_jsonl(output, &header, &mut all)?;
    Ok((header.command, all))
}

/// Named estimates produced by one analysis, keyed by model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub command: Command,
    pub model: String,
    pub values: BTreeMap<String, Estimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collapses: Vec<CollapseResult>,
}

fn write_result(dir: &Path, result: &ResultFile) -> Result<()> {
    let path = dir.join(RESULT_FILE);
    let text = serde_json::to_string_pretty(result)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn model_label(records: &[TrajectoryRecord]) -> String {
    let mut labels: Vec<String> = records.iter().map(|r| r.model.to_string()).collect();
    labels.sort();
    labels.dedup();
    labels.join(" | ")
}

/// Per-trajectory blocks for a collapse.
pub fn collapse_blocks(kind: CollapseKind, records: &[TrajectoryRecord]) -> Result<Vec<TrajectoryBlock>> {
    let mut blocks = Vec::new();
    for group in group_by_cell(records).into_values() {
        let size = group[0].size;
        let pick = |r: &TrajectoryRecord| match kind {
            CollapseKind::Eta => r.mutual_info.clone(),
            _ => r.ancilla_entropy.clone(),
        };
        let series: Vec<Vec<f64>> = group.iter().filter_map(|r| pick(r)).collect();
        let len = series.iter().map(Vec::len).min().unwrap_or(0);
        if series.is_empty() || len < 2 {
            return Err(Error::invalid(format!("records for L = {size} lack the series this collapse needs")));
        }
        let block = match kind {
            CollapseKind::PcNu => {
                if len <= 2 * size {
                    return Err(Error::invalid(format!("ancilla series for L = {size} stops before t = 2L")));
                }
                TrajectoryBlock {
                    size,
                    xs: vec![group[0].p],
                    rows: series.iter().map(|s| vec![s[2 * size]]).collect(),
                }
            }
            _ => TrajectoryBlock {
                size,
                xs: (1..len).map(|t| t as f64).collect(),
                rows: series.iter().map(|s| s[1..len].to_vec()).collect(),
            },
        };
        blocks.push(block);
    }
    Ok(blocks)
}

fn collapse_estimates(result: &CollapseResult, values: &mut BTreeMap<String, Estimate>) {
    for p in &result.parameters {
        values.insert(p.name.clone(), Estimate { value: p.value, stderr: p.stderr });
    }
}

/// Computes summaries of `records` as produced by `command` into `dir`.
pub fn summarize(command: Command, spec: &ExperimentSpec, records: &[TrajectoryRecord], dir: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("no trajectory records to summarize"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let opts = CollapseOptions { resamples: spec.resamples, ..CollapseOptions::default() };
    let mut values = BTreeMap::new();
    let mut collapses = Vec::new();
    match command {
        Command::PhaseMap => {
            #[derive(Serialize)]
            struct Row {
                #[serde(rename = "L")]
                size: usize,
                p: f64,
                #[serde(rename = "J")]
                strength: f64,
                var_s: f64,
                stderr: f64,
                mean_s: f64,
                n: usize,
            }
            let mut by_cell: BTreeMap<(usize, u64, String), Vec<TrajectoryRecord>> = BTreeMap::new();
            for r in records {
                by_cell.entry((r.size, r.p.to_bits(), r.model.to_string())).or_default().push(r.clone());
            }
            let rows = by_cell
                .into_values()
                .map(|recs| {
                    let size = recs[0].size;
                    let v = var_s_ensemble(&recs, size, default_var_s_window(size))?;
                    Ok(Row {
                        size,
                        p: recs[0].p,
                        strength: recs[0].model.strength(),
                        var_s: v.variance,
                        stderr: v.stderr,
                        mean_s: v.mean,
                        n: v.n_samples,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_csv(&dir.join("var_s.csv"), &rows)?;
            return Ok(());
        }
        Command::AncillaCrossing => {
            let curves = order_parameter_curves(records)?;
            write_series_csv(&dir.join("order_parameter.csv"), &curves)?;
            let (pc, _) = crossing_estimate(&ScalingSample::from_rate_points(&curves))?;
            values.insert("p_cross".into(), pc);
            let blocks = collapse_blocks(CollapseKind::PcNu, records)?;
            let c = collapse_fit_pc_nu(&CollapseData::Trajectories(blocks), &opts)?;
            collapse_estimates(&c, &mut values);
            collapses.push(c);
        }
        Command::AncillaDynamics => {
            write_series_csv(&dir.join("ancilla_dynamics.csv"), &ancilla_dynamics(records)?)?;
            let blocks = collapse_blocks(CollapseKind::Z, records)?;
            let c = collapse_fit_z(&CollapseData::Trajectories(blocks), &opts)?;
            collapse_estimates(&c, &mut values);
            collapses.push(c);
        }
        Command::MutualInfo => {
            write_series_csv(&dir.join("mutual_info.csv"), &mutual_info_correlator(records)?)?;
            let blocks = collapse_blocks(CollapseKind::Eta, records)?;
            let c = collapse_fit_eta(&CollapseData::Trajectories(blocks), &opts)?;
            collapse_estimates(&c, &mut values);
            collapses.push(c);
        }
        Command::FreeEnergy | Command::CeffFit => {
            let groups = by_rate_and_model(records);
            let mut rows = Vec::new();
            let mut fits = Vec::new();
            for recs in groups.values() {
                let r = free_energy_rows(recs, spec.alpha)?;
                let sizes: BTreeSet<usize> = r.iter().map(|r| r.size).collect();
                if sizes.len() >= 4 {
                    let l_mins: Vec<usize> =
                        if spec.l_min.is_empty() { sizes.into_iter().collect() } else { spec.l_min.clone() };
                    let fit = ceff_double_fit(
                        &r.iter().map(|r| (r.size, r.f, r.stderr)).collect::<Vec<_>>(),
                        &l_mins,
                        spec.master_seed,
                    )?;
                    fits.push((recs[0].p, fit));
                } else if command == Command::CeffFit {
                    return Err(Error::invalid("ceff-fit needs at least 4 sizes per rate"));
                }
                rows.extend(r);
            }
            write_csv(&dir.join("free_energy.csv"), &rows)?;
            if !fits.is_empty() {
                #[derive(Serialize)]
                struct Row {
                    p: f64,
                    l_min: usize,
                    c_eff: f64,
                    stderr: f64,
                    n_points: usize,
                }
                let table: Vec<Row> = fits
                    .iter()
                    .flat_map(|(p, f)| {
                        f.per_l_min.iter().map(move |c| Row {
                            p: *p,
                            l_min: c.l_min,
                            c_eff: c.c_eff,
                            stderr: c.stderr,
                            n_points: c.n_points,
                        })
                    })
                    .collect();
                write_csv(&dir.join("ceff.csv"), &table)?;
            }
            if let [(_, fit)] = fits.as_slice() {
                values.insert("c_eff".into(), Estimate { value: fit.c_inf.value, stderr: fit.c_inf.stderr });
            }
        }
        Command::GeneralizedFreeEnergy => {
            let groups = by_rate_and_model(records);
            let mut rows = Vec::new();
            let mut cumulant_rows = Vec::new();
            let mut histogram = Vec::new();
            for recs in groups.values() {
                let gfe = generalized_summary(recs, spec.alpha)?;
                rows.extend(gfe.rows);
                let p = recs[0].p;
                cumulant_rows.extend(gfe.cumulants.into_iter().map(|c| CumulantRow {
                    size: c.size,
                    p,
                    t: c.t,
                    n: c.n,
                    k1_over_lt: c.k1_over_lt,
                    k1_stderr: c.k1_stderr,
                    k2_over_lt: c.k2_over_lt,
                    k2_stderr: c.k2_stderr,
                    flagged: c.flagged,
                }));
                histogram.extend(gfe.histogram.into_iter().map(|h| HistogramRow {
                    size: h.size,
                    p,
                    t: h.t,
                    s: h.s,
                    h: h.h,
                    count: h.count,
                }));
                if groups.len() == 1 {
                    values.extend(gfe.values);
                }
            }
            write_csv(&dir.join("free_energy.csv"), &rows)?;
            write_csv(&dir.join("cumulants.csv"), &cumulant_rows)?;
            write_csv(&dir.join("histogram.csv"), &histogram)?;
        }
        Command::Collapse => {
            let kind = spec.kind.ok_or_else(|| Error::invalid("collapse needs --kind"))?;
            let data = CollapseData::Trajectories(collapse_blocks(kind, records)?);
            let c = match kind {
                CollapseKind::PcNu => collapse_fit_pc_nu(&data, &opts)?,
                CollapseKind::Z => collapse_fit_z(&data, &opts)?,
                CollapseKind::Eta => collapse_fit_eta(&data, &opts)?,
            };
            collapse_estimates(&c, &mut values);
            collapses.push(c);
        }
        Command::Table1 => return Err(Error::invalid("table1 reads result files, not trajectories")),
    }
    write_result(dir, &ResultFile { command, model: model_label(records), values, collapses })
}

#[derive(Serialize)]
struct CumulantRow {
    #[serde(rename = "L")]
    size: usize,
    p: f64,
    t: usize,
    n: usize,
    k1_over_lt: f64,
    k1_stderr: f64,
    k2_over_lt: f64,
    k2_stderr: f64,
    flagged: bool,
}

#[derive(Serialize)]
struct HistogramRow {
    #[serde(rename = "L")]
    size: usize,
    p: f64,
    t: usize,
    s: f64,
    #[serde(rename = "H")]
    h: f64,
    count: usize,
}

/// Records split by `(p, model)`, sizes kept together.
pub fn by_rate_and_model(records: &[TrajectoryRecord]) -> BTreeMap<(u64, String), Vec<TrajectoryRecord>> {
    let mut out: BTreeMap<(u64, String), Vec<TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        out.entry((r.p.to_bits(), r.model.to_string())).or_default().push(r.clone());
    }
    out
}

/// `(L, p, f, stderr)` per size on the `[5L, 32L]` window; `records` share one `p`.
pub fn free_energy_rows(records: &[TrajectoryRecord], alpha: f64) -> Result<Vec<FreeEnergyRow>> {
    let mut by_size: BTreeMap<usize, Vec<TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        by_size.entry(r.size).or_default().push(r.clone());
    }
    by_size
        .into_iter()
        .map(|(size, recs)| {
            let s = FreeEnergySeries::from_records(&recs)?;
            let f = free_energy_density(&s, default_window(size), alpha)?;
            Ok(FreeEnergyRow { size, p: s.p, f: f.value, stderr: f.stderr })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GeneralizedRow {
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    pub f: f64,
    pub f_stderr: f64,
    pub f1: f64,
    pub f1_stderr: f64,
    pub k1_rate: f64,
    pub k1_rate_stderr: f64,
    pub k2_rate: f64,
    pub k2_rate_stderr: f64,
    pub s_o: f64,
    pub n_traj: u64,
    pub n_discarded: u64,
}

pub struct GeneralizedSummary {
    pub rows: Vec<GeneralizedRow>,
    pub cumulants: Vec<crate::lyapunov::CumulantPoint>,
    pub histogram: Vec<crate::lyapunov::HPoint>,
    pub values: BTreeMap<String, Estimate>,
}

/// Times at which `Y` is sampled for cumulants and histograms: every `L`
/// steps across `[5L, 32L]`.
pub fn correlator_times(size: usize) -> Vec<usize> {
    (5..=32).map(|k| k * size).collect()
}

/// Free energies, cumulant rates, exponents and `H(s)` from paired-state records.
pub fn generalized_summary(records: &[TrajectoryRecord], alpha: f64) -> Result<GeneralizedSummary> {
    let mut by_size: BTreeMap<usize, Vec<TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        by_size.entry(r.size).or_default().push(r.clone());
    }
    let mut samples = Vec::new();
    let mut partial = Vec::new();
    for (size, recs) in &by_size {
        let s = FreeEnergySeries::from_records(recs)?;
        let w = default_window(*size);
        let f = free_energy_density(&s, w, alpha)?;
        let f1 = generalized_free_energy_density(&s, w, alpha)?;
        let k1 = k1_rate(&s, w, alpha)?;
        samples.extend(correlator_samples(recs, &correlator_times(*size)));
        partial.push((*size, f, f1, k1, s.n_traj, s.n_discarded));
    }
    let rates = cumulant_rates(&samples, alpha)?;
    let curves = multifractal_histogram(&samples).unwrap_or_default();
    let rows: Vec<GeneralizedRow> = partial
        .iter()
        .map(|&(size, f, f1, k1, n_traj, n_discarded)| {
            let k2 = rates.iter().find(|r| r.size == size).map(|r| r.k2);
            GeneralizedRow {
                size,
                p: records[0].p,
                f: f.value,
                f_stderr: f.stderr,
                f1: f1.value,
                f1_stderr: f1.stderr,
                k1_rate: k1.value,
                k1_rate_stderr: k1.stderr,
                k2_rate: k2.map_or(f64::NAN, |e| e.value),
                k2_rate_stderr: k2.map_or(f64::NAN, |e| e.stderr),
                s_o: curves.iter().find(|c| c.size == size).map_or(f64::NAN, |c| c.s_o),
                n_traj,
                n_discarded,
            }
        })
        .collect();
    let mut values = BTreeMap::new();
    if rows.len() >= 2 {
        let k1: Vec<(usize, Estimate)> =
            rows.iter().map(|r| (r.size, Estimate { value: r.k1_rate, stderr: r.k1_rate_stderr })).collect();
        values.insert("x1_typ".into(), scaling_dimension(&k1)?);
        let k2: Vec<(usize, Estimate)> = rates.iter().map(|r| (r.size, r.k2)).collect();
        if k2.len() >= 2 {
            values.insert("x1_2".into(), scaling_dimension(&k2)?);
        }
    }
    Ok(GeneralizedSummary {
        rows,
        cumulants: cumulants(&samples, alpha),
        histogram: curves.into_iter().flat_map(|c| c.points).collect(),
        values,
    })
}

/// Collects result files into one row per model with the exponent columns
/// `p_c, nu, z, eta, c_eff, x1_typ, x1_2`.
pub fn table1(inputs: &[PathBuf], output: &Path) -> Result<()> {
    const COLUMNS: [&str; 7] = ["p_c", "nu", "z", "eta", "c_eff", "x1_typ", "x1_2"];
    let mut rows: BTreeMap<String, BTreeMap<String, Estimate>> = BTreeMap::new();
    for input in inputs {
        let path = if input.is_dir() { input.join(RESULT_FILE) } else { input.clone() };
        if !path.is_file() {
            return Err(Error::invalid(format!("{} is not a file", path.display())));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let r: ResultFile = serde_json::from_str(&text)
            .map_err(|e| Error::SchemaMismatch { path: path.clone(), reason: e.to_string() })?;
        rows.entry(r.model).or_default().extend(r.values);
    }
    fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    let path = output.join("table1.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| crate::observables::csv_err(&path, e))?;
    let mut head = vec!["model".to_string()];
    for c in COLUMNS {
        head.push(c.to_string());
        head.push(format!("{c}_err"));
    }
    w.write_record(&head).map_err(|e| crate::observables::csv_err(&path, e))?;
    for (model, vals) in rows {
        let mut rec = vec![model];
        for c in COLUMNS {
            match vals.get(c) {
                Some(e) => {
                    rec.push(e.value.to_string());
                    rec.push(e.stderr.to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec).map_err(|e| crate::observables::csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Runs `command` end to end.
pub fn run(command: Command, spec: &ExperimentSpec, inputs: &[PathBuf]) -> Result<()> {
    spec.validate(command)?;
    if command == Command::Table1 {
        return table1(inputs, &spec.output);
    }
    let records = if command.simulates() {
        fs::create_dir_all(&spec.output).map_err(|e| Error::io(&spec.output, e))?;
        let spec_path = spec.output.join("spec.toml");
        let text = toml::to_string(spec).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&spec_path, text).map_err(|e| Error::io(&spec_path, e))?;
        simulate(command, spec)?
    } else {
        if inputs.is_empty() {
            return Err(Error::invalid(format!("{} needs input trajectory files", command.name())));
        }
        let mut all = Vec::new();
        for p in inputs {
            let path = if p.is_dir() { p.join(TRAJECTORY_FILE) } else { p.clone() };
            all.extend(read_jsonl(&path)?.1);
        }
        all
    };
    summarize(command, spec, &records, &spec.output)
}

#[derive(Parser, Debug)]
#[command(name = "mipt", version, about = "Monitored random-circuit simulations and scaling analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    #[command(flatten)]
    pub opts: Overrides,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// var(S) over an (L, p, J) grid.
    PhaseMap,
    /// Ancilla order parameter at t = 2L, crossing and (p_c, ν) collapse.
    AncillaCrossing,
    /// S_anc(t) at fixed p and the z collapse.
    AncillaDynamics,
    /// Two-ancilla mutual information and the η collapse.
    MutualInfo,
    /// Free-energy density f(L) and the c_eff double fit.
    FreeEnergy,
    /// Paired-state free energies, cumulants and H(s).
    GeneralizedFreeEnergy,
    /// Collapse existing trajectory files (`--kind pc-nu|z|eta`).
    Collapse { inputs: Vec<PathBuf> },
    /// c_eff double fit over existing free-energy trajectory files.
    CeffFit { inputs: Vec<PathBuf> },
    /// Table of exponents from result files or output directories.
    Table1 { inputs: Vec<PathBuf> },
    /// Merge trajectory files and summarize the union.
    Merge {
        inputs: Vec<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// Flat TOML config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated system sizes L (even).
    #[arg(long, global = true, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Comma-separated measurement rates p.
    #[arg(long, global = true, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Comma-separated strengths J; each cell uses λ = JΔ (cgpm, dgpm) or Λ = J (spmm).
    #[arg(long, global = true, value_delimiter = ',')]
    pub strengths: Option<Vec<f64>>,
    /// Measurement model: projective, cgpm, dgpm or spmm.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Pointer shift λ for cgpm and dgpm.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Pointer width Δ for cgpm and dgpm.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Discretization step ε for dgpm.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Softening Λ for spmm.
    #[arg(long, global = true)]
    pub softening: Option<f64>,
    /// Trajectories per cell.
    #[arg(long, global = true)]
    pub trajectories: Option<u64>,
    /// First trajectory index, for splitting a run across machines.
    #[arg(long, global = true)]
    pub seed_offset: Option<u64>,
    /// Master seed mixed into every cell seed.
    #[arg(long, global = true)]
    pub master_seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Two-qubit gates: hdu or haar.
    #[arg(long, global = true, value_parser = parse_gate_set)]
    pub gate_set: Option<GateSet>,
    /// Rényi index for the generalized free energy.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Number of circuit steps (default depends on the command).
    #[arg(long, global = true)]
    pub t_max: Option<usize>,
    /// Encoding steps in the ancilla protocols (default 2L, or 20L for mutual-info).
    #[arg(long, global = true)]
    pub encoding_time: Option<usize>,
    /// Output directory.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Collapse kind: pc-nu, z or eta.
    #[arg(long, global = true, value_parser = parse_kind)]
    pub kind: Option<CollapseKind>,
    /// Smallest sizes kept in the c_eff fit, one fit per value.
    #[arg(long, global = true, value_delimiter = ',')]
    pub l_min: Option<Vec<usize>>,
    /// Bootstrap resamples.
    #[arg(long, global = true)]
    pub resamples: Option<usize>,
}

fn parse_gate_set(s: &str) -> std::result::Result<GateSet, String> {
    match s {
        "hdu" => Ok(GateSet::Hdu),
        "haar" => Ok(GateSet::Haar),
        _ => Err(format!("unknown gate set '{s}' (hdu, haar)")),
    }
}

fn parse_kind(s: &str) -> std::result::Result<CollapseKind, String> {
    match s {
        "pc-nu" => Ok(CollapseKind::PcNu),
        "z" => Ok(CollapseKind::Z),
        "eta" => Ok(CollapseKind::Eta),
        _ => Err(format!("unknown collapse kind '{s}' (pc-nu, z, eta)")),
    }
}

impl Overrides {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => ExperimentSpec::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { spec.$f = v.clone(); } )* };
        }
        set!(sizes, rates, strengths, model, lambda, delta, epsilon, softening, trajectories,
             seed_offset, master_seed, workers, gate_set, alpha, output, l_min, resamples);
        if self.t_max.is_some() {
            spec.t_max = self.t_max;
        }
        if self.encoding_time.is_some() {
            spec.encoding_time = self.encoding_time;
        }
        if self.kind.is_some() {
            spec.kind = self.kind;
        }
        Ok(spec)
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let spec = cli.opts.resolve()?;
    match cli.command {
        CliCommand::PhaseMap => run(Command::PhaseMap, &spec, &[]),
        CliCommand::AncillaCrossing => run(Command::AncillaCrossing, &spec, &[]),
        CliCommand::AncillaDynamics => run(Command::AncillaDynamics, &spec, &[]),
        CliCommand::MutualInfo => run(Command::MutualInfo, &spec, &[]),
        CliCommand::FreeEnergy => run(Command::FreeEnergy, &spec, &[]),
        CliCommand::GeneralizedFreeEnergy => run(Command::GeneralizedFreeEnergy, &spec, &[]),
        CliCommand::Collapse { inputs } => run(Command::Collapse, &spec, &inputs),
        CliCommand::CeffFit { inputs } => run(Command::CeffFit, &spec, &inputs),
        CliCommand::Table1 { inputs } => run(Command::Table1, &spec, &inputs),
        CliCommand::Merge { inputs } => {
            let out = spec.output.join(TRAJECTORY_FILE);
            let (command, records) = merge(&inputs, &out)?;
            summarize(command, &spec, &records, &spec.output)
        }
    }
}

/// Parses `args`, runs, and returns the process exit code:
/// 0 success, 1 bad input, 2 runtime failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_bad_input() {
                1
            } else {
                2
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dir: &Path) -> ExperimentSpec {
        ExperimentSpec {
            sizes: vec![4],
            rates: vec![0.2, 0.4],
            model: "spmm".into(),
            trajectories: 130,
            output: dir.to_path_buf(),
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn spec_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(dir.path());
        assert!(s.validate(Command::FreeEnergy).is_ok());
        s.rates.clear();
        assert!(s.validate(Command::FreeEnergy).unwrap_err().is_bad_input());
        let mut s = spec(dir.path());
        s.model = "laser".into();
        assert!(s.validate(Command::FreeEnergy).unwrap_err().is_bad_input());
        assert!(spec(dir.path()).validate(Command::Collapse).is_err());
        let mut s = spec(dir.path());
        s.sizes = vec![4, 6, 6];
        assert!(s.validate(Command::AncillaCrossing).unwrap_err().is_bad_input());
        assert!(s.validate(Command::AncillaDynamics).is_ok());
    }

    #[test]
    fn cell_seeds_differ() {
        let dir = tempfile::tempdir().unwrap();
        let cells = spec(dir.path()).cells(Command::FreeEnergy).unwrap();
        assert_eq!(cells.len(), 2);
        assert_ne!(cells[0].master_seed, cells[1].master_seed);
        assert_eq!(cells[0].t_max, 128);
    }

    #[test]
    fn resume_reuses_blocks_and_matches_fresh_run() {
        let fresh = tempfile::tempdir().unwrap();
        let resumed = tempfile::tempdir().unwrap();
        let mut s = spec(fresh.path());
        s.t_max = Some(10);
        let a = simulate(Command::FreeEnergy, &s).unwrap();
        assert_eq!(a.len(), 260);

        let mut partial = s.clone();
        partial.output = resumed.path().to_path_buf();
        partial.trajectories = 100;
        simulate(Command::FreeEnergy, &partial).unwrap();
        // simulate an interrupted append
        let path = resumed.path().join(TRAJECTORY_FILE);
        let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"master_seed\": 1, \"se").unwrap();
        drop(f);
        partial.trajectories = 130;
        simulate(Command::FreeEnergy, &partial).unwrap();
        let x = fs::read(fresh.path().join(TRAJECTORY_FILE)).unwrap();
        let y = fs::read(&path).unwrap();
        assert!(x == y);
    }

    #[test]
    fn merge_rejects_self_and_mismatched_schema() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(dir.path());
        s.t_max = Some(5);
        s.trajectories = 3;
        simulate(Command::FreeEnergy, &s).unwrap();
        let p = dir.path().join(TRAJECTORY_FILE);
        let out = dir.path().join("m/merged.jsonl");
        let e = merge(&[p.clone(), p.clone()], &out).unwrap_err();
        assert!(matches!(e, Error::DuplicateCell { .. }));
        let other = dir.path().join("other.jsonl");
        fs::write(&other, "{\"schema\":\"x\",\"version\":1,\"command\":\"free-energy\"}\n").unwrap();
        let e = merge(&[p, other.clone()], &out).unwrap_err();
        match e {
            Error::SchemaMismatch { path, .. } => assert_eq!(path, other),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn overrides_apply_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(&cfg, "sizes = [6, 8]\nmodel = \"dgpm\"\ntrajectories = 5\n").unwrap();
        let o = Overrides { config: Some(cfg.clone()), trajectories: Some(9), ..Overrides::default() };
        let s = o.resolve().unwrap();
        assert_eq!(s.sizes, vec![6, 8]);
        assert_eq!(s.trajectories, 9);
        assert_eq!(s.model, "dgpm");
        fs::write(&cfg, "colour = 3\n").unwrap();
        assert!(o.resolve().unwrap_err().is_bad_input());
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(main_with_args(["mipt", "--help"]), 0);
        assert_eq!(main_with_args(["mipt", "free-energy", "--sizes", "x"]), 1);
        assert_eq!(main_with_args(["mipt", "free-energy", "--sizes", "5", "-o", out]), 1);
        assert_eq!(
            main_with_args(["mipt", "free-energy", "--sizes", "4", "--t-max", "12", "--trajectories", "3", "-o", out]),
            1,
            "window shorter than 10 points is bad input"
        );
        assert_eq!(
            main_with_args(["mipt", "free-energy", "--sizes", "2", "--trajectories", "3", "-o", out]),
            0
        );
        let blocked = dir.path().join("file");
        fs::write(&blocked, "").unwrap();
        let sub = blocked.join("sub");
        assert_eq!(
            main_with_args(["mipt", "free-energy", "--sizes", "2", "--trajectories", "2", "-o", sub.to_str().unwrap()]),
            2
        );
    }
}
