//! The campaign loop: restore snapshot, feed mutated input, collect
//! coverage feedback, keep inputs that light up new buckets, persist and
//! dedup crashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{bucketize, dedup_key, CoverageMap, HarnessError, Snapshot, Target};
use crate::runtime::{RunStatus, TraceMode};

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub seeds: Vec<Vec<u8>>,
    /// Wall-clock cap for the whole campaign.
    pub wall_budget: Duration,
    /// Maximum executions across all workers.
    pub exec_budget: u64,
    /// Virtual-clock budget per execution.
    pub instr_budget: u64,
    pub workers: usize,
    pub rng_seed: u64,
    /// Stop the campaign as soon as one crash is recorded.
    pub stop_on_crash: bool,
    /// Campaign directory (corpus/, crashes/, report.json, coverage.csv);
    /// in-memory only when None.
    pub out_dir: Option<PathBuf>,
    /// Poll `<out_dir>/queue_in` for externally provided inputs.
    pub watch_queue: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seeds: vec![b"foo".to_vec()],
            wall_budget: Duration::from_secs(300),
            exec_budget: 1_000_000,
            instr_budget: 5_000_000,
            workers: 1,
            rng_seed: 0x5eed,
            stop_on_crash: true,
            out_dir: None,
            watch_queue: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusEntry {
    pub input: Vec<u8>,
    pub signature: String,
    pub discovered_at_exec: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrashRecord {
    pub input: Vec<u8>,
    pub dedup_key: String,
    pub summary: String,
    pub pc: u32,
    pub found_at_exec: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignReport {
    pub execs: u64,
    pub elapsed_secs: f64,
    pub execs_per_sec: f64,
    pub corpus_len: usize,
    pub crash_groups: usize,
    pub crashes: Vec<CrashRecord>,
    pub covered_blocks_final: usize,
    /// (exec index, covered block count) samples.
    pub coverage_series: Vec<(u64, usize)>,
    pub statuses: BTreeMap<String, u64>,
}

struct Campaign {
    /// Highest bucket seen per coverage index.
    virgin: Vec<u8>,
    corpus: Vec<CorpusEntry>,
    crashes: BTreeMap<String, CrashRecord>,
    execs: u64,
    series: Vec<(u64, usize)>,
    statuses: BTreeMap<String, u64>,
    covered: usize,
    stop: bool,
}

impl Campaign {
    /// Merge one run's coverage; true when it exposed a new bucket level.
    fn merge_coverage(&mut self, cov: &CoverageMap, target: &Target) -> bool {
        let mut interesting = false;
        for (i, c) in cov.counters.iter().enumerate() {
            let b = bucketize(*c);
            if b > self.virgin[i] {
                self.virgin[i] = b;
                interesting = true;
            }
        }
        if interesting {
            self.covered = self
                .virgin
                .iter()
                .enumerate()
                .filter(|(i, v)| {
                    **v > 0
                        && target
                            .timage
                            .trampolines
                            .values()
                            .any(|s| s.bucket as usize == *i)
                })
                .count();
        }
        interesting
    }
}

/// Deterministic mutation operators, deliberately small.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutator {
    BitFlip,
    ByteSet,
    Arith,
    InterestingSplice,
    HavocShuffle,
    LengthChange,
}

const INTERESTING8: &[u8] = &[0x00, 0x01, 0x20, 0x41, 0x7F, 0x80, 0xFF];
const INTERESTING32: &[u32] = &[0, 1, 0x7FFF_FFFF, 0x8000_0000, u32::MAX, 0x0800_0000];

pub(crate) fn mutate(input: &mut Vec<u8>, rng: &mut ChaCha8Rng) {
    if input.is_empty() {
        input.push(0);
    }
    let op = match rng.gen_range(0..6) {
        0 => Mutator::BitFlip,
        1 => Mutator::ByteSet,
        2 => Mutator::Arith,
        3 => Mutator::InterestingSplice,
        4 => Mutator::HavocShuffle,
        _ => Mutator::LengthChange,
    };
    match op {
        Mutator::BitFlip => {
            let i = rng.gen_range(0..input.len());
            input[i] ^= 1 << rng.gen_range(0..8);
        }
        Mutator::ByteSet => {
            let i = rng.gen_range(0..input.len());
            input[i] = rng.gen();
        }
        Mutator::Arith => {
            let i = rng.gen_range(0..input.len());
            let delta = rng.gen_range(1..=35u8);
            input[i] = if rng.gen() {
                input[i].wrapping_add(delta)
            } else {
                input[i].wrapping_sub(delta)
            };
        }
        Mutator::InterestingSplice => {
            if input.len() >= 4 && rng.gen_ratio(1, 3) {
                let i = rng.gen_range(0..=input.len() - 4);
                let v = INTERESTING32[rng.gen_range(0..INTERESTING32.len())];
                input[i..i + 4].copy_from_slice(&v.to_le_bytes());
            } else {
                let i = rng.gen_range(0..input.len());
                input[i] = INTERESTING8[rng.gen_range(0..INTERESTING8.len())];
            }
        }
        Mutator::HavocShuffle => {
            for _ in 0..rng.gen_range(2..=8) {
                let i = rng.gen_range(0..input.len());
                let j = rng.gen_range(0..input.len());
                input.swap(i, j);
                if rng.gen_ratio(1, 2) {
                    let k = rng.gen_range(0..input.len());
                    input[k] = rng.gen();
                }
            }
        }
        Mutator::LengthChange => {
            if rng.gen_ratio(2, 3) || input.len() <= 1 {
                let extra = rng.gen_range(1..=8);
                for _ in 0..extra {
                    input.push(rng.gen());
                }
            } else {
                let cut = rng.gen_range(1..input.len());
                input.truncate(cut);
            }
        }
    }
    // Keep inputs bounded.
    input.truncate(4096);
}

fn status_tag(status: &RunStatus) -> &'static str {
    match status {
        RunStatus::Completed => "completed",
        RunStatus::Crashed { .. } => "crashed",
        RunStatus::Timeout => "timeout",
        RunStatus::InputExhausted => "input_exhausted",
        RunStatus::SnapshotPoint => "snapshot_point",
    }
}

/// Run a coverage-guided campaign from the post-init snapshot.
pub fn fuzz(
    target: &Target,
    snapshot: &Snapshot,
    config: &FuzzConfig,
) -> Result<CampaignReport, HarnessError> {
    let start = Instant::now();
    let campaign = Mutex::new(Campaign {
        virgin: vec![0; crate::rewriter::COV_TABLE_SIZE as usize],
        corpus: Vec::new(),
        crashes: BTreeMap::new(),
        execs: 0,
        series: Vec::new(),
        statuses: BTreeMap::new(),
        covered: 0,
        stop: false,
    });
    let seeds = if config.seeds.is_empty() {
        vec![b"foo".to_vec()]
    } else {
        config.seeds.clone()
    };

    std::thread::scope(|scope| {
        for worker_id in 0..config.workers.max(1) {
            let campaign = &campaign;
            let seeds = &seeds;
            scope.spawn(move || {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(config.rng_seed ^ (worker_id as u64) << 32);
                let mut executor = target.executor();
                let mut seed_cursor = worker_id; // spread seeds across workers
                loop {
                    // Pick the next input under the lock, run outside it.
                    let input = {
                        let c = campaign.lock().unwrap();
                        if c.stop
                            || c.execs >= config.exec_budget
                            || start.elapsed() >= config.wall_budget
                        {
                            break;
                        }
                        if seed_cursor < seeds.len() {
                            let s = seeds[seed_cursor].clone();
                            seed_cursor += config.workers.max(1);
                            s
                        } else if c.corpus.is_empty() {
                            let mut s = seeds[rng.gen_range(0..seeds.len())].clone();
                            mutate(&mut s, &mut rng);
                            s
                        } else {
                            let mut s =
                                c.corpus[rng.gen_range(0..c.corpus.len())].input.clone();
                            for _ in 0..rng.gen_range(1..=3) {
                                mutate(&mut s, &mut rng);
                            }
                            s
                        }
                    };

                    executor.restore_state(&snapshot.state);
                    executor.input = crate::hlm::InputStream::new(input.clone());
                    let outcome = executor.run_from_current_state(
                        &crate::runtime::RunConfig {
                            budget: config.instr_budget,
                            trace: TraceMode::None,
                            stop_at_input_read: false,
                        },
                    );

                    let cov = CoverageMap::from_outcome(&outcome);
                    let mut c = campaign.lock().unwrap();
                    c.execs += 1;
                    *c.statuses.entry(status_tag(&outcome.status).into()).or_default() += 1;
                    let execs = c.execs;
                    if c.merge_coverage(&cov, target) {
                        c.corpus.push(CorpusEntry {
                            input: input.clone(),
                            signature: cov.signature(),
                            discovered_at_exec: execs,
                        });
                        let covered = c.covered;
                        c.series.push((execs, covered));
                    }
                    if let Some(key) = dedup_key(&target.timage, &outcome) {
                        let pc = match &outcome.status {
                            RunStatus::Crashed { pc, .. } => *pc,
                            _ => 0,
                        };
                        let summary = format!("{:?}", outcome.status);
                        c.crashes.entry(key.clone()).or_insert(CrashRecord {
                            input: input.clone(),
                            dedup_key: key,
                            summary,
                            pc,
                            found_at_exec: execs,
                        });
                        if config.stop_on_crash {
                            c.stop = true;
                        }
                    }
                }
            });
        }
    });

    let c = campaign.into_inner().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let report = CampaignReport {
        execs: c.execs,
        elapsed_secs: elapsed,
        execs_per_sec: if elapsed > 0.0 { c.execs as f64 / elapsed } else { 0.0 },
        corpus_len: c.corpus.len(),
        crash_groups: c.crashes.len(),
        crashes: c.crashes.values().cloned().collect(),
        covered_blocks_final: c.covered,
        coverage_series: c.series.clone(),
        statuses: c.statuses.clone(),
    };
    if let Some(dir) = &config.out_dir {
        persist_campaign(dir, &c, &report)?;
    }
    Ok(report)
}

fn persist_campaign(dir: &Path, c: &Campaign, report: &CampaignReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir.join("corpus"))?;
    std::fs::create_dir_all(dir.join("crashes"))?;
    for (i, entry) in c.corpus.iter().enumerate() {
        std::fs::write(dir.join("corpus").join(format!("input_{i:05}.bin")), &entry.input)?;
    }
    for rec in c.crashes.values() {
        std::fs::write(
            dir.join("crashes").join(format!("crash_{}.bin", rec.dedup_key)),
            &rec.input,
        )?;
    }
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report).unwrap(),
    )?;
    let mut csv = String::from("execs,covered_blocks\n");
    for (e, b) in &report.coverage_series {
        csv.push_str(&format!("{e},{b}\n"));
    }
    std::fs::write(dir.join("coverage.csv"), csv)?;
    Ok(())
}
