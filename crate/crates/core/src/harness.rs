//! Glue for the command-line tool: scenario presets, config files, instance
//! sourcing, session runners, output files and the latency bench.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{gen_no_instance, gen_yes_instance, CodingError, InstanceFile, SdInstance, SdWitness, WitnessFile};
use crate::fq::{FieldElement, FieldParams};
use crate::params::{mersenne_exponent_at_least, min_log2_q, sd_hardness_bits, DEFAULT_SOUNDNESS_SLACK};
use crate::seed::SessionSeed;
use crate::stern::{p1_respond, p2_respond, prover_preprocess, Challenge, Phase1Message, ProverStrategy};
use crate::transport::session::{histogram_csv, SessionReport};
use crate::transport::sim::{run_simulated_session, SimOptions, SimOutcome};
use crate::transport::wire::{
    decode_phase1_response, decode_phase2_challenge, decode_phase2_response, encode_phase1_challenge,
    encode_phase1_response, encode_phase2_challenge, encode_phase2_response, Frame, MessageType,
};
use crate::transport::{light_time_ns, Endpoints, ProtocolConfig, RoleMap, Seeds, TransportError};

/// The adversary a prover pair plays.
pub type AdversaryConfig = ProverStrategy;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Distance and schedule of a deployment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioPreset {
    /// 400 km, `Δ_T` = 2 ms, `T_shift` = 0.5 ms.
    Scenario1,
    /// 9000 km, `Δ_T` = 40 ms, `T_shift` = 2.5 ms.
    Scenario2,
    Custom {
        #[serde(rename = "D_km")]
        d_km: f64,
        #[serde(rename = "delta_T_ns")]
        delta_t_ns: i64,
        #[serde(rename = "T_shift_ns")]
        t_shift_ns: i64,
    },
}

impl ScenarioPreset {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioPreset::Scenario1 => "scenario1",
            ScenarioPreset::Scenario2 => "scenario2",
            ScenarioPreset::Custom { .. } => "custom",
        }
    }

    /// `(D_km, Δ_T, T_shift)`.
    pub fn geometry(&self) -> (f64, i64, i64) {
        match *self {
            ScenarioPreset::Scenario1 => (400.0, 2_000_000, 500_000),
            ScenarioPreset::Scenario2 => (9000.0, 40_000_000, 2_500_000),
            ScenarioPreset::Custom {
                d_km,
                delta_t_ns,
                t_shift_ns,
            } => (d_km, delta_t_ns, t_shift_ns),
        }
    }

    /// Largest timely phase-1 duration, `T_shift + D/c`, in ns.
    pub fn phase1_budget_ns(&self) -> f64 {
        let (d, _, shift) = self.geometry();
        shift as f64 + light_time_ns(d)
    }

    /// Largest timely phase-2 duration, `D/c - T_shift`, in ns.
    pub fn phase2_budget_ns(&self) -> f64 {
        let (d, _, shift) = self.geometry();
        light_time_ns(d) - shift as f64
    }

    pub fn apply(&self, mut config: ProtocolConfig) -> ProtocolConfig {
        let (d, delta, shift) = self.geometry();
        config.d_km = d;
        config.delta_t_ns = delta;
        config.t_shift_ns = shift;
        config
    }
}

impl FromStr for ScenarioPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "scenario1" | "1" => Ok(ScenarioPreset::Scenario1),
            "scenario2" | "2" => Ok(ScenarioPreset::Scenario2),
            _ => Err(format!("unknown preset {s:?}, expected scenario1 or scenario2")),
        }
    }
}

/// Size class of a certified NO instance small enough for exhaustive search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoInstanceSize {
    /// `n = 12, k = 4, w = 2`, `Q = 2^61 - 1`.
    Small,
}

impl NoInstanceSize {
    pub fn apply(&self, mut config: ProtocolConfig) -> ProtocolConfig {
        let NoInstanceSize::Small = self;
        config.n = 12;
        config.k = 4;
        config.w = 2;
        config.q_exponent = 61;
        config
    }
}

impl FromStr for NoInstanceSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small" => Ok(NoInstanceSize::Small),
            _ => Err(format!("unknown NO-instance size {s:?}, expected small")),
        }
    }
}

/// The JSON config file; every field is optional and falls back to the
/// full-size parameters under scenario 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub role: Option<String>,
    pub preset: Option<ScenarioPreset>,
    #[serde(rename = "D_km")]
    pub d_km: Option<f64>,
    #[serde(rename = "delta_T_ns")]
    pub delta_t_ns: Option<i64>,
    #[serde(rename = "T_shift_ns")]
    pub t_shift_ns: Option<i64>,
    #[serde(rename = "T1_ns")]
    pub t1_ns: Option<i64>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub w: Option<usize>,
    pub q_exponent: Option<u32>,
    #[serde(rename = "R")]
    pub rounds: Option<u32>,
    pub lambda: Option<f64>,
    pub seeds: Option<Seeds>,
    pub endpoints: Option<Endpoints>,
    pub adversary: Option<AdversaryConfig>,
    pub clock_offset_ns: Option<RoleMap<i64>>,
    pub report_grace_ns: Option<i64>,
    /// Paths to instance and witness files, relative to the config file.
    pub instance: Option<PathBuf>,
    pub witness: Option<PathBuf>,
    pub no_instance: Option<NoInstanceSize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::File {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg: ConfigFile = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.instance = cfg.instance.map(|p| base.join(p));
        cfg.witness = cfg.witness.map(|p| base.join(p));
        Ok(cfg)
    }

    pub fn resolve(&self) -> Result<ProtocolConfig, HarnessError> {
        let mut c = ProtocolConfig::default();
        if let Some(size) = self.no_instance {
            c = size.apply(c);
        }
        if let Some(p) = self.preset {
            c = p.apply(c);
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { c.$target = v; })*
            };
        }
        set!(d_km => d_km, delta_t_ns => delta_t_ns, t_shift_ns => t_shift_ns, n => n, k => k,
             w => w, q_exponent => q_exponent, rounds => rounds, lambda => lambda, seeds => seeds,
             endpoints => endpoints, adversary => adversary, clock_offset_ns => clock_offset_ns,
             report_grace_ns => report_grace_ns);
        if self.t1_ns.is_some() {
            c.t1_ns = self.t1_ns;
        }
        c.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(c)
    }
}

/// Where the instance (and witness, for provers) comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum InstanceSource {
    /// Planted instance from the instance seed; the witness is kept.
    GenerateYes,
    /// Certified NO instance from the instance seed.
    GenerateNo,
    Files { instance: PathBuf, witness: Option<PathBuf> },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let f = fs::File::open(path).map_err(|source| HarnessError::File {
        path: path.to_owned(),
        source,
    })?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let f = fs::File::create(path).map_err(|source| HarnessError::File {
        path: path.to_owned(),
        source,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|source| HarnessError::File {
        path: path.to_owned(),
        source,
    })
}

/// Loads or deterministically generates the instance for `config`.
pub fn obtain_instance(
    config: &ProtocolConfig,
    source: &InstanceSource,
) -> Result<(Arc<SdInstance>, Option<SdWitness>), HarnessError> {
    let mut rng = config.seeds.instance.rng("instance", 0, 0);
    let (instance, witness) = match source {
        InstanceSource::GenerateYes => {
            let (i, w) = gen_yes_instance(config.n, config.k, config.w, &mut rng)?;
            (i, Some(w))
        }
        InstanceSource::GenerateNo => (gen_no_instance(config.n, config.k, config.w, &mut rng)?, None),
        InstanceSource::Files { instance, witness } => {
            let i = read_json::<InstanceFile>(instance)?.into_instance()?;
            let w = match witness {
                Some(p) => Some(read_json::<WitnessFile>(p)?.into_witness()?),
                None => None,
            };
            (i, w)
        }
    };
    if (instance.n(), instance.k(), instance.w) != (config.n, config.k, config.w) {
        return Err(HarnessError::Config(format!(
            "instance has (n, k, w) = ({}, {}, {}) but the config says ({}, {}, {})",
            instance.n(),
            instance.k(),
            instance.w,
            config.n,
            config.k,
            config.w
        )));
    }
    Ok((Arc::new(instance), witness))
}

/// Runs all four roles on the simulated channel.
pub fn simulate(
    config: &ProtocolConfig,
    source: &InstanceSource,
    opts: &SimOptions,
) -> Result<SimOutcome, HarnessError> {
    let (instance, witness) = obtain_instance(config, source)?;
    let witness = if config.adversary.needs_witness() || config.adversary.relays() {
        witness
    } else {
        None
    };
    Ok(run_simulated_session(config, instance, witness, opts)?)
}

/// Files written for a finished session, relative to the output directory.
pub const REPORT_FILE: &str = "session_report.json";
pub const ROUNDS_CSV: &str = "rounds.csv";
pub const PHASE1_HIST: &str = "phase1_hist.csv";
pub const PHASE2_HIST: &str = "phase2_hist.csv";

/// Writes the report JSON, the round CSV and both phase histograms.
pub fn write_report(report: &SessionReport, dir: &Path, prefix: &str, bucket_us: u64) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::File {
        path: dir.to_owned(),
        source,
    })?;
    write_json(&dir.join(format!("{prefix}{REPORT_FILE}")), report)?;
    write_text(&dir.join(format!("{prefix}{ROUNDS_CSV}")), &report.csv)?;
    write_text(&dir.join(format!("{prefix}{PHASE1_HIST}")), &report.phase1_histogram_csv(bucket_us))?;
    write_text(&dir.join(format!("{prefix}{PHASE2_HIST}")), &report.phase2_histogram_csv(bucket_us))?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<SessionReport, HarnessError> {
    read_json(path)
}

/// One-line summary of a report.
pub fn summarize(report: &SessionReport) -> String {
    format!(
        "accepted={} F_observed={} F_allowed={} rounds={} passed={} pass_rate={:.4}",
        report.accepted,
        report.f_observed,
        report.f_allowed,
        report.rounds.len(),
        report.rounds_passed,
        report.pass_rate()
    )
}

/// Timings of one bench round, in nanoseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub q_exponent: u32,
    pub round: u32,
    pub phase1_compute_ns: i64,
    pub phase1_total_ns: i64,
    pub phase2_compute_ns: i64,
    pub phase2_total_ns: i64,
}

pub const BENCH_CSV_HEADER: &str =
    "n,q_exponent,round,phase1_compute_us,phase1_total_us,phase2_compute_us,phase2_total_us";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3},{:.3},{:.3}\n",
            r.n,
            r.q_exponent,
            r.round,
            r.phase1_compute_ns as f64 / 1e3,
            r.phase1_total_ns as f64 / 1e3,
            r.phase2_compute_ns as f64 / 1e3,
            r.phase2_total_ns as f64 / 1e3
        ));
    }
    out
}

/// Bench histograms of total phase times.
pub fn bench_histograms(rows: &[BenchRow], bucket_us: u64) -> (String, String) {
    (
        histogram_csv(rows.iter().map(|r| r.phase1_total_ns), bucket_us),
        histogram_csv(rows.iter().map(|r| r.phase2_total_ns), bucket_us),
    )
}

/// Mersenne exponent for code length `n` at soundness `2/3 + 0.001`.
pub fn auto_q_exponent(n: usize) -> Option<u32> {
    mersenne_exponent_at_least(min_log2_q(n as u64, DEFAULT_SOUNDNESS_SLACK))
}

/// Times both phases for `rounds` rounds at each code length.
///
/// `compute` is the prover's response computation alone. `total` runs from
/// just before the challenge is written to a loopback TCP connection until
/// the decoded answer is back, with the prover on another thread.
pub fn bench(n_list: &[usize], q_exponent: Option<u32>, rounds: u32, seed: u64) -> Result<Vec<BenchRow>, HarnessError> {
    let mut rows = Vec::new();
    for &n in n_list {
        let h = sd_hardness_bits(n as u64);
        let k = (h.k as usize).clamp(1, n.saturating_sub(1).max(1));
        let w = (h.w as usize).clamp(1, n);
        let q = match q_exponent {
            Some(q) => q,
            None => auto_q_exponent(n).ok_or_else(|| HarnessError::Config(format!("no field large enough for n={n}")))?,
        };
        let field = FieldParams::mersenne_for_code(q, n).map_err(|e| HarnessError::Config(e.to_string()))?;
        let root = SessionSeed::from_u64(seed);
        let (instance, witness) = gen_yes_instance(n, k, w, &mut root.rng("bench/instance", n as u32, 0))?;
        let states = (1..=rounds)
            .map(|i| prover_preprocess(&instance, &witness, &field, &root, i))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let states = Arc::new(states);

        let listener = TcpListener::bind("127.0.0.1:0").map_err(TransportError::from)?;
        let addr = listener.local_addr().map_err(TransportError::from)?;
        let server_states = states.clone();
        let server_field = field.clone();
        let server = thread::spawn(move || -> Result<(), TransportError> {
            let (stream, _) = listener.accept()?;
            stream.set_nodelay(true)?;
            let mut reader = BufReader::new(stream.try_clone()?);
            let mut writer = stream;
            while let Some(frame) = Frame::read_from(&mut reader)? {
                let st = &server_states[frame.round as usize - 1];
                let reply = match frame.msg_type {
                    MessageType::Phase1Challenge => {
                        let b = crate::transport::wire::decode_phase1_challenge(&server_field, &frame.payload)
                            .map_err(|_| TransportError::Malformed("B".into()))?;
                        let y = p1_respond(st, &b)?;
                        Frame::new(MessageType::Phase1Response, frame.round, encode_phase1_response(&y))
                    }
                    _ => {
                        let c = decode_phase2_challenge(&frame.payload)?;
                        Frame::new(MessageType::Phase2Response, frame.round, encode_phase2_response(&p2_respond(st, c)))
                    }
                };
                reply.write_to(&mut writer)?;
            }
            Ok(())
        });

        let stream = TcpStream::connect(addr).map_err(TransportError::from)?;
        stream.set_nodelay(true).map_err(TransportError::from)?;
        let mut reader = BufReader::new(stream.try_clone().map_err(TransportError::from)?);
        let mut writer = stream;
        let mut rng = root.rng("bench/verifier", n as u32, 0);
        for i in 1..=rounds {
            let st = &states[i as usize - 1];
            let b = Phase1Message {
                b: [0, 1, 2].map(|_| FieldElement::random(&field, &mut rng)),
            };
            let c = Challenge::random(&mut rng);

            let t = Instant::now();
            let y = p1_respond(st, &b).map_err(TransportError::from)?;
            let _ = encode_phase1_response(&y);
            let phase1_compute_ns = t.elapsed().as_nanos() as i64;
            let t = Instant::now();
            let _ = p2_respond(st, c);
            let phase2_compute_ns = t.elapsed().as_nanos() as i64;

            let t = Instant::now();
            Frame::new(MessageType::Phase1Challenge, i, encode_phase1_challenge(&b))
                .write_to(&mut writer)
                .map_err(TransportError::from)?;
            let f = Frame::read_from(&mut reader)?.ok_or_else(|| TransportError::Protocol("bench prover hung up".into()))?;
            decode_phase1_response(&field, &f.payload).map_err(|_| TransportError::Malformed("Y".into()))?;
            let phase1_total_ns = t.elapsed().as_nanos() as i64;

            let t = Instant::now();
            Frame::new(MessageType::Phase2Challenge, i, encode_phase2_challenge(c))
                .write_to(&mut writer)
                .map_err(TransportError::from)?;
            let f = Frame::read_from(&mut reader)?.ok_or_else(|| TransportError::Protocol("bench prover hung up".into()))?;
            decode_phase2_response(&field, c, &f.payload).map_err(|_| TransportError::Malformed("AZ".into()))?;
            let phase2_total_ns = t.elapsed().as_nanos() as i64;

            rows.push(BenchRow {
                n,
                q_exponent: q,
                round: i,
                phase1_compute_ns,
                phase1_total_ns,
                phase2_compute_ns,
                phase2_total_ns,
            });
        }
        drop(writer);
        drop(reader);
        server
            .join()
            .map_err(|_| HarnessError::Config("bench prover panicked".into()))??;
    }
    Ok(rows)
}

/// Median of a non-empty slice.
pub fn median(values: &mut [i64]) -> i64 {
    values.sort_unstable();
    values[values.len() / 2]
}
