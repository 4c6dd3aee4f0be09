//! Discrete-event simulation of the four roles on one logical clock.
//!
//! Each directed link delivers a frame after `delay + U[0, jitter]`, drops it
//! with probability `drop_prob`, and never reorders: a frame is delivered no
//! earlier than the previous frame on the same link.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::agents::{Agent, Outbox, RoleAgent};
use super::session::SessionReport;
use super::wire::{Frame, MessageType};
use super::{ProtocolConfig, Role, RoleMap, TransportError};
use crate::coding::{SdInstance, SdWitness};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub delay_ns: i64,
    pub jitter_ns: i64,
    pub drop_prob: f64,
}

impl LinkSpec {
    pub const IDEAL: LinkSpec = LinkSpec {
        delay_ns: 0,
        jitter_ns: 0,
        drop_prob: 0.0,
    };

    pub fn fixed(delay_ns: i64) -> Self {
        Self {
            delay_ns,
            ..Self::IDEAL
        }
    }

    pub fn lossy(delay_ns: i64, drop_prob: f64) -> Self {
        Self {
            delay_ns,
            jitter_ns: 0,
            drop_prob,
        }
    }
}

impl Default for LinkSpec {
    fn default() -> Self {
        Self::IDEAL
    }
}

/// How long a handler takes on the logical clock.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComputeModel {
    /// Handlers are instantaneous.
    #[default]
    Zero,
    /// Handlers take the wall time they actually took.
    Measured,
}

/// Extra one-way delay for frames of one round on one directed link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayInjection {
    pub from: Role,
    pub to: Role,
    pub round: u32,
    pub extra_ns: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// `V1 ↔ P1` and `V2 ↔ P2`.
    pub verifier_prover: LinkSpec,
    /// `V1 ↔ V2`; carries only setup and merge traffic.
    pub verifier_verifier: LinkSpec,
    /// `P1 ↔ P2`; used only by relaying provers.
    pub prover_prover: LinkSpec,
    /// Directed per-link replacements for the three classes above.
    pub overrides: Vec<(Role, Role, LinkSpec)>,
    pub injections: Vec<DelayInjection>,
    pub compute: ComputeModel,
    /// Raw clock reading minus logical time, per role.
    pub clock_skew_ns: RoleMap<i64>,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            verifier_prover: LinkSpec::IDEAL,
            verifier_verifier: LinkSpec::IDEAL,
            prover_prover: LinkSpec::IDEAL,
            overrides: Vec::new(),
            injections: Vec::new(),
            compute: ComputeModel::Zero,
            clock_skew_ns: RoleMap::default(),
            seed: 0,
        }
    }
}

impl SimOptions {
    pub fn link(&self, from: Role, to: Role) -> LinkSpec {
        if let Some((_, _, l)) = self.overrides.iter().find(|(f, t, _)| *f == from && *t == to) {
            return *l;
        }
        match (from.is_verifier(), to.is_verifier()) {
            (true, true) => self.verifier_verifier,
            (false, false) => self.prover_prover,
            _ => self.verifier_prover,
        }
    }

    fn injected(&self, from: Role, to: Role, frame: &Frame) -> i64 {
        if matches!(frame.msg_type, MessageType::Sync | MessageType::Report) {
            return 0;
        }
        self.injections
            .iter()
            .filter(|d| d.from == from && d.to == to && d.round == frame.round)
            .map(|d| d.extra_ns)
            .sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub frames_sent: u64,
    pub frames_dropped: u64,
    pub events: u64,
    pub end_time_ns: i64,
}

enum EventKind {
    Wake { role: Role, generation: u64 },
    Deliver { from: Role, to: Role, frame: Frame },
}

struct Event {
    time: i64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

struct Simulator<'a> {
    opts: &'a SimOptions,
    /// Local clock reading minus logical time, per role.
    clock_shift: RoleMap<i64>,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    generation: RoleMap<u64>,
    last_delivery: HashMap<(Role, Role), i64>,
    rng: ChaCha20Rng,
    stats: SimStats,
}

impl Simulator<'_> {
    fn push(&mut self, time: i64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(Event {
            time,
            seq: self.seq,
            kind,
        }));
    }

    fn local(&self, role: Role, t: i64) -> i64 {
        t.saturating_add(*self.clock_shift.get(role))
    }

    fn reschedule(&mut self, agent: &dyn Agent, now: i64) {
        let role = agent.role();
        *self.generation.get_mut(role) += 1;
        if let Some(local) = agent.next_wakeup() {
            let logical = local.saturating_sub(*self.clock_shift.get(role)).max(now);
            let generation = *self.generation.get(role);
            self.push(logical, EventKind::Wake { role, generation });
        }
    }

    fn dispatch(&mut self, agent: &mut dyn Agent, now: i64, out: Outbox, elapsed_ns: i64) {
        let from = agent.role();
        let sent_at = now + elapsed_ns;
        for (to, frame) in out {
            agent.on_sent(to, &frame, self.local(from, sent_at));
            self.stats.frames_sent += 1;
            let link = self.opts.link(from, to);
            if link.drop_prob > 0.0 && self.rng.gen_bool(link.drop_prob.min(1.0)) {
                self.stats.frames_dropped += 1;
                continue;
            }
            let jitter = if link.jitter_ns > 0 {
                self.rng.gen_range(0..=link.jitter_ns)
            } else {
                0
            };
            let arrival = sent_at + link.delay_ns + jitter + self.opts.injected(from, to, &frame);
            let last = self.last_delivery.entry((from, to)).or_insert(i64::MIN);
            let arrival = arrival.max(*last);
            *last = arrival;
            self.push(arrival, EventKind::Deliver { from, to, frame });
        }
    }
}

/// Runs agents until every verifier is done (every agent, if there are no
/// verifiers), the queue empties, or logical time passes `time_limit_ns`.
pub fn run_agents(
    agents: &mut [&mut dyn Agent],
    clock_offset_ns: &RoleMap<i64>,
    opts: &SimOptions,
    time_limit_ns: i64,
) -> SimStats {
    let mut clock_shift = RoleMap::default();
    for r in Role::ALL {
        *clock_shift.get_mut(r) = opts.clock_skew_ns.get(r) - clock_offset_ns.get(r);
    }
    let mut sim = Simulator {
        opts,
        clock_shift,
        queue: BinaryHeap::new(),
        seq: 0,
        generation: RoleMap::default(),
        last_delivery: HashMap::new(),
        rng: ChaCha20Rng::seed_from_u64(opts.seed),
        stats: SimStats::default(),
    };
    let index: HashMap<Role, usize> = agents.iter().enumerate().map(|(i, a)| (a.role(), i)).collect();
    let any_verifier = agents.iter().any(|a| a.role().is_verifier());
    let finished = |agents: &[&mut dyn Agent]| {
        agents
            .iter()
            .filter(|a| !any_verifier || a.role().is_verifier())
            .all(|a| a.is_done())
    };
    for a in agents.iter() {
        sim.reschedule(&**a, 0);
    }
    let mut out = Outbox::new();
    while !finished(agents) {
        let Some(Reverse(ev)) = sim.queue.pop() else { break };
        if ev.time > time_limit_ns {
            break;
        }
        sim.stats.events += 1;
        sim.stats.end_time_ns = ev.time;
        let (role, delivery) = match ev.kind {
            EventKind::Wake { role, generation } => {
                if generation != *sim.generation.get(role) {
                    continue;
                }
                (role, None)
            }
            EventKind::Deliver { from, to, frame } => (to, Some((from, frame))),
        };
        let Some(&i) = index.get(&role) else { continue };
        let agent = &mut *agents[i];
        let local_now = sim.local(role, ev.time);
        let started = Instant::now();
        match delivery {
            None => agent.on_wakeup(local_now, &mut out),
            Some((from, frame)) => agent.on_frame(local_now, from, frame, &mut out),
        }
        let elapsed = match opts.compute {
            ComputeModel::Zero => 0,
            ComputeModel::Measured => started.elapsed().as_nanos() as i64,
        };
        sim.dispatch(agent, ev.time, std::mem::take(&mut out), elapsed);
        sim.reschedule(agent, ev.time);
    }
    sim.stats
}

/// Result of a simulated session.
#[derive(Clone, Debug)]
pub struct SimOutcome {
    /// The report as computed by `V1`.
    pub report: SessionReport,
    /// The report as computed by `V2`; identical to `report` when present.
    pub v2_report: Option<SessionReport>,
    pub stats: SimStats,
    pub p1_answered: usize,
    pub p2_answered: usize,
}

/// All four roles in one process. Without `T1` in the config, `V1` picks
/// `T1 = 1 ms` on the logical clock and announces it.
pub fn run_simulated_session(
    config: &ProtocolConfig,
    instance: Arc<SdInstance>,
    witness: Option<SdWitness>,
    opts: &SimOptions,
) -> Result<SimOutcome, TransportError> {
    config.validate()?;
    let mut v1 = match RoleAgent::new(Role::V1, config, instance.clone(), None)? {
        RoleAgent::Verifier(v) => v.with_start_delay(1_000_000),
        RoleAgent::Prover(_) => unreachable!(),
    };
    let mut v2 = match RoleAgent::new(Role::V2, config, instance.clone(), None)? {
        RoleAgent::Verifier(v) => v,
        RoleAgent::Prover(_) => unreachable!(),
    };
    let mut p1 = super::agents::ProverAgent::new(Role::P1, config, instance.clone(), witness.clone())?;
    let mut p2 = super::agents::ProverAgent::new(Role::P2, config, instance, witness)?;

    let span = config.delta_t_ns.saturating_mul(config.rounds as i64 + 2);
    let limit = config
        .t1_ns
        .unwrap_or(0)
        .saturating_add(span)
        .saturating_add(config.report_grace_ns)
        .saturating_add(60_000_000_000);
    let stats = {
        let mut agents: [&mut dyn Agent; 4] = [&mut v1, &mut v2, &mut p1, &mut p2];
        run_agents(&mut agents, &config.clock_offset_ns, opts, limit)
    };
    let (p1_answered, p2_answered) = (p1.answered(), p2.answered());
    let report = match v1.into_report() {
        Some(Ok(r)) => r,
        Some(Err(e)) => return Err(TransportError::Protocol(e)),
        None => return Err(TransportError::Timeout("simulated session did not finish".into())),
    };
    let v2_report = v2.into_report().and_then(Result::ok);
    Ok(SimOutcome {
        report,
        v2_report,
        stats,
        p1_answered,
        p2_answered,
    })
}
