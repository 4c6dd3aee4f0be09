//! End-to-end sessions on the simulated channel.

use std::sync::Arc;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use relzk::coding::{gen_no_instance, gen_yes_instance, SdInstance, SdWitness};
use relzk::harness::ScenarioPreset;
use relzk::stern::{ProverStrategy, VerdictReason};
use relzk::transport::sim::{run_simulated_session, DelayInjection, LinkSpec, SimOptions, SimOutcome};
use relzk::transport::{light_time_ns, ProtocolConfig, Role, RoleMap, Seeds};

const MS: i64 = 1_000_000;

fn config(rounds: u32, lambda: f64) -> ProtocolConfig {
    ProtocolConfig {
        n: 48,
        k: 22,
        w: 6,
        q_exponent: 521,
        rounds,
        lambda,
        ..ProtocolConfig::default()
    }
}

fn yes_instance(seed: u64) -> (Arc<SdInstance>, SdWitness) {
    let (inst, wit) = gen_yes_instance(48, 22, 6, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
    (Arc::new(inst), wit)
}

fn run(config: &ProtocolConfig, opts: &SimOptions) -> SimOutcome {
    let (inst, wit) = yes_instance(1);
    run_simulated_session(config, inst, Some(wit), opts).unwrap()
}

#[test]
fn honest_session_is_accepted_by_both_verifiers() {
    let cfg = config(40, 0.0);
    let out = run(&cfg, &SimOptions::default());
    let r = &out.report;
    assert!(r.accepted);
    assert_eq!((r.f_observed, r.f_allowed, r.rounds_passed), (0, 0, 40));
    assert_eq!(out.v2_report.as_ref(), Some(r));
    assert_eq!((out.p1_answered, out.p2_answered), (40, 40));
    assert!(r.rounds.iter().all(|t| t.verdict.accepted && t.timing_ok));
    assert_eq!(&r.recheck().unwrap(), r);
}

#[test]
fn rounds_follow_the_schedule() {
    let cfg = ScenarioPreset::Scenario2.apply(config(12, 0.0));
    let out = run(&cfg, &SimOptions::default());
    let t1 = out.report.rounds[0].tau1_ns.unwrap();
    for (i, t) in out.report.rounds.iter().enumerate() {
        assert_eq!(t.tau1_ns, Some(t1 + i as i64 * 40 * MS));
        assert_eq!(t.tau2_ns, Some(t1 + i as i64 * 40 * MS + 2_500_000));
        // zero link delay and zero compute time
        assert_eq!(t.phase1_ns(), Some(0));
        assert_eq!(t.phase2_ns(), Some(0));
    }
}

#[test]
fn late_rounds_within_budget_are_tolerated() {
    let cfg = config(20, 0.1);
    assert_eq!(cfg.max_failures(), 2);
    let inject = |round| DelayInjection {
        from: Role::P2,
        to: Role::V2,
        round,
        // past the 0.83 ms phase-2 budget, short of the next round
        extra_ns: 3 * MS / 2,
    };
    let mut opts = SimOptions {
        injections: vec![inject(4), inject(11)],
        ..SimOptions::default()
    };
    let r = run(&cfg, &opts).report;
    assert!(r.accepted);
    assert_eq!(r.f_observed, 2);
    assert_eq!(r.rounds[3].verdict.reason, VerdictReason::TimingViolation);
    // the late answers were still correct
    assert_eq!(r.rounds_passed, 20);

    opts.injections.push(inject(17));
    let r = run(&cfg, &opts).report;
    assert!(!r.accepted);
    assert_eq!(r.f_observed, 3);
}

#[test]
fn missing_answer_counts_as_untimely() {
    // links are FIFO, so only the last round can be held back alone
    let cfg = config(10, 0.1);
    let opts = SimOptions {
        injections: vec![DelayInjection {
            from: Role::P1,
            to: Role::V1,
            round: 10,
            extra_ns: 10_000 * MS,
        }],
        ..SimOptions::default()
    };
    let r = run(&cfg, &opts).report;
    let t = &r.rounds[9];
    assert_eq!(t.y, None);
    assert!(!t.timing_ok);
    assert_eq!(t.verdict.reason, VerdictReason::TimingViolation);
    assert_eq!(r.f_observed, 1);
    assert!(r.accepted);
}

#[test]
fn drop_rate_matches_failure_rate() {
    // each round needs four verifier-prover frames to arrive
    let p = 0.05;
    let rounds = 4000;
    let cfg = config(rounds, 0.5);
    let opts = SimOptions {
        verifier_prover: LinkSpec::lossy(0, p),
        seed: 3,
        ..SimOptions::default()
    };
    let out = run(&cfg, &opts);
    let expected = 1.0 - (1.0 - p).powi(4);
    let observed = out.report.f_observed as f64 / rounds as f64;
    let sigma = (expected * (1.0 - expected) / rounds as f64).sqrt();
    assert!((observed - expected).abs() < 4.0 * sigma, "{observed} vs {expected}");
    assert!(out.stats.frames_dropped > 0);
    // every round that was answered in full was answered correctly
    assert!(out.report.rounds.iter().filter(|t| t.timing_ok).all(|t| t.verdict.accepted));
}

#[test]
fn link_delay_below_light_budget_is_timely() {
    // D = 9000 km leaves about 30 ms per phase
    let cfg = ScenarioPreset::Scenario2.apply(config(20, 0.0));
    let budget = light_time_ns(cfg.d_km) as i64;
    let opts = SimOptions {
        verifier_prover: LinkSpec {
            delay_ns: 10 * MS,
            jitter_ns: 4 * MS,
            drop_prob: 0.0,
        },
        ..SimOptions::default()
    };
    let r = run(&cfg, &opts).report;
    assert!(r.accepted, "{}", r.csv);
    assert!(r.rounds.iter().all(|t| t.phase1_ns().unwrap() < budget));

    let slow = SimOptions {
        verifier_prover: LinkSpec::fixed(budget / 2 + MS),
        ..SimOptions::default()
    };
    let r = run(&cfg, &slow).report;
    assert_eq!(r.f_observed, 20);
    assert!(!r.accepted);
}

#[test]
fn corrected_clock_skew_reproduces_the_unskewed_session() {
    let base = config(15, 0.0);
    let reference = run(&base, &SimOptions::default()).report;

    let skew = RoleMap {
        p1: 3 * MS,
        p2: -7 * MS,
        v1: 11 * MS,
        v2: -5 * MS,
    };
    let skewed = SimOptions {
        clock_skew_ns: skew.clone(),
        ..SimOptions::default()
    };
    let corrected = ProtocolConfig {
        clock_offset_ns: skew,
        ..base.clone()
    };
    let r = run(&corrected, &skewed).report;
    assert!(r.accepted);
    assert_eq!(r.rounds, reference.rounds);

    // uncorrected, V2 fires 16 ms away from V1 on the shared time line and
    // the recorded stamps disagree with the reference
    let r = run(&base, &skewed).report;
    assert_ne!(r.rounds, reference.rounds);
}

#[test]
fn tampered_report_fails_recheck() {
    let cfg = config(10, 0.0);
    let r = run(&cfg, &SimOptions::default()).report;

    let mut forged = r.clone();
    forged.rounds[4].az = Some("00".into());
    let rechecked = forged.recheck().unwrap();
    assert!(!rechecked.accepted);
    assert!(matches!(rechecked.rounds[4].verdict.reason, VerdictReason::BadCommitment(_)));

    let mut forged = r.clone();
    forged.rounds[6].theta2_ns = forged.rounds[6].tau1_ns.map(|t| t + 2 * MS);
    let rechecked = forged.recheck().unwrap();
    assert_eq!(rechecked.f_observed, 1);
    assert!(!rechecked.accepted);

    let json = serde_json::to_string(&r).unwrap();
    let back: relzk::transport::SessionReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.recheck().unwrap(), r);
}

#[test]
fn relaying_provers_pass_the_checks_but_never_the_clock() {
    let rounds = 1000;
    let mut cfg = config(rounds, 22.0 / 340.0);
    cfg.adversary = ProverStrategy::SpookyRelay;
    let inst = gen_no_instance(12, 4, 2, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
    cfg.n = 12;
    cfg.k = 4;
    cfg.w = 2;
    cfg.q_exponent = 61;
    // the provers are as far apart as the verifiers; the link is light speed
    let d = light_time_ns(cfg.d_km).ceil() as i64;
    let opts = SimOptions {
        prover_prover: LinkSpec::fixed(d),
        ..SimOptions::default()
    };
    let r = run_simulated_session(&cfg, Arc::new(inst), None, &opts).unwrap().report;
    assert_eq!(r.rounds_passed, rounds);
    assert_eq!(r.f_observed, rounds);
    assert!(!r.accepted);
    for t in &r.rounds {
        let (tau1, tau2) = (t.tau1_ns.unwrap(), t.tau2_ns.unwrap());
        assert!(t.theta1_ns.unwrap() >= tau2 + d);
        assert!(t.theta2_ns.unwrap() >= tau1 + d);
    }
}

#[test]
fn fixed_cheater_is_caught_in_about_a_third_of_rounds() {
    for fail in relzk::stern::Challenge::ALL {
        let mut cfg = config(3000, 22.0 / 340.0);
        cfg.adversary = ProverStrategy::CheatFixedFail(fail);
        cfg.seeds = Seeds::from_u64(fail.index() as u64);
        let (n, k, w) = (14, 5, 2);
        let inst = gen_no_instance(n, k, w, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        cfg.n = n;
        cfg.k = k;
        cfg.w = w;
        cfg.q_exponent = 61;
        let r = run_simulated_session(&cfg, Arc::new(inst), None, &SimOptions::default())
            .unwrap()
            .report;
        assert!(!r.accepted);
        // round verdicts fail exactly when the challenge hits the weak slot
        let caught = r.rounds.iter().filter(|t| !t.verdict.accepted).count();
        let hits = r.rounds.iter().filter(|t| t.challenge as usize == fail.index()).count();
        assert_eq!(caught, hits, "fail={fail:?}");
        let rate = caught as f64 / 3000.0;
        assert!((rate - 1.0 / 3.0).abs() < 0.04, "rate {rate}");
    }
}

#[test]
fn optimal_aborting_prover_is_rejected() {
    let sessions = 1000u64;
    let inst = Arc::new(gen_no_instance(12, 4, 2, &mut ChaCha20Rng::seed_from_u64(4)).unwrap());
    let workers = thread::available_parallelism().map_or(4, |n| n.get()).min(16) as u64;
    let accepted: u64 = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|wk| {
                let inst = inst.clone();
                s.spawn(move || {
                    let mut accepted = 0;
                    for i in (wk..sessions).step_by(workers as usize) {
                        let cfg = ProtocolConfig {
                            n: 12,
                            k: 4,
                            w: 2,
                            q_exponent: 61,
                            adversary: ProverStrategy::AbortRate(ProverStrategy::OPTIMAL_ABORT_RATE),
                            seeds: Seeds::from_u64(50_000 + i),
                            ..ProtocolConfig::default()
                        };
                        let r = run_simulated_session(&cfg, inst.clone(), None, &SimOptions::default())
                            .unwrap()
                            .report;
                        accepted += r.accepted as u64;
                    }
                    accepted
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    });
    assert!(accepted <= 1, "{accepted} of {sessions} sessions accepted");
}
