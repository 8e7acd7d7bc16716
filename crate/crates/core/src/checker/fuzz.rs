//! Randomized exploration: many seeded random executions, each checked step by step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CheckError, Checks, Failure, Property, Stats, Verdict, Violation};
use crate::model::StepError;
use crate::programs::MachineError;
use crate::simulator::{SimError, Simulator};

/// Runs `episodes` random executions. Episode `e` uses seed `seed + e`,
/// which is recorded in the header of any counterexample trace.
pub fn fuzz(sim: &Simulator, seed: u64, episodes: u64) -> Result<Verdict, CheckError> {
    let sys = sim.system();
    let checks = Checks::from_config(sim.config(), sys);
    let limit = sim.config().depth_limit();
    let mut stats = Stats { bound: sys.bound().steps, episodes: Some(0), ..Stats::default() };

    for e in 0..episodes {
        let episode_seed = seed.wrapping_add(e);
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let mut exec = sim.start();
        stats.episodes = Some(e + 1);
        stats.states += 1;
        loop {
            let choices = sim.choices(exec.last());
            if choices.is_empty() {
                stats.terminals += 1;
                if let Some(v) = checks.terminal(sys, exec.last()) {
                    let trace = sim.trace(&exec, Some(episode_seed));
                    let failure = Failure { violation: v, labels: exec.labels(), failing_step: None, trace };
                    return Ok(Verdict::Fail(Box::new(failure), stats));
                }
                break;
            }
            if exec.effects.len() >= limit {
                return Ok(Verdict::DepthLimit { limit, stats });
            }
            let label = choices[rng.random_range(0..choices.len())];
            let depth = exec.effects.len();
            match sim.push(&mut exec, label) {
                Err(SimError::Step { source: StepError::Machine(err @ MachineError::ReadBeforeWrite { .. }), .. }) => {
                    let violation = Violation { property: Property::ReadBeforeWrite, detail: err.to_string() };
                    let trace = sim.trace(&exec, Some(episode_seed));
                    let failure = Failure { violation, labels: exec.labels(), failing_step: Some(label), trace };
                    return Ok(Verdict::Fail(Box::new(failure), stats));
                }
                Err(SimError::Step { source, .. }) => return Err(CheckError::Harness { depth, label, source }),
                Err(other) => return Err(other.into()),
                Ok(()) => {}
            }
            stats.edges += 1;
            stats.states += 1;
            let n = exec.states.len();
            let (prev, next) = (&exec.states[n - 2], &exec.states[n - 1]);
            stats.max_failures = stats.max_failures.max(next.failures);
            stats.max_depth = stats.max_depth.max(n - 1);
            if let Some(m) = next.frames.iter().map(|f| f.steps).max() {
                stats.max_attempt_steps = stats.max_attempt_steps.max(m);
            }
            if let Some(v) = checks.edge(sys, prev, exec.effects.last().unwrap(), next) {
                let trace = sim.trace(&exec, Some(episode_seed));
                let failure = Failure { violation: v, labels: exec.labels(), failing_step: None, trace };
                return Ok(Verdict::Fail(Box::new(failure), stats));
            }
        }
    }
    Ok(Verdict::Pass(stats))
}
