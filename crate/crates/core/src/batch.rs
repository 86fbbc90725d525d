//! Data-parallel batch evaluation. With the `parallel` feature the work is
//! spread over the rayon pool; without it every mode runs sequentially.

use crate::config::Config;
use crate::gateway::Gateway;
use crate::nlu::{ContextStack, DeviceRef, Understander, Understanding, Utterance};
use crate::transcript::{self, Line, ReplayOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether `Parallel` actually uses more than one thread in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Order-preserving map over `items`.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Understands each text independently against the same contexts and fleet.
pub fn understand_all(
    exec: Execution,
    engine: &dyn Understander,
    texts: &[String],
    contexts: &ContextStack,
    candidates: &[DeviceRef],
) -> Vec<Understanding> {
    let indexed: Vec<(usize, &String)> = texts.iter().enumerate().collect();
    map(exec, &indexed, |(i, text)| {
        let utterance = Utterance {
            session_id: "batch".into(),
            text: (*text).clone(),
            turn_index: *i as u64,
        };
        engine.understand(&utterance, contexts, candidates)
    })
}

/// Replays each transcript against its own freshly seeded gateway.
pub fn replay_all(
    exec: Execution,
    config: &Config,
    principal: &str,
    transcripts: &[Vec<Line>],
) -> Vec<Result<ReplayOutcome, String>> {
    map(exec, transcripts, |lines| {
        let gateway = Gateway::from_config(config).map_err(|e| e.to_string())?;
        transcript::replay(&gateway, principal, lines).map_err(|e| e.to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| x * x + 1;
        assert_eq!(
            map(Execution::Sequential, &items, f),
            map(Execution::Parallel, &items, f)
        );
    }
}
