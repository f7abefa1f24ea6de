use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::IdentityId;
use crate::synth::Statistics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum State {
    Pending,
    Active,
    Solved,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
}

/// One record of a compile event stream. Serializes as
/// `{identity, state, ts, stats?}` or `{result, failed}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CompileEvent {
    Status {
        identity: IdentityId,
        state: State,
        /// Milliseconds since the compilation started.
        ts: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stats: Option<Statistics>,
    },
    Finished {
        result: Outcome,
        failed: Vec<IdentityId>,
    },
}

impl CompileEvent {
    pub fn status(identity: IdentityId, state: State, ts: u64, stats: Option<Statistics>) -> Self {
        CompileEvent::Status {
            identity,
            state,
            ts,
            stats,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, CompileEvent::Finished { .. })
    }
}

fn legal(from: Option<State>, to: State) -> bool {
    use State::*;
    matches!(
        (from, to),
        (None, Pending) | (Some(Pending), Active) | (Some(Active), Solved) | (Some(Active), Failed) | (Some(Failed), Active)
    )
}

/// Checks a complete event stream: every identity starts pending and moves
/// only along legal transitions, timestamps never decrease, and the stream
/// ends with exactly one terminal record whose failed list matches the
/// identities left failed. No identity may be left pending or active.
pub fn check_events(events: &[CompileEvent]) -> Result<(), String> {
    let mut states: BTreeMap<IdentityId, State> = BTreeMap::new();
    let mut last_ts = 0;
    let Some((terminal, body)) = events.split_last() else {
        return Err("empty event stream".into());
    };
    for (i, e) in body.iter().enumerate() {
        match e {
            CompileEvent::Status {
                identity, state, ts, ..
            } => {
                let from = states.get(identity).copied();
                if !legal(from, *state) {
                    return Err(format!("event {i}: {identity} cannot go from {from:?} to {state:?}"));
                }
                if *ts < last_ts {
                    return Err(format!("event {i}: timestamp goes backwards"));
                }
                last_ts = *ts;
                states.insert(*identity, *state);
            }
            CompileEvent::Finished { .. } => {
                return Err(format!("event {i}: terminal record before the end"));
            }
        }
    }
    let CompileEvent::Finished { failed, .. } = terminal else {
        return Err("stream does not end with a terminal record".into());
    };
    if let Some((id, s)) = states
        .iter()
        .find(|(_, s)| matches!(s, State::Pending | State::Active))
    {
        return Err(format!("{id} is still {s:?} at the end"));
    }
    let left_failed: Vec<IdentityId> = states
        .iter()
        .filter(|(_, s)| **s == State::Failed)
        .map(|(id, _)| *id)
        .collect();
    if &left_failed != failed {
        return Err(format!("terminal record lists {failed:?} but {left_failed:?} failed"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(id: u64, state: State, ts: u64) -> CompileEvent {
        CompileEvent::status(IdentityId(id), state, ts, None)
    }

    fn end(result: Outcome, failed: &[u64]) -> CompileEvent {
        CompileEvent::Finished {
            result,
            failed: failed.iter().map(|&i| IdentityId(i)).collect(),
        }
    }

    #[test]
    fn accepts_a_clean_run() {
        use State::*;
        let events = [st(1, Pending, 0), st(1, Active, 0), st(1, Solved, 3), end(Outcome::Success, &[])];
        assert_eq!(check_events(&events), Ok(()));
    }

    #[test]
    fn rejects_illegal_transitions() {
        use State::*;
        let skip = [st(1, Pending, 0), st(1, Solved, 0), end(Outcome::Success, &[])];
        assert!(check_events(&skip).is_err());
        let two_ends = [st(1, Pending, 0), end(Outcome::Failure, &[]), end(Outcome::Failure, &[])];
        assert!(check_events(&two_ends).is_err());
        let no_end = [st(1, Pending, 0), st(1, Active, 0)];
        assert!(check_events(&no_end).is_err());
        let unlisted = [st(1, Pending, 0), st(1, Active, 0), st(1, Failed, 0), end(Outcome::Failure, &[])];
        assert!(check_events(&unlisted).is_err());
        let backwards = [st(1, Pending, 5), st(1, Active, 2), st(1, Solved, 9), end(Outcome::Success, &[])];
        assert!(check_events(&backwards).is_err());
    }

    #[test]
    fn retry_after_failure_is_legal() {
        use State::*;
        let events = [
            st(1, Pending, 0),
            st(1, Active, 0),
            st(1, Failed, 1),
            st(1, Active, 2),
            st(1, Solved, 3),
            end(Outcome::Success, &[]),
        ];
        assert_eq!(check_events(&events), Ok(()));
    }

    #[test]
    fn json_shapes() {
        let e = st(4, State::Active, 12);
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"identity":4,"state":"active","ts":12}"#);
        let f = end(Outcome::Failure, &[2, 3]);
        assert_eq!(serde_json::to_string(&f).unwrap(), r#"{"result":"failure","failed":[2,3]}"#);
        let back: CompileEvent = serde_json::from_str(r#"{"result":"success","failed":[]}"#).unwrap();
        assert_eq!(back, end(Outcome::Success, &[]));
    }
}
