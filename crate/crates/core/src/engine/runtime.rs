//! Message-passing agent runtime.
//!
//! Agents are spread over `workers` threads in contiguous id ranges. Each
//! round every agent sends its block to each graph neighbor, waits until it
//! holds all neighbor blocks tagged with that round, and then applies
//! [`agent_update`]. A coordinator (the calling thread) gathers the recorded
//! rounds. Messages travel as wire-format bytes even inside one process.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};

use super::{agent_update, AgentScratch, RunConfig, SwarmState, Trajectory};
use crate::{Error, Result};

const HEADER_LEN: usize = 12;

/// `{round: u64 LE, sender: u32 LE, payload: d × f64 LE}`.
pub fn encode_message(round: u64, sender: u32, payload: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * payload.len());
    out.extend_from_slice(&round.to_le_bytes());
    out.extend_from_slice(&sender.to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_message(bytes: &[u8], dim: usize) -> Result<(u64, u32, Vec<f64>)> {
    if bytes.len() != HEADER_LEN + 8 * dim {
        return Err(Error::Runtime(format!(
            "message of {} bytes, expected {}",
            bytes.len(),
            HEADER_LEN + 8 * dim
        )));
    }
    let round = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes"));
    let sender = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let payload = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((round, sender, payload))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RuntimeStats {
    /// Neighbor messages sent over the whole run.
    pub messages_sent: u64,
    pub workers: usize,
}

enum Envelope {
    Block { to: usize, bytes: Vec<u8> },
    /// Stop after computing the state of this round.
    Abort { round: u64 },
}

enum Report {
    Record { t: u64, agent: usize, x: Vec<f64> },
    NonFinite { round: u64, agent: usize },
    Timeout { round: u64, agent: usize },
    Fault(String),
    Done { messages_sent: u64 },
}

fn owner(agent: usize, n_agents: usize, workers: usize) -> usize {
    agent * workers / n_agents
}

struct Worker<'a> {
    cfg: &'a RunConfig,
    agents: std::ops::Range<usize>,
    workers: usize,
    inbox: Receiver<Envelope>,
    outboxes: Vec<Sender<Envelope>>,
    reports: Sender<Report>,
    timeout: Duration,
}

impl Worker<'_> {
    fn abort_all(&self, round: u64) {
        for o in &self.outboxes {
            let _ = o.send(Envelope::Abort { round });
        }
    }

    fn report(&self, r: Report) {
        let _ = self.reports.send(r);
    }

    fn run(self) {
        let cfg = self.cfg;
        let n_agents = cfg.n_agents();
        let dim = cfg.dim();
        let dynamics = cfg.dynamics();
        let start = self.agents.start;
        let mut blocks: Vec<Vec<f64>> = self
            .agents
            .clone()
            .map(|a| cfg.initial[a * dim..(a + 1) * dim].to_vec())
            .collect();
        for (a, b) in self.agents.clone().zip(&blocks) {
            self.report(Report::Record { t: 1, agent: a, x: b.clone() });
        }
        let mut pending: HashMap<(u64, usize), Vec<(u32, Vec<f64>)>> = HashMap::new();
        let mut abort_at = u64::MAX;
        let mut sent = 0u64;
        let mut scratch = AgentScratch::new(dim);
        let mut next = vec![vec![0.0; dim]; blocks.len()];

        for t in 1..cfg.horizon {
            if t >= abort_at {
                break;
            }
            for (a, b) in self.agents.clone().zip(&blocks) {
                for &l in dynamics.graph.neighbors(a) {
                    let bytes = encode_message(t, a as u32, b);
                    let _ = self.outboxes[owner(l, n_agents, self.workers)].send(Envelope::Block { to: l, bytes });
                    sent += 1;
                }
            }

            let complete = |pending: &HashMap<(u64, usize), Vec<(u32, Vec<f64>)>>| {
                self.agents.clone().find(|&a| {
                    pending.get(&(t, a)).map_or(0, Vec::len) < dynamics.graph.degree(a)
                })
            };
            while let Some(waiting) = complete(&pending) {
                match self.inbox.recv_timeout(self.timeout) {
                    Ok(Envelope::Block { to, bytes }) => match decode_message(&bytes, dim) {
                        Ok((round, sender, x)) => pending.entry((round, to)).or_default().push((sender, x)),
                        Err(e) => {
                            self.report(Report::Fault(e.to_string()));
                            self.abort_all(t);
                            return;
                        }
                    },
                    Ok(Envelope::Abort { round }) => {
                        abort_at = abort_at.min(round);
                        if t >= abort_at {
                            self.report(Report::Done { messages_sent: sent });
                            return;
                        }
                    }
                    Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => {
                        self.report(Report::Timeout { round: t, agent: waiting });
                        self.abort_all(t);
                        return;
                    }
                }
            }

            let weights = match cfg.schedule.weights(t) {
                Ok(w) => w,
                Err(e) => {
                    self.report(Report::Fault(e.to_string()));
                    self.abort_all(t);
                    return;
                }
            };
            for (i, a) in self.agents.clone().enumerate() {
                let mut msgs = pending.remove(&(t, a)).unwrap_or_default();
                msgs.sort_by_key(|m| m.0);
                let senders_ok = msgs.iter().map(|m| m.0 as usize).eq(dynamics.graph.neighbors(a).iter().copied());
                if !senders_ok {
                    self.report(Report::Fault(format!("agent {a} got messages from non-neighbors in round {t}")));
                    self.abort_all(t);
                    return;
                }
                agent_update(
                    &blocks[i],
                    msgs.iter().map(|m| m.1.as_slice()),
                    dynamics.problem.local(a),
                    weights,
                    dynamics.noise,
                    dynamics.stream_ids[a],
                    t,
                    &mut scratch,
                    &mut next[i],
                );
            }
            if let Some(i) = next.iter().position(|b| b.iter().any(|v| !v.is_finite())) {
                self.report(Report::NonFinite { round: t + 1, agent: start + i });
                self.abort_all(t + 1);
                self.report(Report::Done { messages_sent: sent });
                return;
            }
            std::mem::swap(&mut blocks, &mut next);
            if cfg.records_round(t + 1) {
                for (a, b) in self.agents.clone().zip(&blocks) {
                    self.report(Report::Record { t: t + 1, agent: a, x: b.clone() });
                }
            }
        }
        self.report(Report::Done { messages_sent: sent });
    }
}

/// Runs `cfg` on the message-passing runtime with `workers` threads
/// (capped at the agent count). Neighbor waits longer than `timeout` abort
/// the run with [`Error::Timeout`].
pub fn spawn_runtime(cfg: &RunConfig, workers: usize, timeout: Duration) -> Result<(Trajectory, RuntimeStats)> {
    cfg.validate()?;
    if workers == 0 {
        return Err(Error::InvalidSpec("workers must be at least 1".into()));
    }
    let n_agents = cfg.n_agents();
    let dim = cfg.dim();
    let workers = workers.min(n_agents);
    let mut traj = Trajectory::new(cfg);
    for w in &traj.warnings {
        log::warn!("{w}");
    }

    let (inbox_tx, inbox_rx): (Vec<_>, Vec<_>) = (0..workers).map(|_| unbounded::<Envelope>()).unzip();
    let (report_tx, report_rx) = unbounded::<Report>();

    let mut rows: BTreeMap<u64, Vec<Option<Vec<f64>>>> = BTreeMap::new();
    let mut non_finite: Option<(u64, usize)> = None;
    let mut timeout_err: Option<(u64, usize)> = None;
    let mut faults = Vec::new();
    let mut stats = RuntimeStats { messages_sent: 0, workers };

    std::thread::scope(|scope| {
        for (w, inbox) in inbox_rx.into_iter().enumerate() {
            let lo = (0..n_agents).find(|&a| owner(a, n_agents, workers) == w).unwrap_or(n_agents);
            let hi = (lo..n_agents).find(|&a| owner(a, n_agents, workers) != w).unwrap_or(n_agents);
            let worker = Worker {
                cfg,
                agents: lo..hi,
                workers,
                inbox,
                outboxes: inbox_tx.clone(),
                reports: report_tx.clone(),
                timeout,
            };
            scope.spawn(move || worker.run());
        }
        drop(report_tx);
        drop(inbox_tx);
        for r in report_rx.iter() {
            match r {
                Report::Record { t, agent, x } => {
                    rows.entry(t).or_insert_with(|| vec![None; n_agents])[agent] = Some(x);
                }
                Report::NonFinite { round, agent } => {
                    non_finite = Some(non_finite.map_or((round, agent), |p| p.min((round, agent))));
                }
                Report::Timeout { round, agent } => {
                    timeout_err = Some(timeout_err.map_or((round, agent), |p| p.min((round, agent))));
                }
                Report::Fault(m) => faults.push(m),
                Report::Done { messages_sent } => stats.messages_sent += messages_sent,
            }
        }
    });

    let limit = non_finite.map_or(u64::MAX, |(r, _)| r);
    for (t, blocks) in rows {
        if t >= limit {
            break;
        }
        if blocks.iter().any(Option::is_none) {
            if non_finite.is_some() || timeout_err.is_some() || !faults.is_empty() {
                break;
            }
            return Err(Error::Runtime(format!("round {t} record is incomplete")));
        }
        let x: Vec<f64> = blocks.into_iter().flatten().flatten().collect();
        traj.push(SwarmState { t, n_agents, dim, x });
    }

    if let Some(m) = faults.into_iter().next() {
        return Err(Error::Runtime(m));
    }
    if let Some((round, agent)) = non_finite {
        return Err(Error::NonFiniteState {
            round,
            agent,
            last_recorded: Box::new(traj.last().expect("initial state recorded").clone()),
        });
    }
    if let Some((round, agent)) = timeout_err {
        return Err(Error::Timeout { round, agent });
    }
    Ok((traj, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_sync, NoiseModel};
    use crate::graph::{build_graph, TopologySpec};
    use crate::problem::builtin::{builtin_problem, ProblemSpec, QuadraticParams};
    use crate::schedule::WeightSchedule;

    fn cfg(n: usize, horizon: u64) -> RunConfig {
        let g = build_graph(&TopologySpec::Path { n_agents: n }).unwrap();
        let c: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let p = builtin_problem(&ProblemSpec::QuadraticFamily(QuadraticParams { c, dim: 1 })).unwrap();
        let noise = NoiseModel { seed_root: 11, ..NoiseModel::default() };
        let sched = WeightSchedule { c_alpha: 0.1, c_beta: 0.3, ..WeightSchedule::default() };
        let x0 = (0..n).map(|i| i as f64 - 1.0).collect();
        RunConfig::new(g, p, sched, noise, horizon, x0).unwrap()
    }

    #[test]
    fn wire_format_round_trip() {
        let bytes = encode_message(7, 3, &[1.5, -0.0, f64::MIN_POSITIVE]);
        assert_eq!(bytes.len(), 12 + 24);
        assert_eq!(&bytes[0..8], &7u64.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        let (r, s, x) = decode_message(&bytes, 3).unwrap();
        assert_eq!((r, s), (7, 3));
        assert_eq!(x[1].to_bits(), (-0.0f64).to_bits());
        assert!(decode_message(&bytes, 2).is_err());
    }

    #[test]
    fn matches_sync_driver() {
        let c = cfg(3, 300).with_cadence(17).unwrap();
        let sync = run_sync(&c).unwrap();
        for w in [1, 2, 3, 8] {
            let (rt, stats) = spawn_runtime(&c, w, Duration::from_secs(10)).unwrap();
            assert_eq!(rt.to_csv(), sync.to_csv(), "workers = {w}");
            assert_eq!(stats.workers, w.min(3));
        }
    }

    #[test]
    fn message_count_is_twice_edges_per_round() {
        let c = cfg(3, 11);
        let (_, stats) = spawn_runtime(&c, 3, Duration::from_secs(10)).unwrap();
        assert_eq!(stats.messages_sent, 2 * 2 * 10);
    }

    #[test]
    fn non_finite_matches_sync_report() {
        let mut c = cfg(4, 200);
        c.schedule.c_beta = 40.0;
        let sync = run_sync(&c).unwrap_err();
        let rt = spawn_runtime(&c, 4, Duration::from_secs(10)).unwrap_err();
        match (sync, rt) {
            (
                Error::NonFiniteState { round: r1, agent: a1, last_recorded: l1 },
                Error::NonFiniteState { round: r2, agent: a2, last_recorded: l2 },
            ) => {
                assert_eq!((r1, a1), (r2, a2));
                assert_eq!(l1, l2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
