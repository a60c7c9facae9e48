//! Ring all-reduce over in-process workers.
//!
//! With `p` workers and vectors padded to `N' = p·c`, reduce-scatter runs
//! `p − 1` steps in which worker `i` sends chunk `(i − s) mod p` to worker
//! `i + 1`, which adds it into its own copy. Worker `i` then holds the full
//! sum of chunk `(i + 1) mod p`, and all-gather circulates the finished
//! chunks for another `p − 1` steps, worker `i` sending chunk
//! `(i + 1 − s) mod p`.

use std::io::Write;
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    ReduceScatter,
    AllGather,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRecord {
    /// Global step index, `0..2(p−1)`.
    pub step: usize,
    pub src: usize,
    pub dst: usize,
    pub chunk: usize,
    pub count: usize,
    pub phase: Phase,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferLog {
    pub records: Vec<TransferRecord>,
}

impl TransferLog {
    pub fn total_elements(&self) -> usize {
        self.records.iter().map(|r| r.count).sum()
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

struct Layout {
    p: usize,
    n: usize,
    chunk: usize,
}

fn layout(vectors: &[Vec<f64>]) -> Result<Layout> {
    let p = vectors.len();
    if p == 0 {
        return Err(invalid("all-reduce needs at least one worker"));
    }
    let n = vectors[0].len();
    if let Some(i) = vectors.iter().position(|v| v.len() != n) {
        return Err(Error::Shape(format!("worker {i} holds {} elements, worker 0 holds {n}", vectors[i].len())));
    }
    Ok(Layout { p, n, chunk: n.div_ceil(p) })
}

fn padded(v: &[f64], len: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(len, 0.0);
    out
}

fn send_chunk(worker: usize, step: usize, p: usize) -> (usize, Phase) {
    if step < p - 1 {
        ((worker + p - step % p) % p, Phase::ReduceScatter)
    } else {
        let s = step - (p - 1);
        ((worker + 1 + p - s % p) % p, Phase::AllGather)
    }
}

/// Sums `p` equal-length vectors; every worker ends with the same result.
pub fn ring_allreduce(vectors: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, TransferLog)> {
    let Layout { p, n, chunk } = layout(vectors)?;
    let mut bufs: Vec<Vec<f64>> = vectors.iter().map(|v| padded(v, chunk * p)).collect();
    let mut log = TransferLog::default();

    for step in 0..2 * (p - 1) {
        // Every worker sends from the pre-step state; deliveries are applied
        // in ascending source order.
        let msgs: Vec<(usize, usize, Phase, Vec<f64>)> = (0..p)
            .map(|src| {
                let (c, phase) = send_chunk(src, step, p);
                (src, c, phase, bufs[src][c * chunk..(c + 1) * chunk].to_vec())
            })
            .collect();
        for (src, c, phase, data) in msgs {
            let dst = (src + 1) % p;
            let target = &mut bufs[dst][c * chunk..(c + 1) * chunk];
            match phase {
                Phase::ReduceScatter => target.iter_mut().zip(&data).for_each(|(t, d)| *t += d),
                Phase::AllGather => target.copy_from_slice(&data),
            }
            log.records.push(TransferRecord { step, src, dst, chunk: c, count: chunk, phase });
        }
    }

    bufs.iter_mut().for_each(|b| b.truncate(n));
    Ok((bufs, log))
}

/// Same schedule with one OS thread per worker exchanging chunks over
/// channels. Produces the same sums and, after ordering by `(step, src)`,
/// the same log as [`ring_allreduce`].
pub fn ring_allreduce_threaded(vectors: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, TransferLog)> {
    let Layout { p, n, chunk } = layout(vectors)?;
    let mut senders = Vec::with_capacity(p);
    let mut receivers = Vec::with_capacity(p);
    for _ in 0..p {
        let (tx, rx) = mpsc::channel::<(usize, Vec<f64>)>();
        senders.push(tx);
        receivers.push(Some(rx));
    }

    let results: Vec<(Vec<f64>, Vec<TransferRecord>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..p)
            .map(|i| {
                let rx = receivers[i].take().expect("one receiver per worker");
                let tx = senders[(i + 1) % p].clone();
                let mut buf = padded(&vectors[i], chunk * p);
                scope.spawn(move || {
                    let mut records = Vec::new();
                    for step in 0..2 * (p - 1) {
                        let (c, phase) = send_chunk(i, step, p);
                        let data = buf[c * chunk..(c + 1) * chunk].to_vec();
                        tx.send((step, data)).expect("neighbour alive");
                        records.push(TransferRecord { step, src: i, dst: (i + 1) % p, chunk: c, count: chunk, phase });

                        let prev = (i + p - 1) % p;
                        let (rc, _) = send_chunk(prev, step, p);
                        let (got_step, data) = rx.recv().expect("neighbour alive");
                        debug_assert_eq!(got_step, step);
                        let target = &mut buf[rc * chunk..(rc + 1) * chunk];
                        match phase {
                            Phase::ReduceScatter => target.iter_mut().zip(&data).for_each(|(t, d)| *t += d),
                            Phase::AllGather => target.copy_from_slice(&data),
                        }
                    }
                    buf.truncate(n);
                    (buf, records)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
    });

    let mut log = TransferLog::default();
    let mut out = Vec::with_capacity(p);
    for (buf, records) in results {
        out.push(buf);
        log.records.extend(records);
    }
    log.records.sort_by_key(|r| (r.step, r.src));
    Ok((out, log))
}
