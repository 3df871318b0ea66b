//! The single writer. One task owns the simulation; handlers send it closures
//! and the resulting audit entries are published to an append-only feed.

use std::sync::{Arc, RwLock};
use std::time::Duration;

use tokio::sync::{mpsc, oneshot, watch};
use ur_core::canonical;
use ur_sim::{Simulation, StepOutcome};

use crate::ApiError;

type Job = Box<dyn FnOnce(&mut Simulation) + Send>;

/// Canonical JSON of every audit entry so far, in log order. Entry `i` is
/// the entry for event `i + 1`.
#[derive(Clone)]
pub struct Feed {
    entries: Arc<RwLock<Vec<Arc<str>>>>,
    len: watch::Receiver<usize>,
}

impl Feed {
    pub fn len(&self) -> usize {
        *self.len.borrow()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, index: usize) -> Option<Arc<str>> {
        self.entries.read().expect("feed lock").get(index).cloned()
    }

    /// Waits until the feed grows past `seen` entries. False once the writer is gone.
    pub async fn wait_beyond(&mut self, seen: usize) -> bool {
        self.len.wait_for(|n| *n > seen).await.is_ok()
    }
}

#[derive(Clone)]
pub struct Service {
    jobs: mpsc::Sender<Job>,
    feed: Feed,
}

fn publish(sim: &Simulation, entries: &RwLock<Vec<Arc<str>>>, len: &watch::Sender<usize>) {
    let audit = sim.registry().audit();
    let mut out = entries.write().expect("feed lock");
    if audit.len() > out.len() {
        let start = out.len();
        out.extend(audit[start..].iter().map(|e| Arc::from(canonical::to_string(e))));
        len.send_replace(out.len());
    }
}

impl Service {
    /// Moves `sim` onto its own task. Must be called inside a Tokio runtime.
    pub fn spawn(mut sim: Simulation) -> Service {
        let entries = Arc::new(RwLock::new(Vec::new()));
        let (len_tx, len_rx) = watch::channel(0);
        publish(&sim, &entries, &len_tx);
        let (tx, mut rx) = mpsc::channel::<Job>(256);
        let shared = entries.clone();
        tokio::spawn(async move {
            while let Some(job) = rx.recv().await {
                job(&mut sim);
                publish(&sim, &shared, &len_tx);
            }
        });
        Service {
            jobs: tx,
            feed: Feed {
                entries,
                len: len_rx,
            },
        }
    }

    pub fn feed(&self) -> Feed {
        self.feed.clone()
    }

    /// Runs `f` on the writer task, after every job queued before it.
    pub async fn call<R, F>(&self, f: F) -> Result<R, ApiError>
    where
        R: Send + 'static,
        F: FnOnce(&mut Simulation) -> R + Send + 'static,
    {
        let (tx, rx) = oneshot::channel();
        let job: Job = Box::new(move |sim| {
            let _ = tx.send(f(sim));
        });
        self.jobs.send(job).await.map_err(|_| ApiError::Unavailable)?;
        rx.await.map_err(|_| ApiError::Unavailable)
    }

    /// Steps the simulation every `period` until it finishes.
    pub fn spawn_ticker(&self, period: Duration) -> tokio::task::JoinHandle<()> {
        let svc = self.clone();
        tokio::spawn(async move {
            let mut every = tokio::time::interval(period);
            every.tick().await;
            loop {
                every.tick().await;
                match svc.call(|sim| sim.step().map_err(|e| e.to_string())).await {
                    Ok(Ok(StepOutcome::Finished)) | Err(_) => break,
                    Ok(Ok(_)) => {}
                    Ok(Err(e)) => {
                        tracing::warn!("scheduled step failed: {e}");
                        break;
                    }
                }
            }
        })
    }
}
