//! Background source probing. Health reads never touch the source, so a
//! stalled backend cannot hold up `/healthz`.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use tracing::{debug, warn};

use crate::adapter::AdapterRegistry;
use crate::config::HealthConfig;
use crate::docs::HealthDoc;

const NONE: u64 = u64::MAX;

struct Shared {
    started: Instant,
    /// Millis since `started` at which the running probe began, or `NONE`.
    probe_started_ms: AtomicU64,
    last_ok: AtomicBool,
    stop: AtomicBool,
}

pub struct HealthMonitor {
    shared: Arc<Shared>,
    timeout: Duration,
}

impl HealthMonitor {
    /// Starts probing every adapter on a dedicated thread.
    pub fn spawn(adapters: Arc<AdapterRegistry>, cfg: &HealthConfig) -> Self {
        let shared = Arc::new(Shared {
            started: Instant::now(),
            probe_started_ms: AtomicU64::new(NONE),
            last_ok: AtomicBool::new(false),
            stop: AtomicBool::new(false),
        });
        let interval = Duration::from_millis(cfg.probe_interval_ms);
        let worker = Arc::clone(&shared);
        thread::Builder::new()
            .name("health-probe".into())
            .spawn(move || {
                while !worker.stop.load(Ordering::Relaxed) {
                    let since = worker.started.elapsed().as_millis() as u64;
                    worker.probe_started_ms.store(since, Ordering::SeqCst);
                    let ok = adapters.iter().all(|a| match a.probe() {
                        Ok(()) => true,
                        Err(e) => {
                            warn!(chain = a.chain_id(), "probe failed: {e}");
                            false
                        }
                    });
                    worker.last_ok.store(ok, Ordering::SeqCst);
                    worker.probe_started_ms.store(NONE, Ordering::SeqCst);
                    debug!(ok, "probe done");
                    // sleep in short steps so shutdown is prompt
                    let until = Instant::now() + interval;
                    while Instant::now() < until && !worker.stop.load(Ordering::Relaxed) {
                        thread::sleep(Duration::from_millis(20).min(interval));
                    }
                }
            })
            .expect("spawn health thread");
        Self {
            shared,
            timeout: Duration::from_millis(cfg.probe_timeout_ms),
        }
    }

    pub fn source_ok(&self) -> bool {
        let started = self.shared.probe_started_ms.load(Ordering::SeqCst);
        let stalled = started != NONE
            && self.shared.started.elapsed().as_millis() as u64 >= started + self.timeout.as_millis() as u64;
        !stalled && self.shared.last_ok.load(Ordering::SeqCst)
    }

    pub fn report(&self) -> HealthDoc {
        HealthDoc {
            status: "ok",
            source: if self.source_ok() { "ok" } else { "degraded" },
            uptime_s: self.shared.started.elapsed().as_secs(),
        }
    }
}

impl Drop for HealthMonitor {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
    }
}
