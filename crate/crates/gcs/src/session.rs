//! Live sessions: one control-loop thread per session, fed through an
//! ordered queue, publishing one frame per tick.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use gmob_core::data::{centroid_quartile, Quartile, MAX_CLASSES};
use gmob_core::sim::{run_mission, track_displacement, Classifier, FlightLog, FlightLoop, Mission, PipelineConfig};
use gmob_core::Tensor;
use tokio::sync::broadcast;

use crate::error::ServiceError;
use crate::protocol::{
    ActiveView, ClockMode, GapFrame, GestureAck, GridView, Kinematics, MissionResult, SessionState, StreamFrame,
    TickFrame, VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamOptions {
    /// frames a subscriber may fall behind before it starts losing them
    pub capacity: usize,
    /// frames kept for resuming subscribers
    pub history: usize,
}

impl Default for StreamOptions {
    fn default() -> Self {
        StreamOptions {
            capacity: 4096,
            history: 65536,
        }
    }
}

#[derive(Debug)]
pub struct Published {
    pub tick: u64,
    pub json: String,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    class_id: usize,
    confidence: f64,
    quartile: Quartile,
}

#[derive(Debug, Clone)]
pub struct StoredLog {
    pub file: String,
    pub log: FlightLog,
}

struct Core {
    fl: FlightLoop,
    queue: VecDeque<Pending>,
    history: VecDeque<Arc<Published>>,
    missions: Vec<StoredLog>,
    closed: bool,
    error: Option<String>,
}

struct Shared {
    core: Mutex<Core>,
    wake: Condvar,
    tx: broadcast::Sender<Arc<Published>>,
    history_cap: usize,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Core> {
        // a panic in the loop thread must not take the service down with it
        self.core.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub struct Session {
    pub id: String,
    pub seed: u64,
    pub clock: ClockMode,
    pub debug: bool,
    cfg: PipelineConfig,
    classifier: Arc<Classifier>,
    shared: Arc<Shared>,
    frames_seen: AtomicUsize,
    thread: Mutex<Option<JoinHandle<()>>>,
}

impl Session {
    pub fn start(
        id: String,
        cfg: PipelineConfig,
        seed: u64,
        clock: ClockMode,
        debug: bool,
        opts: StreamOptions,
    ) -> Result<Arc<Session>, ServiceError> {
        let fl = FlightLoop::new(&cfg, seed)?;
        let classifier = Arc::new(Classifier::from_config(&cfg)?);
        let (tx, _) = broadcast::channel(opts.capacity.max(1));
        let shared = Arc::new(Shared {
            core: Mutex::new(Core {
                fl,
                queue: VecDeque::new(),
                history: VecDeque::new(),
                missions: Vec::new(),
                closed: false,
                error: None,
            }),
            wake: Condvar::new(),
            tx,
            history_cap: opts.history,
        });
        let loop_shared = Arc::clone(&shared);
        let thread = std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || control_loop(&loop_shared, clock, debug))
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        Ok(Arc::new(Session {
            id,
            seed,
            clock,
            debug,
            cfg,
            classifier,
            shared,
            frames_seen: AtomicUsize::new(0),
            thread: Mutex::new(Some(thread)),
        }))
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Gate on confidence and enqueue. Low-confidence gestures never reach
    /// the queue; everything else is decided when it is dequeued.
    pub fn submit(&self, class_id: usize, confidence: f64, quartile: Quartile) -> Result<GestureAck, ServiceError> {
        if class_id >= MAX_CLASSES {
            return Err(ServiceError::invalid("class_id", format!("must be < {MAX_CLASSES}")));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ServiceError::invalid("confidence", "must lie in [0, 1]"));
        }
        let threshold = self.cfg.control.grid.threshold;
        if confidence < threshold {
            return Ok(GestureAck::Rejected {
                v: VERSION,
                class_id,
                confidence,
                reason: "below-threshold".into(),
                threshold,
            });
        }
        let mut core = self.shared.lock();
        if core.closed {
            return Err(ServiceError::NotFound(self.id.clone()));
        }
        core.queue.push_back(Pending {
            class_id,
            confidence,
            quartile,
        });
        let queue_position = core.queue.len();
        drop(core);
        self.shared.wake.notify_all();
        Ok(GestureAck::Accepted {
            v: VERSION,
            class_id,
            confidence,
            quartile,
            queue_position,
        })
    }

    /// Run the configured classifier on a frame; the quartile comes from
    /// the foreground centroid.
    pub fn classify(&self, frame: &Tensor) -> Result<(usize, f64, Quartile), ServiceError> {
        let quartile = centroid_quartile(frame)?;
        let n = self.frames_seen.fetch_add(1, Ordering::Relaxed);
        let (class_id, confidence) = self.classifier.classify(frame, 0, n)?;
        Ok((class_id, confidence, quartile))
    }

    pub fn snapshot(&self) -> SessionState {
        let core = self.shared.lock();
        let fl = &core.fl;
        let b = &fl.belief;
        let w = &fl.world;
        let grid = &self.cfg.control.grid;
        SessionState {
            v: VERSION,
            id: self.id.clone(),
            clock: self.clock,
            debug: self.debug,
            seed: self.seed,
            tick: fl.tick,
            t: w.t,
            airborne: w.airborne,
            idle: fl.is_idle() && core.queue.is_empty(),
            pending: core.queue.len(),
            est: Kinematics {
                position: b.position(),
                velocity: b.velocity(),
                yaw: b.yaw(),
            },
            truth: self.debug.then_some(Kinematics {
                position: w.position,
                velocity: w.velocity,
                yaw: w.yaw,
            }),
            active: fl.active_segment().map(|p| ActiveView {
                command: p.kind,
                speed: p.speed,
                duration: p.segment.d,
            }),
            grid: GridView {
                n: grid.n,
                speeds: grid.speeds.clone(),
                threshold: grid.threshold,
            },
            log_rows: fl.log.len(),
            missions: core.missions.iter().map(|m| m.file.clone()).collect(),
            error: core.error.clone(),
        }
    }

    pub fn live_log(&self) -> FlightLog {
        self.shared.lock().fl.log.clone()
    }

    /// Most recent mission log, or the named one.
    pub fn mission_log(&self, file: Option<&str>) -> Result<StoredLog, ServiceError> {
        let core = self.shared.lock();
        let found = match file {
            Some(f) => core.missions.iter().find(|m| m.file == f),
            None => core.missions.last(),
        };
        found
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no mission log for session {}", self.id)))
    }

    /// Stream from the tick after `last_tick`, or from now.
    pub fn subscribe(&self, last_tick: Option<u64>) -> StreamCursor {
        let core = self.shared.lock();
        // subscribing under the lock means no frame falls between history and live
        let rx = self.shared.tx.subscribe();
        let now = core.fl.tick;
        let mut backlog = VecDeque::new();
        let last = match last_tick {
            Some(n) if n < now => {
                let first = core.history.front().map_or(now + 1, |p| p.tick);
                if n + 1 < first {
                    backlog.push_back(gap(n + 1, first - 1));
                }
                backlog.extend(core.history.iter().filter(|p| p.tick > n).map(|p| p.json.clone()));
                now
            }
            _ => now,
        };
        StreamCursor { rx, backlog, last }
    }

    /// Fly a mission on a fresh copy of this session's pipeline and persist
    /// its log. Refused while anything is flying or queued.
    pub fn run_mission(&self, mission: &Mission, seed: u64, data_dir: &Path) -> Result<MissionResult, ServiceError> {
        {
            let core = self.shared.lock();
            if !core.fl.is_idle() || !core.queue.is_empty() {
                return Err(ServiceError::Conflict(
                    "a segment is active; missions need an idle session".into(),
                ));
            }
        }
        let run = run_mission(mission, &self.cfg, &self.classifier, seed)?;
        let metrics = track_displacement(&run.log, &run.reference)?;
        let file = persist(data_dir, &self.id, "_mission", &run.log.to_text())?;
        let result = MissionResult {
            v: VERSION,
            file: file.clone(),
            seed,
            rows: run.log.len(),
            gestures: run.outcomes.len(),
            skipped: run.skipped,
            metrics,
            reference: run.reference,
        };
        self.shared.lock().missions.push(StoredLog { file, log: run.log });
        Ok(result)
    }

    /// Stop the loop and persist the live log if it has rows.
    pub fn close(&self, data_dir: &Path) -> Result<Option<String>, ServiceError> {
        self.shared.lock().closed = true;
        self.shared.wake.notify_all();
        if let Some(h) = self.thread.lock().unwrap_or_else(|p| p.into_inner()).take() {
            let _ = h.join();
        }
        let log = self.live_log();
        if log.is_empty() {
            return Ok(None);
        }
        Ok(Some(persist(data_dir, &self.id, "", &log.to_text())?))
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.shared.lock().closed = true;
        self.shared.wake.notify_all();
    }
}

fn gap(from_tick: u64, to_tick: u64) -> String {
    StreamFrame::Gap(GapFrame {
        v: VERSION,
        from_tick,
        to_tick,
    })
    .to_json()
}

/// Per-connection view of a session stream. A subscriber that falls more
/// than the channel capacity behind loses the oldest frames and is told so
/// with one gap frame; the control loop never waits for it.
pub struct StreamCursor {
    rx: broadcast::Receiver<Arc<Published>>,
    backlog: VecDeque<String>,
    last: u64,
}

impl StreamCursor {
    /// Next JSON text frame; `None` once the session is gone.
    pub async fn next(&mut self) -> Option<String> {
        if let Some(s) = self.backlog.pop_front() {
            return Some(s);
        }
        loop {
            match self.rx.recv().await {
                Ok(p) if p.tick <= self.last => continue,
                Ok(p) => {
                    let skipped = p.tick > self.last + 1;
                    let from = self.last + 1;
                    self.last = p.tick;
                    if skipped {
                        self.backlog.push_back(p.json.clone());
                        return Some(gap(from, p.tick - 1));
                    }
                    return Some(p.json.clone());
                }
                // the tick jump on the next frame reports the loss
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    }
}

fn control_loop(shared: &Shared, clock: ClockMode, debug: bool) {
    let dt = {
        let core = shared.lock();
        Duration::from_secs_f64(core.fl.config().dt)
    };
    let mut deadline = Instant::now();
    loop {
        let mut core = shared.lock();
        let mut waited = false;
        loop {
            if core.closed || core.error.is_some() {
                return;
            }
            let busy = !core.fl.is_idle() || !core.queue.is_empty();
            // a realtime drone keeps hovering in the air; on the ground nothing moves
            let hovering = clock == ClockMode::Realtime && core.fl.world.airborne;
            if busy || hovering {
                break;
            }
            core = shared.wake.wait(core).unwrap_or_else(|p| p.into_inner());
            waited = true;
        }
        if waited {
            deadline = Instant::now();
        }
        let mut outcome = None;
        if core.fl.is_idle() {
            if let Some(p) = core.queue.pop_front() {
                match core.fl.submit(p.class_id, p.confidence, p.quartile) {
                    Ok(o) => outcome = Some(o),
                    Err(e) => {
                        core.error = Some(e.to_string());
                        return;
                    }
                }
            }
        }
        let info = match core.fl.step() {
            Ok(i) => i,
            Err(e) => {
                core.error = Some(e.to_string());
                return;
            }
        };
        let frame = StreamFrame::Tick(TickFrame::live(&info, outcome, debug));
        let published = Arc::new(Published {
            tick: info.tick,
            json: frame.to_json(),
        });
        if shared.history_cap > 0 {
            if core.history.len() == shared.history_cap {
                core.history.pop_front();
            }
            core.history.push_back(Arc::clone(&published));
        }
        // no receivers is fine
        let _ = shared.tx.send(published);
        drop(core);
        if clock == ClockMode::Realtime {
            deadline += dt;
            let now = Instant::now();
            if deadline > now {
                std::thread::sleep(deadline - now);
            } else {
                deadline = now;
            }
        }
    }
}

/// Write `text` to `<data_dir>/<id>_<unix ms><suffix>.log`; returns the file name.
pub fn persist(data_dir: &Path, id: &str, suffix: &str, text: &str) -> Result<String, ServiceError> {
    std::fs::create_dir_all(data_dir).map_err(|e| ServiceError::Internal(format!("data dir: {e}")))?;
    let ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let mut name = format!("{id}_{ms}{suffix}.log");
    let mut n = 1;
    while data_dir.join(&name).exists() {
        name = format!("{id}_{ms}{suffix}-{n}.log");
        n += 1;
    }
    let path: PathBuf = data_dir.join(&name);
    std::fs::write(&path, text).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))?;
    Ok(name)
}
